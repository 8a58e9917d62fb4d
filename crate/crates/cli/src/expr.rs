//! Arithmetic expressions over `x[i]` and `p[j]` for nonlinear game files.
//!
//! Grammar (indices are 0-based):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | x[int] | p[int] | (sqrt|exp|log) '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so
//! `-x[0]^2^3` is `-(x[0]^(2^3))`.

use std::fmt;

use gne_core::diff::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X(usize),
    P(usize),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    /// Byte offset into the source text.
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ExprError {}

impl Expr {
    pub fn eval<T: Scalar>(&self, x: &[T], p: &[T]) -> T {
        match self {
            Expr::Num(v) => T::from_f64(*v),
            Expr::X(i) => x[*i],
            Expr::P(j) => p[*j],
            Expr::Neg(e) => -e.eval(x, p),
            Expr::Bin(op, a, b) => {
                let l = a.eval(x, p);
                match op {
                    Op::Add => l + b.eval(x, p),
                    Op::Sub => l - b.eval(x, p),
                    Op::Mul => l * b.eval(x, p),
                    Op::Div => l / b.eval(x, p),
                    Op::Pow => match **b {
                        Expr::Num(k) if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 => l.powi(k as i32),
                        _ => l.powf(b.eval(x, p)),
                    },
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(x, p);
                match f {
                    Func::Sqrt => v.sqrt(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                }
            }
        }
    }

    /// Largest `x` and `p` index referenced, if any.
    pub fn max_indices(&self) -> (Option<usize>, Option<usize>) {
        fn walk(e: &Expr, mx: &mut Option<usize>, mp: &mut Option<usize>) {
            match e {
                Expr::Num(_) => {}
                Expr::X(i) => *mx = Some(mx.map_or(*i, |m| m.max(*i))),
                Expr::P(j) => *mp = Some(mp.map_or(*j, |m| m.max(*j))),
                Expr::Neg(a) | Expr::Call(_, a) => walk(a, mx, mp),
                Expr::Bin(_, a, b) => {
                    walk(a, mx, mp);
                    walk(b, mx, mp);
                }
            }
        }
        let (mut mx, mut mp) = (None, None);
        walk(self, &mut mx, &mut mp);
        (mx, mp)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn index(&mut self) -> Result<usize, ExprError> {
        self.expect(b'[')?;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an index");
        }
        let k = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii").parse::<usize>();
        let k = match k {
            Ok(k) => k,
            Err(_) => return self.err("index out of range"),
        };
        self.expect(b']')?;
        Ok(k)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let func = match word {
                    "x" => return Ok(Expr::X(self.index()?)),
                    "p" => return Ok(Expr::P(self.index()?)),
                    "sqrt" => Func::Sqrt,
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    _ => {
                        self.pos = start;
                        return self.err(format!("unknown name {word:?}"));
                    }
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if exp_start == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Num(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("bad number {text:?}"))
            }
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    if !src.is_ascii() {
        let pos = src.char_indices().find(|(_, c)| !c.is_ascii()).map(|(i, _)| i).unwrap_or(0);
        return Err(ExprError { pos, msg: "non-ASCII character".into() });
    }
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gne_core::diff::Dual;

    fn ev(s: &str, x: &[f64]) -> f64 {
        parse(s).unwrap().eval(x, &[2.0])
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
        assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("x[1] * p[0] + 1.5e1", &[0.0, 3.0]), 21.0);
        assert_eq!(ev("sqrt(16) + exp(0) + log(1)", &[]), 5.0);
    }

    #[test]
    fn derivative_through_dual() {
        let e = parse("x[0]^3 - 2*x[0]*x[1] + exp(x[1])").unwrap();
        let x = [Dual::variable(1.5), Dual::constant(0.5)];
        let d = e.eval(&x, &[]);
        assert!((d.deriv - (3.0 * 1.5 * 1.5 - 2.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse("1 +").unwrap_err().pos, 3);
        assert_eq!(parse("x[0] $ 2").unwrap_err().pos, 5);
        assert_eq!(parse("foo(1)").unwrap_err().pos, 0);
        assert!(parse("x[]").is_err());
        assert!(parse("(1").is_err());
        assert!(parse("1 2").is_err());
    }

    #[test]
    fn indices() {
        assert_eq!(parse("x[3] + p[1] * x[0]").unwrap().max_indices(), (Some(3), Some(1)));
        assert_eq!(parse("2").unwrap().max_indices(), (None, None));
    }
}

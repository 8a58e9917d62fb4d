//! JSON game files: schema, diagnostics and conversion to core games.
//!
//! Matrices are row-major arrays of rows. Any number may also be written as
//! the strings `"inf"`, `"-inf"` or `"nan"`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use gne_core::diff::{Ad, ScalarFn, VectorFn};
use gne_core::model::{
    build_inverse_objective, validate_lq, validate_nonlinear, DesignObjective, InverseNorm, LQGame, NonlinearGame,
    ParamBox, PlayerBox, PlayerLayout, PwaPiece,
};
use nalgebra::{DMatrix, DVector};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::expr::{self, Expr};

pub const VERSION: u32 = 1;

/// A number that may be infinite in files.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                match v {
                    "inf" | "+inf" | "Infinity" => Ok(Num(f64::INFINITY)),
                    "-inf" | "-Infinity" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" | "NaN" => Ok(Num(f64::NAN)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

pub type Vector = Vec<Num>;
pub type Matrix = Vec<Vec<Num>>;

pub fn nums(v: &[f64]) -> Vector {
    v.iter().map(|&a| Num(a)).collect()
}

pub fn values(v: &[Num]) -> Vec<f64> {
    v.iter().map(|a| a.0).collect()
}

pub fn rows_of(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| Num(m[(r, c)])).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqSection {
    #[serde(rename = "Q")]
    pub q: Vec<Matrix>,
    pub c: Vec<Vector>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Matrix>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vector>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Matrix>,
    #[serde(rename = "A_eq", default, skip_serializing_if = "Option::is_none")]
    pub a_eq: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_eq: Option<Vector>,
    #[serde(rename = "S_eq", default, skip_serializing_if = "Option::is_none")]
    pub s_eq: Option<Matrix>,
}

/// Costs, `g(x, p) ≤ 0` and `h(x, p) = 0` as expression strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearSection {
    pub costs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ineq: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eq: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vector,
    pub upper: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub d: Vector,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub e: Vector,
    pub h: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    #[serde(rename = "Q")]
    pub q: Matrix,
    pub c: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pwa: Vec<Vec<PieceSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<QuadSpec>,
    /// Smooth objective over `x[i]`, `p[j]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    /// Target point; with `norm`, adds `‖x − reference‖`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<String>,
    #[serde(default)]
    pub alpha1: f64,
    #[serde(default)]
    pub alpha2: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variational: Option<bool>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Seed of the random start point (NLS); unset means start at `x0` or 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub version: u32,
    /// Variables per player.
    pub layout: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lq: Option<LqSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinear: Option<NonlinearSection>,
    /// One box per player.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoxSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
}

/// Schema or consistency problems, each with the JSON path it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics(pub Vec<String>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, d) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

/// Parse JSON into `T`, reporting the failing path together with line and column.
pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, Diagnostics> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Diagnostics(vec![format!("{path}: {inner}")])
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    from_json(&text).map_err(|d| anyhow::anyhow!("{}: {d}", path.display()))
}

/// A game read from a file, with its design objective if any.
#[derive(Clone)]
pub enum Game {
    Lq(LQGame),
    Nonlinear(NonlinearGame),
}

impl Game {
    pub fn nonlinear(&self) -> NonlinearGame {
        match self {
            Game::Lq(g) => g.to_nonlinear(),
            Game::Nonlinear(g) => g.clone(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Game::Lq(g) => g.n(),
            Game::Nonlinear(g) => g.n(),
        }
    }

    pub fn params(&self) -> &ParamBox {
        match self {
            Game::Lq(g) => &g.params,
            Game::Nonlinear(g) => &g.params,
        }
    }

    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Game::Lq(g) => g.bounds(),
            Game::Nonlinear(g) => g.bounds(),
        }
    }
}

pub struct Loaded {
    pub file: GameFile,
    pub game: Game,
    pub design: Option<DesignObjective>,
}

struct Check {
    out: Vec<String>,
}

impl Check {
    fn push(&mut self, path: &str, msg: impl fmt::Display) {
        self.out.push(format!("{path}: {msg}"));
    }

    fn vector(&mut self, path: &str, v: &[Num], len: usize) -> Option<DVector<f64>> {
        if v.len() != len {
            self.push(path, format!("expected {len} entries, got {}", v.len()));
            return None;
        }
        Some(DVector::from_iterator(len, v.iter().map(|a| a.0)))
    }

    fn finite_vector(&mut self, path: &str, v: &[Num], len: usize) -> Option<DVector<f64>> {
        let out = self.vector(path, v, len)?;
        if let Some(k) = out.iter().position(|a| !a.is_finite()) {
            self.push(&format!("{path}[{k}]"), "must be finite");
            return None;
        }
        Some(out)
    }

    fn matrix(&mut self, path: &str, m: &Matrix, rows: Option<usize>, cols: usize) -> Option<DMatrix<f64>> {
        if let Some(r) = rows {
            if m.len() != r {
                self.push(path, format!("expected {r} rows, got {}", m.len()));
                return None;
            }
        }
        for (r, row) in m.iter().enumerate() {
            if row.len() != cols {
                self.push(&format!("{path}[{r}]"), format!("expected {cols} columns, got {}", row.len()));
                return None;
            }
            if let Some(k) = row.iter().position(|a| !a.0.is_finite()) {
                self.push(&format!("{path}[{r}][{k}]"), "must be finite");
                return None;
            }
        }
        Some(DMatrix::from_fn(m.len(), cols, |r, c| m[r][c].0))
    }

    fn expression(&mut self, path: &str, src: &str, n: usize, n_p: usize) -> Option<Arc<Expr>> {
        match expr::parse(src) {
            Err(e) => {
                self.push(path, format!("expression {e}"));
                None
            }
            Ok(e) => {
                let (mx, mp) = e.max_indices();
                if let Some(i) = mx.filter(|&i| i >= n) {
                    self.push(path, format!("x[{i}] out of range (n = {n})"));
                    return None;
                }
                if let Some(j) = mp.filter(|&j| j >= n_p) {
                    self.push(path, format!("p[{j}] out of range (n_p = {n_p})"));
                    return None;
                }
                Some(Arc::new(e))
            }
        }
    }
}

fn scalar_fn(e: Arc<Expr>) -> Arc<ScalarFn> {
    Arc::new(move |x: &[Ad], p: &[Ad]| e.eval(x, p))
}

fn vector_fn(es: Vec<Arc<Expr>>) -> Arc<VectorFn> {
    Arc::new(move |x: &[Ad], p: &[Ad]| es.iter().map(|e| e.eval(x, p)).collect())
}

impl GameFile {
    pub fn from_str(text: &str) -> Result<Self, Diagnostics> {
        from_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("game files serialize")
    }

    /// File describing `game`; free boxes and empty blocks are left out.
    pub fn from_lq(game: &LQGame) -> Self {
        let n_p = game.n_p();
        let none_if_empty = |m: &DMatrix<f64>| (m.nrows() > 0).then(|| rows_of(m));
        let free = game.boxes.iter().all(|b| b.lower.iter().chain(&b.upper).all(|v| v.is_infinite()));
        GameFile {
            version: VERSION,
            layout: game.layout.dims().to_vec(),
            lq: Some(LqSection {
                q: game.q.iter().map(rows_of).collect(),
                c: game.c.iter().map(|c| nums(c.as_slice())).collect(),
                f: (n_p > 0).then(|| game.f.iter().map(rows_of).collect()),
                a: none_if_empty(&game.a),
                b: (game.a.nrows() > 0).then(|| nums(game.b.as_slice())),
                s: (n_p > 0 && game.a.nrows() > 0).then(|| rows_of(&game.s)),
                a_eq: none_if_empty(&game.a_eq),
                b_eq: (game.a_eq.nrows() > 0).then(|| nums(game.b_eq.as_slice())),
                s_eq: (n_p > 0 && game.a_eq.nrows() > 0).then(|| rows_of(&game.s_eq)),
            }),
            nonlinear: None,
            boxes: (!free).then(|| {
                game.boxes.iter().map(|b| BoxSpec { lower: nums(&b.lower), upper: nums(&b.upper) }).collect()
            }),
            params: (n_p > 0).then(|| BoxSpec {
                lower: nums(&game.params.lower),
                upper: nums(&game.params.upper),
            }),
            design: None,
            solver: None,
        }
    }

    pub fn solver(&self) -> SolverSection {
        self.solver.clone().unwrap_or_default()
    }

    /// Check consistency and build the core game and design objective.
    pub fn load(self) -> Result<Loaded, Diagnostics> {
        let mut ck = Check { out: Vec::new() };
        if self.version != VERSION {
            ck.push("version", format!("unsupported version {} (expected {VERSION})", self.version));
        }
        let layout = match PlayerLayout::new(self.layout.clone()) {
            Ok(l) => l,
            Err(e) => {
                ck.push("layout", e);
                return Err(Diagnostics(ck.out));
            }
        };
        let n = layout.n();
        let players = layout.players();
        let params = match &self.params {
            None => ParamBox::none(),
            Some(b) => {
                let n_p = b.lower.len();
                let lo = ck.vector("params.lower", &b.lower, n_p);
                let hi = ck.vector("params.upper", &b.upper, n_p);
                match (lo, hi) {
                    (Some(l), Some(h)) => ParamBox::new(l.as_slice().to_vec(), h.as_slice().to_vec()),
                    _ => ParamBox::none(),
                }
            }
        };
        let n_p = params.n_p();
        let mut boxes = Vec::new();
        if let Some(bs) = &self.boxes {
            if bs.len() != players {
                ck.push("boxes", format!("expected {players} boxes, got {}", bs.len()));
            } else {
                for (i, b) in bs.iter().enumerate() {
                    let d = layout.dims()[i];
                    let lo = ck.vector(&format!("boxes[{i}].lower"), &b.lower, d);
                    let hi = ck.vector(&format!("boxes[{i}].upper"), &b.upper, d);
                    if let (Some(l), Some(h)) = (lo, hi) {
                        boxes.push((i, PlayerBox::new(l.as_slice().to_vec(), h.as_slice().to_vec())));
                    }
                }
            }
        }

        let game = match (&self.lq, &self.nonlinear) {
            (Some(_), Some(_)) => {
                ck.push("", "give exactly one of \"lq\" and \"nonlinear\", not both");
                None
            }
            (None, None) => {
                ck.push("lq", "missing game data: need \"lq\" or \"nonlinear\"");
                None
            }
            (Some(lq), None) => self.lq_game(&mut ck, lq, &layout, &params, &boxes).map(Game::Lq),
            (None, Some(nl)) => self.nonlinear_game(&mut ck, nl, &layout, &params, &boxes).map(Game::Nonlinear),
        };
        let design = self.design.as_ref().and_then(|d| design_objective(&mut ck, d, n, n_p));
        if let (Some(g), true) = (&game, ck.out.is_empty()) {
            let report = match g {
                Game::Lq(g) => validate_lq(g),
                Game::Nonlinear(g) => validate_nonlinear(g),
            };
            for v in report.violations {
                ck.push("game", v);
            }
            if let Some(d) = &design {
                for v in d.validate(n, n_p).violations {
                    ck.push("design", v);
                }
            }
        }
        match game {
            Some(game) if ck.out.is_empty() => Ok(Loaded { file: self, game, design }),
            _ => Err(Diagnostics(ck.out)),
        }
    }

    fn lq_game(
        &self,
        ck: &mut Check,
        lq: &LqSection,
        layout: &PlayerLayout,
        params: &ParamBox,
        boxes: &[(usize, PlayerBox)],
    ) -> Option<LQGame> {
        let n = layout.n();
        let players = layout.players();
        let n_p = params.n_p();
        if lq.q.len() != players || lq.c.len() != players {
            ck.push("lq", format!("need one Q and one c per player ({players})"));
            return None;
        }
        let q: Vec<_> = (0..players).filter_map(|i| ck.matrix(&format!("lq.Q[{i}]"), &lq.q[i], Some(n), n)).collect();
        let c: Vec<_> =
            (0..players).filter_map(|i| ck.finite_vector(&format!("lq.c[{i}]"), &lq.c[i], n)).collect();
        let a = match &lq.a {
            Some(a) => ck.matrix("lq.A", a, None, n),
            None => Some(DMatrix::zeros(0, n)),
        };
        let m = a.as_ref().map_or(0, |a| a.nrows());
        let b = match &lq.b {
            Some(b) => ck.finite_vector("lq.b", b, m),
            None if m == 0 => Some(DVector::zeros(0)),
            None => {
                ck.push("lq.b", "required when A has rows");
                None
            }
        };
        let (q, c, a, b) = match (q.len() == players && c.len() == players, a, b) {
            (true, Some(a), Some(b)) => (q, c, a, b),
            _ => return None,
        };
        let mut g = LQGame::new(layout.clone(), q, c, a, b);
        if let Some(a_eq) = &lq.a_eq {
            let a_eq = ck.matrix("lq.A_eq", a_eq, None, n)?;
            let b_eq = match &lq.b_eq {
                Some(b) => ck.finite_vector("lq.b_eq", b, a_eq.nrows())?,
                None => {
                    ck.push("lq.b_eq", "required with A_eq");
                    return None;
                }
            };
            g = g.with_eq(a_eq, b_eq);
        } else if lq.b_eq.is_some() {
            ck.push("lq.b_eq", "given without A_eq");
        }
        g = g.with_params(params.clone());
        if let Some(fs) = &lq.f {
            if fs.len() != players {
                ck.push("lq.F", format!("need one F per player ({players})"));
                return None;
            }
            for (i, f) in fs.iter().enumerate() {
                g.f[i] = ck.matrix(&format!("lq.F[{i}]"), f, Some(n), n_p)?;
            }
        }
        if let Some(s) = &lq.s {
            g.s = ck.matrix("lq.S", s, Some(g.n_g()), n_p)?;
        }
        if let Some(s) = &lq.s_eq {
            g.s_eq = ck.matrix("lq.S_eq", s, Some(g.n_h()), n_p)?;
        }
        for (i, b) in boxes {
            g = g.with_box(*i, b.clone());
        }
        Some(g)
    }

    fn nonlinear_game(
        &self,
        ck: &mut Check,
        nl: &NonlinearSection,
        layout: &PlayerLayout,
        params: &ParamBox,
        boxes: &[(usize, PlayerBox)],
    ) -> Option<NonlinearGame> {
        let n = layout.n();
        let n_p = params.n_p();
        if nl.costs.len() != layout.players() {
            ck.push("nonlinear.costs", format!("need one cost per player ({})", layout.players()));
            return None;
        }
        let costs: Vec<_> = nl
            .costs
            .iter()
            .enumerate()
            .filter_map(|(i, s)| ck.expression(&format!("nonlinear.costs[{i}]"), s, n, n_p))
            .collect();
        let ineq: Vec<_> = nl
            .ineq
            .iter()
            .enumerate()
            .filter_map(|(j, s)| ck.expression(&format!("nonlinear.ineq[{j}]"), s, n, n_p))
            .collect();
        let eq: Vec<_> = nl
            .eq
            .iter()
            .enumerate()
            .filter_map(|(j, s)| ck.expression(&format!("nonlinear.eq[{j}]"), s, n, n_p))
            .collect();
        if costs.len() != nl.costs.len() || ineq.len() != nl.ineq.len() || eq.len() != nl.eq.len() {
            return None;
        }
        let mut g = NonlinearGame::new(layout.clone(), costs.into_iter().map(scalar_fn).collect());
        if !ineq.is_empty() {
            g = g.with_ineq(ineq.len(), vector_fn(ineq));
        }
        if !eq.is_empty() {
            g = g.with_eq(eq.len(), vector_fn(eq));
        }
        g = g.with_params(params.clone());
        for (i, b) in boxes {
            g = g.with_box(*i, b.clone());
        }
        Some(g)
    }
}

pub fn parse_norm(s: &str) -> Option<InverseNorm> {
    match s {
        "inf" => Some(InverseNorm::Inf),
        "one" | "1" => Some(InverseNorm::One),
        "two" | "2" => Some(InverseNorm::Two),
        _ => None,
    }
}

fn design_objective(ck: &mut Check, d: &DesignSection, n: usize, n_p: usize) -> Option<DesignObjective> {
    let before = ck.out.len();
    let mut obj = DesignObjective::zero();
    match (&d.reference, &d.norm) {
        (Some(r), Some(norm)) => match (ck.finite_vector("design.reference", r, n), parse_norm(norm)) {
            (Some(r), Some(norm)) => obj = build_inverse_objective(r.as_slice(), norm, n_p),
            (_, None) => ck.push("design.norm", format!("unknown norm {norm:?} (inf, one or two)")),
            _ => {}
        },
        (None, Some(_)) => ck.push("design.norm", "needs a reference"),
        (Some(r), None) => {
            obj.reference = ck.finite_vector("design.reference", r, n).map(|v| v.as_slice().to_vec());
        }
        (None, None) => {}
    }
    for (j, group) in d.pwa.iter().enumerate() {
        let mut pieces = Vec::new();
        for (k, pc) in group.iter().enumerate() {
            let path = format!("design.pwa[{j}][{k}]");
            let dv = ck.finite_vector(&format!("{path}.d"), &pc.d, n);
            let ev = if pc.e.is_empty() {
                Some(DVector::zeros(n_p))
            } else {
                ck.finite_vector(&format!("{path}.e"), &pc.e, n_p)
            };
            if let (Some(dv), Some(ev)) = (dv, ev) {
                pieces.push(PwaPiece { d: dv, e: ev, h: pc.h.0 });
            }
        }
        obj.pwa.push(pieces);
    }
    if let Some(qs) = &d.quad {
        let m = n + n_p;
        let q = ck.matrix("design.quad.Q", &qs.q, Some(m), m);
        let c = ck.finite_vector("design.quad.c", &qs.c, m);
        if let (Some(q), Some(c)) = (q, c) {
            obj.quad = Some(match obj.quad.take() {
                Some((q0, c0)) => (q0 + q, c0 + c),
                None => (q, c),
            });
        }
    }
    if let Some(src) = &d.expression {
        obj.nonlinear = ck.expression("design.expression", src, n, n_p).map(scalar_fn);
    }
    if !(d.alpha1 >= 0.0 && d.alpha2 >= 0.0) {
        ck.push("design", "alpha1 and alpha2 must be nonnegative");
    }
    obj = obj.with_regularization(d.alpha1, d.alpha2);
    (ck.out.len() == before).then_some(obj)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "version": 1,
        "layout": [1, 1],
        "lq": {"Q": [[[2, 0], [0, 0]], [[0, 0], [0, 2]]], "c": [[-1, 0], [0, -1]],
               "A": [[1, 1]], "b": [1]},
        "boxes": [{"lower": [0], "upper": ["inf"]}, {"lower": ["-inf"], "upper": [3]}]
    }"#;

    #[test]
    fn infinities_and_round_trip() {
        let f = GameFile::from_str(SMALL).unwrap();
        assert_eq!(f.boxes.as_ref().unwrap()[0].upper[0].0, f64::INFINITY);
        let again = GameFile::from_str(&f.to_json()).unwrap();
        assert_eq!(f, again);
        let l = f.load().unwrap();
        assert!(matches!(l.game, Game::Lq(_)));
        assert_eq!(l.game.bounds().0, vec![0.0, f64::NEG_INFINITY]);
    }

    #[test]
    fn schema_error_has_path_and_line() {
        let bad = SMALL.replace("\"b\": [1]", "\"b\": [\"one\"]");
        let d = GameFile::from_str(&bad).unwrap_err();
        let msg = d.to_string();
        assert!(msg.starts_with("lq.b[0]:"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn consistency_errors_are_collected() {
        let bad = SMALL.replace("[[0, 0], [0, 2]]", "[[0, 0]]").replace("\"A\": [[1, 1]]", "\"A\": [[1]]");
        let d = GameFile::from_str(&bad).unwrap().load().err().unwrap();
        assert!(d.0.iter().any(|m| m.starts_with("lq.Q[1]:")), "{d}");
        assert!(d.0.iter().any(|m| m.starts_with("lq.A[0]:")), "{d}");
    }

    #[test]
    fn nonlinear_expressions() {
        let text = r#"{"version": 1, "layout": [1, 1],
            "nonlinear": {"costs": ["(x[0] - 1)^2 + x[0]*x[1]", "(x[1] + p[0])^2"], "ineq": ["x[0] + x[1] - 1"]},
            "params": {"lower": [0.5], "upper": [0.5]}}"#;
        let l = GameFile::from_str(text).unwrap().load().unwrap();
        let g = l.game.nonlinear();
        assert_eq!(g.n_g, 1);
        assert!((g.cost(1, &[0.0, 1.0], &[0.5]) - 2.25).abs() < 1e-15);
        let bad = text.replace("p[0])^2", "p[1])^2");
        let d = GameFile::from_str(&bad).unwrap().load().err().unwrap();
        assert!(d.to_string().contains("nonlinear.costs[1]: p[1] out of range"), "{d}");
    }

    #[test]
    fn lq_export_round_trip() {
        let g = gne_core::instances::random_parametric_lq(7, 2, 2, 3, 4, 1);
        let f = GameFile::from_lq(&g);
        let back = GameFile::from_str(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let Game::Lq(h) = back.load().unwrap().game else { panic!("lq expected") };
        assert_eq!((h.q, h.c, h.f), (g.q, g.c, g.f));
        assert_eq!((h.a, h.b, h.s), (g.a, g.b, g.s));
        assert_eq!((h.a_eq, h.b_eq, h.s_eq), (g.a_eq, g.b_eq, g.s_eq));
        assert_eq!((h.boxes, h.params), (g.boxes, g.params));
    }

    #[test]
    fn design_section() {
        let text = SMALL.replace(
            "\"boxes\"",
            "\"design\": {\"reference\": [0.5, 0.25], \"norm\": \"inf\", \"alpha2\": 0.1}, \"boxes\"",
        );
        let l = GameFile::from_str(&text).unwrap().load().unwrap();
        let d = l.design.unwrap();
        assert_eq!(d.pwa.len(), 1);
        assert_eq!(d.pwa_value(&[0.0, 0.0], &[]), 0.5);
        assert_eq!(d.alpha2, 0.1);
    }
}

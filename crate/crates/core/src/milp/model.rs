//! Generic mixed-integer model with linear rows and an optional convex
//! quadratic objective.

#[derive(Debug, Clone, PartialEq)]
pub struct MipVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipRow {
    pub name: String,
    /// Sparse coefficients `(variable, value)`.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl MipRow {
    pub fn activity(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(k, a)| a * v[k]).sum()
    }

    /// Positive part of the violation at `v`.
    pub fn violation(&self, v: &[f64]) -> f64 {
        let r = self.activity(v) - self.rhs;
        match self.sense {
            Sense::Le => r.max(0.0),
            Sense::Eq => r.abs(),
        }
    }
}

/// `min cᵀv + ½ vᵀQv + const` over rows, bounds and binaries. `quad` holds
/// the lower triangle of `Q` as `(row, col, value)` with `row ≥ col`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MipModel {
    pub name: String,
    pub vars: Vec<MipVar>,
    pub rows: Vec<MipRow>,
    pub objective: Vec<f64>,
    pub quad: Vec<(usize, usize, f64)>,
    pub constant: f64,
}

impl MipModel {
    pub fn new(name: &str) -> Self {
        MipModel {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: String, lower: f64, upper: f64, binary: bool) -> usize {
        self.vars.push(MipVar {
            name,
            lower,
            upper,
            binary,
        });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, name: String, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        let coeffs = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.rows.push(MipRow {
            name,
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn binaries(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&k| self.vars[k].binary).collect()
    }

    pub fn has_quadratic(&self) -> bool {
        self.quad.iter().any(|&(_, _, v)| v != 0.0)
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        let mut f = self.constant + self.objective.iter().zip(v).map(|(c, x)| c * x).sum::<f64>();
        for &(r, c, q) in &self.quad {
            f += if r == c { 0.5 * q * v[r] * v[r] } else { q * v[r] * v[c] };
        }
        f
    }

    /// Largest violation of rows, bounds and integrality at `v`.
    pub fn infeasibility(&self, v: &[f64]) -> f64 {
        let mut worst = self.rows.iter().map(|r| r.violation(v)).fold(0.0, f64::max);
        for (k, var) in self.vars.iter().enumerate() {
            worst = worst.max(var.lower - v[k]).max(v[k] - var.upper);
            if var.binary {
                worst = worst.max((v[k] - v[k].round()).abs());
            }
        }
        worst
    }
}

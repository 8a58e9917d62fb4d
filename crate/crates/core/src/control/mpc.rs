//! Condensed MPC game over input increments and output-constraint slacks,
//! and its receding-horizon simulation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::LinearSystem;
use crate::convexcore::{solve_qp, ConvexStatus, LPProblem, QPProblem};
use crate::error::{Error, Result};
use crate::linalg::min_sym_eigenvalue;
use crate::milp::{build_mip, solve_mip, ActiveSetSignature, MipConfig, DEFAULT_BIG_M};
use crate::model::{LQGame, PlayerBox, PlayerLayout};
use crate::nls::{lq_certificate, Certificate};

#[derive(Debug, Clone)]
pub struct MPCGameSpec {
    pub system: LinearSystem,
    /// Output weights `Q_{y,i}` (`n_y × n_y`).
    pub q_y: Vec<DMatrix<f64>>,
    /// Increment weights `Q_{Δu,i}` (`n_i × n_i`).
    pub q_du: Vec<DMatrix<f64>>,
    /// Linear slack penalties `q_{ε,i}`.
    pub q_eps: Vec<f64>,
    /// Prediction horizon `T`.
    pub horizon: usize,
    /// Constraint horizon `T_c ≤ T`.
    pub constraint_horizon: usize,
    pub du_min: DVector<f64>,
    pub du_max: DVector<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub y_min: DVector<f64>,
    pub y_max: DVector<f64>,
    /// `r(t)`; the last entry is held after the list ends.
    pub setpoint: Vec<DVector<f64>>,
}

impl MPCGameSpec {
    pub fn validate(&self) -> Result<()> {
        let sys = &self.system;
        sys.validate()?;
        let na = sys.agents();
        let bad = |m: &str| Err(Error::InvalidGame(m.to_string()));
        if self.q_y.len() != na || self.q_du.len() != na || self.q_eps.len() != na {
            return bad("one weight set per agent required");
        }
        if self.horizon == 0 || self.constraint_horizon > self.horizon {
            return bad("need 1 ≤ T and T_c ≤ T");
        }
        for i in 0..na {
            let ni = sys.inputs.dims()[i];
            if self.q_y[i].shape() != (sys.n_y(), sys.n_y()) || self.q_du[i].shape() != (ni, ni) {
                return Err(Error::Dimension(format!("weights of agent {} have the wrong shape", i + 1)));
            }
            if min_sym_eigenvalue(&self.q_y[i]) < -1e-9 || min_sym_eigenvalue(&self.q_du[i]) < -1e-9 {
                return bad("weights must be PSD");
            }
            if !(self.q_eps[i] >= 0.0) {
                return bad("slack penalties must be nonnegative");
            }
        }
        let nu = sys.n_u();
        let ny = sys.n_y();
        if self.du_min.len() != nu || self.du_max.len() != nu || self.u_min.len() != nu || self.u_max.len() != nu {
            return Err(Error::Dimension("input bounds must have n_u entries".into()));
        }
        if self.y_min.len() != ny || self.y_max.len() != ny {
            return Err(Error::Dimension("output bounds must have n_y entries".into()));
        }
        if self.setpoint.is_empty() || self.setpoint.iter().any(|r| r.len() != ny) {
            return Err(Error::Dimension("setpoint must be a nonempty list of n_y vectors".into()));
        }
        Ok(())
    }

    pub fn setpoint_at(&self, t: usize) -> &DVector<f64> {
        &self.setpoint[t.min(self.setpoint.len() - 1)]
    }

    /// Decision layout: agent `i` owns `T·n_i` increments (time-major) and one slack.
    pub fn decision_layout(&self) -> PlayerLayout {
        PlayerLayout::new(self.system.inputs.dims().iter().map(|&d| self.horizon * d + 1).collect())
            .expect("agents have inputs")
    }

    fn du_index(&self, lay: &PlayerLayout, i: usize, k: usize, c: usize) -> usize {
        lay.offsets()[i] + k * self.system.inputs.dims()[i] + c
    }

    fn eps_index(&self, lay: &PlayerLayout, i: usize) -> usize {
        lay.offsets()[i] + self.horizon * self.system.inputs.dims()[i]
    }
}

/// Stacked outputs `Y = (y_1, …, y_T) = Φ x_0 + Γ u_{−1} + G Δu`, with `Δu`
/// stacked time-major over all inputs.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

pub fn prediction(sys: &LinearSystem, horizon: usize) -> Prediction {
    let (nx, nu, ny) = (sys.n_x(), sys.n_u(), sys.n_y());
    let mut phi = DMatrix::zeros(horizon * ny, nx);
    let mut gamma = DMatrix::zeros(horizon * ny, nu);
    let mut g = DMatrix::zeros(horizon * ny, horizon * nu);
    // s[m] = Σ_{j≤m} C A^j B
    let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    let mut apow = DMatrix::identity(nx, nx);
    let mut acc = DMatrix::zeros(ny, nu);
    for t in 0..horizon {
        acc += &sys.c * &apow * &sys.b;
        s.push(acc.clone());
        apow = &sys.a * apow;
        phi.view_mut((t * ny, 0), (ny, nx)).copy_from(&(&sys.c * &apow));
    }
    for t in 0..horizon {
        gamma.view_mut((t * ny, 0), (ny, nu)).copy_from(&s[t]);
        for l in 0..=t {
            g.view_mut((t * ny, l * nu), (ny, nu)).copy_from(&s[t - l]);
        }
    }
    Prediction { phi, gamma, g }
}

/// LQ game of one MPC step at state `x_t`, previous input `u_prev` and
/// setpoint `r_t`.
pub fn build_mpc_game(spec: &MPCGameSpec, x_t: &[f64], u_prev: &[f64], r_t: &[f64]) -> Result<LQGame> {
    spec.validate()?;
    let sys = &spec.system;
    let (nx, nu, ny) = (sys.n_x(), sys.n_u(), sys.n_y());
    if x_t.len() != nx || u_prev.len() != nu || r_t.len() != ny {
        return Err(Error::Dimension("state, input or setpoint has the wrong length".into()));
    }
    let t_h = spec.horizon;
    let t_c = spec.constraint_horizon;
    let lay = spec.decision_layout();
    let n = lay.n();
    let na = sys.agents();
    let pred = prediction(sys, t_h);
    let y0 = &pred.phi * DVector::from_column_slice(x_t) + &pred.gamma * DVector::from_column_slice(u_prev);
    let e = DVector::from_fn(t_h * ny, |r, _| y0[r] - r_t[r % ny]);
    // output map over the decision vector
    let mut g = DMatrix::zeros(t_h * ny, n);
    for i in 0..na {
        for (c, u) in sys.inputs.range(i).enumerate() {
            for k in 0..t_h {
                g.set_column(spec.du_index(&lay, i, k, c), &pred.g.column(k * nu + u));
            }
        }
    }
    let mut q = Vec::with_capacity(na);
    let mut lin = Vec::with_capacity(na);
    for i in 0..na {
        let mut w = DMatrix::zeros(t_h * ny, t_h * ny);
        for t in 0..t_h {
            w.view_mut((t * ny, t * ny), (ny, ny)).copy_from(&spec.q_y[i]);
        }
        let gtw = g.transpose() * &w;
        let mut qi = &gtw * &g * 2.0;
        let ni = sys.inputs.dims()[i];
        for k in 0..t_h {
            for a in 0..ni {
                for b in 0..ni {
                    qi[(spec.du_index(&lay, i, k, a), spec.du_index(&lay, i, k, b))] += 2.0 * spec.q_du[i][(a, b)];
                }
            }
        }
        qi = (&qi + qi.transpose()) * 0.5;
        let mut ci = gtw * &e * 2.0;
        ci[spec.eps_index(&lay, i)] += spec.q_eps[i];
        q.push(qi);
        lin.push(ci);
    }

    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let eps_all: Vec<usize> = (0..na).map(|i| spec.eps_index(&lay, i)).collect();
    for t in 0..t_c {
        for o in 0..ny {
            let r = t * ny + o;
            if spec.y_max[o].is_finite() {
                let mut a = g.row(r).transpose();
                for &k in &eps_all {
                    a[k] = -1.0;
                }
                rows.push((a, spec.y_max[o] - y0[r]));
            }
            if spec.y_min[o].is_finite() {
                let mut a = -g.row(r).transpose();
                for &k in &eps_all {
                    a[k] = -1.0;
                }
                rows.push((a, y0[r] - spec.y_min[o]));
            }
        }
    }
    for t in 0..t_c {
        for i in 0..na {
            for (c, u) in sys.inputs.range(i).enumerate() {
                let mut a = DVector::zeros(n);
                for l in 0..=t {
                    a[spec.du_index(&lay, i, l, c)] = 1.0;
                }
                if spec.u_max[u].is_finite() {
                    rows.push((a.clone(), spec.u_max[u] - u_prev[u]));
                }
                if spec.u_min[u].is_finite() {
                    rows.push((-a, u_prev[u] - spec.u_min[u]));
                }
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), n, |r, c| rows[r].0[c]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let mut game = LQGame::new(lay.clone(), q, lin, a, b);
    for i in 0..na {
        let ni = sys.inputs.dims()[i];
        let mut lo = vec![f64::NEG_INFINITY; t_h * ni + 1];
        let mut hi = vec![f64::INFINITY; t_h * ni + 1];
        for k in 0..t_c {
            for (c, u) in sys.inputs.range(i).enumerate() {
                lo[k * ni + c] = spec.du_min[u];
                hi[k * ni + c] = spec.du_max[u];
            }
        }
        lo[t_h * ni] = 0.0;
        game = game.with_box(i, PlayerBox::new(lo, hi));
    }
    Ok(game)
}

/// Agent costs of a decision vector, by step-by-step simulation.
pub fn predicted_costs(spec: &MPCGameSpec, x_t: &[f64], u_prev: &[f64], r_t: &[f64], dec: &[f64]) -> Vec<f64> {
    let sys = &spec.system;
    let lay = spec.decision_layout();
    let na = sys.agents();
    let mut costs: Vec<f64> = (0..na).map(|i| spec.q_eps[i] * dec[spec.eps_index(&lay, i)]).collect();
    let mut x = x_t.to_vec();
    let mut u = u_prev.to_vec();
    let r = DVector::from_column_slice(r_t);
    for k in 0..spec.horizon {
        for i in 0..na {
            let ni = sys.inputs.dims()[i];
            let du = DVector::from_fn(ni, |c, _| dec[spec.du_index(&lay, i, k, c)]);
            costs[i] += du.dot(&(&spec.q_du[i] * &du));
            for (c, ug) in sys.inputs.range(i).enumerate() {
                u[ug] += du[c];
            }
        }
        x = sys.step(&x, &u);
        let e = DVector::from_vec(sys.output(&x)) - &r;
        for i in 0..na {
            costs[i] += e.dot(&(&spec.q_y[i] * &e));
        }
    }
    costs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpcMode {
    Nash,
    NashVariational,
    Centralized,
}

impl MpcMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MpcMode::Nash => "nash",
            MpcMode::NashVariational => "nash_variational",
            MpcMode::Centralized => "centralized",
        }
    }
}

impl std::str::FromStr for MpcMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nash" => Ok(MpcMode::Nash),
            "nash_variational" | "variational" => Ok(MpcMode::NashVariational),
            "centralized" => Ok(MpcMode::Centralized),
            other => Err(Error::InvalidGame(format!("unknown MPC mode {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MpcConfig {
    pub big_m: f64,
    pub mip: MipConfig,
    /// Tolerance of the per-step best-response certificate.
    pub cert_tol: f64,
    /// In Nash modes, also solve the centralized QP at each visited state.
    pub compare_centralized: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            big_m: DEFAULT_BIG_M,
            mip: MipConfig::default(),
            cert_tol: 1e-5,
            compare_centralized: false,
        }
    }
}

/// Solution of one MPC step.
#[derive(Debug, Clone)]
pub struct MpcStep {
    pub ok: bool,
    pub status: String,
    pub decision: Vec<f64>,
    /// First increments `Δu_0` over all inputs.
    pub du0: Vec<f64>,
    pub eps: Vec<f64>,
    pub costs: Vec<f64>,
    pub social_cost: f64,
    pub signature: Option<ActiveSetSignature>,
    pub certificate: Option<Certificate>,
}

fn centralized_qp(game: &LQGame) -> (ConvexStatus, Vec<f64>) {
    let n = game.n();
    let h = game.q.iter().fold(DMatrix::zeros(n, n), |acc, q| acc + q);
    let c = game.c.iter().fold(DVector::zeros(n), |acc, c| acc + c);
    let (lo, hi) = game.bounds();
    let lp = LPProblem::new(c).with_ineq(game.a.clone(), game.b.clone()).with_bounds(lo, hi);
    let res = solve_qp(&QPProblem::new(h, lp));
    (res.status, res.x.as_slice().to_vec())
}

/// Solve one step in the given mode.
pub fn mpc_step(
    spec: &MPCGameSpec,
    x_t: &[f64],
    u_prev: &[f64],
    r_t: &[f64],
    mode: MpcMode,
    cfg: &MpcConfig,
) -> Result<MpcStep> {
    let game = build_mpc_game(spec, x_t, u_prev, r_t)?;
    let sys = &spec.system;
    let lay = spec.decision_layout();
    let (ok, status, decision, signature, certificate) = match mode {
        MpcMode::Centralized => {
            let (st, x) = centralized_qp(&game);
            (st == ConvexStatus::Optimal, st.as_str().to_string(), x, None, None)
        }
        MpcMode::Nash | MpcMode::NashVariational => {
            let gm = build_mip(&game, None, mode == MpcMode::NashVariational, cfg.big_m)?;
            let r = solve_mip(&gm, &cfg.mip);
            let cert = r.is_optimal().then(|| lq_certificate(&game, &r.x, &[], cfg.cert_tol));
            (r.is_optimal(), r.status.as_str().to_string(), r.x, Some(r.signature), cert)
        }
    };
    if !ok {
        return Ok(MpcStep {
            ok,
            status,
            decision: Vec::new(),
            du0: Vec::new(),
            eps: Vec::new(),
            costs: Vec::new(),
            social_cost: f64::NAN,
            signature: None,
            certificate: None,
        });
    }
    let mut du0 = vec![0.0; sys.n_u()];
    for i in 0..sys.agents() {
        for (c, u) in sys.inputs.range(i).enumerate() {
            du0[u] = decision[spec.du_index(&lay, i, 0, c)];
        }
    }
    let eps = (0..sys.agents()).map(|i| decision[spec.eps_index(&lay, i)]).collect();
    let costs = predicted_costs(spec, x_t, u_prev, r_t, &decision);
    Ok(MpcStep {
        ok,
        status,
        du0,
        eps,
        social_cost: costs.iter().sum(),
        costs,
        decision,
        signature,
        certificate,
    })
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub t: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Predicted cost of each agent at the step's solution.
    pub costs: Vec<f64>,
    pub social_cost: f64,
    /// Centralized optimum at the same state, when requested.
    pub centralized_cost: Option<f64>,
    pub eps: Vec<f64>,
    pub status: String,
    pub active: Option<ActiveSetSignature>,
    pub certified: Option<bool>,
    pub max_improvement: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopTrace {
    pub mode: MpcMode,
    pub steps: Vec<TraceStep>,
    /// State after the last applied input.
    pub final_state: Vec<f64>,
    /// Reason the loop stopped early, if it did.
    pub halted: Option<String>,
}

impl ClosedLoopTrace {
    pub fn social_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.social_cost).sum()
    }

    /// Largest `‖x(t+1) − A x(t) − B u(t)‖∞` along the trace.
    pub fn simulation_defect(&self, sys: &LinearSystem) -> f64 {
        let mut worst = 0.0_f64;
        for (k, s) in self.steps.iter().enumerate() {
            let next = self.steps.get(k + 1).map(|n| n.x.clone()).unwrap_or_else(|| self.final_state.clone());
            let pred = sys.step(&s.x, &s.u);
            for (a, b) in next.iter().zip(&pred) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// Receding-horizon loop from `x0` with `u(−1) = u_init` (zero when `None`).
pub fn simulate_mpc(
    spec: &MPCGameSpec,
    x0: &[f64],
    u_init: Option<&[f64]>,
    t_sim: usize,
    mode: MpcMode,
    cfg: &MpcConfig,
) -> Result<ClosedLoopTrace> {
    spec.validate()?;
    if t_sim == 0 {
        return Err(Error::InvalidGame("T_sim must be at least 1".into()));
    }
    let sys = &spec.system;
    if x0.len() != sys.n_x() {
        return Err(Error::Dimension("x0 has the wrong length".into()));
    }
    let mut x = x0.to_vec();
    let mut u_prev = u_init.map(|u| u.to_vec()).unwrap_or_else(|| vec![0.0; sys.n_u()]);
    if u_prev.len() != sys.n_u() {
        return Err(Error::Dimension("u_init has the wrong length".into()));
    }
    let mut steps = Vec::with_capacity(t_sim);
    let mut halted = None;
    let mut step_cfg = cfg.clone();
    for t in 0..t_sim {
        let r = spec.setpoint_at(t).as_slice().to_vec();
        let sol = mpc_step(spec, &x, &u_prev, &r, mode, &step_cfg)?;
        if !sol.ok {
            halted = Some(format!("step {t}: {}", sol.status));
            break;
        }
        let centralized_cost = if cfg.compare_centralized && mode != MpcMode::Centralized {
            let c = mpc_step(spec, &x, &u_prev, &r, MpcMode::Centralized, cfg)?;
            c.ok.then_some(c.social_cost)
        } else {
            None
        };
        let u: Vec<f64> = u_prev.iter().zip(&sol.du0).map(|(a, b)| a + b).collect();
        steps.push(TraceStep {
            t,
            y: sys.output(&x),
            x: x.clone(),
            u: u.clone(),
            costs: sol.costs.clone(),
            social_cost: sol.social_cost,
            centralized_cost,
            eps: sol.eps.clone(),
            status: sol.status.clone(),
            active: sol.signature.clone(),
            certified: sol.certificate.as_ref().map(|c| c.pass),
            max_improvement: sol.certificate.as_ref().map(|c| c.max_improvement()),
        });
        // the previous active set is usually still valid one step later
        if let Some(sig) = &sol.signature {
            step_cfg.mip.hints = cfg.mip.hints.iter().chain(std::iter::once(sig)).cloned().collect();
        }
        x = sys.step(&x, &u);
        u_prev = u;
    }
    Ok(ClosedLoopTrace {
        mode,
        steps,
        final_state: x,
        halted,
    })
}

/// CSV with columns `t, x1.., u1.., y1.., cost1.., social_cost,
/// centralized_cost, status, active, certified`.
pub fn write_trace_csv<W: Write>(trace: &ClosedLoopTrace, mut out: W) -> std::io::Result<()> {
    let Some(first) = trace.steps.first() else {
        return writeln!(out, "t");
    };
    let mut head = vec!["t".to_string()];
    head.extend((1..=first.x.len()).map(|k| format!("x{k}")));
    head.extend((1..=first.u.len()).map(|k| format!("u{k}")));
    head.extend((1..=first.y.len()).map(|k| format!("y{k}")));
    head.extend((1..=first.costs.len()).map(|k| format!("cost{k}")));
    head.extend(["social_cost", "centralized_cost", "status", "active", "certified"].map(String::from));
    writeln!(out, "{}", head.join(","))?;
    for s in &trace.steps {
        let mut row = vec![s.t.to_string()];
        row.extend(s.x.iter().chain(&s.u).chain(&s.y).chain(&s.costs).map(|v| format!("{v:?}")));
        row.push(format!("{:?}", s.social_cost));
        row.push(s.centralized_cost.map(|v| format!("{v:?}")).unwrap_or_default());
        row.push(s.status.clone());
        row.push(
            s.active
                .as_ref()
                .map(|a| a.active().iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default(),
        );
        row.push(s.certified.map(|c| c.to_string()).unwrap_or_default());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_spec(agents: usize) -> MPCGameSpec {
        let sys = LinearSystem::new(
            DMatrix::from_element(1, 1, 0.8),
            DMatrix::from_element(1, agents, 0.2 / agents as f64),
            DMatrix::identity(1, 1),
            PlayerLayout::uniform(agents, 1).unwrap(),
        )
        .unwrap();
        MPCGameSpec {
            system: sys,
            q_y: vec![DMatrix::identity(1, 1); agents],
            q_du: vec![DMatrix::from_element(1, 1, 0.5); agents],
            q_eps: vec![1e3; agents],
            horizon: 5,
            constraint_horizon: 2,
            du_min: DVector::from_element(agents, f64::NEG_INFINITY),
            du_max: DVector::from_element(agents, f64::INFINITY),
            u_min: DVector::from_element(agents, 0.0),
            u_max: DVector::from_element(agents, 4.0),
            y_min: DVector::from_element(1, 0.0),
            y_max: DVector::from_element(1, 5.0),
            setpoint: vec![DVector::from_element(1, 1.0)],
        }
    }

    #[test]
    fn prediction_matches_simulation() {
        let spec = scalar_spec(2);
        let p = prediction(&spec.system, 5);
        let x0 = [0.3];
        let u_prev = [0.1, -0.2];
        let du: Vec<f64> = (0..10).map(|k| (k as f64 * 0.7).sin()).collect();
        let y = &p.phi * DVector::from_column_slice(&x0)
            + &p.gamma * DVector::from_column_slice(&u_prev)
            + &p.g * DVector::from_column_slice(&du);
        let mut x = x0.to_vec();
        let mut u = u_prev.to_vec();
        for k in 0..5 {
            u[0] += du[2 * k];
            u[1] += du[2 * k + 1];
            x = spec.system.step(&x, &u);
            assert!((spec.system.output(&x)[0] - y[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn block_sizes() {
        let spec = scalar_spec(3);
        let g = build_mpc_game(&spec, &[0.0], &[0.0; 3], &[1.0]).unwrap();
        assert_eq!(g.layout.dims(), &[6, 6, 6]);
        // 2 steps × (2 output rows + 3 × 2 input rows)
        assert_eq!(g.n_g(), 16);
    }

    #[test]
    fn origin_stays_at_rest() {
        let mut spec = scalar_spec(2);
        spec.setpoint = vec![DVector::zeros(1)];
        let tr = simulate_mpc(&spec, &[0.0], None, 5, MpcMode::Nash, &MpcConfig::default()).unwrap();
        for s in &tr.steps {
            assert!(s.u.iter().all(|v| v.abs() < 1e-12));
            assert!(s.y[0].abs() < 1e-12);
        }
    }

    #[test]
    fn single_agent_nash_is_centralized() {
        let spec = scalar_spec(1);
        let cfg = MpcConfig::default();
        let a = simulate_mpc(&spec, &[0.0], None, 10, MpcMode::Nash, &cfg).unwrap();
        let b = simulate_mpc(&spec, &[0.0], None, 10, MpcMode::Centralized, &cfg).unwrap();
        assert_eq!(a.steps.len(), 10);
        for (s, t) in a.steps.iter().zip(&b.steps) {
            for (p, q) in s.u.iter().zip(&t.u) {
                assert!((p - q).abs() <= 1e-8, "{p} vs {q}");
            }
        }
        assert!(a.simulation_defect(&spec.system) == 0.0);
    }

    #[test]
    fn costs_match_lq_form() {
        let spec = scalar_spec(2);
        let (x, u, r) = ([0.5], [1.0, 0.5], [2.0]);
        let g = build_mpc_game(&spec, &x, &u, &r).unwrap();
        let dec: Vec<f64> = (0..g.n()).map(|k| 0.1 * k as f64 - 0.3).collect();
        let zero = vec![0.0; g.n()];
        let c1 = predicted_costs(&spec, &x, &u, &r, &dec);
        let c0 = predicted_costs(&spec, &x, &u, &r, &zero);
        for i in 0..2 {
            // LQ form has no constant term
            let lq = g.cost(i, &dec, &[]);
            assert!((c1[i] - c0[i] - lq).abs() < 1e-9, "{} vs {}", c1[i] - c0[i], lq);
        }
    }
}

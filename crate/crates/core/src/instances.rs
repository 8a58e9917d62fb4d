//! Benchmark and reference instances, plus seeded random generators.
//!
//! Random instances use `ChaCha8Rng::seed_from_u64(seed)`, so a seed
//! reproduces the same instance on every platform.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::control::{LQRGameSpec, LinearSystem, MPCGameSpec};
use crate::diff::{Ad, ScalarFn};
use crate::model::{DesignObjective, LQGame, NonlinearGame, ParamBox, PlayerBox, PlayerLayout};

/// Shared constraint matrix of the three-player reference game.
pub const REFERENCE_A: [[f64; 6]; 4] = [
    [-0.4, -0.1, -2.1, 1.6, -1.8, -0.8],
    [0.5, -1.2, -1.1, -0.9, 0.6, 2.3],
    [0.0, -1.1, 0.5, -0.6, 0.0, 1.2],
    [-0.7, 0.0, -0.9, -0.2, 0.3, -1.0],
];

/// Published equilibria of the reference game (4-digit rounding) with
/// their 1-based active rows.
pub const REFERENCE_POINTS: [([f64; 6], &[usize]); 3] = [
    ([11.0588, 2.7647, -1.0, -1.0, -2.0, -2.0], &[1]),
    ([0.0, 0.0, -0.3436, -1.5001, -1.1599, -0.7387], &[1, 4]),
    ([0.0, 0.0, -0.7966, -0.8336, -0.2783, -0.1998], &[1, 2, 4]),
];

/// Published variational equilibrium of the reference game.
pub const REFERENCE_VGNE: [f64; 6] = [1.1192, 0.0392, -0.1777, -1.6265, -1.2952, -1.6868];

/// Three players with two variables each, `f_i = ½ xᵀx + (i−1) 1ᵀx`
/// (`i = 1, 2, 3`) and four shared rows `A x ≤ 1`.
pub fn reference_lq_game() -> LQGame {
    let layout = PlayerLayout::uniform(3, 2).expect("static layout");
    let a = DMatrix::from_fn(4, 6, |r, c| REFERENCE_A[r][c]);
    let q = vec![DMatrix::identity(6, 6); 3];
    let c = (0..3).map(|i| DVector::from_element(6, i as f64)).collect();
    LQGame::new(layout, q, c, a, DVector::from_element(4, 1.0))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

/// Scaling benchmark: `N` players with two variables each, the reference
/// costs `½ xᵀx + (i−1) 1ᵀx` and `2N` standard-normal rows with unit
/// right-hand side.
pub fn scaling_lq_game(players: usize, seed: u64) -> LQGame {
    let mut r = rng(seed);
    let layout = PlayerLayout::uniform(players, 2).expect("players > 0");
    let n = 2 * players;
    let q = vec![DMatrix::identity(n, n); players];
    let c = (0..players).map(|i| DVector::from_element(n, i as f64)).collect();
    let a = normal_matrix(&mut r, 2 * players, n);
    LQGame::new(layout, q, c, a, DVector::from_element(2 * players, 1.0))
}

/// Random convex LQ game: `Q^i = MᵀM/n + I`, normal `c^i` and `A`, and
/// `b ∈ [0.5, 1.5]` so the origin is strictly feasible. With `boxes`, each
/// variable gets `[−5, 5]`.
pub fn random_convex_lq(seed: u64, dims: &[usize], rows: usize, boxes: bool) -> LQGame {
    let mut r = rng(seed);
    let layout = PlayerLayout::new(dims.to_vec()).expect("nonempty dims");
    let n = layout.n();
    let players = layout.players();
    let q = (0..players)
        .map(|_| {
            let m = normal_matrix(&mut r, n, n);
            m.transpose() * m / n as f64 + DMatrix::identity(n, n)
        })
        .collect();
    let c = (0..players).map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r))).collect();
    let a = normal_matrix(&mut r, rows, n);
    let unif = Uniform::new(0.5, 1.5).expect("valid range");
    let b = DVector::from_fn(rows, |_, _| unif.sample(&mut r));
    let mut g = LQGame::new(layout, q, c, a, b);
    if boxes {
        for i in 0..players {
            g = g.with_box(i, PlayerBox::new(vec![-5.0; dims[i]], vec![5.0; dims[i]]));
        }
    }
    g
}

/// Parametric LQ game for the inverse pipeline: `N` players with `n_i`
/// variables, `n_p` parameters in `[−1, 1]`, `rows` shared inequalities,
/// `eq_rows` equalities and boxes `±10`. The data are built around an
/// interior point `x0` so that `x0` is feasible at `p = 0`.
pub fn random_parametric_lq(seed: u64, players: usize, n_i: usize, n_p: usize, rows: usize, eq_rows: usize) -> LQGame {
    let mut r = rng(seed);
    let layout = PlayerLayout::uniform(players, n_i).expect("players > 0");
    let n = layout.n();
    let unif = Uniform::new(-1.0, 1.0).expect("valid range");
    let x0 = DVector::from_fn(n, |_, _| unif.sample(&mut r));
    let q = (0..players)
        .map(|_| {
            let m = normal_matrix(&mut r, n, n);
            m.transpose() * m / n as f64 + DMatrix::identity(n, n)
        })
        .collect();
    let c = (0..players).map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r))).collect();
    let f: Vec<DMatrix<f64>> = (0..players).map(|_| normal_matrix(&mut r, n, n_p)).collect();
    let a = normal_matrix(&mut r, rows, n);
    let margin = Uniform::new(0.5, 2.0).expect("valid range");
    let b = &a * &x0 + DVector::from_fn(rows, |_, _| margin.sample(&mut r));
    let s = normal_matrix(&mut r, rows, n_p) * 0.5;
    let a_eq = normal_matrix(&mut r, eq_rows, n);
    let b_eq = &a_eq * &x0;
    let s_eq = normal_matrix(&mut r, eq_rows, n_p) * 0.5;
    let mut g = LQGame::new(layout, q, c, a, b)
        .with_eq(a_eq, b_eq)
        .with_params(ParamBox::new(vec![-1.0; n_p], vec![1.0; n_p]));
    g.f = f;
    g.s = s;
    g.s_eq = s_eq;
    for i in 0..players {
        g = g.with_box(i, PlayerBox::new(vec![-10.0; n_i], vec![10.0; n_i]));
    }
    g
}

/// Leader–follower market with eight followers.
pub mod stackelberg {
    use super::*;

    pub const N: usize = 8;
    pub const C: f64 = 1.0;
    pub const D: f64 = 0.9;
    pub const P1_BOUNDS: (f64, f64) = (-5.0, 0.0);
    pub const P2_BOUNDS: (f64, f64) = (0.0, 0.2);
    pub const P1_BAR: f64 = -2.0;
    pub const ETA: f64 = 0.1;
    /// Weight of the revenue term in the leader's loss.
    pub const RHO_J: f64 = 0.3;
    /// Penalty on the KKT residual used for the design solve.
    pub const RHO: f64 = 1e8;
    /// Published leader loss.
    pub const LOSS: f64 = 0.5637;

    pub const GAMMA: [[f64; 8]; 8] = [
        [0.0, 0.2, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0],
        [0.2, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.1, 0.0, 0.15, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.15, 0.0, 0.1, 0.0, 0.0, 0.0],
        [0.1, 0.0, 0.0, 0.1, 0.0, 0.2, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.1, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.2],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0],
    ];
    pub const A: [f64; 8] = [1.0, 1.5, 0.8, 1.2, 2.0, 0.9, 1.8, 1.1];

    fn price(i: usize, x: &[Ad], p: &[Ad]) -> Ad {
        let s = x.iter().fold(Ad::cst(0.0), |acc, v| acc + *v);
        p[i] + p[N] * s * s
    }

    /// Followers' game: `x_i ≥ 0`, `Σ x ≤ C`, `p = (p_1, p_2)` in its box.
    pub fn game() -> NonlinearGame {
        let costs: Vec<Arc<ScalarFn>> = (0..N)
            .map(|i| {
                let f: Arc<ScalarFn> = Arc::new(move |x: &[Ad], p: &[Ad]| {
                    let mut v = x[i] * x[i] * A[i];
                    for j in 0..N {
                        if GAMMA[i][j] != 0.0 {
                            v += x[i] * x[j] * GAMMA[i][j];
                        }
                    }
                    v + price(i, x, p) * x[i]
                });
                f
            })
            .collect();
        let mut lo = vec![P1_BOUNDS.0; N];
        lo.push(P2_BOUNDS.0);
        let mut hi = vec![P1_BOUNDS.1; N];
        hi.push(P2_BOUNDS.1);
        let mut g = NonlinearGame::new(PlayerLayout::uniform(N, 1).expect("static"), costs)
            .with_ineq(1, Arc::new(|x: &[Ad], _p: &[Ad]| vec![x.iter().fold(Ad::cst(-C), |acc, v| acc + *v)]))
            .with_params(ParamBox::new(lo, hi));
        for i in 0..N {
            g = g.with_box(i, PlayerBox::new(vec![0.0], vec![f64::INFINITY]));
        }
        g
    }

    /// Leader's loss `(Σx − D)² + η Σ(p_1i − p̄)² − ρ_J Σ π_i x_i`.
    pub fn loss() -> DesignObjective {
        DesignObjective::from_fn(Arc::new(|x: &[Ad], p: &[Ad]| {
            let s = x.iter().fold(Ad::cst(0.0), |acc, v| acc + *v);
            let mut v = (s - D) * (s - D);
            for i in 0..N {
                let d = p[i] - P1_BAR;
                v += d * d * ETA;
                v -= price(i, x, p) * x[i] * RHO_J;
            }
            v
        }))
    }

    /// Start point: parameter midpoints and `x_i = C/N`.
    pub fn initial() -> (Vec<f64>, Vec<f64>) {
        let mut p = vec![0.5 * (P1_BOUNDS.0 + P1_BOUNDS.1); N];
        p.push(0.5 * (P2_BOUNDS.0 + P2_BOUNDS.1));
        (vec![C / N as f64; N], p)
    }
}

/// Pair game: `N` scalar players, `f_i = (x_{2k−1} − x_{2k})²` for the pair
/// `k` containing `i`.
pub fn pair_game(players: usize) -> NonlinearGame {
    assert!(players % 2 == 0, "pair game needs an even player count");
    let costs = (0..players)
        .map(|i| {
            let a = 2 * (i / 2);
            let f: Arc<ScalarFn> = Arc::new(move |x: &[Ad], _p: &[Ad]| {
                let d = x[a] - x[a + 1];
                d * d
            });
            f
        })
        .collect();
    NonlinearGame::new(PlayerLayout::uniform(players, 1).expect("players > 0"), costs)
}

/// Reference profile `r_i = ⌈(i+1)/2⌉ / 10` with 1-based `i`.
pub fn pair_reference(players: usize) -> Vec<f64> {
    (1..=players).map(|i| ((i + 2) / 2) as f64 / 10.0).collect()
}

/// `Σ (x_i − r_i)²` (without its constant) plus `α1 ‖x‖₁`.
pub fn pair_design(players: usize, alpha1: f64) -> DesignObjective {
    let r = pair_reference(players);
    let q = DMatrix::identity(players, players) * 2.0;
    let c = DVector::from_iterator(players, r.iter().map(|v| -2.0 * v));
    DesignObjective {
        quad: Some((q, c)),
        reference: Some(r),
        ..Default::default()
    }
    .with_regularization(alpha1, 0.0)
}

/// Per-pair optimum `max(0, m_k − α1/2)` with `m_k = (2k+1)/20`.
pub fn pair_oracle(players: usize, alpha1: f64) -> Vec<f64> {
    (1..=players / 2)
        .map(|k| ((2 * k + 1) as f64 / 20.0 - 0.5 * alpha1).max(0.0))
        .collect()
}

/// Random `(A, B)` with standard-normal entries and `A` rescaled to spectral
/// radius `rho`.
pub fn random_system(seed: u64, n_x: usize, n_u: usize, rho: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let a = normal_matrix(&mut r, n_x, n_x);
    let b = normal_matrix(&mut r, n_x, n_u);
    let s = crate::linalg::spectral_radius(&a);
    (a * (rho / s), b)
}

/// LQR gain game: `n_x = n_u = 10`, one input per agent, `ρ(A) = 1.1`,
/// `Q_i = e_i e_iᵀ`, `R_i = 10`, horizon 50.
pub fn lqr_scenario(seed: u64) -> LQRGameSpec {
    let n = 10;
    let (a, b) = random_system(seed, n, n, 1.1);
    let system = LinearSystem::new(a, b, DMatrix::identity(n, n), PlayerLayout::uniform(n, 1).expect("n > 0"))
        .expect("consistent dimensions");
    LQRGameSpec {
        system,
        q: (0..n)
            .map(|i| {
                let mut q = DMatrix::zeros(n, n);
                q[(i, i)] = 1.0;
                q
            })
            .collect(),
        r: vec![DMatrix::from_element(1, 1, 10.0); n],
        horizon: 50,
    }
}

/// Three-agent MPC scenario: `n_x = 6`, `n_u = n_y = 3`, `ρ(A) = 0.95`,
/// `C` scaled to unit DC gain, `Q_{y,i} = e_i e_iᵀ`, `Q_{Δu,i} = 0.5`,
/// `0 ≤ u ≤ 4`, `0 ≤ y ≤ 5`, `q_ε = 10³`, `T = 10`, `T_c = 3`. The setpoint
/// is `(2, 3, 4)` for `t < 20` and `(3.5, 1.5, 4.5)` afterwards.
pub fn mpc_scenario(seed: u64) -> MPCGameSpec {
    let (nx, nu) = (6, 3);
    let (a, b) = random_system(seed, nx, nu, 0.95);
    let mut r = rng(seed.wrapping_add(1));
    let c0 = normal_matrix(&mut r, nu, nx);
    let dc = &c0 * (DMatrix::identity(nx, nx) - &a).lu().solve(&b).expect("A has no unit eigenvalue");
    let c = dc.lu().solve(&c0).expect("invertible DC gain");
    let system = LinearSystem::new(a, b, c, PlayerLayout::uniform(nu, 1).expect("n > 0")).expect("consistent dimensions");
    let mut setpoint = vec![DVector::from_column_slice(&[2.0, 3.0, 4.0]); 20];
    setpoint.push(DVector::from_column_slice(&[3.5, 1.5, 4.5]));
    MPCGameSpec {
        system,
        q_y: (0..nu)
            .map(|i| {
                let mut q = DMatrix::zeros(nu, nu);
                q[(i, i)] = 1.0;
                q
            })
            .collect(),
        q_du: vec![DMatrix::from_element(1, 1, 0.5); nu],
        q_eps: vec![1e3; nu],
        horizon: 10,
        constraint_horizon: 3,
        du_min: DVector::from_element(nu, f64::NEG_INFINITY),
        du_max: DVector::from_element(nu, f64::INFINITY),
        u_min: DVector::zeros(nu),
        u_max: DVector::from_element(nu, 4.0),
        y_min: DVector::zeros(nu),
        y_max: DVector::from_element(nu, 5.0),
        setpoint,
    }
}

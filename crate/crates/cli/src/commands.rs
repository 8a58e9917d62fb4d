//! Subcommands. Each returns the process exit code: 0 on success, 2 when no
//! equilibrium was found or a check failed. Errors map to 1 in `main`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gne_core::control::{simulate_mpc, write_trace_csv, MpcConfig, MpcMode};
use gne_core::instances::scaling_lq_game;
use gne_core::kkt::{KKTLayout, KKTVector};
use gne_core::milp::{build_mip, enumerate_on, export_mps, solve_mip, GameMip, MipConfig, DEFAULT_BIG_M};
use gne_core::model::{DesignObjective, LQGame, NonlinearGame, ParamBox};
use gne_core::nls::{
    best_response_certificate, lq_certificate, solve_design, solve_gne_nls, solve_sparse, LMConfig, LMStatus,
    NLSResult, CERT_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::gamefile::{read_json, values, Game, GameFile, Loaded, SolverSection};
use crate::result::{finite, Candidate, CertificateReport, ConfigEcho, ResultFile, VerifyReport};
use crate::scenario::ScenarioFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;

/// Rows with `|g_j| ≤ ACTIVE_TOL` are reported active by NLS solves.
const ACTIVE_TOL: f64 = 1e-6;
/// Iteration cap of the extra `--refine` pass.
const REFINE_ITER: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "gne", version, about = "Generalized Nash equilibrium solver")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one equilibrium.
    Solve(SolveArgs),
    /// List equilibria with distinct active sets (LQ games).
    Enumerate(EnumerateArgs),
    /// Choose parameters minimizing the design objective.
    Design(DesignArgs),
    /// Check a candidate point with the best-response certificate.
    Verify(VerifyArgs),
    /// Closed-loop MPC game simulation.
    Simulate(SimulateArgs),
    /// Timing benchmark over generated games.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Nls,
    Milp,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Nls => "nls",
            Method::Milp => "milp",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Solution route; defaults to the file's solver.method, else milp for LQ games.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Shared multipliers on shared constraints.
    #[arg(long)]
    pub variational: bool,
    #[arg(long = "big-m", alias = "bigM")]
    pub big_m: Option<f64>,
    /// Residual penalty weight for design solves.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Residual tolerance of the NLS route.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Random NLS start point (ChaCha8, uniform in [-1, 1], projected into boxes).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub game: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Export the MIP model (milp route).
    #[arg(long)]
    pub mps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    pub game: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub max_count: usize,
    #[arg(long)]
    pub variational: bool,
    #[arg(long = "big-m", alias = "bigM")]
    pub big_m: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Export the MIP model before any no-good cut.
    #[arg(long)]
    pub mps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    pub game: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// One more hot-start pass at p* with a larger iteration cap.
    #[arg(long)]
    pub refine: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub game: PathBuf,
    /// JSON with "x" (and "p" for parametric games); result files work too.
    pub candidate: PathBuf,
    #[arg(long, default_value_t = CERT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Nash,
    Variational,
    Centralized,
}

impl From<Mode> for MpcMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Nash => MpcMode::Nash,
            Mode::Variational => MpcMode::NashVariational,
            Mode::Centralized => MpcMode::Centralized,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Nash)]
    pub mode: Mode,
    /// Overrides the scenario's step count.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Summary JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also solve the centralized problem at every visited state.
    #[arg(long)]
    pub compare_centralized: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "lq-scaling")]
    pub suite: String,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8])]
    pub agents: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Enumerate(a) => cmd_enumerate(&a),
        Command::Design(a) => cmd_design(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("result documents serialize")
}

fn load_game(path: &Path) -> Result<Loaded> {
    let file: GameFile = read_json(path)?;
    file.load().map_err(|d| anyhow!("{}: {d}", path.display()))
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Flags win over the file's solver section.
#[derive(Debug, Clone)]
struct Settings {
    method: Method,
    variational: bool,
    big_m: f64,
    rho: f64,
    tol: f64,
    max_iter: usize,
    seed: Option<u64>,
    x0: Option<Vec<f64>>,
    p0: Option<Vec<f64>>,
}

impl Settings {
    fn resolve(flags: &SolverFlags, file: &SolverSection, default: Method) -> Result<Self> {
        let method = match (flags.method, file.method.as_deref()) {
            (Some(m), _) => m,
            (None, Some("nls")) => Method::Nls,
            (None, Some("milp")) => Method::Milp,
            (None, Some(other)) => bail!("solver.method: unknown method {other:?} (nls or milp)"),
            (None, None) => default,
        };
        let lm = LMConfig::default();
        Ok(Settings {
            method,
            variational: flags.variational || file.variational.unwrap_or(false),
            big_m: flags.big_m.or(file.big_m).unwrap_or(DEFAULT_BIG_M),
            rho: flags.rho.or(file.rho).unwrap_or(lm.rho),
            tol: flags.tol.or(file.tol).unwrap_or(lm.residual_tol),
            max_iter: flags.max_iter.or(file.max_iter).unwrap_or(lm.max_iter),
            seed: flags.seed.or(file.seed),
            x0: file.x0.as_deref().map(values),
            p0: file.p0.as_deref().map(values),
        })
    }

    fn lm(&self) -> LMConfig {
        LMConfig {
            residual_tol: self.tol,
            rho: self.rho,
            max_iter: self.max_iter,
            ..LMConfig::default()
        }
    }

    fn echo(&self) -> ConfigEcho {
        let nls = self.method == Method::Nls;
        ConfigEcho {
            method: self.method.as_str().into(),
            variational: self.variational,
            big_m: (!nls).then_some(self.big_m),
            rho: nls.then_some(self.rho),
            tol: nls.then_some(self.tol),
            max_iter: nls.then_some(self.max_iter),
            seed: if nls { self.seed } else { None },
        }
    }

    /// Start point: the file's x0, a seeded random point, or zero, projected into the boxes.
    fn start_x(&self, lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
        let n = lower.len();
        let mut x = match (&self.x0, self.seed) {
            (Some(x0), _) if x0.len() != n => bail!("solver.x0: expected {n} entries, got {}", x0.len()),
            (Some(x0), _) => x0.clone(),
            (None, Some(seed)) => {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| r.random_range(-1.0..=1.0)).collect()
            }
            (None, None) => vec![0.0; n],
        };
        for (v, (l, u)) in x.iter_mut().zip(lower.iter().zip(upper)) {
            *v = v.max(*l).min(*u);
        }
        Ok(x)
    }

    /// Parameter for fixed-parameter solves: the file's p0 or the box midpoint.
    fn fixed_p(&self, params: &ParamBox) -> Result<Vec<f64>> {
        match &self.p0 {
            Some(p) if p.len() != params.n_p() => {
                bail!("solver.p0: expected {} entries, got {}", params.n_p(), p.len())
            }
            Some(p) if !params.contains(p, 0.0) => bail!("solver.p0: outside the parameter box"),
            Some(p) => Ok(p.clone()),
            None => Ok(params.mid()),
        }
    }
}

fn default_method(game: &Game) -> Method {
    match game {
        Game::Lq(_) => Method::Milp,
        Game::Nonlinear(_) => Method::Nls,
    }
}

fn mip_for(game: &LQGame, design: Option<&DesignObjective>, s: &Settings, mps: Option<&Path>) -> Result<GameMip> {
    let gm = build_mip(game, design, s.variational, s.big_m)?;
    if let Some(path) = mps {
        export_mps(&gm.model, path)?;
    }
    Ok(gm)
}

fn nls_start(game: &NonlinearGame, s: &Settings) -> Result<KKTVector> {
    let (lo, hi) = game.bounds();
    let x0 = s.start_x(&lo, &hi)?;
    Ok(KKTVector::initial(KKTLayout::for_game(game, s.variational), &x0))
}

fn nls_result(game: &NonlinearGame, r: &NLSResult, s: &Settings, ms: f64) -> ResultFile {
    let g = game.g_values(r.x(), &r.p);
    ResultFile::from_nls(r, &g, ACTIVE_TOL, s.echo(), ms)
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let loaded = load_game(&a.game)?;
    let s = Settings::resolve(&a.solver, &loaded.file.solver(), default_method(&loaded.game))?;
    if loaded.design.is_some() {
        log::warn!("the design section is ignored by solve; use the design command");
    }
    let p = s.fixed_p(loaded.game.params())?;
    let fixed = ParamBox::singleton(&p);
    let (res, code) = match s.method {
        Method::Milp => {
            let Game::Lq(g) = &loaded.game else { bail!("--method milp needs an \"lq\" game") };
            let g = g.clone().with_params(fixed);
            let gm = mip_for(&g, None, &s, a.mps.as_deref())?;
            let t = Instant::now();
            let r = solve_mip(&gm, &MipConfig::default());
            let code = if r.is_optimal() { EXIT_OK } else { EXIT_NOT_FOUND };
            (ResultFile::from_mip(&r, s.echo(), elapsed_ms(t)), code)
        }
        Method::Nls => {
            if a.mps.is_some() {
                bail!("--mps needs --method milp");
            }
            let g = loaded.game.nonlinear().with_params(fixed);
            let z0 = nls_start(&g, &s)?;
            let t = Instant::now();
            let r = solve_gne_nls(&g, &p, &z0, &s.lm())?;
            let code = if r.status == LMStatus::Converged { EXIT_OK } else { EXIT_NOT_FOUND };
            (nls_result(&g, &r, &s, elapsed_ms(t)), code)
        }
    };
    emit(a.out.as_deref(), &to_json(&res))?;
    Ok(code)
}

pub fn cmd_enumerate(a: &EnumerateArgs) -> Result<i32> {
    if a.max_count == 0 {
        bail!("--max-count must be at least 1");
    }
    let loaded = load_game(&a.game)?;
    let Game::Lq(g) = &loaded.game else { bail!("enumerate needs an \"lq\" game") };
    let flags = SolverFlags {
        method: Some(Method::Milp),
        variational: a.variational,
        big_m: a.big_m,
        rho: None,
        tol: None,
        max_iter: None,
        seed: None,
    };
    let s = Settings::resolve(&flags, &loaded.file.solver(), Method::Milp)?;
    let p = s.fixed_p(&g.params)?;
    let g = g.clone().with_params(ParamBox::singleton(&p));
    let mut gm = mip_for(&g, None, &s, a.mps.as_deref())?;
    let t = Instant::now();
    let (found, last) = enumerate_on(&mut gm, a.max_count, &MipConfig::default());
    let ms = elapsed_ms(t);
    log::info!("{} equilibria, stopped with {}", found.len(), last.as_str());
    let out: Vec<ResultFile> = found.iter().map(|r| ResultFile::from_mip(r, s.echo(), ms)).collect();
    emit(a.out.as_deref(), &to_json(&out))?;
    Ok(if out.is_empty() { EXIT_NOT_FOUND } else { EXIT_OK })
}

pub fn cmd_design(a: &DesignArgs) -> Result<i32> {
    let loaded = load_game(&a.game)?;
    let Some(design) = loaded.design.clone() else { bail!("{}: no design section", a.game.display()) };
    let default = match &loaded.game {
        Game::Lq(_) if design.nonlinear.is_none() => Method::Milp,
        _ => Method::Nls,
    };
    let s = Settings::resolve(&a.solver, &loaded.file.solver(), default)?;
    let (res, code) = match s.method {
        Method::Milp => {
            let Game::Lq(g) = &loaded.game else { bail!("--method milp needs an \"lq\" game") };
            let gm = mip_for(g, Some(&design), &s, a.mps.as_deref())?;
            if a.refine {
                log::info!("--refine has no effect on the milp route");
            }
            let t = Instant::now();
            let r = solve_mip(&gm, &MipConfig::default());
            let mut res = ResultFile::from_mip(&r, s.echo(), elapsed_ms(t));
            if r.is_optimal() {
                res.design_value = finite(design.value_with_reg(&r.x, &r.p));
            }
            (res, if r.is_optimal() { EXIT_OK } else { EXIT_NOT_FOUND })
        }
        Method::Nls => {
            if a.mps.is_some() {
                bail!("--mps needs --method milp");
            }
            let g = loaded.game.nonlinear();
            let p0 = s.fixed_p(&g.params)?;
            let z0 = nls_start(&g, &s)?;
            let cfg = s.lm();
            let t = Instant::now();
            let mut r = if design.alpha1 > 0.0 {
                solve_sparse(&g, &design, &cfg, &z0, &p0)?
            } else {
                solve_design(&g, &design, &cfg, &z0, &p0)?
            };
            if a.refine {
                r = refine_again(&g, &design, r, &cfg)?;
            }
            let ok = r.status == LMStatus::Converged || r.residual_norm <= s.tol;
            (nls_result(&g, &r, &s, elapsed_ms(t)), if ok { EXIT_OK } else { EXIT_NOT_FOUND })
        }
    };
    emit(a.out.as_deref(), &to_json(&res))?;
    Ok(code)
}

/// Extra hot start at `p*`, kept only when the residual does not grow.
fn refine_again(g: &NonlinearGame, design: &DesignObjective, r: NLSResult, cfg: &LMConfig) -> Result<NLSResult> {
    let more = LMConfig {
        max_iter: REFINE_ITER,
        certify: false,
        ..cfg.clone()
    };
    let next = solve_gne_nls(g, &r.p, &r.z, &more)?;
    if next.residual_norm > r.residual_norm {
        return Ok(r);
    }
    let certificate = Some(best_response_certificate(g, next.x(), &next.p, CERT_TOL));
    Ok(NLSResult {
        iterations: r.iterations + next.iterations,
        design_value: Some(design.value_with_reg(next.x(), &next.p)),
        unrefined_residual_norm: r.unrefined_residual_norm.or(Some(r.residual_norm)),
        certificate,
        ..next
    })
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let loaded = load_game(&a.game)?;
    let cand: Candidate = read_json(&a.candidate)?;
    let x = values(&cand.x);
    let n = loaded.game.n();
    if x.len() != n {
        bail!("{}: x has {} entries, the game has {n} variables", a.candidate.display(), x.len());
    }
    let params = loaded.game.params();
    let p = if !cand.p.is_empty() || params.n_p() == 0 {
        values(&cand.p)
    } else {
        let s = loaded.file.solver();
        match s.p0 {
            Some(p0) => values(&p0),
            None if params.lower == params.upper => params.lower.clone(),
            None => bail!("{}: the game has parameters; the candidate needs \"p\"", a.candidate.display()),
        }
    };
    if p.len() != params.n_p() {
        bail!("{}: p has {} entries, the game has {}", a.candidate.display(), p.len(), params.n_p());
    }
    if !(a.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let cert = match &loaded.game {
        Game::Lq(g) => lq_certificate(g, &x, &p, a.tol),
        Game::Nonlinear(g) => best_response_certificate(g, &x, &p, a.tol),
    };
    let report = VerifyReport {
        pass: cert.pass,
        x,
        p,
        certificate: CertificateReport::from(&cert),
    };
    emit(a.out.as_deref(), &to_json(&report))?;
    Ok(if cert.pass { EXIT_OK } else { EXIT_NOT_FOUND })
}

#[derive(Debug, Serialize)]
struct StepStats {
    t: usize,
    status: String,
    /// 1-based active rows of the step's game.
    #[serde(skip_serializing_if = "Option::is_none")]
    active_set: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_improvement: Option<f64>,
    social_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    centralized_cost: Option<f64>,
    max_eps: f64,
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    mode: String,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    halted: Option<String>,
    /// Sum over steps of each agent's predicted cost.
    agent_costs: Vec<f64>,
    social_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    centralized_social_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    all_certified: Option<bool>,
    final_state: Vec<f64>,
    simulation_defect: f64,
    solve_ms: f64,
    per_step: Vec<StepStats>,
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let file: ScenarioFile = read_json(&a.scenario)?;
    let sc = file.load().map_err(|d| anyhow!("{}: {d}", a.scenario.display()))?;
    let steps = a.steps.unwrap_or(sc.steps);
    if steps == 0 {
        bail!("--steps must be at least 1");
    }
    let cfg = MpcConfig {
        big_m: sc.big_m.unwrap_or(DEFAULT_BIG_M),
        compare_centralized: a.compare_centralized,
        ..MpcConfig::default()
    };
    let t = Instant::now();
    let trace = simulate_mpc(&sc.spec, &sc.x0, sc.u_init.as_deref(), steps, a.mode.into(), &cfg)?;
    let solve_ms = elapsed_ms(t);
    if let Some(path) = &a.out_csv {
        let f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_trace_csv(&trace, std::io::BufWriter::new(f))?;
    }
    let agents = sc.spec.system.agents();
    let mut agent_costs = vec![0.0; agents];
    for s in &trace.steps {
        for (acc, c) in agent_costs.iter_mut().zip(&s.costs) {
            *acc += c;
        }
    }
    let centralized_social_cost = (a.compare_centralized && !trace.steps.is_empty())
        .then(|| trace.steps.iter().map(|s| s.centralized_cost).sum::<Option<f64>>())
        .flatten();
    let certs: Vec<bool> = trace.steps.iter().filter_map(|s| s.certified).collect();
    let summary = SimulationSummary {
        mode: trace.mode.as_str().into(),
        steps: trace.steps.len(),
        halted: trace.halted.clone(),
        agent_costs,
        social_cost: trace.social_cost(),
        centralized_social_cost,
        all_certified: (!certs.is_empty()).then(|| certs.iter().all(|&c| c)),
        final_state: trace.final_state.clone(),
        simulation_defect: trace.simulation_defect(&sc.spec.system),
        solve_ms,
        per_step: trace
            .steps
            .iter()
            .map(|s| StepStats {
                t: s.t,
                status: s.status.clone(),
                active_set: s.active.as_ref().map(|a| a.active()),
                certified: s.certified,
                max_improvement: s.max_improvement,
                social_cost: s.social_cost,
                centralized_cost: s.centralized_cost,
                max_eps: s.eps.iter().fold(0.0, |m: f64, e| m.max(*e)),
            })
            .collect(),
    };
    emit(a.out.as_deref(), &to_json(&summary))?;
    Ok(if trace.halted.is_some() { EXIT_NOT_FOUND } else { EXIT_OK })
}

/// One `bench` CSV row.
#[derive(Debug, Serialize)]
pub struct BenchRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub method: String,
    pub wall_time_s: f64,
    pub status: String,
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    if a.suite != "lq-scaling" {
        bail!("unknown suite {:?} (known: lq-scaling)", a.suite);
    }
    if a.agents.is_empty() || a.agents.contains(&0) {
        bail!("--agents needs positive player counts");
    }
    let mut rows = Vec::new();
    for &n in &a.agents {
        let game = scaling_lq_game(n, a.seed);
        let t = Instant::now();
        let status = match build_mip(&game, None, false, DEFAULT_BIG_M) {
            Ok(gm) => solve_mip(&gm, &MipConfig::default()).status.as_str().to_string(),
            Err(e) => format!("error: {e}"),
        };
        rows.push(BenchRow {
            n,
            method: "milp".into(),
            wall_time_s: t.elapsed().as_secs_f64(),
            status,
        });
        let ng = game.to_nonlinear();
        let z0 = KKTVector::initial(KKTLayout::for_game(&ng, false), &vec![0.0; ng.n()]);
        let t = Instant::now();
        let status = match solve_gne_nls(&ng, &[], &z0, &LMConfig::default()) {
            Ok(r) => r.status.as_str().to_string(),
            Err(e) => format!("error: {e}"),
        };
        rows.push(BenchRow {
            n,
            method: "nls".into(),
            wall_time_s: t.elapsed().as_secs_f64(),
            status,
        });
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    let text = String::from_utf8(buf).expect("csv output is UTF-8");
    match &a.out_csv {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

//! End-to-end runs of the `gne` binary.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gne_cli::gamefile::{GameFile, Game};
use gne_cli::result::ResultFile;
use gne_core::diff::lift;
use gne_core::instances::{random_parametric_lq, scaling_lq_game, stackelberg};
use gne_core::milp::{build_mip, parse_mps, solve_mip, write_mps, MipConfig, DEFAULT_BIG_M};
use gne_core::model::ParamBox;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn gne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gne")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: stdout {} stderr {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn active(v: &Value) -> Vec<usize> {
    v["active_set"].as_array().unwrap().iter().map(|a| a.as_u64().unwrap() as usize).collect()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|a| a.as_f64().unwrap()).collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const REFERENCE_SETS: [&[usize]; 3] = [&[1], &[1, 4], &[1, 2, 4]];

// ------------------------------------------------------------------ solve

#[test]
fn solve_reference_milp() {
    let ref_game = data("reference.json");
    let o = gne(&["solve", path_str(&ref_game), "--method", "milp"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["status"], "optimal");
    assert!(REFERENCE_SETS.contains(&active(&r).as_slice()), "{:?}", active(&r));
    assert_eq!(r["certificate"]["pass"], true);
    assert!(r["residual_norm"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn solve_reference_variational() {
    let o = gne(&["solve", path_str(&data("reference.json")), "--variational"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(active(&r), vec![1, 4]);
    assert_eq!(r["config"]["variational"], true);
    assert_eq!(r["duals"]["lambda"].as_array().unwrap().len(), 1);
}

#[test]
fn solve_reference_nls() {
    let o = gne(&["solve", path_str(&data("reference.json")), "--method", "nls", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["status"], "converged");
    assert!(r["residual_norm"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["certificate"]["pass"], true);
    assert_eq!(r["config"]["seed"], 3);
}

#[test]
fn malformed_file_exits_1_with_location() {
    let o = gne(&["solve", path_str(&data("malformed.json"))]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lq.b") && err.contains("line 5"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn schema_and_consistency_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"version": 1, "layout": [1], "lq": {"Q": [[[1]]], "c": [[0]], "R": 1}}"#, "lq.R: unknown field `R`"),
        (r#"{"version": 1, "layout": [1], "lq": {"Q": [[[1, 0]]], "c": [[0]]}}"#, "lq.Q[0][0]: expected 1 columns"),
        (r#"{"version": 2, "layout": [1], "lq": {"Q": [[[1]]], "c": [[0]]}}"#, "version: unsupported"),
        (r#"{"version": 1, "layout": [1], "nonlinear": {"costs": ["x[0]^2 +"]}}"#, "nonlinear.costs[0]: expression"),
        (r#"{"version": 1, "layout": [1]}"#, "need \"lq\" or \"nonlinear\""),
    ];
    for (k, (text, want)) in cases.iter().enumerate() {
        let p = dir.path().join(format!("bad{k}.json"));
        std::fs::write(&p, text).unwrap();
        let o = gne(&["solve", path_str(&p)]);
        assert_eq!(code(&o), 1, "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(want), "{err}");
    }
    let o = gne(&["solve", "/nonexistent/game.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn infeasible_game_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("infeasible.json");
    std::fs::write(&p, r#"{"version": 1, "layout": [1], "lq": {"Q": [[[1]]], "c": [[0]], "A": [[1], [-1]], "b": [-1, -1]}}"#)
        .unwrap();
    let o = gne(&["solve", path_str(&p)]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["status"], "infeasible");
    let o = gne(&["enumerate", path_str(&p)]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o), serde_json::json!([]));
}

#[test]
fn nls_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ok.json");
    let o = gne(&["solve", path_str(&data("reference.json")), "--method", "nls", "--max-iter", "1"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["status"], "max_iter");
    let o = gne(&["solve", path_str(&data("reference.json")), "--method", "nls", "--out", path_str(&p)]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let r: ResultFile = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(r.status, "converged");
}

#[test]
fn solve_is_deterministic() {
    for args in [vec!["--method", "nls", "--seed", "11"], vec!["--method", "milp"]] {
        let run = || {
            let mut a = vec!["solve", "-q"];
            a.truncate(1);
            let game = data("reference.json");
            a.push(path_str(&game));
            a.extend(args.iter());
            let o = gne(&a);
            assert_eq!(code(&o), 0);
            serde_json::from_slice::<ResultFile>(&o.stdout).unwrap().without_timings()
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn mps_export_matches_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ref.mps");
    let o = gne(&["solve", path_str(&data("reference.json")), "--mps", path_str(&p)]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&p).unwrap();
    let Game::Lq(g) = GameFile::from_str(&std::fs::read_to_string(data("reference.json")).unwrap())
        .unwrap()
        .load()
        .unwrap()
        .game
    else {
        panic!("lq expected")
    };
    let gm = build_mip(&g.with_params(ParamBox::none()), None, false, DEFAULT_BIG_M).unwrap();
    assert_eq!(text, write_mps(&gm.model));
    assert_eq!(parse_mps(&text).unwrap().rows.len(), gm.model.rows.len());
    let o = gne(&["solve", path_str(&data("reference.json")), "--method", "nls", "--mps", path_str(&p)]);
    assert_eq!(code(&o), 1);
}

// ------------------------------------------------------------------ enumerate

#[test]
fn enumerate_reference() {
    let o = gne(&["enumerate", path_str(&data("reference.json"))]);
    assert_eq!(code(&o), 0);
    let all = json(&o);
    let sets: BTreeSet<Vec<usize>> = all.as_array().unwrap().iter().map(active).collect();
    let want: BTreeSet<Vec<usize>> = REFERENCE_SETS.iter().map(|s| s.to_vec()).collect();
    assert_eq!(sets, want);
    assert_eq!(all.as_array().unwrap().len(), 3);

    let o = gne(&["enumerate", path_str(&data("reference.json")), "--max-count", "1"]);
    assert_eq!(json(&o).as_array().unwrap().len(), 1);
    let o = gne(&["enumerate", path_str(&data("reference.json")), "--max-count", "0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn enumerate_decoupled_game() {
    let o = gne(&["enumerate", path_str(&data("decoupled.json"))]);
    assert_eq!(code(&o), 0);
    let all = json(&o);
    let all = all.as_array().unwrap();
    assert_eq!(all.len(), 1);
    assert!(active(&all[0]).is_empty());
    let x = floats(&all[0]["x"]);
    assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 0.5).abs() < 1e-12, "{x:?}");
}

#[test]
fn enumerate_needs_an_lq_game() {
    let o = gne(&["enumerate", path_str(&data("stackelberg.json"))]);
    assert_eq!(code(&o), 1);
}

// ------------------------------------------------------------------ verify

#[test]
fn verify_reference_points() {
    let game = data("reference.json");
    for name in ["reference_x1.json", "reference_x2.json", "reference_x3.json", "reference_xv.json"] {
        let o = gne(&["verify", path_str(&game), path_str(&data(name)), "--tol", "1e-3"]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stdout));
        assert_eq!(json(&o)["pass"], true);
    }
    let o = gne(&["verify", path_str(&game), path_str(&data("reference_zero.json"))]);
    assert_eq!(code(&o), 2);
    let r = json(&o);
    assert_eq!(r["pass"], false);
    let failing: Vec<u64> = r["certificate"]["players"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|p| p["pass"] == false)
        .map(|p| p["player"].as_u64().unwrap())
        .collect();
    assert_eq!(failing, vec![2, 3]);
}

#[test]
fn verify_single_player_optimum() {
    let o = gne(&["verify", path_str(&data("single.json")), path_str(&data("single_opt.json"))]);
    assert_eq!(code(&o), 0);
}

#[test]
fn verify_reproduces_the_result_verdict() {
    let dir = tempfile::tempdir().unwrap();
    for (k, extra) in [vec!["--method", "milp"], vec!["--method", "nls"], vec!["--variational"]].iter().enumerate() {
        let out = dir.path().join(format!("r{k}.json"));
        let game = data("reference.json");
        let mut args = vec!["solve", path_str(&game), "--out", path_str(&out)];
        args.extend(extra.iter());
        assert_eq!(code(&gne(&args)), 0);
        let r: ResultFile = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let cert = r.certificate.unwrap();
        let tol = format!("{:e}", cert.tol);
        let o = gne(&["verify", path_str(&game), path_str(&out), "--tol", &tol]);
        assert_eq!(code(&o), if cert.pass { 0 } else { 2 });
        assert_eq!(json(&o)["pass"], cert.pass);
    }
}

#[test]
fn verify_rejects_wrong_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("short.json");
    std::fs::write(&p, r#"{"x": [0, 0, 0]}"#).unwrap();
    let o = gne(&["verify", path_str(&data("reference.json")), path_str(&p)]);
    assert_eq!(code(&o), 1);
}

// ------------------------------------------------------------------ design

#[test]
fn design_inverse_pipeline() {
    let g = random_parametric_lq(5, 4, 3, 3, 10, 1);
    let cfg = MipConfig::default();
    let target = solve_mip(&build_mip(&g, None, false, DEFAULT_BIG_M).unwrap(), &cfg);
    assert!(target.is_optimal());
    let dir = tempfile::tempdir().unwrap();
    for norm in ["inf", "two"] {
        let mut f = GameFile::from_lq(&g);
        f.design = Some(gne_cli::gamefile::DesignSection {
            pwa: vec![],
            quad: None,
            expression: None,
            reference: Some(gne_cli::gamefile::nums(&target.x)),
            norm: Some(norm.into()),
            alpha1: 0.0,
            alpha2: 0.0,
        });
        let p = dir.path().join(format!("inverse_{norm}.json"));
        std::fs::write(&p, f.to_json()).unwrap();
        let o = gne(&["design", path_str(&p)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let r = json(&o);
        let x = floats(&r["x"]);
        let err = x.iter().zip(&target.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{norm}: {err}");
        assert_eq!(r["certificate"]["pass"], true);
        assert!(r["design_value"].as_f64().unwrap() <= 1e-6);
    }
}

#[test]
fn design_without_objective_finds_a_parameter_in_the_box() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("free.json");
    std::fs::write(
        &p,
        r#"{"version": 1, "layout": [1, 1],
            "nonlinear": {"costs": ["(x[0] - p[0])^2 + x[0]*x[1]", "(x[1] + p[1])^2"], "ineq": ["x[0] + x[1] - 1"]},
            "params": {"lower": [0, -1], "upper": [2, 1]},
            "design": {}}"#,
    )
    .unwrap();
    let o = gne(&["design", path_str(&p), "--refine"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    let pv = floats(&r["p"]);
    assert!((0.0..=2.0).contains(&pv[0]) && (-1.0..=1.0).contains(&pv[1]), "{pv:?}");
    assert!(r["residual_norm"].as_f64().unwrap() <= 1e-8);
    assert!(r["unrefined_residual_norm"].as_f64().is_some());
    let o = gne(&["design", path_str(&data("reference.json"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn design_leader_follower_market() {
    let o = gne(&["design", path_str(&data("stackelberg.json"))]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    let sum: f64 = floats(&r["x"]).iter().sum();
    assert!((0.98..=1.0 + 1e-6).contains(&sum), "{sum}");
    assert!(r["residual_norm"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["certificate"]["pass"], true);
    assert_eq!(r["config"]["rho"], 1e8);
}

#[test]
fn market_fixture_matches_the_instance() {
    let text = std::fs::read_to_string(data("stackelberg.json")).unwrap();
    let loaded = GameFile::from_str(&text).unwrap().load().unwrap();
    let g = loaded.game.nonlinear();
    let reference = stackelberg::game();
    let loss = loaded.design.unwrap();
    let ref_loss = stackelberg::loss();
    assert_eq!(g.bounds(), reference.bounds());
    assert_eq!(g.params, reference.params);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..0.3)).collect();
        let mut p: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..0.0)).collect();
        p.push(rng.random_range(0.0..0.2));
        for i in 0..8 {
            let (a, b) = (g.cost(i, &x, &p), reference.cost(i, &x, &p));
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "player {i}: {a} vs {b}");
        }
        assert!((g.g_values(&x, &p)[0] - reference.g_values(&x, &p)[0]).abs() <= 1e-14);
        let (a, b) = (loss.value(&x, &p), ref_loss.value(&x, &p));
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "loss {a} vs {b}");
        let f = g.costs[0].clone();
        let _ = f(&lift(&x), &lift(&p));
    }
}

// ------------------------------------------------------------------ simulate

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (head, rows)
}

#[test]
fn simulate_builtin_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let nash_csv = dir.path().join("nash.csv");
    let central_csv = dir.path().join("central.csv");
    let o = gne(&[
        "simulate",
        path_str(&data("mpc.json")),
        "--mode",
        "nash",
        "--compare-centralized",
        "--out-csv",
        path_str(&nash_csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stderr.is_empty(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&o);
    assert_eq!(s["steps"], 40);
    assert_eq!(s["all_certified"], true);
    for step in s["per_step"].as_array().unwrap() {
        let c = step["centralized_cost"].as_f64().unwrap();
        assert!(c <= step["social_cost"].as_f64().unwrap() + 1e-6, "{step}");
    }
    let agents: f64 = floats(&s["agent_costs"]).iter().sum();
    assert!((agents - s["social_cost"].as_f64().unwrap()).abs() <= 1e-9 * agents.abs());

    let o = gne(&["simulate", path_str(&data("mpc.json")), "--mode", "centralized", "--out-csv", path_str(&central_csv)]);
    assert_eq!(code(&o), 0);
    for p in [&nash_csv, &central_csv] {
        let (head, rows) = read_csv(p);
        assert_eq!(head[..2], ["t", "x1"]);
        assert!(head.contains(&"u3".to_string()) && head.contains(&"cost3".to_string()));
        assert_eq!(rows.len(), 40);
    }
}

#[test]
fn simulate_zero_setpoint_stays_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("zero.csv");
    let o = gne(&["simulate", path_str(&data("mpc_zero.json")), "--out-csv", path_str(&csv_path)]);
    assert_eq!(code(&o), 0);
    let (head, rows) = read_csv(&csv_path);
    let numeric = head.iter().position(|h| h == "status").unwrap();
    for row in &rows {
        for v in &row[1..numeric] {
            if v.is_empty() {
                continue;
            }
            assert!(v.parse::<f64>().unwrap().abs() <= 1e-12, "{row:?}");
        }
    }
}

#[test]
fn simulate_single_step_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("one.csv");
    let summary = dir.path().join("one.json");
    let o = gne(&[
        "simulate",
        path_str(&data("mpc_small.json")),
        "--steps",
        "1",
        "--mode",
        "variational",
        "--out-csv",
        path_str(&csv_path),
        "--out",
        path_str(&summary),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_csv(&csv_path).1.len(), 1);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s["mode"], "nash_variational");
    assert_eq!(code(&gne(&["simulate", path_str(&data("mpc_small.json")), "--steps", "0"])), 1);
    assert_eq!(code(&gne(&["simulate", path_str(&data("reference.json"))])), 1);
    assert_eq!(code(&gne(&["simulate", path_str(&data("mpc.json")), "--mode", "selfish"])), 1);
}

// ------------------------------------------------------------------ bench

#[test]
fn bench_rows_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bench.csv");
    let o = gne(&["bench", "--suite", "lq-scaling", "--agents", "2,4,8", "--seed", "1", "--out-csv", path_str(&p)]);
    assert_eq!(code(&o), 0);
    let (head, rows) = read_csv(&p);
    assert_eq!(head, ["N", "method", "wall_time_s", "status"]);
    assert_eq!(rows.len(), 6);
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    assert_eq!(keys[0], ("2".to_string(), "milp".to_string()));
    assert_eq!(keys[5], ("8".to_string(), "nls".to_string()));
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() >= 0.0));

    let statuses = |o: &Output| -> Vec<String> {
        let mut r = csv::Reader::from_reader(o.stdout.as_slice());
        r.records().map(|x| x.unwrap()[3].to_string()).collect()
    };
    let a = gne(&["bench", "--agents", "3,5", "--seed", "4"]);
    let b = gne(&["bench", "--agents", "3,5", "--seed", "4"]);
    assert_eq!(statuses(&a), statuses(&b));
    assert_eq!(code(&gne(&["bench", "--suite", "nope"])), 1);
    assert_eq!(code(&gne(&["bench", "--agents", "0"])), 1);
}

#[test]
fn bench_instances_are_reproducible() {
    let a = scaling_lq_game(4, 9);
    let b = scaling_lq_game(4, 9);
    assert_eq!((a.a, a.b), (b.a, b.b));
    assert_ne!(scaling_lq_game(4, 10).a, scaling_lq_game(4, 9).a);
}

// ------------------------------------------------------------------ usage

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&gne(&[])), 1);
    assert_eq!(code(&gne(&["solve"])), 1);
    assert_eq!(code(&gne(&["frobnicate"])), 1);
    assert_eq!(code(&gne(&["--help"])), 0);
    assert_eq!(code(&gne(&["solve", "--help"])), 0);
    assert_eq!(code(&gne(&["--version"])), 0);
    let o = gne(&["solve", path_str(&data("reference.json")), "--method", "simplex"]);
    assert_eq!(code(&o), 1);
}

// ------------------------------------------------------------------ round trip

#[test]
fn fixtures_round_trip() {
    for entry in std::fs::read_dir(data("")).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_str().unwrap().to_string();
        let text = std::fs::read_to_string(&p).unwrap();
        let v: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if v.get("layout").is_some() {
            let f = GameFile::from_str(&text).unwrap();
            assert_eq!(GameFile::from_str(&f.to_json()).unwrap(), f, "{name}");
            assert!(f.load().is_ok(), "{name}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lq_files_round_trip(seed in 0u64..1000, players in 1usize..4, n_i in 1usize..3, n_p in 0usize..3, rows in 0usize..4, eq in 0usize..2) {
        let g = random_parametric_lq(seed, players, n_i, n_p, rows, eq);
        let f = GameFile::from_lq(&g);
        let again = GameFile::from_str(&f.to_json()).unwrap();
        prop_assert_eq!(&again, &f);
        let Game::Lq(h) = again.load().unwrap().game else { panic!("lq expected") };
        prop_assert_eq!((h.q, h.c, h.f), (g.q, g.c, g.f));
        prop_assert_eq!((h.a, h.b, h.s), (g.a, g.b, g.s));
        prop_assert_eq!((h.a_eq, h.b_eq, h.s_eq), (g.a_eq, g.b_eq, g.s_eq));
        prop_assert_eq!((h.boxes, h.params), (g.boxes, g.params));
    }
}

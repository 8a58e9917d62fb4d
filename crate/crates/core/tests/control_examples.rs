use std::time::Instant;

use gne_core::control::{centralized_lqr, lqr_best_response_gain, simulate_mpc, solve_lqr_game, MpcConfig, MpcMode};
use gne_core::instances::{lqr_scenario, mpc_scenario};
use gne_core::linalg::spectral_radius;
use gne_core::nls::LMConfig;

#[test]
fn lqr_game_unstable_instance() {
    let start = Instant::now();
    let spec = lqr_scenario(1);
    assert!((spectral_radius(&spec.system.a) - 1.1).abs() < 1e-9);
    let k0 = centralized_lqr(&spec).unwrap();
    let res = solve_lqr_game(&spec, &k0, &LMConfig::default()).unwrap();
    eprintln!(
        "status {:?} iters {} fp {:.3e} rho {:.4} central rho {:.4} in {:?}",
        res.status,
        res.iterations,
        res.max_fixed_point_error(),
        res.spectral_radius,
        spectral_radius(&(&spec.system.a - &spec.system.b * &k0)),
        start.elapsed()
    );
    for i in 0..10 {
        let br = lqr_best_response_gain(&spec, i, &res.k).unwrap();
        assert!((res.k.rows(i, 1) - br).norm() <= 1e-6);
    }
    assert!(res.spectral_radius < 1.0);
}

#[test]
fn mpc_scenario_closed_loop() {
    let start = Instant::now();
    let spec = mpc_scenario(3);
    let cfg = MpcConfig {
        compare_centralized: true,
        ..Default::default()
    };
    let nash = simulate_mpc(&spec, &[0.0; 6], None, 40, MpcMode::Nash, &cfg).unwrap();
    assert!(nash.halted.is_none(), "{:?}", nash.halted);
    assert_eq!(nash.steps.len(), 40);
    for s in &nash.steps {
        assert_eq!(s.certified, Some(true), "step {} improvement {:?}", s.t, s.max_improvement);
        let c = s.centralized_cost.unwrap();
        assert!(c <= s.social_cost + 1e-6, "step {}: {c} > {}", s.t, s.social_cost);
    }
    assert!(nash.simulation_defect(&spec.system) == 0.0);
    let central = simulate_mpc(&spec, &[0.0; 6], None, 40, MpcMode::Centralized, &cfg).unwrap();
    eprintln!(
        "nash social {:.4} centralized social {:.4} in {:?}",
        nash.social_cost(),
        central.social_cost(),
        start.elapsed()
    );
    let active: usize = nash.steps.iter().map(|s| s.active.as_ref().unwrap().count()).sum();
    eprintln!("active rows summed over steps: {active}");
}

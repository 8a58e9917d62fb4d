mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use gne_core::instances::{reference_lq_game, random_convex_lq, random_parametric_lq};
use gne_core::milp::{build_mip, enumerate_equilibria, solve_inverse_lq, solve_mip, MipConfig, DEFAULT_BIG_M};
use gne_core::model::InverseNorm;

#[test]
fn reference_game_matches_oracle() {
    let oracle = common::brute_force_signatures(&reference_lq_game());
    let want: BTreeSet<Vec<usize>> = [vec![1], vec![1, 4], vec![1, 2, 4]].into_iter().collect();
    assert_eq!(oracle, want);
}

#[test]
fn random_games_match_oracle() {
    for seed in 0..6u64 {
        let dims = [2, 1 + (seed as usize % 2), 2];
        let rows = 3 + (seed as usize % 4);
        let g = random_convex_lq(seed, &dims, rows, false);
        let oracle = common::brute_force_signatures(&g);
        let found: BTreeSet<Vec<usize>> = enumerate_equilibria(&g, None, false, DEFAULT_BIG_M, 1 << rows, &MipConfig::default())
            .unwrap()
            .iter()
            .map(|r| r.signature.active())
            .collect();
        assert_eq!(found, oracle, "seed {seed}");
    }
}

#[test]
fn inverse_pipeline() {
    let start = Instant::now();
    let g = random_parametric_lq(7, 4, 3, 3, 12, 2);
    let cfg = MipConfig::default();
    let feas = solve_mip(&build_mip(&g, None, false, DEFAULT_BIG_M).unwrap(), &cfg);
    assert!(feas.is_optimal());
    let x_des = feas.x.clone();
    for norm in [InverseNorm::Inf, InverseNorm::Two] {
        let r = solve_inverse_lq(&g, &x_des, norm, DEFAULT_BIG_M, &cfg).unwrap();
        assert!(r.mip.is_optimal(), "{norm:?}");
        assert!(r.distance <= 1e-6, "{norm:?}: {}", r.distance);
        assert!(r.mip.certified());
        eprintln!("{norm:?}: distance {:.3e}, nodes {}", r.distance, r.mip.nodes);
    }
    eprintln!("pipeline took {:?}", start.elapsed());
}

#[test]
fn enumeration_is_complete_for_large_big_m() {
    // multipliers reach about 600 here; near-integral relaxations with tiny δ
    // must still be branched when their rounding is infeasible
    let g = random_convex_lq(5013, &[2, 1, 2], 10, false);
    let oracle = common::brute_force_signatures(&g);
    assert_eq!(oracle.len(), 26);
    for big_m in [1e3, DEFAULT_BIG_M, 1e6] {
        let found: BTreeSet<Vec<usize>> = enumerate_equilibria(&g, None, false, big_m, 1 << 10, &MipConfig::default())
            .unwrap()
            .iter()
            .map(|r| r.signature.active())
            .collect();
        assert_eq!(found, oracle, "M = {big_m}");
    }
}

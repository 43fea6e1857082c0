mod common;

use common::{brute_force, feasible_points};
use mipdive::bnb::{solve, solve_with_pool, SolverConfig, Status};
use mipdive::heuristics::HeuristicKind;
use mipdive::instances::{random_mip, MipParams};

fn configs() -> Vec<(&'static str, SolverConfig)> {
    use HeuristicKind::*;
    vec![
        ("none", SolverConfig::with_heuristics(&[])),
        ("farkas", SolverConfig::with_heuristics(&[Farkas])),
        ("coef", SolverConfig::with_heuristics(&[Coef])),
        ("conflict", SolverConfig::with_heuristics(&[Conflict])),
        ("all", SolverConfig::with_heuristics(&[Farkas, Coef, Conflict])),
    ]
}

#[test]
fn matches_brute_force_small() {
    for seed in 0..60u64 {
        let params = MipParams {
            binaries: 4 + (seed % 9) as usize,
            rows: 2 + (seed % 5) as usize,
            planted: seed % 3 != 0,
            ..MipParams::default()
        };
        let p = random_mip(seed, &params);
        let oracle = brute_force(&p);
        for (name, mut cfg) in configs() {
            cfg.dive_freq = 2;
            let r = solve(&p, &cfg).unwrap();
            match oracle {
                Some(v) => {
                    assert_eq!(r.status, Status::Optimal, "seed {seed} {name}");
                    assert_eq!(r.objective(), Some(v), "seed {seed} {name}");
                }
                None => assert_eq!(r.status, Status::Infeasible, "seed {seed} {name}"),
            }
            let pts = feasible_points(&p);
            for c in r.pool.iter() {
                for x in &pts {
                    let obj: f64 = x.iter().zip(p.objective()).map(|(a, b)| a * b).sum();
                    if c.objective_bound.is_some_and(|u| obj > u) {
                        continue;
                    }
                    assert!(c.is_satisfied_by(x, 1e-9), "seed {seed} {name}: {c} cuts {x:?}");
                }
            }
            assert_eq!(r.stats.lemma_violations, 0);
            if oracle.is_some() {
                let mut pool = r.pool.clone();
                pool.retain(|c| c.objective_bound.is_none());
                let again = solve_with_pool(&p, &cfg, Some(pool)).unwrap();
                assert_eq!(again.objective(), oracle, "seed {seed} {name} with pool");
            }
        }
    }
}

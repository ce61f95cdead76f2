//! Cross-module behavior of the propagation engine against the exact
//! oracle and the polytope machinery.

use bethe_core::rng::Stream;
use bethe_core::*;

/// Random potentials with entries uniform in [-scale, scale].
fn random_potentials(graph: &FactorGraph, scale: f64, seed: u64) -> LogPotentials {
    let mut stream = Stream::new(seed);
    let node_tables: Vec<Vec<f64>> = graph
        .cardinalities()
        .iter()
        .map(|&c| (0..c).map(|_| stream.range(-scale, scale)).collect())
        .collect();
    let factor_tables: Vec<Vec<f64>> = (0..graph.num_factors())
        .map(|a| {
            (0..graph.factor_states(a))
                .map(|_| stream.range(-scale, scale))
                .collect()
        })
        .collect();
    LogPotentials::new(graph, node_tables, factor_tables).unwrap()
}

/// Random tree over `n` variables with mixed cardinalities: each new
/// variable attaches to a uniformly drawn earlier one.
fn random_tree(n: usize, max_card: usize, seed: u64) -> FactorGraph {
    let mut stream = Stream::new(seed);
    let cards: Vec<usize> = (0..n)
        .map(|_| 2 + (stream.next_u64() as usize) % (max_card - 1))
        .collect();
    let mut edges = Vec::with_capacity(n - 1);
    for v in 1..n {
        let parent = (stream.next_u64() as usize) % v;
        edges.push(vec![parent.min(v), parent.max(v)]);
    }
    edges.sort();
    FactorGraph::new(cards, edges).unwrap()
}

#[test]
fn bethe_bp_matches_exact_inference_on_random_trees() {
    for seed in 0..10u64 {
        let n = 4 + (seed as usize) % 6;
        let g = random_tree(n, 3, 100 + seed);
        let p = random_potentials(&g, 1.0, 200 + seed);
        let b = bethe_numbers(&g);
        let r = run_counting_bp(&g, &p, &b, &PropagationOptions::default()).unwrap();
        assert!(r.converged, "seed {seed}: no convergence");
        let exact = exact_infer(&g, &p).unwrap();
        assert!(
            (r.log_partition_estimate - exact.log_partition).abs() < 1e-6,
            "seed {seed}: log Z mismatch"
        );
        for (approx, truth) in r.beliefs.node.iter().zip(&exact.node_marginals) {
            for (a, t) in approx.iter().zip(truth) {
                assert!((a - t).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn converged_beliefs_are_locally_consistent() {
    let g = build_grid(3, 3, false).unwrap();
    let spec = EnsembleSpec {
        field_strength: 1.0,
        interaction_strength: 1.0,
        coupling: CouplingMode::Mixed,
        seed: 5,
        num_models: 1,
    };
    let p: LogPotentials = sample_ising(&g, &spec, 0).unwrap();
    let b = bethe_numbers(&g);
    let opts = PropagationOptions::default();
    let r = run_counting_bp(&g, &p, &b, &opts).unwrap();
    assert!(r.converged);
    let residual = r.beliefs.consistency_residual(&g);
    assert!(
        residual < 100.0 * opts.tol,
        "consistency residual {residual:.3e}"
    );
    for belief in r.beliefs.node.iter().chain(&r.beliefs.factor) {
        let sum: f64 = belief.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert!(belief.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn fixed_point_is_stationary_for_certified_numbers() {
    let g = build_grid(3, 3, false).unwrap();
    let spec = EnsembleSpec {
        field_strength: 1.0,
        interaction_strength: 1.0,
        coupling: CouplingMode::Mixed,
        seed: 42,
        num_models: 1,
    };
    let p: LogPotentials = sample_ising(&g, &spec, 0).unwrap();
    let certified = convex_bethe_c(&g).unwrap();
    let opts = PropagationOptions::default();
    let r = run_counting_bp(&g, &p, &certified.numbers, &opts).unwrap();
    assert!(r.converged);

    let poly: LocalPolytope = LocalPolytope::new(&g);
    let mut grad = Vec::new();
    for (i, belief) in r.beliefs.node.iter().enumerate() {
        for (t, &pr) in p.node_table(i).iter().zip(belief) {
            grad.push(t - certified.numbers.node[i] * (pr.max(1e-300).ln() + 1.0));
        }
    }
    for (a, belief) in r.beliefs.factor.iter().enumerate() {
        for (t, &pr) in p.factor_table(a).iter().zip(belief) {
            grad.push(t - certified.numbers.factor[a] * (pr.max(1e-300).ln() + 1.0));
        }
    }
    let mut norm_sq = 0.0;
    for basis_vec in poly.null_basis() {
        let coef: f64 = basis_vec.iter().zip(&grad).map(|(a, b)| a * b).sum();
        norm_sq += coef * coef;
    }
    assert!(
        norm_sq.sqrt() < 100.0 * opts.tol,
        "projected gradient norm {:.3e}",
        norm_sq.sqrt()
    );
}

#[test]
fn concave_objective_dominates_the_uniform_point() {
    let g = build_grid(3, 3, false).unwrap();
    let certified = convex_bethe_c(&g).unwrap();
    for seed in 0..5u64 {
        let spec = EnsembleSpec {
            field_strength: 0.5,
            interaction_strength: 1.5,
            coupling: CouplingMode::Mixed,
            seed,
            num_models: 1,
        };
        let p: LogPotentials = sample_ising(&g, &spec, 0).unwrap();
        let r = run_counting_bp(&g, &p, &certified.numbers, &PropagationOptions::default())
            .unwrap();
        assert!(r.converged);
        let at_uniform = evaluate_objective(&BeliefSet::uniform(&g), &p, &certified.numbers);
        assert!(
            r.log_partition_estimate >= at_uniform - 1e-9,
            "seed {seed}: converged {} < uniform {}",
            r.log_partition_estimate,
            at_uniform
        );
    }
}

#[test]
fn entropy_gap_identity_on_sampled_polytope_points() {
    let g = build_grid(3, 3, false).unwrap();
    let poly: LocalPolytope = LocalPolytope::new(&g);
    let mut state = poly.start_chain(31, 0);
    let mut stream = Stream::new(77);
    for trial in 0..20 {
        for _ in 0..25 {
            poly.hit_and_run_step(&mut state).unwrap();
        }
        let beliefs = poly.unflatten(&state.point);
        // Random variable-valid numbers via a random factor vector.
        let rho: Vec<f64> = (0..g.num_factors())
            .map(|_| stream.range(-1.0, 2.0))
            .collect();
        let node: Vec<f64> = (0..g.num_vars())
            .map(|i| {
                let mut s = 1.0;
                for &(a, _) in g.var_factors(i) {
                    s -= rho[a];
                }
                s
            })
            .collect();
        let c = CountingNumbers::new(node, rho);
        let (lhs, rhs) = entropy_gap_identity(&g, &beliefs, &c).unwrap();
        assert!(
            (lhs - rhs).abs() < 1e-10,
            "trial {trial}: lhs {lhs} rhs {rhs}"
        );
        // Multi-informations of consistent beliefs are nonnegative.
        let ev = entropy_vector(&g, &beliefs);
        assert!(ev.multi_information.iter().all(|&i| i >= -1e-12));
    }
}

#[test]
fn upper_bound_direction_when_factors_stay_below_one() {
    let g = build_grid(3, 3, false).unwrap();
    let poly: LocalPolytope = LocalPolytope::new(&g);
    let mut state = poly.start_chain(13, 0);
    let mut stream = Stream::new(99);
    for _ in 0..20 {
        for _ in 0..25 {
            poly.hit_and_run_step(&mut state).unwrap();
        }
        let beliefs = poly.unflatten(&state.point);
        let rho: Vec<f64> = (0..g.num_factors()).map(|_| stream.range(0.0, 1.0)).collect();
        let node: Vec<f64> = (0..g.num_vars())
            .map(|i| {
                let mut s = 1.0;
                for &(a, _) in g.var_factors(i) {
                    s -= rho[a];
                }
                s
            })
            .collect();
        let c = CountingNumbers::new(node, rho);
        let (lhs, _) = entropy_gap_identity(&g, &beliefs, &c).unwrap();
        assert!(lhs >= -1e-10, "entropy gap {lhs} negative with c_a <= 1");
    }
}

#[test]
fn divergent_runs_report_the_failing_edge_and_last_iterate() {
    // A large counting number with an extreme exponent ratio blows the
    // messages up; the error must carry the last finite iterate.
    let g = build_grid(3, 3, true).unwrap();
    let spec = EnsembleSpec {
        field_strength: 1.0,
        interaction_strength: 2.0,
        coupling: CouplingMode::Mixed,
        seed: 3,
        num_models: 1,
    };
    let p: LogPotentials = sample_ising(&g, &spec, 0).unwrap();
    // q_i = (1 - c_i)/4; c_i = -3.96 gives q = 1.24; c_a = 0.25 gives
    // D = 0.01 and exponents of magnitude ~100.
    let c = symmetric_numbers(&g, -3.96, 0.25);
    let mut opts = PropagationOptions::default();
    opts.damping = 1.0;
    match run_counting_bp(&g, &p, &c, &opts) {
        Err(Error::NonFiniteMessage {
            iteration, last, ..
        }) => {
            assert!(iteration >= 1);
            assert!(!last.converged);
            assert!(last.log_partition_estimate.is_finite());
            for belief in last.beliefs.node.iter().chain(&last.beliefs.factor) {
                assert!(belief.iter().all(|x| x.is_finite()));
            }
        }
        Ok(r) => {
            // Acceptable alternative: the run stays finite and simply
            // fails to converge.
            assert!(!r.converged, "expected divergence or non-convergence");
        }
        Err(other) => panic!("unexpected error {other}"),
    }
}

#[test]
fn synchronous_schedule_also_reaches_tree_fixed_points() {
    let g = random_tree(6, 3, 11);
    let p = random_potentials(&g, 0.8, 12);
    let b = bethe_numbers(&g);
    let mut opts = PropagationOptions::default();
    opts.schedule = Schedule::Synchronous;
    opts.max_iters = 20_000;
    let r = run_counting_bp(&g, &p, &b, &opts).unwrap();
    assert!(r.converged);
    let exact = exact_infer(&g, &p).unwrap();
    assert!((r.log_partition_estimate - exact.log_partition).abs() < 1e-6);
}

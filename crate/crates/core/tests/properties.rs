//! Property tests over randomized models.

use bethe_core::rng::Stream;
use bethe_core::*;
use proptest::prelude::*;

/// Strategy: a small random factor graph (unique scopes, mixed
/// cardinalities and scope sizes) plus a potential seed.
fn small_model() -> impl Strategy<Value = (FactorGraph, u64)> {
    (2usize..6, any::<u64>()).prop_map(|(n, seed)| {
        let mut stream = Stream::new(seed);
        let cards: Vec<usize> = (0..n).map(|_| 2 + (stream.next_u64() % 2) as usize).collect();
        let mut scopes: Vec<Vec<usize>> = Vec::new();
        let num_factors = 1 + (stream.next_u64() % (2 * n as u64)) as usize;
        for _ in 0..num_factors {
            let size = 1 + (stream.next_u64() % 3).min(n as u64 - 1) as usize;
            let mut scope: Vec<usize> = Vec::new();
            while scope.len() < size {
                let v = (stream.next_u64() % n as u64) as usize;
                if !scope.contains(&v) {
                    scope.push(v);
                }
            }
            scope.sort_unstable();
            if !scopes.contains(&scope) {
                scopes.push(scope);
            }
        }
        scopes.sort();
        (FactorGraph::new(cards, scopes).unwrap(), seed)
    })
}

fn potentials_for(graph: &FactorGraph, seed: u64) -> LogPotentials {
    let mut stream = Stream::new(seed ^ 0xA5A5_A5A5);
    let node: Vec<Vec<f64>> = graph
        .cardinalities()
        .iter()
        .map(|&c| (0..c).map(|_| stream.range(-2.0, 2.0)).collect())
        .collect();
    let factor: Vec<Vec<f64>> = (0..graph.num_factors())
        .map(|a| {
            (0..graph.factor_states(a))
                .map(|_| stream.range(-2.0, 2.0))
                .collect()
        })
        .collect();
    LogPotentials::new(graph, node, factor).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eliminator_agrees_with_brute_force((graph, seed) in small_model()) {
        let pots = potentials_for(&graph, seed);
        let e = exact_infer(&graph, &pots).unwrap();
        let b = brute_force_infer(&graph, &pots).unwrap();
        prop_assert!((e.log_partition - b.log_partition).abs() < 1e-10);
        for (x, y) in e.node_marginals.iter().zip(&b.node_marginals) {
            for (u, v) in x.iter().zip(y) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
        for (x, y) in e.factor_marginals.iter().zip(&b.factor_marginals) {
            for (u, v) in x.iter().zip(y) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log_z_is_invariant_under_factor_reordering((graph, seed) in small_model()) {
        let pots = potentials_for(&graph, seed);
        let base = exact_infer(&graph, &pots).unwrap().log_partition;
        // Reverse the factor list.
        let scopes: Vec<Vec<usize>> = graph.factors().iter().rev().cloned().collect();
        let tables: Vec<Vec<f64>> = (0..graph.num_factors())
            .rev()
            .map(|a| pots.factor_table(a).to_vec())
            .collect();
        let node = (0..graph.num_vars()).map(|i| pots.node_table(i).to_vec()).collect();
        let g2 = FactorGraph::new(graph.cardinalities().to_vec(), scopes).unwrap();
        let p2 = LogPotentials::new(&g2, node, tables).unwrap();
        let reordered = exact_infer(&g2, &p2).unwrap().log_partition;
        prop_assert!((base - reordered).abs() < 1e-9);
    }

    #[test]
    fn model_text_round_trip((graph, seed) in small_model()) {
        let pots = potentials_for(&graph, seed);
        let text = serialize_model(&graph, &pots);
        let (g2, p2): (FactorGraph, LogPotentials) = parse_model(&text).unwrap();
        prop_assert_eq!(&graph, &g2);
        prop_assert_eq!(&pots, &p2);
    }

    #[test]
    fn gap_identity_holds_for_arbitrary_beliefs((graph, seed) in small_model()) {
        // The identity is algebraic: it holds for any normalized belief
        // set, consistent or not, as long as c is variable-valid.
        let mut stream = Stream::new(seed ^ 0x1234_5678);
        let node: Vec<Vec<f64>> = graph.cardinalities().iter().map(|&c| {
            let raw: Vec<f64> = (0..c).map(|_| stream.range(0.05, 1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        }).collect();
        let factor: Vec<Vec<f64>> = (0..graph.num_factors()).map(|a| {
            let raw: Vec<f64> = (0..graph.factor_states(a)).map(|_| stream.range(0.05, 1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        }).collect();
        let beliefs = BeliefSet { node, factor };
        let rho: Vec<f64> = (0..graph.num_factors()).map(|_| stream.range(-1.5, 1.5)).collect();
        let cnode: Vec<f64> = (0..graph.num_vars()).map(|i| {
            let mut s = 1.0;
            for &(a, _) in graph.var_factors(i) {
                s -= rho[a];
            }
            s
        }).collect();
        let c = CountingNumbers::new(cnode, rho);
        let (lhs, rhs) = entropy_gap_identity(&graph, &beliefs, &c).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10, "lhs {} rhs {}", lhs, rhs);
    }

    #[test]
    fn sampled_ising_respects_mode_bounds(seed in any::<u64>(), idx in 0u64..32) {
        let g = build_grid(2, 3, false).unwrap();
        let spec = EnsembleSpec {
            field_strength: 0.7,
            interaction_strength: 1.3,
            coupling: CouplingMode::Attractive,
            seed,
            num_models: 32,
        };
        let p: LogPotentials = sample_ising(&g, &spec, idx).unwrap();
        for a in 0..g.num_factors() {
            let t = p.factor_table(a);
            // Spin product symmetry of the table.
            prop_assert!(t[0] >= 0.0 && t[0] <= 1.3);
            prop_assert_eq!(t[0], t[3]);
            prop_assert_eq!(t[1], t[2]);
            prop_assert_eq!(t[0], -t[1]);
        }
    }
}

/// Spanning trees drawn with random edge orders stay variable-valid
/// through the tree-reweighting construction.
#[test]
fn random_tree_mixtures_are_variable_valid() {
    let g = build_grid(3, 3, false).unwrap();
    let m = g.num_factors();
    let mut stream = Stream::new(4242);
    for _ in 0..20 {
        let mut trees = Vec::new();
        for _ in 0..3 {
            // Random Kruskal: shuffle edge indices.
            let mut order: Vec<usize> = (0..m).collect();
            for k in (1..m).rev() {
                let j = (stream.next_u64() % (k as u64 + 1)) as usize;
                order.swap(k, j);
            }
            let mut parent: Vec<usize> = (0..g.num_vars()).collect();
            fn find(parent: &mut Vec<usize>, x: usize) -> usize {
                let mut r = x;
                while parent[r] != r {
                    r = parent[r];
                }
                parent[x] = r;
                r
            }
            let mut tree = Vec::new();
            for &a in &order {
                let (u, v) = (g.scope(a)[0], g.scope(a)[1]);
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru] = rv;
                    tree.push(a);
                }
            }
            tree.sort_unstable();
            trees.push(tree);
        }
        let w = 1.0 / trees.len() as f64;
        let dist = TreeDistribution::new(&g, trees, vec![w; 3]).unwrap();
        let c = trw_numbers(&g, &dist).unwrap();
        assert!(is_variable_valid(&c, &g, 1e-12));
        assert!(c
            .factor
            .iter()
            .all(|&ca| ca >= 0.0 && ca <= 1.0 + 1e-12));
    }
}

//! Error metrics against the exact oracle.

use bethe_core::{ExactResult, InferenceResult};

use crate::methods::Method;

#[derive(Clone, Debug)]
pub struct ErrorRecord {
    pub model_index: u64,
    pub method: Method,
    pub logz_error: f64,
    pub marginal_l1: f64,
    pub converged: bool,
    pub iterations: usize,
    pub inference_calls: usize,
}

/// `(logz_error, marginal_l1)`: the absolute log-partition error and the
/// L1 distance between region marginals averaged over all regions
/// (variables and factors together).
pub fn metric_errors(exact: &ExactResult, approx: &InferenceResult) -> (f64, f64) {
    let logz_error = (exact.log_partition - approx.log_partition_estimate).abs();
    let mut l1 = 0.0;
    for (truth, belief) in exact.node_marginals.iter().zip(&approx.beliefs.node) {
        l1 += truth
            .iter()
            .zip(belief)
            .map(|(t, b)| (t - b).abs())
            .sum::<f64>();
    }
    for (truth, belief) in exact.factor_marginals.iter().zip(&approx.beliefs.factor) {
        l1 += truth
            .iter()
            .zip(belief)
            .map(|(t, b)| (t - b).abs())
            .sum::<f64>();
    }
    let regions = (exact.node_marginals.len() + exact.factor_marginals.len()) as f64;
    (logz_error, l1 / regions)
}

/// Sample mean and standard error of a slice.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use bethe_core::*;

    #[test]
    fn zero_error_when_approx_equals_exact() {
        let g = build_grid(1, 2, false).unwrap();
        let p: LogPotentials = ising_potentials(&g, &[0.2, -0.1], &[0.6]).unwrap();
        let exact = exact_infer(&g, &p).unwrap();
        let approx = InferenceResult {
            beliefs: BeliefSet {
                node: exact.node_marginals.clone(),
                factor: exact.factor_marginals.clone(),
            },
            log_partition_estimate: exact.log_partition,
            converged: true,
            iterations: 0,
        };
        let (dz, l1) = metric_errors(&exact, &approx);
        assert_eq!(dz, 0.0);
        assert_eq!(l1, 0.0);
    }

    #[test]
    fn uniform_against_a_point_mass_scores_one() {
        // A single variable forced to state 1; uniform beliefs are off by
        // an L1 distance of (almost exactly) one.
        let g = FactorGraph::new(vec![2], vec![]).unwrap();
        let p = LogPotentials::new(&g, vec![vec![0.0, 60.0]], vec![]).unwrap();
        let exact = exact_infer(&g, &p).unwrap();
        let approx = InferenceResult {
            beliefs: BeliefSet::uniform(&g),
            log_partition_estimate: 0.0,
            converged: true,
            iterations: 0,
        };
        let (_, l1) = metric_errors(&exact, &approx);
        assert!((l1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tree_with_bethe_is_numerically_exact() {
        let g = FactorGraph::new(vec![2, 2, 2], vec![vec![0, 1], vec![1, 2]]).unwrap();
        let p: LogPotentials =
            ising_potentials(&g, &[0.3, -0.5, 0.2], &[0.9, -0.7]).unwrap();
        let exact = exact_infer(&g, &p).unwrap();
        let run = run_counting_bp(&g, &p, &bethe_numbers(&g), &PropagationOptions::default())
            .unwrap();
        let (dz, l1) = metric_errors(&exact, &run);
        assert!(dz < 1e-6);
        assert!(l1 < 1e-6);
    }

    #[test]
    fn stderr_of_constant_sample_is_zero() {
        let (m, se) = mean_and_stderr(&[2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
        let (m, se) = mean_and_stderr(&[1.0]);
        assert_eq!(m, 1.0);
        assert_eq!(se, 0.0);
    }
}

//! Random Ising ensembles over pairwise binary graphs.
//!
//! The spin convention maps state 0 to -1 and state 1 to +1. A field
//! `theta_i` becomes the node table `(-theta_i, +theta_i)` and a coupling
//! `theta_ij` becomes the factor table `theta_ij * x_i * x_j` over the
//! four joint states.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{FactorGraph, LogPotentials};
use crate::real::Real;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingMode {
    /// Couplings uniform on `[-omega_I, omega_I]`.
    Mixed,
    /// Couplings uniform on `[0, omega_I]`.
    Attractive,
}

impl FromStr for CouplingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(CouplingMode::Mixed),
            "attractive" => Ok(CouplingMode::Attractive),
            other => Err(Error::InvalidArgument(format!(
                "unknown coupling mode '{other}' (expected 'mixed' or 'attractive')"
            ))),
        }
    }
}

impl std::fmt::Display for CouplingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CouplingMode::Mixed => "mixed",
            CouplingMode::Attractive => "attractive",
        })
    }
}

/// Parameters of a random model ensemble. Fields are drawn uniformly
/// from `[-field_strength, field_strength]`.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub field_strength: f64,
    pub interaction_strength: f64,
    pub coupling: CouplingMode,
    pub seed: u64,
    pub num_models: usize,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.field_strength < 0.0 || !self.field_strength.is_finite() {
            return Err(Error::InvalidArgument(
                "field strength must be a nonnegative finite number".into(),
            ));
        }
        if self.interaction_strength < 0.0 || !self.interaction_strength.is_finite() {
            return Err(Error::InvalidArgument(
                "interaction strength must be a nonnegative finite number".into(),
            ));
        }
        if self.num_models == 0 {
            return Err(Error::InvalidArgument("num_models must be positive".into()));
        }
        Ok(())
    }
}

fn require_pairwise_binary(graph: &FactorGraph) -> Result<()> {
    if !graph.is_pairwise() || !graph.is_binary() {
        return Err(Error::InvalidArgument(
            "Ising potentials need a pairwise binary graph".into(),
        ));
    }
    Ok(())
}

/// Builds the log-potential tables for given field and coupling values.
pub fn ising_potentials<T: Real>(
    graph: &FactorGraph,
    fields: &[f64],
    couplings: &[f64],
) -> Result<LogPotentials<T>> {
    require_pairwise_binary(graph)?;
    if fields.len() != graph.num_vars() || couplings.len() != graph.num_factors() {
        return Err(Error::InvalidArgument(
            "field/coupling vector lengths must match the graph".into(),
        ));
    }
    let node_tables: Vec<Vec<T>> = fields
        .iter()
        .map(|&t| vec![T::of(-t), T::of(t)])
        .collect();
    // States (x_i, x_j) in {0,1}^2 map to spins {-1,+1}^2; the table entry
    // is theta * spin_i * spin_j, laid out with x_j fastest.
    let factor_tables: Vec<Vec<T>> = couplings
        .iter()
        .map(|&t| vec![T::of(t), T::of(-t), T::of(-t), T::of(t)])
        .collect();
    LogPotentials::new(graph, node_tables, factor_tables)
}

/// Samples model `model_index` of the ensemble.
///
/// The draw stream is derived from `(spec.seed, model_index)`, so members
/// can be generated in any order (or concurrently) with identical
/// results. Within one model all field draws come first (variable order)
/// followed by all coupling draws (canonical factor order).
pub fn sample_ising<T: Real>(
    graph: &FactorGraph,
    spec: &EnsembleSpec,
    model_index: u64,
) -> Result<LogPotentials<T>> {
    require_pairwise_binary(graph)?;
    spec.validate()?;
    let mut stream = Stream::substream(spec.seed, model_index);
    let wf = spec.field_strength;
    let fields: Vec<f64> = (0..graph.num_vars())
        .map(|_| stream.range(-wf, wf))
        .collect();
    let wi = spec.interaction_strength;
    let couplings: Vec<f64> = (0..graph.num_factors())
        .map(|_| match spec.coupling {
            CouplingMode::Mixed => stream.range(-wi, wi),
            CouplingMode::Attractive => stream.range(0.0, wi),
        })
        .collect();
    ising_potentials(graph, &fields, &couplings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_complete, build_grid};

    fn spec(wf: f64, wi: f64, mode: CouplingMode, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            field_strength: wf,
            interaction_strength: wi,
            coupling: mode,
            seed,
            num_models: 1,
        }
    }

    #[test]
    fn zero_strengths_give_zero_tables() {
        let g = build_grid(2, 2, false).unwrap();
        let p: LogPotentials = sample_ising(&g, &spec(0.0, 0.0, CouplingMode::Mixed, 3), 0).unwrap();
        for i in 0..g.num_vars() {
            assert!(p.node_table(i).iter().all(|&x| x == 0.0));
        }
        for a in 0..g.num_factors() {
            assert!(p.factor_table(a).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn forced_coupling_sign_pattern() {
        let g = build_grid(1, 2, false).unwrap();
        let w = 0.375;
        let p: LogPotentials = ising_potentials(&g, &[0.0, 0.0], &[w]).unwrap();
        assert_eq!(p.factor_table(0), &[w, -w, -w, w]);
    }

    #[test]
    fn draws_respect_ranges() {
        let g = build_complete(6).unwrap();
        for k in 0..50u64 {
            let p: LogPotentials =
                sample_ising(&g, &spec(1.0, 2.0, CouplingMode::Mixed, 11), k).unwrap();
            for i in 0..g.num_vars() {
                assert!(p.node_table(i)[1].abs() <= 1.0);
            }
            for a in 0..g.num_factors() {
                assert!(p.factor_table(a)[0].abs() <= 2.0);
            }
            let q: LogPotentials =
                sample_ising(&g, &spec(1.0, 2.0, CouplingMode::Attractive, 11), k).unwrap();
            for a in 0..g.num_factors() {
                // factor_table[0] = +theta under the spin map
                assert!(q.factor_table(a)[0] >= 0.0);
                assert!(q.factor_table(a)[0] <= 2.0);
            }
        }
    }

    #[test]
    fn deterministic_per_model_index() {
        let g = build_grid(3, 3, false).unwrap();
        let s = spec(1.0, 1.5, CouplingMode::Mixed, 99);
        let a: LogPotentials = sample_ising(&g, &s, 7).unwrap();
        let b: LogPotentials = sample_ising(&g, &s, 7).unwrap();
        assert_eq!(a, b);
        let c: LogPotentials = sample_ising(&g, &s, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mixed_draws_look_uniform() {
        // Kolmogorov-Smirnov distance of pooled coupling draws against
        // U[-2, 2]; with ~2000 samples the 1% critical value is ~0.036.
        let g = build_complete(10).unwrap();
        let s = spec(0.0, 2.0, CouplingMode::Mixed, 5);
        let mut draws = Vec::new();
        for k in 0..45u64 {
            let p: LogPotentials = sample_ising(&g, &s, k).unwrap();
            for a in 0..g.num_factors() {
                draws.push(p.factor_table(a)[0]);
            }
        }
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        let mut d = 0.0f64;
        for (k, &x) in draws.iter().enumerate() {
            let cdf = (x + 2.0) / 4.0;
            d = d.max((cdf - k as f64 / n).abs());
            d = d.max(((k + 1) as f64 / n - cdf).abs());
        }
        assert!(d < 0.036, "KS distance {d}");
    }

    #[test]
    fn rejects_non_ising_graphs() {
        let g = FactorGraph::new(vec![2, 3], vec![vec![0, 1]]).unwrap();
        assert!(sample_ising::<f64>(&g, &spec(1.0, 1.0, CouplingMode::Mixed, 0), 0).is_err());
        let g = FactorGraph::new(vec![2, 2, 2], vec![vec![0, 1, 2]]).unwrap();
        assert!(sample_ising::<f64>(&g, &spec(1.0, 1.0, CouplingMode::Mixed, 0), 0).is_err());
    }
}

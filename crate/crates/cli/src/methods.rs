//! The closed list of approximation methods and their resolution into
//! counting numbers (static families) or optimizer runs (adaptive ones).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bethe_core::{
    bethe_numbers, convex_bethe_c, convex_bethe_mu, convex_bethe_u, estimate_entropy_moments,
    grid_comb_trees, parse_moments, run_counting_bp, serialize_moments, trw_numbers, trw_opt,
    BoundOptions, CountingNumbers, EntropyMoments, Error, FactorGraph, InferenceResult,
    LogPotentials, PropagationOptions,
};

use crate::error::{HarnessError, Result};
use crate::graphspec::GraphSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Bethe,
    TrwUniform,
    TrwOpt,
    ConvexBetheC,
    ConvexBetheMu,
    ConvexBetheMuVv,
    ConvexBetheU,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Bethe,
        Method::TrwUniform,
        Method::TrwOpt,
        Method::ConvexBetheC,
        Method::ConvexBetheMu,
        Method::ConvexBetheMuVv,
        Method::ConvexBetheU,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Bethe => "bethe",
            Method::TrwUniform => "trw_uniform",
            Method::TrwOpt => "trw_opt",
            Method::ConvexBetheC => "convexBethe_c",
            Method::ConvexBetheMu => "convexBethe_mu",
            Method::ConvexBetheMuVv => "convexBethe_mu_vv",
            Method::ConvexBetheU => "convexBethe_u",
        }
    }

    /// Adaptive methods re-optimize per model; static ones are a fixed
    /// function of the graph structure.
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Method::TrwOpt | Method::ConvexBetheU)
    }

    pub fn needs_moments(&self) -> bool {
        matches!(self, Method::ConvexBetheMu | Method::ConvexBetheMuVv)
    }
}

impl FromStr for Method {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                HarnessError::Config(format!(
                    "unknown method '{s}' (expected one of: {})",
                    names.join(", ")
                ))
            })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn parse_method_list(s: &str) -> Result<Vec<Method>> {
    let methods: Result<Vec<Method>> = s.split_whitespace().map(str::parse).collect();
    let methods = methods?;
    if methods.is_empty() {
        return Err(HarnessError::Config("empty method list".into()));
    }
    Ok(methods)
}

#[derive(Clone, Debug)]
pub struct MomentsOptions {
    pub chains: usize,
    pub samples_per_chain: usize,
    pub thin: usize,
    pub rhat_threshold: f64,
}

impl Default for MomentsOptions {
    fn default() -> Self {
        MomentsOptions {
            chains: 5,
            samples_per_chain: 20_000,
            thin: 10,
            rhat_threshold: 1.1,
        }
    }
}

/// Per-graph state shared by every model of a sweep: precomputed static
/// counting numbers and the (cached) entropy moments.
pub struct MethodContext {
    pub graph: FactorGraph,
    pub spec: Option<GraphSpec>,
    pub propagation: PropagationOptions,
    pub bound: BoundOptions,
    statics: Vec<(Method, CountingNumbers)>,
    pub moments: Option<EntropyMoments>,
    pub moments_converged: bool,
}

impl MethodContext {
    /// Prepares everything the listed methods need. Moments are loaded
    /// from `moments_path` when the file exists, estimated (and written
    /// back when a path is given) otherwise.
    pub fn prepare(
        graph: FactorGraph,
        spec: Option<GraphSpec>,
        methods: &[Method],
        propagation: PropagationOptions,
        bound: BoundOptions,
        moments_path: Option<&Path>,
        moments_opts: &MomentsOptions,
        seed: u64,
    ) -> Result<Self> {
        let mut statics = Vec::new();
        let mut moments: Option<EntropyMoments> = None;
        let mut moments_converged = true;
        for &method in methods {
            match method {
                Method::Bethe => statics.push((method, bethe_numbers(&graph))),
                Method::TrwUniform => {
                    let Some(GraphSpec::Grid {
                        rows,
                        cols,
                        toroidal: false,
                    }) = spec
                    else {
                        return Err(HarnessError::Config(
                            "trw_uniform needs a non-toroidal grid graph spec (the four \
                             comb spanning trees are grid structures)"
                                .into(),
                        ));
                    };
                    let trees = grid_comb_trees(&graph, rows, cols)?;
                    statics.push((method, trw_numbers(&graph, &trees)?));
                }
                Method::ConvexBetheC => {
                    statics.push((method, convex_bethe_c(&graph)?.numbers));
                }
                Method::ConvexBetheMu | Method::ConvexBetheMuVv => {
                    if moments.is_none() {
                        let m = obtain_moments(&graph, moments_path, moments_opts, seed)?;
                        moments_converged = m.converged;
                        moments = Some(m);
                    }
                    let m = moments.as_ref().unwrap();
                    let enforce = method == Method::ConvexBetheMuVv;
                    statics.push((method, convex_bethe_mu(&graph, m, enforce)?.numbers));
                }
                Method::TrwOpt | Method::ConvexBetheU => {}
            }
        }
        Ok(MethodContext {
            graph,
            spec,
            propagation,
            bound,
            statics,
            moments,
            moments_converged,
        })
    }

    pub fn static_numbers(&self, method: Method) -> Option<&CountingNumbers> {
        self.statics
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, c)| c)
    }
}

fn obtain_moments(
    graph: &FactorGraph,
    path: Option<&Path>,
    opts: &MomentsOptions,
    seed: u64,
) -> Result<EntropyMoments> {
    if let Some(path) = path {
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let m: EntropyMoments = parse_moments(&text)?;
            if !m.matches(graph) {
                return Err(HarnessError::Config(format!(
                    "moments file {} has dimension {}, but the graph needs {}",
                    path.display(),
                    m.dim(),
                    graph.num_vars() + graph.num_factors()
                )));
            }
            return Ok(m);
        }
    }
    // A dedicated stream keeps the walk independent of model sampling.
    let moments_seed = bethe_core::rng::mix_seed(seed, 0x4D4F4D);
    let m = estimate_entropy_moments(
        graph,
        opts.chains,
        opts.samples_per_chain,
        opts.thin,
        opts.rhat_threshold,
        moments_seed,
    )?;
    if let Some(path) = path {
        std::fs::write(path, serialize_moments(&m))?;
    }
    Ok(m)
}

/// Estimate moments for a graph, honoring an existing cache file.
pub fn moments_for(
    graph: &FactorGraph,
    path: Option<&PathBuf>,
    opts: &MomentsOptions,
    seed: u64,
) -> Result<EntropyMoments> {
    obtain_moments(graph, path.map(PathBuf::as_path), opts, seed)
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub result: InferenceResult,
    pub inference_calls: usize,
}

/// Runs one method on one model. Static methods execute a single
/// propagation; a run whose messages blow up still contributes its last
/// finite iterate, flagged non-converged.
pub fn run_method(
    ctx: &MethodContext,
    potentials: &LogPotentials,
    method: Method,
) -> Result<MethodRun> {
    if let Some(numbers) = ctx.static_numbers(method) {
        let result = match run_counting_bp(&ctx.graph, potentials, numbers, &ctx.propagation) {
            Ok(r) => r,
            Err(Error::NonFiniteMessage { last, .. }) => *last,
            Err(e) => return Err(e.into()),
        };
        return Ok(MethodRun {
            result,
            inference_calls: 1,
        });
    }
    match method {
        Method::ConvexBetheU => {
            let run = convex_bethe_u(&ctx.graph, potentials, &ctx.bound)?;
            Ok(MethodRun {
                result: run.final_run,
                inference_calls: run.inference_calls,
            })
        }
        Method::TrwOpt => {
            let run = trw_opt(&ctx.graph, potentials, &ctx.bound)?;
            Ok(MethodRun {
                result: run.final_run,
                inference_calls: run.inference_calls,
            })
        }
        other => Err(HarnessError::Config(format!(
            "method {other} was not prepared for this context"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            let parsed: Method = m.name().parse().unwrap();
            assert_eq!(parsed, m);
        }
        assert!("betheX".parse::<Method>().is_err());
        assert!(parse_method_list("bethe trw_uniform convexBethe_u").is_ok());
        assert!(parse_method_list("").is_err());
    }
}

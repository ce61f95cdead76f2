//! The three sweep drivers. Each returns the full CSV as a string;
//! output is a pure function of the configuration, independent of the
//! number of worker threads (cells are computed in parallel and gathered
//! in canonical order).

use std::path::PathBuf;

use bethe_core::{
    exact_infer, find_convexity_certificate, is_variable_valid, run_counting_bp, sample_ising,
    symmetric_numbers, BoundOptions, CouplingMode, EnsembleSpec, Error, ExactResult, FactorGraph,
    LogPotentials, PropagationOptions, Schedule,
};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{HarnessError, Result};
use crate::graphspec::GraphSpec;
use crate::methods::{parse_method_list, run_method, Method, MethodContext, MomentsOptions};
use crate::metrics::{mean_and_stderr, metric_errors};
use crate::{fmt_f64, fmt_flag};

/// Everything the sweep drivers share, assembled from a config file plus
/// command-line overrides.
#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub graph_spec: GraphSpec,
    pub coupling: CouplingMode,
    pub methods: Vec<Method>,
    pub num_models: usize,
    pub seed: u64,
    pub propagation: PropagationOptions,
    pub bound: BoundOptions,
    pub moments_path: Option<PathBuf>,
    pub moments_opts: MomentsOptions,
}

impl SweepSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let graph_spec: GraphSpec = cfg.require("graph")?.parse()?;
        let coupling: CouplingMode = cfg
            .get("coupling")
            .unwrap_or("mixed")
            .parse()
            .map_err(|e: Error| HarnessError::Config(e.to_string()))?;
        let methods = parse_method_list(cfg.get("methods").unwrap_or("bethe"))?;
        let num_models = cfg.get_usize("num_models", 20)?;
        let seed = cfg.get_u64("seed", 0)?;

        let mut propagation = PropagationOptions::default();
        propagation.damping = cfg.get_f64("damping", propagation.damping)?;
        propagation.max_iters = cfg.get_usize("max_iters", propagation.max_iters)?;
        propagation.tol = cfg.get_f64("tol", propagation.tol)?;
        propagation.schedule = match cfg.get("schedule").unwrap_or("sequential") {
            "sequential" => Schedule::Sequential,
            "synchronous" => Schedule::Synchronous,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown schedule '{other}' (sequential or synchronous)"
                )))
            }
        };
        propagation.seed = seed;
        propagation.init_noise = cfg.get_f64("init_noise", 0.0)?;
        propagation
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;

        let mut bound = BoundOptions::default();
        bound.max_outer = cfg.get_usize("max_outer", bound.max_outer)?;
        bound.gap_tol = cfg.get_f64("gap_tol", bound.gap_tol)?;
        bound.max_line_probes = cfg.get_usize("line_probes", bound.max_line_probes)?;
        bound.propagation = propagation.clone();

        let moments_path = cfg.get("moments").map(PathBuf::from);
        let mut moments_opts = MomentsOptions::default();
        moments_opts.chains = cfg.get_usize("moments_chains", moments_opts.chains)?;
        moments_opts.samples_per_chain =
            cfg.get_usize("moments_samples", moments_opts.samples_per_chain)?;
        moments_opts.thin = cfg.get_usize("moments_thin", moments_opts.thin)?;
        moments_opts.rhat_threshold =
            cfg.get_f64("moments_rhat", moments_opts.rhat_threshold)?;

        Ok(SweepSettings {
            graph_spec,
            coupling,
            methods,
            num_models,
            seed,
            propagation,
            bound,
            moments_path,
            moments_opts,
        })
    }

    fn context(&self, graph: FactorGraph) -> Result<MethodContext> {
        MethodContext::prepare(
            graph,
            Some(self.graph_spec),
            &self.methods,
            self.propagation.clone(),
            self.bound.clone(),
            self.moments_path.as_deref(),
            &self.moments_opts,
            self.seed,
        )
    }

    fn ensemble(&self, omega_f: f64, omega_i: f64) -> EnsembleSpec {
        EnsembleSpec {
            field_strength: omega_f,
            interaction_strength: omega_i,
            coupling: self.coupling,
            seed: self.seed,
            num_models: self.num_models,
        }
    }
}

struct ModelInstance {
    potentials: LogPotentials,
    exact: ExactResult,
}

fn instantiate(graph: &FactorGraph, spec: &EnsembleSpec, index: u64) -> Result<ModelInstance> {
    let potentials = sample_ising(graph, spec, index)?;
    let exact = exact_infer(graph, &potentials)?;
    Ok(ModelInstance { potentials, exact })
}

/// Coupling sweep: one row per (interaction strength, method) with mean
/// and standard error of both error metrics over the model ensemble.
pub fn sweep_coupling(
    settings: &SweepSettings,
    omega_f: f64,
    omega_i: &[f64],
) -> Result<String> {
    require_axis("omega_i", omega_i)?;
    let graph = settings.graph_spec.build()?;
    let ctx = settings.context(graph.clone())?;
    if settings.methods.iter().any(Method::needs_moments) && !ctx.moments_converged {
        eprintln!(
            "warning: entropy moments were not converged at the requested threshold; \
             convexBethe_mu results carry that uncertainty"
        );
    }

    // (point, model) jobs, gathered in order.
    let jobs: Vec<(usize, u64)> = omega_i
        .iter()
        .enumerate()
        .flat_map(|(pi, _)| (0..settings.num_models as u64).map(move |k| (pi, k)))
        .collect();
    let cells: Vec<Vec<(f64, f64, bool, usize)>> = jobs
        .par_iter()
        .map(|&(pi, k)| {
            let spec = settings.ensemble(omega_f, omega_i[pi]);
            let model = instantiate(&graph, &spec, k)?;
            let mut per_method = Vec::with_capacity(settings.methods.len());
            for &method in &settings.methods {
                let run = run_method(&ctx, &model.potentials, method)?;
                let (dz, l1) = metric_errors(&model.exact, &run.result);
                per_method.push((dz, l1, run.result.converged, run.inference_calls));
            }
            Ok(per_method)
        })
        .collect::<Result<_>>()?;

    let mut out = String::from(
        "omega_f,omega_i,method,mean_logz_err,stderr_logz_err,mean_marg_l1,stderr_marg_l1,frac_converged,mean_inference_calls\n",
    );
    for (pi, &wi) in omega_i.iter().enumerate() {
        for (mi, &method) in settings.methods.iter().enumerate() {
            let mut dzs = Vec::with_capacity(settings.num_models);
            let mut l1s = Vec::with_capacity(settings.num_models);
            let mut conv = 0usize;
            let mut calls = 0usize;
            for k in 0..settings.num_models {
                let (dz, l1, c, n) = cells[pi * settings.num_models + k][mi];
                dzs.push(dz);
                l1s.push(l1);
                conv += c as usize;
                calls += n;
            }
            let (dz_mean, dz_se) = mean_and_stderr(&dzs);
            let (l1_mean, l1_se) = mean_and_stderr(&l1s);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                fmt_f64(omega_f),
                fmt_f64(wi),
                method,
                fmt_f64(dz_mean),
                fmt_f64(dz_se),
                fmt_f64(l1_mean),
                fmt_f64(l1_se),
                fmt_f64(conv as f64 / settings.num_models as f64),
                fmt_f64(calls as f64 / settings.num_models as f64),
            ));
        }
    }
    Ok(out)
}

fn require_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(HarnessError::Config(format!(
            "swept axis '{name}' needs at least 2 points"
        )));
    }
    Ok(())
}

const SINGULARITY_TOL: f64 = 1e-12;

/// Whether the symmetric counting numbers hit an update singularity on
/// this graph: a zero factor number or a vanishing exponent denominator.
fn symmetric_singularity(graph: &FactorGraph, c_node: f64, c_factor: f64) -> bool {
    if c_factor.abs() < SINGULARITY_TOL {
        return true;
    }
    (0..graph.num_vars()).any(|i| {
        let d = graph.degree(i);
        if d == 0 {
            return false;
        }
        let q = (1.0 - c_node) / d as f64;
        (c_factor - q + 1.0).abs() < SINGULARITY_TOL
    })
}

/// Counting-number-space sweep over a symmetric-structure graph. Each
/// cell runs propagation with constant (c_i, c_alpha) on every sampled
/// model and is annotated with the validity, certificate and singularity
/// flags. Singular cells carry NaN errors.
pub fn sweep_counting_space(
    settings: &SweepSettings,
    omega_f: f64,
    omega_i: f64,
    ci_axis: &[f64],
    ca_axis: &[f64],
) -> Result<String> {
    require_axis("ci_range", ci_axis)?;
    require_axis("ca_range", ca_axis)?;
    if !settings.graph_spec.is_symmetric() {
        return Err(HarnessError::Config(format!(
            "counting-space sweeps need a symmetric structure (toroidal grid or complete \
             graph), got {}",
            settings.graph_spec
        )));
    }
    let graph = settings.graph_spec.build()?;
    let spec = settings.ensemble(omega_f, omega_i);
    let models: Vec<ModelInstance> = (0..settings.num_models as u64)
        .map(|k| instantiate(&graph, &spec, k))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = ci_axis
        .iter()
        .enumerate()
        .flat_map(|(i, _)| (0..ca_axis.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<Result<String>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let (ci, ca) = (ci_axis[i], ca_axis[j]);
            let numbers = symmetric_numbers(&graph, ci, ca);
            let vvalid = is_variable_valid(&numbers, &graph, 1e-9);
            let certified = find_convexity_certificate(&numbers, &graph)?.is_some();
            let singular = symmetric_singularity(&graph, ci, ca);
            let (mean_dz, mean_l1, frac_conv) = if singular {
                (f64::NAN, f64::NAN, 0.0)
            } else {
                let mut dz_sum = 0.0;
                let mut l1_sum = 0.0;
                let mut conv = 0usize;
                for model in &models {
                    let result = match run_counting_bp(
                        &graph,
                        &model.potentials,
                        &numbers,
                        &settings.propagation,
                    ) {
                        Ok(r) => r,
                        Err(Error::NonFiniteMessage { last, .. }) => *last,
                        Err(e) => return Err(e.into()),
                    };
                    let (dz, l1) = metric_errors(&model.exact, &result);
                    dz_sum += dz;
                    l1_sum += l1;
                    conv += result.converged as usize;
                }
                let n = models.len() as f64;
                (dz_sum / n, l1_sum / n, conv as f64 / n)
            };
            Ok(format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt_f64(ci),
                fmt_f64(ca),
                fmt_f64(mean_dz),
                fmt_f64(mean_l1),
                fmt_f64(frac_conv),
                fmt_flag(vvalid),
                fmt_flag(certified),
                fmt_flag(singular),
            ))
        })
        .collect();

    let mut out = String::from(
        "c_i,c_alpha,mean_logz_err,mean_marg_l1,frac_converged,is_vvalid,is_certified,is_singular\n",
    );
    for row in rows {
        out.push_str(&row?);
    }
    Ok(out)
}

/// Meta-parameter difference map: per (field, interaction) pixel the
/// difference of the two methods' mean absolute errors.
pub fn sweep_meta_map(
    settings: &SweepSettings,
    pair: (Method, Method),
    omega_f_axis: &[f64],
    omega_i_axis: &[f64],
) -> Result<String> {
    require_axis("omega_f_range", omega_f_axis)?;
    require_axis("omega_i_range", omega_i_axis)?;
    let graph = settings.graph_spec.build()?;
    let ctx = {
        // Both pair methods must be prepared even if absent from
        // `methods`.
        let mut methods = settings.methods.clone();
        for m in [pair.0, pair.1] {
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        MethodContext::prepare(
            graph.clone(),
            Some(settings.graph_spec),
            &methods,
            settings.propagation.clone(),
            settings.bound.clone(),
            settings.moments_path.as_deref(),
            &settings.moments_opts,
            settings.seed,
        )?
    };

    let pixels: Vec<(usize, usize)> = omega_f_axis
        .iter()
        .enumerate()
        .flat_map(|(i, _)| (0..omega_i_axis.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<Result<String>> = pixels
        .par_iter()
        .map(|&(i, j)| {
            let (wf, wi) = (omega_f_axis[i], omega_i_axis[j]);
            let spec = settings.ensemble(wf, wi);
            let mut dz = [0.0f64; 2];
            let mut l1 = [0.0f64; 2];
            for k in 0..settings.num_models as u64 {
                let model = instantiate(&graph, &spec, k)?;
                for (slot, method) in [pair.0, pair.1].into_iter().enumerate() {
                    let run = run_method(&ctx, &model.potentials, method)?;
                    let (d, l) = metric_errors(&model.exact, &run.result);
                    dz[slot] += d;
                    l1[slot] += l;
                }
            }
            let n = settings.num_models as f64;
            Ok(format!(
                "{},{},{},{}\n",
                fmt_f64(wf),
                fmt_f64(wi),
                fmt_f64((dz[0] - dz[1]) / n),
                fmt_f64((l1[0] - l1[1]) / n),
            ))
        })
        .collect();

    let mut out = String::from("omega_f,omega_i,diff_logz_err,diff_marg_l1\n");
    for row in rows {
        out.push_str(&row?);
    }
    Ok(out)
}

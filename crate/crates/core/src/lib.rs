//! Inference for discrete Markov random fields parameterized by entropy
//! counting numbers.
//!
//! The crate provides:
//!
//! - [`model`]: factor graphs, log-potential tables, Ising ensemble
//!   generators (grids and complete graphs) and a text model format.
//! - [`exact`]: ground-truth log-partition and marginals by variable
//!   elimination, plus a brute-force enumerator used to validate it.
//! - [`counting`]: counting-number families (Bethe, tree-reweighted,
//!   symmetric), validity predicates and the concavity certificate.
//! - [`propagation`]: generalized belief propagation for arbitrary
//!   counting numbers, belief extraction and free-energy evaluation.
//! - [`polytope`]: the local marginal polytope, hit-and-run sampling,
//!   Gelman-Rubin diagnostics and entropy-moment estimation.
//! - [`optimize`]: counting-number selection — two static quadratic
//!   programs, an adaptive conditional-gradient bound minimizer, and
//!   tree-reweighted weight optimization.
//!
//! All numerical kernels are generic over the scalar type through the
//! [`Real`] trait; `f64` is the default everywhere and the type the CLI
//! and the acceptance suite use. `f32` aliases are exported at the crate
//! root for the main value types.

pub mod counting;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod polytope;
pub mod propagation;
pub mod qp;
pub mod real;
pub mod rng;
pub mod simplex;

mod tables;

pub use error::{Error, Result};
pub use real::Real;

pub use counting::{
    bethe_numbers, find_convexity_certificate, grid_comb_trees, is_factor_valid,
    is_variable_valid, symmetric_numbers, trw_numbers, ConvexityCertificate, CountingNumbers,
    TreeDistribution,
};
pub use exact::{brute_force_infer, exact_infer, ExactResult};
pub use model::{
    build_complete, build_grid, ising_potentials, parse_model, sample_ising, serialize_model,
    CouplingMode, EnsembleSpec, FactorGraph, LogPotentials,
};
pub use optimize::{
    convex_bethe_c, convex_bethe_mu, convex_bethe_u, subgradient_wrt_counting, trw_opt,
    BoundOptions, BoundRun, CertifiedNumbers, TracePoint,
};
pub use polytope::{
    estimate_entropy_moments, gelman_rubin, parse_moments, serialize_moments, ChainState,
    EntropyMoments, LocalPolytope,
};
pub use propagation::{
    entropy_gap_identity, entropy_vector, evaluate_objective, extract_beliefs, run_counting_bp,
    weighted_entropy, BeliefSet, EntropyVector, InferenceResult, MessageSet, PropagationOptions,
    Propagator, Schedule,
};

// Concrete single-precision aliases. The default scalar parameter is f64,
// so the bare type names already denote the double-precision variants.
pub type Potentials32 = model::LogPotentials<f32>;
pub type Counting32 = counting::CountingNumbers<f32>;
pub type Beliefs32 = propagation::BeliefSet<f32>;
pub type InferenceResult32 = propagation::InferenceResult<f32>;
pub type ExactResult32 = exact::ExactResult<f32>;

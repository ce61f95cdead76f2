//! Discrete factor-graph models: structure, log-potential tables,
//! benchmark generators and the text model format.

mod graph;
mod io;
mod ising;
mod potentials;

pub use graph::{build_complete, build_grid, FactorGraph};
pub use io::{parse_model, serialize_model};
pub use ising::{ising_potentials, sample_ising, CouplingMode, EnsembleSpec};
pub use potentials::LogPotentials;

pub(crate) use io::fmt_real as io_fmt_real;

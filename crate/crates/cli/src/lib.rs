//! Experiment harness: graph/ensemble specifications, method resolution,
//! error metrics and the CSV sweep drivers behind the `bethe` binary.

pub mod config;
pub mod error;
pub mod graphspec;
pub mod methods;
pub mod metrics;
pub mod sweeps;

pub use config::Config;
pub use error::{exit_code, HarnessError, Result};
pub use graphspec::GraphSpec;
pub use methods::{Method, MethodContext, MethodRun, MomentsOptions};
pub use metrics::{metric_errors, ErrorRecord};

/// Floating-point CSV formatting: 17 significant digits, which
/// round-trips f64 exactly and keeps reruns byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

//! Graph family specifications: `grid:RxC`, `grid:RxC:toroidal`,
//! `complete:N`.

use std::fmt;
use std::str::FromStr;

use bethe_core::{build_complete, build_grid, FactorGraph};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphSpec {
    Grid {
        rows: usize,
        cols: usize,
        toroidal: bool,
    },
    Complete {
        n: usize,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<FactorGraph> {
        match *self {
            GraphSpec::Grid {
                rows,
                cols,
                toroidal,
            } => Ok(build_grid(rows, cols, toroidal)?),
            GraphSpec::Complete { n } => Ok(build_complete(n)?),
        }
    }

    /// Constant counting numbers only make sense when the structure
    /// treats all variables and all factors alike.
    pub fn is_symmetric(&self) -> bool {
        matches!(
            self,
            GraphSpec::Grid { toroidal: true, .. } | GraphSpec::Complete { .. }
        )
    }
}

impl FromStr for GraphSpec {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || HarnessError::Config(format!(
            "invalid graph spec '{s}' (expected grid:RxC, grid:RxC:toroidal or complete:N)"
        ));
        match parts.as_slice() {
            ["grid", dims] | ["grid", dims, "toroidal"] => {
                let (r, c) = dims.split_once('x').ok_or_else(bad)?;
                let rows = r.parse().map_err(|_| bad())?;
                let cols = c.parse().map_err(|_| bad())?;
                Ok(GraphSpec::Grid {
                    rows,
                    cols,
                    toroidal: parts.len() == 3,
                })
            }
            ["complete", n] => Ok(GraphSpec::Complete {
                n: n.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GraphSpec::Grid {
                rows,
                cols,
                toroidal,
            } => {
                if toroidal {
                    write!(f, "grid:{rows}x{cols}:toroidal")
                } else {
                    write!(f, "grid:{rows}x{cols}")
                }
            }
            GraphSpec::Complete { n } => write!(f, "complete:{n}"),
        }
    }
}

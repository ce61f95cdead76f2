//! Log-space potential tables attached to a factor graph.

use crate::error::{Error, Result};
use crate::model::FactorGraph;
use crate::real::Real;

/// Node tables `theta_i(x_i)` and factor tables `theta_alpha(x_alpha)`
/// in natural-log space. Factor tables are flat, row-major with the last
/// scope variable fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct LogPotentials<T: Real = f64> {
    node_tables: Vec<Vec<T>>,
    factor_tables: Vec<Vec<T>>,
}

impl<T: Real> LogPotentials<T> {
    pub fn new(
        graph: &FactorGraph,
        node_tables: Vec<Vec<T>>,
        factor_tables: Vec<Vec<T>>,
    ) -> Result<Self> {
        if node_tables.len() != graph.num_vars() {
            return Err(Error::InvalidModel(format!(
                "expected {} node tables, got {}",
                graph.num_vars(),
                node_tables.len()
            )));
        }
        if factor_tables.len() != graph.num_factors() {
            return Err(Error::InvalidModel(format!(
                "expected {} factor tables, got {}",
                graph.num_factors(),
                factor_tables.len()
            )));
        }
        for (i, t) in node_tables.iter().enumerate() {
            if t.len() != graph.cardinality(i) {
                return Err(Error::InvalidModel(format!(
                    "node table {i} has {} entries, expected {}",
                    t.len(),
                    graph.cardinality(i)
                )));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "node table {i} has a non-finite entry"
                )));
            }
        }
        for (a, t) in factor_tables.iter().enumerate() {
            if t.len() != graph.factor_states(a) {
                return Err(Error::InvalidModel(format!(
                    "factor table {a} has {} entries, expected {}",
                    t.len(),
                    graph.factor_states(a)
                )));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "factor table {a} has a non-finite entry"
                )));
            }
        }
        Ok(LogPotentials {
            node_tables,
            factor_tables,
        })
    }

    /// All-zero potentials (the uniform model).
    pub fn zeros(graph: &FactorGraph) -> Self {
        LogPotentials {
            node_tables: (0..graph.num_vars())
                .map(|i| vec![T::zero(); graph.cardinality(i)])
                .collect(),
            factor_tables: (0..graph.num_factors())
                .map(|a| vec![T::zero(); graph.factor_states(a)])
                .collect(),
        }
    }

    pub fn node_table(&self, i: usize) -> &[T] {
        &self.node_tables[i]
    }

    pub fn factor_table(&self, a: usize) -> &[T] {
        &self.factor_tables[a]
    }

    pub fn node_tables(&self) -> &[Vec<T>] {
        &self.node_tables
    }

    pub fn factor_tables(&self) -> &[Vec<T>] {
        &self.factor_tables
    }

    /// Copy with a constant added to one factor table (shifts log Z by
    /// exactly that constant; marginals are unchanged).
    pub fn with_factor_shift(&self, a: usize, kappa: T) -> Self {
        let mut out = self.clone();
        for x in out.factor_tables[a].iter_mut() {
            *x += kappa;
        }
        out
    }

    pub fn to_f64(&self) -> LogPotentials<f64> {
        LogPotentials {
            node_tables: self
                .node_tables
                .iter()
                .map(|t| t.iter().map(|x| x.as_f64()).collect())
                .collect(),
            factor_tables: self
                .factor_tables
                .iter()
                .map(|t| t.iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_grid;

    #[test]
    fn shape_validation() {
        let g = build_grid(1, 2, false).unwrap();
        assert!(LogPotentials::new(&g, vec![vec![0.0; 2]; 2], vec![vec![0.0; 4]]).is_ok());
        assert!(LogPotentials::new(&g, vec![vec![0.0; 3]; 2], vec![vec![0.0; 4]]).is_err());
        assert!(LogPotentials::new(&g, vec![vec![0.0; 2]; 2], vec![vec![0.0; 3]]).is_err());
        assert!(
            LogPotentials::new(&g, vec![vec![0.0, f64::NAN], vec![0.0; 2]], vec![vec![0.0; 4]])
                .is_err()
        );
    }
}

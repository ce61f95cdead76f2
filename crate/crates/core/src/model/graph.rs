//! Factor-graph structure and the benchmark topologies.

use crate::error::{Error, Result};

/// Variables with cardinalities plus factors over variable scopes.
///
/// Scopes are strictly increasing index sequences. Generators emit
/// factors in canonical order (scopes sorted lexicographically) so that
/// counting-number vectors index identically across modules; parsed
/// models keep their file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorGraph {
    cardinalities: Vec<usize>,
    factors: Vec<Vec<usize>>,
    /// Per variable: (factor index, slot within that factor's scope).
    var_factors: Vec<Vec<(usize, usize)>>,
    /// Prefix sums of scope sizes; incidence (a, slot) flattens to
    /// `incidence_offsets[a] + slot`.
    incidence_offsets: Vec<usize>,
}

impl FactorGraph {
    pub fn new(cardinalities: Vec<usize>, factors: Vec<Vec<usize>>) -> Result<Self> {
        let n = cardinalities.len();
        for (i, &card) in cardinalities.iter().enumerate() {
            if card < 2 {
                return Err(Error::InvalidModel(format!(
                    "variable {i} has cardinality {card}; need at least 2"
                )));
            }
        }
        for (a, scope) in factors.iter().enumerate() {
            if scope.is_empty() {
                return Err(Error::InvalidModel(format!("factor {a} has empty scope")));
            }
            for w in scope.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidModel(format!(
                        "factor {a} scope is not strictly increasing: {scope:?}"
                    )));
                }
            }
            if *scope.last().unwrap() >= n {
                return Err(Error::InvalidModel(format!(
                    "factor {a} references variable {} but the model has {n} variables",
                    scope.last().unwrap()
                )));
            }
        }
        let mut var_factors = vec![Vec::new(); n];
        for (a, scope) in factors.iter().enumerate() {
            for (slot, &i) in scope.iter().enumerate() {
                var_factors[i].push((a, slot));
            }
        }
        let mut incidence_offsets = Vec::with_capacity(factors.len() + 1);
        let mut acc = 0usize;
        for scope in &factors {
            incidence_offsets.push(acc);
            acc += scope.len();
        }
        incidence_offsets.push(acc);
        Ok(FactorGraph {
            cardinalities,
            factors,
            var_factors,
            incidence_offsets,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.cardinalities[i]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn scope(&self, a: usize) -> &[usize] {
        &self.factors[a]
    }

    pub fn factors(&self) -> &[Vec<usize>] {
        &self.factors
    }

    /// Number of factors variable `i` appears in.
    pub fn degree(&self, i: usize) -> usize {
        self.var_factors[i].len()
    }

    /// Factors incident to `i` as (factor, slot) pairs.
    pub fn var_factors(&self, i: usize) -> &[(usize, usize)] {
        &self.var_factors[i]
    }

    /// Cardinalities along the scope of factor `a`.
    pub fn factor_cards(&self, a: usize) -> Vec<usize> {
        self.factors[a]
            .iter()
            .map(|&i| self.cardinalities[i])
            .collect()
    }

    /// Number of joint states of factor `a`.
    pub fn factor_states(&self, a: usize) -> usize {
        self.factors[a]
            .iter()
            .map(|&i| self.cardinalities[i])
            .product()
    }

    /// Total number of (variable, incident factor) pairs.
    pub fn num_incidences(&self) -> usize {
        *self.incidence_offsets.last().unwrap()
    }

    /// Flat index of the incidence (factor `a`, scope slot `slot`).
    pub fn incidence_index(&self, a: usize, slot: usize) -> usize {
        self.incidence_offsets[a] + slot
    }

    pub fn is_pairwise(&self) -> bool {
        self.factors.iter().all(|s| s.len() == 2)
    }

    pub fn is_binary(&self) -> bool {
        self.cardinalities.iter().all(|&c| c == 2)
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_vars()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn max_scope(&self) -> usize {
        self.factors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Index of the factor with exactly this scope, if present.
    pub fn find_factor(&self, scope: &[usize]) -> Option<usize> {
        self.factors.iter().position(|s| s == scope)
    }
}

/// Grid of binary variables with one pairwise factor per 4-neighborhood
/// edge; wraparound edges iff `toroidal`. Factors are in canonical
/// lexicographic scope order.
pub fn build_grid(rows: usize, cols: usize, toroidal: bool) -> Result<FactorGraph> {
    if rows < 1 || cols < 1 {
        return Err(Error::InvalidArgument(
            "grid needs at least one row and one column".into(),
        ));
    }
    if toroidal && (rows < 3 || cols < 3) {
        return Err(Error::InvalidArgument(
            "toroidal grid needs rows >= 3 and cols >= 3 to avoid duplicate edges".into(),
        ));
    }
    let n = rows * cols;
    let at = |r: usize, c: usize| r * cols + c;
    let mut edges: Vec<Vec<usize>> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = at(r, c);
            if c + 1 < cols {
                edges.push(vec![i, at(r, c + 1)]);
            } else if toroidal {
                let j = at(r, 0);
                edges.push(vec![j.min(i), j.max(i)]);
            }
            if r + 1 < rows {
                edges.push(vec![i, at(r + 1, c)]);
            } else if toroidal {
                let j = at(0, c);
                edges.push(vec![j.min(i), j.max(i)]);
            }
        }
    }
    edges.sort();
    debug_assert!(edges.windows(2).all(|w| w[0] != w[1]), "duplicate edge");
    FactorGraph::new(vec![2; n], edges)
}

/// Complete graph over `n` binary variables: one pairwise factor per
/// unordered pair, canonical order.
pub fn build_complete(n: usize) -> Result<FactorGraph> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "complete graph needs at least 2 variables".into(),
        ));
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push(vec![i, j]);
        }
    }
    FactorGraph::new(vec![2; n], edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toroidal_grid_counts() {
        let g = build_grid(5, 5, true).unwrap();
        assert_eq!(g.num_vars(), 25);
        assert_eq!(g.num_factors(), 50);
        for i in 0..25 {
            assert_eq!(g.degree(i), 4);
        }
    }

    #[test]
    fn minimal_grid_is_one_edge() {
        let g = build_grid(1, 2, false).unwrap();
        assert_eq!(g.num_vars(), 2);
        assert_eq!(g.num_factors(), 1);
        assert_eq!(g.scope(0), &[0, 1]);
    }

    #[test]
    fn grid_3x3_edges_and_corner_degrees() {
        // 2*3*3 - 3 - 3 = 12 edges counted by hand.
        let g = build_grid(3, 3, false).unwrap();
        assert_eq!(g.num_vars(), 9);
        assert_eq!(g.num_factors(), 12);
        for corner in [0usize, 2, 6, 8] {
            assert_eq!(g.degree(corner), 2);
        }
        assert_eq!(g.degree(4), 4);
    }

    #[test]
    fn factors_are_in_canonical_order() {
        for g in [
            build_grid(3, 4, false).unwrap(),
            build_grid(4, 4, true).unwrap(),
            build_complete(5).unwrap(),
        ] {
            let mut sorted = g.factors().to_vec();
            sorted.sort();
            assert_eq!(g.factors(), &sorted[..]);
        }
    }

    #[test]
    fn complete_graph_counts() {
        let g = build_complete(10).unwrap();
        assert_eq!(g.num_factors(), 45);
        for i in 0..10 {
            assert_eq!(g.degree(i), 9);
        }
        let g = build_complete(2).unwrap();
        assert_eq!(g.num_factors(), 1);
        let g = build_complete(4).unwrap();
        assert_eq!(g.num_factors(), 6);
        assert_eq!(g.degree(0), 3);
    }

    #[test]
    fn rejects_bad_topologies() {
        assert!(build_grid(0, 3, false).is_err());
        assert!(build_grid(2, 2, true).is_err());
        assert!(build_complete(1).is_err());
    }

    #[test]
    fn rejects_invalid_scopes() {
        assert!(FactorGraph::new(vec![2, 2], vec![vec![0, 0]]).is_err());
        assert!(FactorGraph::new(vec![2, 2], vec![vec![1, 0]]).is_err());
        assert!(FactorGraph::new(vec![2, 2], vec![vec![0, 2]]).is_err());
        assert!(FactorGraph::new(vec![2, 1], vec![]).is_err());
        assert!(FactorGraph::new(vec![2, 2], vec![vec![]]).is_err());
    }

    #[test]
    fn incidence_indexing_is_dense() {
        let g = build_grid(2, 2, false).unwrap();
        assert_eq!(g.num_incidences(), 8);
        let mut seen = vec![false; 8];
        for a in 0..g.num_factors() {
            for slot in 0..g.scope(a).len() {
                let idx = g.incidence_index(a, slot);
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }
}

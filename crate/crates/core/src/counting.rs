//! Counting-number algebra: canonical families, validity predicates and
//! the concavity certificate.
//!
//! An entropy approximation is a weighted sum of local entropies with
//! per-variable weights `c_i` and per-factor weights `c_alpha`. The Bethe
//! choice is `c_alpha = 1`, `c_i = 1 - d_i`. A sufficient condition for
//! concavity over the local polytope is the existence of auxiliary
//! numbers `c_ii, c_aa, c_ia >= 0` with
//!
//! ```text
//!     c_alpha = c_aa + sum_{i in alpha} c_ia          (per factor)
//!     c_i     = c_ii - sum_{alpha ∋ i} c_ia           (per variable)
//! ```
//!
//! which is a pure LP feasibility problem, solved here with the crate's
//! simplex. Infeasibility is a verdict about the certificate, not a proof
//! of non-concavity: the condition is sufficient only.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::FactorGraph;
use crate::real::Real;
use crate::simplex::{self, LpOutcome, StandardForm};

/// Per-variable and per-factor entropy weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CountingNumbers<T: Real = f64> {
    pub node: Vec<T>,
    pub factor: Vec<T>,
}

impl<T: Real> CountingNumbers<T> {
    pub fn new(node: Vec<T>, factor: Vec<T>) -> Self {
        CountingNumbers { node, factor }
    }

    pub fn matches(&self, graph: &FactorGraph) -> bool {
        self.node.len() == graph.num_vars() && self.factor.len() == graph.num_factors()
    }

    pub fn is_finite(&self) -> bool {
        self.node.iter().chain(&self.factor).all(|x| x.is_finite())
    }

    /// Node entries followed by factor entries; the ordering shared with
    /// entropy vectors and the moment matrix.
    pub fn stacked(&self) -> Vec<T> {
        let mut v = self.node.clone();
        v.extend_from_slice(&self.factor);
        v
    }

    pub fn to_f64(&self) -> CountingNumbers<f64> {
        CountingNumbers {
            node: self.node.iter().map(|x| x.as_f64()).collect(),
            factor: self.factor.iter().map(|x| x.as_f64()).collect(),
        }
    }
}

/// Bethe numbers: `c_alpha = 1`, `c_i = 1 - d_i`.
pub fn bethe_numbers<T: Real>(graph: &FactorGraph) -> CountingNumbers<T> {
    CountingNumbers {
        node: (0..graph.num_vars())
            .map(|i| T::one() - T::of(graph.degree(i) as f64))
            .collect(),
        factor: vec![T::one(); graph.num_factors()],
    }
}

/// Constant counting numbers, the natural family on vertex- and
/// edge-transitive graphs.
pub fn symmetric_numbers<T: Real>(graph: &FactorGraph, c_node: T, c_factor: T) -> CountingNumbers<T> {
    CountingNumbers {
        node: vec![c_node; graph.num_vars()],
        factor: vec![c_factor; graph.num_factors()],
    }
}

/// Variable-valid: `c_i + sum_{alpha ∋ i} c_alpha = 1` for every
/// variable, the condition for exactness on fully factorized models.
pub fn is_variable_valid<T: Real>(c: &CountingNumbers<T>, graph: &FactorGraph, tol: T) -> bool {
    (0..graph.num_vars()).all(|i| {
        let mut s = c.node[i];
        for &(a, _) in graph.var_factors(i) {
            s += c.factor[a];
        }
        (s - T::one()).abs() <= tol
    })
}

/// Factor-valid: `c_alpha = 1` for every factor.
pub fn is_factor_valid<T: Real>(c: &CountingNumbers<T>, tol: T) -> bool {
    c.factor.iter().all(|&ca| (ca - T::one()).abs() <= tol)
}

/// Auxiliary counting numbers witnessing concavity.
#[derive(Clone, Debug)]
pub struct ConvexityCertificate<T: Real = f64> {
    /// `c_ii`, one per variable.
    pub node: Vec<T>,
    /// `c_aa`, one per factor.
    pub factor: Vec<T>,
    /// `c_ia` indexed by [`FactorGraph::incidence_index`].
    pub incidence: Vec<T>,
}

impl<T: Real> ConvexityCertificate<T> {
    /// Max violation of the two defining equalities.
    pub fn residual(&self, c: &CountingNumbers<T>, graph: &FactorGraph) -> T {
        let mut r = T::zero();
        for a in 0..graph.num_factors() {
            let mut s = self.factor[a];
            for slot in 0..graph.scope(a).len() {
                s += self.incidence[graph.incidence_index(a, slot)];
            }
            r = r.max((s - c.factor[a]).abs());
        }
        for i in 0..graph.num_vars() {
            let mut s = self.node[i];
            for &(a, slot) in graph.var_factors(i) {
                s -= self.incidence[graph.incidence_index(a, slot)];
            }
            r = r.max((s - c.node[i]).abs());
        }
        r
    }

    pub fn min_entry(&self) -> T {
        self.node
            .iter()
            .chain(&self.factor)
            .chain(&self.incidence)
            .fold(T::infinity(), |m, &x| m.min(x))
    }
}

/// Searches for a concavity certificate by LP feasibility (tolerance
/// 1e-8 on the phase-one objective). `None` means no certificate exists;
/// concavity may still hold, the condition being sufficient only.
pub fn find_convexity_certificate<T: Real>(
    c: &CountingNumbers<T>,
    graph: &FactorGraph,
) -> Result<Option<ConvexityCertificate<T>>> {
    if !c.matches(graph) {
        return Err(Error::InvalidArgument(
            "counting-number lengths do not match graph".into(),
        ));
    }
    let n = graph.num_vars();
    let m = graph.num_factors();
    let inc = graph.num_incidences();
    // Columns: [c_ii (n) | c_aa (m) | c_ia (inc)], all nonnegative.
    let cols = n + m + inc;
    let mut a = Mat::zeros(n + m, cols);
    let mut b = vec![T::zero(); n + m];
    for fa in 0..m {
        a[(fa, n + fa)] = T::one();
        for slot in 0..graph.scope(fa).len() {
            a[(fa, n + m + graph.incidence_index(fa, slot))] = T::one();
        }
        b[fa] = c.factor[fa];
    }
    for i in 0..n {
        let row = m + i;
        a[(row, i)] = T::one();
        for &(fa, slot) in graph.var_factors(i) {
            a[(row, n + m + graph.incidence_index(fa, slot))] = -T::one();
        }
        b[row] = c.node[i];
    }
    let lp = StandardForm {
        constraints: a,
        rhs: b,
        objective: vec![T::zero(); cols],
    };
    match simplex::solve(&lp, T::of(1e-8))? {
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Err(Error::Numerical(
            "feasibility LP reported unbounded".into(),
        )),
        LpOutcome::Optimal { x, .. } => {
            let incidence: Vec<T> = x[n + m..].iter().map(|&v| v.max(T::zero())).collect();
            Ok(Some(certificate_from_incidence(c, graph, incidence)))
        }
    }
}

/// Completes a certificate from its `c_ia` block so the equalities hold
/// to machine precision.
pub(crate) fn certificate_from_incidence<T: Real>(
    c: &CountingNumbers<T>,
    graph: &FactorGraph,
    incidence: Vec<T>,
) -> ConvexityCertificate<T> {
    let mut factor = Vec::with_capacity(graph.num_factors());
    for a in 0..graph.num_factors() {
        let mut s = c.factor[a];
        for slot in 0..graph.scope(a).len() {
            s -= incidence[graph.incidence_index(a, slot)];
        }
        factor.push(s);
    }
    let mut node = Vec::with_capacity(graph.num_vars());
    for i in 0..graph.num_vars() {
        let mut s = c.node[i];
        for &(a, slot) in graph.var_factors(i) {
            s += incidence[graph.incidence_index(a, slot)];
        }
        node.push(s);
    }
    ConvexityCertificate {
        node,
        factor,
        incidence,
    }
}

/// A weighted collection of spanning trees, given as factor-index sets.
#[derive(Clone, Debug)]
pub struct TreeDistribution<T: Real = f64> {
    trees: Vec<Vec<usize>>,
    weights: Vec<T>,
}

impl<T: Real> TreeDistribution<T> {
    /// Validates that every member spans all variables and is acyclic and
    /// that the weights form a probability vector.
    pub fn new(graph: &FactorGraph, trees: Vec<Vec<usize>>, weights: Vec<T>) -> Result<Self> {
        if trees.len() != weights.len() || trees.is_empty() {
            return Err(Error::InvalidArgument(
                "need matching, nonempty tree and weight lists".into(),
            ));
        }
        let wsum: T = weights.iter().copied().sum();
        if weights.iter().any(|&w| w < -T::of(1e-12)) || (wsum - T::one()).abs() > T::of(1e-9) {
            return Err(Error::InvalidArgument(
                "tree weights must be nonnegative and sum to one".into(),
            ));
        }
        let n = graph.num_vars();
        for (t, tree) in trees.iter().enumerate() {
            if tree.len() + 1 != n {
                return Err(Error::InvalidArgument(format!(
                    "tree {t} has {} edges; a spanning tree of {n} variables needs {}",
                    tree.len(),
                    n - 1
                )));
            }
            let mut uf: Vec<usize> = (0..n).collect();
            fn find(uf: &mut Vec<usize>, x: usize) -> usize {
                let mut r = x;
                while uf[r] != r {
                    r = uf[r];
                }
                let mut c = x;
                while uf[c] != r {
                    let next = uf[c];
                    uf[c] = r;
                    c = next;
                }
                r
            }
            for &a in tree {
                if a >= graph.num_factors() || graph.scope(a).len() != 2 {
                    return Err(Error::InvalidArgument(format!(
                        "tree {t} uses factor {a}, which is not a pairwise factor of the graph"
                    )));
                }
                let (u, v) = (graph.scope(a)[0], graph.scope(a)[1]);
                let (ru, rv) = (find(&mut uf, u), find(&mut uf, v));
                if ru == rv {
                    return Err(Error::InvalidArgument(format!("tree {t} contains a cycle")));
                }
                uf[ru] = rv;
            }
            // n-1 acyclic edges over n nodes are automatically spanning.
        }
        Ok(TreeDistribution { trees, weights })
    }

    pub fn trees(&self) -> &[Vec<usize>] {
        &self.trees
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Edge appearance probabilities, indexed by factor.
    pub fn edge_appearance(&self, graph: &FactorGraph) -> Vec<T> {
        let mut rho = vec![T::zero(); graph.num_factors()];
        for (tree, &w) in self.trees.iter().zip(&self.weights) {
            for &a in tree {
                rho[a] += w;
            }
        }
        rho
    }
}

/// Tree-reweighted counting numbers: `c_alpha` is the edge appearance
/// probability and `c_i = 1 - sum_{alpha ∋ i} c_alpha`, which is
/// variable-valid by construction.
pub fn trw_numbers<T: Real>(
    graph: &FactorGraph,
    trees: &TreeDistribution<T>,
) -> Result<CountingNumbers<T>> {
    if !graph.is_pairwise() {
        return Err(Error::InvalidArgument(
            "tree-reweighted numbers need a pairwise graph".into(),
        ));
    }
    let rho = trees.edge_appearance(graph);
    Ok(counting_from_rho(graph, &rho))
}

/// The variable-valid completion of a per-factor vector.
pub(crate) fn counting_from_rho<T: Real>(graph: &FactorGraph, rho: &[T]) -> CountingNumbers<T> {
    let node = (0..graph.num_vars())
        .map(|i| {
            let mut s = T::one();
            for &(a, _) in graph.var_factors(i) {
                s -= rho[a];
            }
            s
        })
        .collect();
    CountingNumbers {
        node,
        factor: rho.to_vec(),
    }
}

/// Four comb-shaped spanning trees of a non-toroidal grid, uniformly
/// weighted: all horizontal rungs with a left or right vertical spine,
/// and all vertical rungs with a top or bottom horizontal spine. Every
/// grid edge appears in at least one comb.
pub fn grid_comb_trees<T: Real>(
    graph: &FactorGraph,
    rows: usize,
    cols: usize,
) -> Result<TreeDistribution<T>> {
    let expected = crate::model::build_grid(rows, cols, false)?;
    if graph.cardinalities() != expected.cardinalities()
        || graph.factors() != expected.factors()
    {
        return Err(Error::InvalidArgument(format!(
            "graph is not the non-toroidal {rows}x{cols} grid"
        )));
    }
    let at = |r: usize, c: usize| r * cols + c;
    let edge = |u: usize, v: usize| -> usize {
        let scope = [u.min(v), u.max(v)];
        graph
            .find_factor(&scope)
            .expect("grid edge present by construction")
    };
    let horizontal: Vec<usize> = (0..rows)
        .flat_map(|r| (0..cols.saturating_sub(1)).map(move |c| (r, c)))
        .map(|(r, c)| edge(at(r, c), at(r, c + 1)))
        .collect();
    let vertical: Vec<usize> = (0..rows.saturating_sub(1))
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| edge(at(r, c), at(r + 1, c)))
        .collect();
    let column = |c: usize| -> Vec<usize> {
        (0..rows.saturating_sub(1))
            .map(|r| edge(at(r, c), at(r + 1, c)))
            .collect()
    };
    let row_edges = |r: usize| -> Vec<usize> {
        (0..cols.saturating_sub(1))
            .map(|c| edge(at(r, c), at(r, c + 1)))
            .collect()
    };
    let mut trees: Vec<Vec<usize>> = vec![
        [horizontal.clone(), column(0)].concat(),
        [horizontal.clone(), column(cols - 1)].concat(),
        [vertical.clone(), row_edges(0)].concat(),
        [vertical, row_edges(rows - 1)].concat(),
    ];
    for t in trees.iter_mut() {
        t.sort_unstable();
        t.dedup();
    }
    let w = T::of(0.25);
    TreeDistribution::new(graph, trees, vec![w; 4])
}

/// Text form: one `node i c_i` line per variable then one
/// `factor a c_a` line per factor.
pub fn serialize_counting<T: Real>(c: &CountingNumbers<T>) -> String {
    let mut out = String::new();
    for (i, &v) in c.node.iter().enumerate() {
        let _ = writeln!(out, "node {i} {}", crate::model::io_fmt_real(v));
    }
    for (a, &v) in c.factor.iter().enumerate() {
        let _ = writeln!(out, "factor {a} {}", crate::model::io_fmt_real(v));
    }
    out
}

pub fn parse_counting<T: Real>(text: &str, graph: &FactorGraph) -> Result<CountingNumbers<T>> {
    let mut node = vec![None; graph.num_vars()];
    let mut factor = vec![None; graph.num_factors()];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 'node|factor idx value', got '{trimmed}'"),
            });
        }
        let idx_val: usize = toks[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid index '{}'", toks[1]),
        })?;
        let value: f64 = toks[2].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid value '{}'", toks[2]),
        })?;
        let slot = match toks[0] {
            "node" => node.get_mut(idx_val),
            "factor" => factor.get_mut(idx_val),
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown kind '{other}'"),
                })
            }
        };
        match slot {
            Some(s) => *s = Some(T::of(value)),
            None => {
                return Err(Error::Parse {
                    line,
                    msg: format!("index {idx_val} out of range"),
                })
            }
        }
    }
    let node: Option<Vec<T>> = node.into_iter().collect();
    let factor: Option<Vec<T>> = factor.into_iter().collect();
    match (node, factor) {
        (Some(node), Some(factor)) => Ok(CountingNumbers { node, factor }),
        _ => Err(Error::Parse {
            line: 0,
            msg: "missing counting-number entries".into(),
        }),
    }
}

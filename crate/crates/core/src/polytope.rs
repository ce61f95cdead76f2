//! The local marginal polytope and uniform sampling inside it.
//!
//! Beliefs flatten to one ambient vector (node blocks then factor
//! blocks). The polytope is the intersection of the normalization and
//! marginalization equalities with the nonnegative orthant. Directions
//! for hit-and-run are drawn in a precomputed orthonormal basis of the
//! equality null space, so every iterate satisfies the equalities to
//! machine precision and only the bounds clip the step interval.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::model::FactorGraph;
use crate::propagation::BeliefSet;
use crate::real::Real;
use crate::rng::Stream;
use crate::tables::{self, shannon_entropy};

#[derive(Clone, Debug)]
pub struct LocalPolytope<T: Real = f64> {
    graph: FactorGraph,
    ambient: usize,
    node_offsets: Vec<usize>,
    factor_offsets: Vec<usize>,
    equalities: Mat<T>,
    rhs: Vec<T>,
    null_basis: Vec<Vec<T>>,
    uniform: Vec<T>,
}

impl<T: Real> LocalPolytope<T> {
    /// Assembles the constraint system and the null-space basis.
    /// Redundant equality rows are removed during orthogonalization.
    pub fn new(graph: &FactorGraph) -> Self {
        let n = graph.num_vars();
        let m = graph.num_factors();
        let mut node_offsets = Vec::with_capacity(n);
        let mut acc = 0usize;
        for i in 0..n {
            node_offsets.push(acc);
            acc += graph.cardinality(i);
        }
        let mut factor_offsets = Vec::with_capacity(m);
        for a in 0..m {
            factor_offsets.push(acc);
            acc += graph.factor_states(a);
        }
        let ambient = acc;

        let mut rows: Vec<Vec<T>> = Vec::new();
        let mut rhs: Vec<T> = Vec::new();
        // Normalization of each node belief.
        for i in 0..n {
            let mut row = vec![T::zero(); ambient];
            for x in 0..graph.cardinality(i) {
                row[node_offsets[i] + x] = T::one();
            }
            rows.push(row);
            rhs.push(T::one());
        }
        // Marginalization of each factor belief onto each scope variable.
        for a in 0..m {
            let cards = graph.factor_cards(a);
            for (slot, &i) in graph.scope(a).iter().enumerate() {
                for xi in 0..graph.cardinality(i) {
                    let mut row = vec![T::zero(); ambient];
                    tables::for_each_assignment(&cards, |state, lin| {
                        if state[slot] == xi {
                            row[factor_offsets[a] + lin] = T::one();
                        }
                    });
                    row[node_offsets[i] + xi] = -T::one();
                    rows.push(row);
                    rhs.push(T::zero());
                }
            }
        }
        let equalities = Mat::from_rows(rows);
        let null_basis = linalg::nullspace(&equalities, T::of(1e-10));

        let mut uniform = vec![T::zero(); ambient];
        for i in 0..n {
            let c = graph.cardinality(i);
            for x in 0..c {
                uniform[node_offsets[i] + x] = T::one() / T::of(c as f64);
            }
        }
        for a in 0..m {
            let s = graph.factor_states(a);
            for x in 0..s {
                uniform[factor_offsets[a] + x] = T::one() / T::of(s as f64);
            }
        }
        LocalPolytope {
            graph: graph.clone(),
            ambient,
            node_offsets,
            factor_offsets,
            equalities,
            rhs,
            null_basis,
            uniform,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn null_dim(&self) -> usize {
        self.null_basis.len()
    }

    pub fn null_basis(&self) -> &[Vec<T>] {
        &self.null_basis
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn equalities_matrix(&self) -> &Mat<T> {
        &self.equalities
    }

    pub fn equalities_rhs(&self) -> &[T] {
        &self.rhs
    }

    /// The strictly interior uniform-beliefs point.
    pub fn uniform_point(&self) -> Vec<T> {
        self.uniform.clone()
    }

    /// Max equality violation of a point.
    pub fn equality_residual(&self, point: &[T]) -> T {
        let ax = self.equalities.matvec(point);
        let mut r = T::zero();
        for (v, &b) in ax.iter().zip(&self.rhs) {
            r = r.max((*v - b).abs());
        }
        r
    }

    pub fn min_coordinate(&self, point: &[T]) -> T {
        point.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    /// Membership test with separate equality and bound tolerances.
    pub fn contains(&self, point: &[T], eq_tol: T, bound_tol: T) -> bool {
        self.equality_residual(point) <= eq_tol && self.min_coordinate(point) >= -bound_tol
    }

    pub fn flatten(&self, beliefs: &BeliefSet<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.ambient];
        for (i, b) in beliefs.node.iter().enumerate() {
            out[self.node_offsets[i]..self.node_offsets[i] + b.len()].copy_from_slice(b);
        }
        for (a, b) in beliefs.factor.iter().enumerate() {
            out[self.factor_offsets[a]..self.factor_offsets[a] + b.len()].copy_from_slice(b);
        }
        out
    }

    pub fn unflatten(&self, point: &[T]) -> BeliefSet<T> {
        let node = (0..self.graph.num_vars())
            .map(|i| {
                point[self.node_offsets[i]..self.node_offsets[i] + self.graph.cardinality(i)]
                    .to_vec()
            })
            .collect();
        let factor = (0..self.graph.num_factors())
            .map(|a| {
                point[self.factor_offsets[a]..self.factor_offsets[a] + self.graph.factor_states(a)]
                    .to_vec()
            })
            .collect();
        BeliefSet { node, factor }
    }

    /// Local entropy vector (node entropies then factor entropies) of a
    /// flattened point.
    pub fn entropy_stats(&self, point: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.graph.num_vars() + self.graph.num_factors());
        for i in 0..self.graph.num_vars() {
            let lo = self.node_offsets[i];
            out.push(shannon_entropy(&point[lo..lo + self.graph.cardinality(i)]));
        }
        for a in 0..self.graph.num_factors() {
            let lo = self.factor_offsets[a];
            out.push(shannon_entropy(
                &point[lo..lo + self.graph.factor_states(a)],
            ));
        }
        out
    }

    /// Random unit direction inside the equality null space.
    fn sample_direction(&self, stream: &mut Stream) -> Vec<T> {
        let mut dir = vec![T::zero(); self.ambient];
        for basis_vec in &self.null_basis {
            let z = T::of(stream.normal());
            linalg::axpy(z, basis_vec, &mut dir);
        }
        let n = linalg::norm2(&dir);
        if n > T::zero() {
            let inv = T::one() / n;
            for x in dir.iter_mut() {
                *x *= inv;
            }
        }
        dir
    }

    /// One hit-and-run step: sample a chord direction, intersect with the
    /// bounds, and jump uniformly inside the slightly shrunken interval
    /// so iterates stay strictly interior.
    pub fn hit_and_run_step(&self, state: &mut ChainState<T>) -> Result<()> {
        debug_assert!(self.min_coordinate(&state.point) > T::zero());
        for _attempt in 0..100 {
            let dir = self.sample_direction(&mut state.rng);
            let mut t_min = T::neg_infinity();
            let mut t_max = T::infinity();
            let tiny = T::of(1e-14);
            for (&p, &d) in state.point.iter().zip(&dir) {
                if d > tiny {
                    t_min = t_min.max(-p / d);
                } else if d < -tiny {
                    t_max = t_max.min(-p / d);
                }
            }
            let width = t_max - t_min;
            if !(width.is_finite() && width > T::of(1e-14)) {
                continue;
            }
            let eps = T::of(1e-12) * width;
            let lo = t_min + eps;
            let hi = t_max - eps;
            let t = lo + T::of(state.rng.uniform()) * (hi - lo);
            for (p, &d) in state.point.iter_mut().zip(&dir) {
                *p += t * d;
                if *p < T::zero() {
                    *p = T::zero(); // clip fp undershoot at the wall
                }
            }
            state.steps += 1;
            return Ok(());
        }
        Err(Error::Numerical(
            "hit-and-run: no non-degenerate chord in 100 direction draws".into(),
        ))
    }

    /// A fresh chain at the uniform point nudged by one short random
    /// chord jump (10% of the sampled step), so distinct seeds start at
    /// distinct strictly interior points.
    pub fn start_chain(&self, seed: u64, chain_index: u64) -> ChainState<T> {
        let mut state = ChainState {
            point: self.uniform_point(),
            steps: 0,
            rng: Stream::substream(seed, chain_index),
        };
        let dir = self.sample_direction(&mut state.rng);
        let mut t_min = T::neg_infinity();
        let mut t_max = T::infinity();
        let tiny = T::of(1e-14);
        for (&p, &d) in state.point.iter().zip(&dir) {
            if d > tiny {
                t_min = t_min.max(-p / d);
            } else if d < -tiny {
                t_max = t_max.min(-p / d);
            }
        }
        if t_max.is_finite() && t_min.is_finite() && t_max > t_min {
            let u = T::of(state.rng.uniform());
            let t = T::of(0.1) * (t_min + u * (t_max - t_min));
            for (p, &d) in state.point.iter_mut().zip(&dir) {
                *p += t * d;
            }
        }
        state
    }
}

/// A hit-and-run walker.
#[derive(Clone, Debug)]
pub struct ChainState<T: Real = f64> {
    pub point: Vec<T>,
    pub steps: u64,
    rng: Stream,
}

/// Potential scale reduction factor over equal-length traces. The first
/// half of every trace is discarded as burn-in. Zero within-chain
/// variance reports infinity.
pub fn gelman_rubin<T: Real>(traces: &[Vec<T>]) -> Result<T> {
    if traces.len() < 2 {
        return Err(Error::InvalidArgument(
            "Gelman-Rubin needs at least two chains".into(),
        ));
    }
    let len = traces[0].len();
    if traces.iter().any(|t| t.len() != len) || len < 4 {
        return Err(Error::InvalidArgument(
            "Gelman-Rubin needs equal-length traces of at least 4 samples".into(),
        ));
    }
    let kept = len - len / 2;
    let n = T::of(kept as f64);
    let mut means = Vec::with_capacity(traces.len());
    let mut vars = Vec::with_capacity(traces.len());
    for t in traces {
        let tail = &t[len / 2..];
        let mean: T = tail.iter().copied().sum::<T>() / n;
        let var: T = tail
            .iter()
            .map(|&x| (x - mean) * (x - mean))
            .sum::<T>()
            / (n - T::one());
        means.push(mean);
        vars.push(var);
    }
    let m = T::of(traces.len() as f64);
    let w: T = vars.iter().copied().sum::<T>() / m;
    let grand: T = means.iter().copied().sum::<T>() / m;
    let b: T = means
        .iter()
        .map(|&x| (x - grand) * (x - grand))
        .sum::<T>()
        / (m - T::one())
        * n;
    if w <= T::zero() {
        return Ok(T::infinity());
    }
    let v = (n - T::one()) / n * w + b / n;
    Ok((v / w).sqrt())
}

/// Monte-Carlo second moments of the local entropy vector under the
/// uniform distribution over the polytope. Proportional to the true
/// integral matrix, which is all the downstream quadratic program needs.
#[derive(Clone, Debug)]
pub struct EntropyMoments<T: Real = f64> {
    pub matrix: Mat<T>,
    pub sample_count: usize,
    /// Gelman-Rubin value per traced statistic (node then factor
    /// entropies).
    pub rhat: Vec<T>,
    pub converged: bool,
    /// Per-entry variance of the sampled products; not serialized.
    pub product_variance: Mat<T>,
}

impl<T: Real> EntropyMoments<T> {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matches(&self, graph: &FactorGraph) -> bool {
        self.dim() == graph.num_vars() + graph.num_factors()
    }
}

/// Runs `chains` independent hit-and-run chains, keeping every `thin`-th
/// step, and accumulates the entropy outer products over the second half
/// of each chain. Convergence is monitored per statistic with the
/// Gelman-Rubin factor; if some statistic stays above `rhat_threshold`
/// the estimate is returned with `converged = false`.
pub fn estimate_entropy_moments<T: Real>(
    graph: &FactorGraph,
    chains: usize,
    samples_per_chain: usize,
    thin: usize,
    rhat_threshold: f64,
    seed: u64,
) -> Result<EntropyMoments<T>> {
    if chains < 2 {
        return Err(Error::InvalidArgument(
            "moment estimation needs at least two chains".into(),
        ));
    }
    if samples_per_chain < 4 {
        return Err(Error::InvalidArgument(
            "moment estimation needs at least 4 samples per chain".into(),
        ));
    }
    let thin = thin.max(1);
    let poly: LocalPolytope<T> = LocalPolytope::new(graph);
    let d = graph.num_vars() + graph.num_factors();

    let mut traces: Vec<Vec<Vec<T>>> = vec![vec![Vec::with_capacity(samples_per_chain); d]; chains];
    let mut sum = Mat::<T>::zeros(d, d);
    let mut sum_sq = Mat::<T>::zeros(d, d);
    let mut kept = 0usize;

    for chain in 0..chains {
        let mut state = poly.start_chain(seed, chain as u64);
        for s in 0..samples_per_chain {
            for _ in 0..thin {
                poly.hit_and_run_step(&mut state)?;
            }
            let stats = poly.entropy_stats(&state.point);
            for (k, &v) in stats.iter().enumerate() {
                traces[chain][k].push(v);
            }
            if s >= samples_per_chain / 2 {
                kept += 1;
                for r in 0..d {
                    for c in r..d {
                        let prod = stats[r] * stats[c];
                        sum[(r, c)] += prod;
                        sum_sq[(r, c)] += prod * prod;
                    }
                }
            }
        }
    }

    let inv = T::one() / T::of(kept as f64);
    let mut matrix = Mat::<T>::zeros(d, d);
    let mut product_variance = Mat::<T>::zeros(d, d);
    for r in 0..d {
        for c in r..d {
            let mean = sum[(r, c)] * inv;
            let var = (sum_sq[(r, c)] * inv - mean * mean).max(T::zero());
            matrix[(r, c)] = mean;
            matrix[(c, r)] = mean;
            product_variance[(r, c)] = var;
            product_variance[(c, r)] = var;
        }
    }

    let mut rhat = Vec::with_capacity(d);
    let mut converged = true;
    for k in 0..d {
        let per_chain: Vec<Vec<T>> = (0..chains).map(|c| traces[c][k].clone()).collect();
        let r = gelman_rubin(&per_chain)?;
        if !(r.as_f64() < rhat_threshold) {
            converged = false;
        }
        rhat.push(r);
    }

    Ok(EntropyMoments {
        matrix,
        sample_count: kept,
        rhat,
        converged,
        product_variance,
    })
}

/// Text form: metadata comments, the dimension, then the matrix rows
/// with 17 significant digits.
pub fn serialize_moments<T: Real>(moments: &EntropyMoments<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# entropy moment matrix");
    let _ = writeln!(out, "# samples {}", moments.sample_count);
    let _ = writeln!(out, "# converged {}", moments.converged);
    let rhats: Vec<String> = moments
        .rhat
        .iter()
        .map(|&r| crate::model::io_fmt_real(r))
        .collect();
    let _ = writeln!(out, "# rhat {}", rhats.join(" "));
    let d = moments.dim();
    let _ = writeln!(out, "{d}");
    for r in 0..d {
        let row: Vec<String> = (0..d)
            .map(|c| crate::model::io_fmt_real(moments.matrix[(r, c)]))
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_moments<T: Real>(text: &str) -> Result<EntropyMoments<T>> {
    let mut sample_count = 0usize;
    let mut converged = false;
    let mut rhat: Vec<T> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let toks: Vec<&str> = comment.split_whitespace().collect();
            match toks.first() {
                Some(&"samples") if toks.len() == 2 => {
                    sample_count = toks[1].parse().unwrap_or(0);
                }
                Some(&"converged") if toks.len() == 2 => {
                    converged = toks[1] == "true";
                }
                Some(&"rhat") => {
                    rhat = toks[1..]
                        .iter()
                        .filter_map(|t| t.parse::<f64>().ok())
                        .map(T::of)
                        .collect();
                }
                _ => {}
            }
            continue;
        }
        match dim {
            None => {
                dim = Some(trimmed.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid dimension '{trimmed}'"),
                })?);
            }
            Some(d) => {
                let row: Vec<T> = trimmed
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map(T::of).map_err(|_| Error::Parse {
                            line,
                            msg: format!("invalid matrix entry '{t}'"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if row.len() != d {
                    return Err(Error::Parse {
                        line,
                        msg: format!("expected {d} entries, found {}", row.len()),
                    });
                }
                rows.push(row);
            }
        }
    }
    let d = dim.ok_or(Error::Parse {
        line: 0,
        msg: "missing dimension header".into(),
    })?;
    if rows.len() != d {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {d} matrix rows, found {}", rows.len()),
        });
    }
    Ok(EntropyMoments {
        matrix: Mat::from_rows(rows),
        sample_count,
        rhat,
        converged,
        product_variance: Mat::zeros(d, d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, FactorGraph};

    #[test]
    fn dimensions_of_small_polytopes() {
        let g = FactorGraph::new(vec![2], vec![]).unwrap();
        let p: LocalPolytope = LocalPolytope::new(&g);
        assert_eq!(p.ambient_dim(), 2);
        assert_eq!(p.null_dim(), 1);

        // One binary edge: ambient 2+2+4, five independent equalities.
        let g = build_grid(1, 2, false).unwrap();
        let p: LocalPolytope = LocalPolytope::new(&g);
        assert_eq!(p.ambient_dim(), 8);
        assert_eq!(p.null_dim(), 3);
    }

    #[test]
    fn uniform_point_is_feasible_on_grids() {
        let g = build_grid(5, 5, false).unwrap();
        let p: LocalPolytope = LocalPolytope::new(&g);
        let u = p.uniform_point();
        assert!(p.equality_residual(&u) < 1e-12);
        assert!(p.min_coordinate(&u) > 0.0);
        // Basis is orthonormal and annihilated by the equalities.
        for v in p.null_basis() {
            assert!((linalg::norm2(v) - 1.0).abs() < 1e-10);
            let img = p.equalities.matvec(v);
            assert!(linalg::norm_inf(&img) < 1e-10);
        }
    }

    #[test]
    fn hit_and_run_stays_feasible() {
        let g = build_grid(2, 2, false).unwrap();
        let p: LocalPolytope = LocalPolytope::new(&g);
        let mut state = p.start_chain(11, 0);
        for _ in 0..500 {
            p.hit_and_run_step(&mut state).unwrap();
            assert!(p.equality_residual(&state.point) < 1e-10);
            assert!(p.min_coordinate(&state.point) >= -1e-12);
        }
        assert_eq!(state.steps, 500);
    }

    #[test]
    fn single_variable_walk_is_uniform_on_the_simplex() {
        // On one binary variable the polytope is the segment
        // mu(0) in (0,1); the empirical CDF must match U(0,1).
        let g = FactorGraph::new(vec![2], vec![]).unwrap();
        let p: LocalPolytope = LocalPolytope::new(&g);
        let mut state = p.start_chain(3, 0);
        let mut draws = Vec::with_capacity(20_000);
        for _ in 0..20_000 {
            p.hit_and_run_step(&mut state).unwrap();
            draws.push(state.point[0]);
        }
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws.len() as f64;
        let mut d = 0.0f64;
        for (k, &x) in draws.iter().enumerate() {
            d = d.max((x - k as f64 / n).abs());
            d = d.max(((k + 1) as f64 / n - x).abs());
        }
        // KS critical value at p=0.01 is 1.63/sqrt(n) ~ 0.0115.
        assert!(d < 0.0115, "KS distance {d}");
    }

    #[test]
    fn gelman_rubin_frozen_cases() {
        // Identical chains: B = 0 so rhat = sqrt((n-1)/n) with n the
        // post-burn-in length.
        let base: Vec<f64> = (0..40).map(|k| (k as f64 * 0.37).sin()).collect();
        let r = gelman_rubin(&[base.clone(), base.clone(), base]).unwrap();
        let n = 20.0f64;
        assert!((r - ((n - 1.0) / n).sqrt()).abs() < 1e-12);

        // A large offset between chains blows the factor up.
        let a: Vec<f64> = (0..40).map(|k| (k as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        let r = gelman_rubin(&[a, b]).unwrap();
        assert!(r > 1.1 * 10.0);

        // Constant chains have zero within-variance.
        let r: f64 = gelman_rubin(&[vec![1.0; 8], vec![1.0; 8]]).unwrap();
        assert!(r.is_infinite());

        assert!(gelman_rubin(&[vec![1.0, 2.0, 3.0, 4.0]]).is_err());
        assert!(gelman_rubin::<f64>(&[vec![1.0, 2.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn gelman_rubin_near_one_for_iid_chains() {
        let mut stream = crate::rng::Stream::new(9);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..10_000).map(|_| stream.uniform()).collect())
            .collect();
        let r = gelman_rubin(&chains).unwrap();
        assert!((0.99..1.05).contains(&r), "rhat {r}");
    }

    #[test]
    fn single_variable_moment_matches_quadrature() {
        // E[H(p)^2] for p ~ U(0,1) by Simpson's rule.
        let h = |p: f64| -> f64 {
            let mut v = 0.0;
            if p > 0.0 {
                v -= p * p.ln();
            }
            if p < 1.0 {
                v -= (1.0 - p) * (1.0 - p).ln();
            }
            v
        };
        let steps = 20_000usize;
        let dx = 1.0 / steps as f64;
        let mut integral = 0.0;
        for k in 0..steps {
            let a = k as f64 * dx;
            let m = a + 0.5 * dx;
            let b = a + dx;
            integral += dx / 6.0 * (h(a).powi(2) + 4.0 * h(m).powi(2) + h(b).powi(2));
        }

        let g = FactorGraph::new(vec![2], vec![]).unwrap();
        let m: EntropyMoments =
            estimate_entropy_moments(&g, 4, 4000, 5, 1.2, 123).unwrap();
        assert_eq!(m.dim(), 1);
        let est = m.matrix[(0, 0)];
        assert!(
            (est - integral).abs() / integral < 0.01,
            "estimate {est}, quadrature {integral}"
        );
        assert!(m.converged);
    }

    #[test]
    fn moments_round_trip_through_text() {
        let g = build_grid(1, 2, false).unwrap();
        let m: EntropyMoments = estimate_entropy_moments(&g, 3, 400, 3, 1.5, 7).unwrap();
        let text = serialize_moments(&m);
        let m2: EntropyMoments = parse_moments(&text).unwrap();
        assert_eq!(m.dim(), m2.dim());
        assert_eq!(m.sample_count, m2.sample_count);
        assert_eq!(m.converged, m2.converged);
        for r in 0..m.dim() {
            for c in 0..m.dim() {
                assert_eq!(m.matrix[(r, c)], m2.matrix[(r, c)]);
            }
        }
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let g = build_grid(2, 2, false).unwrap();
        let p: LocalPolytope = LocalPolytope::new(&g);
        let mut state = p.start_chain(5, 1);
        for _ in 0..50 {
            p.hit_and_run_step(&mut state).unwrap();
        }
        let beliefs = p.unflatten(&state.point);
        let back = p.flatten(&beliefs);
        assert_eq!(state.point, back);
    }
}

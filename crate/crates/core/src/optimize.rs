//! Counting-number selection.
//!
//! Static choices solve a quadratic program over the concavity-certified
//! set: [`convex_bethe_c`] finds the certified numbers closest to the
//! Bethe numbers in Euclidean distance, [`convex_bethe_mu`] weights the
//! distance by the entropy-moment matrix so closeness is measured on the
//! entropy *function* rather than its coefficients.
//!
//! Adaptive choices minimize the optimized free energy itself:
//! [`convex_bethe_u`] runs a conditional-gradient descent of
//! `g(c) = max_mu F_c[mu, theta]` over variable-valid certified numbers
//! with `c_alpha <= 1` (where `g` upper-bounds the Bethe optimum), using
//! the fact that the subgradient of `g` in `c_alpha` is the negated
//! multi-information of the inner maximizer. [`trw_opt`] is the same
//! descent over the spanning-tree polytope, with a maximum-weight
//! spanning tree as the direction oracle.

use std::collections::BTreeSet;

use crate::counting::{
    self, certificate_from_incidence, counting_from_rho, is_variable_valid, ConvexityCertificate,
    CountingNumbers, TreeDistribution,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::model::{FactorGraph, LogPotentials};
use crate::polytope::{EntropyMoments, LocalPolytope};
use crate::propagation::{
    entropy_vector, evaluate_objective, EntropyVector, InferenceResult, MessageSet,
    PropagationOptions, Propagator,
};
use crate::qp::{self, QpProblem};
use crate::real::Real;
use crate::simplex::{self, LpOutcome, StandardForm};

/// Lower bound kept on every `c_alpha` along the adaptive descent. The
/// inner solver needs `c_alpha != 0`, and probes near a vertex with
/// near-zero factor numbers scale the potentials by `1/c_alpha`, which
/// makes the inner problem effectively deterministic and very hard to
/// solve; a small positive floor keeps every probe solvable. The floor
/// only binds when the unrestricted optimum would push a factor weight
/// below it, in which case the reported value is still a valid upper
/// bound, just marginally looser.
const FACTOR_FLOOR: f64 = 0.02;
/// Ridge added to the quadratic programs so the certificate block, which
/// carries no objective of its own, has a unique minimizer.
const QP_RIDGE: f64 = 1e-10;

/// Counting numbers together with the auxiliary numbers certifying
/// concavity of the induced entropy approximation.
#[derive(Clone, Debug)]
pub struct CertifiedNumbers<T: Real = f64> {
    pub numbers: CountingNumbers<T>,
    pub certificate: ConvexityCertificate<T>,
}

/// Index layout of the QP decision vector:
/// `[c_node | c_factor | c_ii | c_aa | c_ia]`.
struct CertLayout {
    n: usize,
    m: usize,
    inc: usize,
}

impl CertLayout {
    fn new(graph: &FactorGraph) -> Self {
        CertLayout {
            n: graph.num_vars(),
            m: graph.num_factors(),
            inc: graph.num_incidences(),
        }
    }
    fn nv(&self) -> usize {
        2 * self.n + 2 * self.m + self.inc
    }
    fn c_node(&self, i: usize) -> usize {
        i
    }
    fn c_factor(&self, a: usize) -> usize {
        self.n + a
    }
    fn c_ii(&self, i: usize) -> usize {
        self.n + self.m + i
    }
    fn c_aa(&self, a: usize) -> usize {
        2 * self.n + self.m + a
    }
    fn c_ia(&self, idx: usize) -> usize {
        2 * self.n + 2 * self.m + idx
    }
    fn aux_indices(&self) -> Vec<usize> {
        (self.n + self.m..self.nv()).collect()
    }
}

/// Equality rows tying the counting numbers to their certificate.
fn heskes_rows<T: Real>(graph: &FactorGraph, lay: &CertLayout) -> (Mat<T>, Vec<T>) {
    let mut rows = Mat::zeros(lay.m + lay.n, lay.nv());
    let rhs = vec![T::zero(); lay.m + lay.n];
    for a in 0..lay.m {
        rows[(a, lay.c_factor(a))] = T::one();
        rows[(a, lay.c_aa(a))] = -T::one();
        for slot in 0..graph.scope(a).len() {
            rows[(a, lay.c_ia(graph.incidence_index(a, slot)))] = -T::one();
        }
    }
    for i in 0..lay.n {
        let r = lay.m + i;
        rows[(r, lay.c_node(i))] = T::one();
        rows[(r, lay.c_ii(i))] = -T::one();
        for &(a, slot) in graph.var_factors(i) {
            rows[(r, lay.c_ia(graph.incidence_index(a, slot)))] = T::one();
        }
    }
    (rows, rhs)
}

/// Variable-validity rows `c_i + sum_{a ∋ i} c_a = 1`.
fn variable_valid_rows<T: Real>(graph: &FactorGraph, lay: &CertLayout) -> (Mat<T>, Vec<T>) {
    let mut rows = Mat::zeros(lay.n, lay.nv());
    let rhs = vec![T::one(); lay.n];
    for i in 0..lay.n {
        rows[(i, lay.c_node(i))] = T::one();
        for &(a, _) in graph.var_factors(i) {
            rows[(i, lay.c_factor(a))] = T::one();
        }
    }
    (rows, rhs)
}

fn stack_rows<T: Real>(parts: Vec<(Mat<T>, Vec<T>)>) -> (Mat<T>, Vec<T>) {
    let cols = parts[0].0.cols();
    let mut mat = Mat::zeros(0, cols);
    let mut rhs = Vec::new();
    for (m, r) in parts {
        for i in 0..m.rows() {
            mat.push_row(m.row(i));
        }
        rhs.extend(r);
    }
    (mat, rhs)
}

/// Pulls numbers and a cleaned certificate out of a QP solution vector.
fn split_solution<T: Real>(
    graph: &FactorGraph,
    lay: &CertLayout,
    x: &[T],
) -> Result<CertifiedNumbers<T>> {
    let numbers = CountingNumbers::new(
        (0..lay.n).map(|i| x[lay.c_node(i)]).collect(),
        (0..lay.m).map(|a| x[lay.c_factor(a)]).collect(),
    );
    let incidence: Vec<T> = (0..lay.inc)
        .map(|k| x[lay.c_ia(k)].max(T::zero()))
        .collect();
    let certificate = certificate_from_incidence(&numbers, graph, incidence);
    if certificate.min_entry() < -T::of(1e-9) {
        return Err(Error::Numerical(format!(
            "certificate entry {:e} below tolerance after cleanup",
            certificate.min_entry().as_f64()
        )));
    }
    Ok(CertifiedNumbers {
        numbers,
        certificate,
    })
}

/// Floor kept under every factor counting number returned by the static
/// quadratic programs. The exact cone allows c_alpha = 0, but such
/// numbers cannot be run by the message updates (the exponents divide by
/// c_alpha), so the projection is taken over the slightly shrunken set.
const STATIC_FACTOR_FLOOR: f64 = 1e-3;

/// Minimizes `(c - target)' W (c - target)` over the certified cone
/// (optionally intersected with the variable-valid plane) with
/// `c_alpha >= STATIC_FACTOR_FLOOR`, implemented by shifting the factor
/// block so plain nonnegativity bounds apply.
fn solve_counting_qp<T: Real>(
    graph: &FactorGraph,
    weight: &Mat<T>,
    target: &[T],
    enforce_variable_valid: bool,
) -> Result<CertifiedNumbers<T>> {
    let lay = CertLayout::new(graph);
    let nv = lay.nv();
    let nc = lay.n + lay.m;
    debug_assert_eq!(weight.rows(), nc);
    debug_assert_eq!(target.len(), nc);
    let floor = T::of(STATIC_FACTOR_FLOOR);

    let mut hessian = Mat::zeros(nv, nv);
    for r in 0..nc {
        for c in 0..nc {
            hessian[(r, c)] = T::of(2.0) * weight[(r, c)];
        }
    }
    for d in 0..nv {
        hessian[(d, d)] += T::of(QP_RIDGE);
    }
    // In shifted coordinates c' = c - floor (factor block only) the
    // objective targets `target - shift`.
    let shifted_target: Vec<T> = target
        .iter()
        .enumerate()
        .map(|(k, &t)| if k < lay.n { t } else { t - floor })
        .collect();
    let wt = weight.matvec(&shifted_target);
    let mut linear = vec![T::zero(); nv];
    for k in 0..nc {
        linear[k] = -T::of(2.0) * wt[k];
    }

    let mut parts = vec![heskes_rows::<T>(graph, &lay)];
    if enforce_variable_valid {
        parts.push(variable_valid_rows::<T>(graph, &lay));
    }
    let (eq, mut eq_rhs) = stack_rows(parts);
    // Shift the equality right-hand sides: factor equalities read
    // (c' + floor) - c_aa - sum c_ia = 0, variable-valid rows read
    // c_i + sum (c' + floor) = 1.
    for a in 0..lay.m {
        eq_rhs[a] = -floor;
    }
    if enforce_variable_valid {
        for i in 0..lay.n {
            eq_rhs[lay.m + lay.n + i] = T::one() - floor * T::of(graph.degree(i) as f64);
        }
    }
    let mut nonneg = lay.aux_indices();
    for a in 0..lay.m {
        nonneg.push(lay.c_factor(a));
    }
    let problem = QpProblem {
        hessian,
        linear,
        eq,
        eq_rhs,
        nonneg,
    };
    let sol = qp::solve(&problem, None)?;
    let residual = qp::kkt_residual(&problem, &sol);
    if residual.as_f64() > 1e-8 {
        return Err(Error::Numerical(format!(
            "QP finished with KKT residual {:e}",
            residual.as_f64()
        )));
    }
    let mut x = sol.x;
    for a in 0..lay.m {
        x[lay.c_factor(a)] += floor;
    }
    split_solution(graph, &lay, &x)
}

/// Certified counting numbers closest to Bethe in Euclidean distance,
/// subject to variable-validity.
pub fn convex_bethe_c<T: Real>(graph: &FactorGraph) -> Result<CertifiedNumbers<T>> {
    let nc = graph.num_vars() + graph.num_factors();
    let bethe = counting::bethe_numbers::<T>(graph).stacked();
    solve_counting_qp(graph, &Mat::identity(nc), &bethe, true)
}

/// Certified counting numbers whose entropy function is closest to the
/// Bethe entropy in the moment norm `(b - c)' A (b - c)`. Variable
/// validity is imposed only when `enforce_variable_valid` is set.
pub fn convex_bethe_mu<T: Real>(
    graph: &FactorGraph,
    moments: &EntropyMoments<T>,
    enforce_variable_valid: bool,
) -> Result<CertifiedNumbers<T>> {
    if !moments.matches(graph) {
        return Err(Error::InvalidArgument(format!(
            "moment matrix dimension {} does not match graph ({} regions)",
            moments.dim(),
            graph.num_vars() + graph.num_factors()
        )));
    }
    let bethe = counting::bethe_numbers::<T>(graph).stacked();
    solve_counting_qp(graph, &moments.matrix, &bethe, enforce_variable_valid)
}

/// Options for the adaptive bound minimizers.
#[derive(Clone, Debug)]
pub struct BoundOptions {
    pub max_outer: usize,
    /// Stop once the conditional-gradient gap drops below this.
    pub gap_tol: f64,
    /// Inner solves spent per line search.
    pub max_line_probes: usize,
    pub propagation: PropagationOptions,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            max_outer: 50,
            gap_tol: 1e-5,
            max_line_probes: 20,
            propagation: PropagationOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TracePoint<T> {
    pub iteration: usize,
    pub bound: T,
    pub gap: T,
}

/// Outcome of an adaptive optimization run.
#[derive(Clone, Debug)]
pub struct BoundRun<T: Real = f64> {
    pub numbers: CountingNumbers<T>,
    pub certificate: Option<ConvexityCertificate<T>>,
    /// Optimized free-energy value at `numbers` (the bound).
    pub bound: T,
    /// Inference result of the inner solve at `numbers`.
    pub final_run: InferenceResult<T>,
    pub trace: Vec<TracePoint<T>>,
    pub inference_calls: usize,
}

struct InnerSolution<T: Real> {
    result: InferenceResult<T>,
    entropy: EntropyVector<T>,
}

/// Solves the inner problem `max_mu F_c[mu, theta]`, preferring message
/// passing with warm-started messages and falling back to projected
/// gradient ascent over the local polytope when propagation does not
/// converge (the certified objectives are concave, so the optimum is
/// well-defined either way).
struct InnerSolver<'a, T: Real> {
    graph: &'a FactorGraph,
    potentials: &'a LogPotentials<T>,
    opts: PropagationOptions,
    warm: Option<MessageSet<T>>,
    polytope: Option<LocalPolytope<T>>,
    calls: usize,
}

impl<'a, T: Real> InnerSolver<'a, T> {
    fn new(graph: &'a FactorGraph, potentials: &'a LogPotentials<T>, opts: PropagationOptions) -> Self {
        InnerSolver {
            graph,
            potentials,
            opts,
            warm: None,
            polytope: None,
            calls: 0,
        }
    }

    /// Solves a line-search probe. Best effort: a converged propagation
    /// is exact, a failed one falls back to a fixed ascent budget without
    /// an optimality certificate, which is fine for steering the descent.
    fn solve(&mut self, c: &CountingNumbers<T>) -> Result<InnerSolution<T>> {
        self.solve_inner(c, false)
    }

    /// Solves to certified optimality: a converged propagation, or an
    /// ascent whose linearization gap over the polytope is negligible.
    /// Reported bounds go through this path so the upper-bound claims of
    /// the adaptive optimizers stay honest.
    fn solve_certified(&mut self, c: &CountingNumbers<T>) -> Result<InnerSolution<T>> {
        self.solve_inner(c, true)
    }

    fn solve_inner(&mut self, c: &CountingNumbers<T>, certify: bool) -> Result<InnerSolution<T>> {
        self.calls += 1;
        let mut prop = match self.warm.take() {
            Some(msgs) => {
                Propagator::with_messages(self.graph, self.potentials, c, self.opts.clone(), msgs)?
            }
            None => Propagator::new(self.graph, self.potentials, c, self.opts.clone())?,
        };
        match prop.run() {
            Ok(result) if result.converged => {
                self.warm = Some(prop.into_messages());
                let entropy = entropy_vector(self.graph, &result.beliefs);
                Ok(InnerSolution { result, entropy })
            }
            Ok(_) => {
                self.warm = Some(prop.into_messages());
                self.retry_then_ascend(c, certify)
            }
            Err(Error::NonFiniteMessage { .. }) => {
                // Messages diverged; restart the next call cold.
                self.warm = None;
                self.retry_then_ascend(c, certify)
            }
            Err(e) => Err(e),
        }
    }

    /// A heavier-damped cold restart is far cheaper than gradient ascent
    /// and resolves most oscillating runs, so try it before the fallback.
    fn retry_then_ascend(&mut self, c: &CountingNumbers<T>, certify: bool) -> Result<InnerSolution<T>> {
        let mut heavy = self.opts.clone();
        heavy.damping = (self.opts.damping * 0.4).max(0.05);
        heavy.max_iters = self.opts.max_iters;
        let mut prop = Propagator::new(self.graph, self.potentials, c, heavy)?;
        match prop.run() {
            Ok(result) if result.converged => {
                self.warm = Some(prop.into_messages());
                let entropy = entropy_vector(self.graph, &result.beliefs);
                Ok(InnerSolution { result, entropy })
            }
            Ok(_) | Err(Error::NonFiniteMessage { .. }) => self.ascend(c, certify),
            Err(e) => Err(e),
        }
    }

    /// Interior-point ascent over the local polytope: Newton steps on a
    /// log-barrier smoothing of the objective, taken inside the equality
    /// null space so no inequality bookkeeping is ever needed. The
    /// certified objectives are concave and the barrier is strictly
    /// concave, so every reduced Newton system is negative definite.
    ///
    /// With `certify` set, the method only returns once the
    /// linearization gap `max_y grad'(y - x)` over the polytope - an
    /// exact suboptimality certificate for a concave objective - is
    /// negligible, and errors out otherwise.
    fn ascend(&mut self, c: &CountingNumbers<T>, certify: bool) -> Result<InnerSolution<T>> {
        if self.polytope.is_none() {
            self.polytope = Some(LocalPolytope::new(self.graph));
        }
        let poly = self.polytope.as_ref().unwrap();
        let ambient = poly.ambient_dim();
        let basis = poly.null_basis();
        let dim = basis.len();

        // Per-coordinate counting weight and potential, flattened.
        let mut weight = Vec::with_capacity(ambient);
        for i in 0..self.graph.num_vars() {
            weight.extend(std::iter::repeat(c.node[i]).take(self.graph.cardinality(i)));
        }
        for a in 0..self.graph.num_factors() {
            weight.extend(std::iter::repeat(c.factor[a]).take(self.graph.factor_states(a)));
        }
        let mut theta = Vec::with_capacity(ambient);
        for i in 0..self.graph.num_vars() {
            theta.extend_from_slice(self.potentials.node_table(i));
        }
        for a in 0..self.graph.num_factors() {
            theta.extend_from_slice(self.potentials.factor_table(a));
        }

        let value_of =
            |pt: &[T]| -> T { evaluate_objective(&poly.unflatten(pt), self.potentials, c) };
        let barrier_value = |pt: &[T], tau: T| -> T {
            let mut v = value_of(pt);
            for &p in pt {
                v += tau * p.ln();
            }
            v
        };

        // Beliefs of a non-converged run are not locally consistent, so
        // they cannot seed the walk; the strictly interior uniform point
        // satisfies the equalities exactly.
        let mut x = poly.uniform_point();

        let theta_scale = theta.iter().fold(T::zero(), |m, &t| m.max(t.abs()));
        let mut tau = T::one() + theta_scale;
        // The barrier optimum undershoots the true optimum by about
        // tau * ambient, so drive tau well below the certification
        // tolerance.
        let tau_min = T::of(1e-10);
        let mut reduced = Mat::zeros(dim, dim);
        loop {
            for _ in 0..40 {
                if dim == 0 {
                    break;
                }
                // Gradient and Hessian diagonal of the smoothed objective.
                let grad: Vec<T> = x
                    .iter()
                    .zip(&theta)
                    .zip(&weight)
                    .map(|((&p, &t), &w)| t - w * (p.ln() + T::one()) + tau / p)
                    .collect();
                let hess: Vec<T> = x
                    .iter()
                    .zip(&weight)
                    .map(|(&p, &w)| -w / p - tau / (p * p))
                    .collect();
                let reduced_grad: Vec<T> = basis.iter().map(|z| linalg::dot(z, &grad)).collect();
                for (k, zk) in basis.iter().enumerate() {
                    for (l, zl) in basis.iter().enumerate().skip(k) {
                        let mut s = T::zero();
                        for d in 0..ambient {
                            s += zk[d] * hess[d] * zl[d];
                        }
                        reduced[(k, l)] = s;
                        reduced[(l, k)] = s;
                    }
                }
                let mut rhs: Vec<T> = reduced_grad.iter().map(|&g| -g).collect();
                let dz = match linalg::lu_solve(&reduced, &rhs) {
                    Ok(dz) => dz,
                    Err(_) => {
                        // Fall back to a plain gradient step in the
                        // reduced metric if the Newton system is sick.
                        rhs = reduced_grad.clone();
                        rhs
                    }
                };
                // Newton decrement (squared): -dz' * reduced_grad.
                let decrement: T = -linalg::dot(&dz, &reduced_grad);
                if decrement.abs() < T::of(1e-16) * (T::one() + tau) {
                    break;
                }
                let mut dx = vec![T::zero(); ambient];
                for (z, &step) in basis.iter().zip(&dz) {
                    linalg::axpy(step, z, &mut dx);
                }
                // Longest feasible step, stopping short of the boundary.
                let mut t_max = T::one();
                for (&p, &d) in x.iter().zip(&dx) {
                    if d < T::zero() {
                        t_max = t_max.min(-p / d * T::of(0.995));
                    }
                }
                let base = barrier_value(&x, tau);
                let slope = linalg::dot(&grad, &dx);
                let mut t = t_max;
                let mut accepted = false;
                for _ in 0..50 {
                    let cand: Vec<T> = x
                        .iter()
                        .zip(&dx)
                        .map(|(&p, &d)| p + t * d)
                        .collect();
                    if cand.iter().all(|&p| p > T::zero())
                        && barrier_value(&cand, tau) > base + T::of(0.1) * t * slope
                    {
                        x = cand;
                        accepted = true;
                        break;
                    }
                    t *= T::of(0.5);
                    if t < T::of(1e-14) {
                        break;
                    }
                }
                if !accepted {
                    break;
                }
            }
            if tau <= tau_min {
                break;
            }
            tau = (tau * T::of(0.05)).max(tau_min);
        }

        let value = value_of(&x);
        if certify {
            let grad: Vec<T> = x
                .iter()
                .zip(&theta)
                .zip(&weight)
                .map(|((&p, &t), &w)| t - w * (p.ln() + T::one()))
                .collect();
            let lp = StandardForm {
                constraints: poly.equalities_matrix().clone(),
                rhs: poly.equalities_rhs().to_vec(),
                objective: grad.iter().map(|&g| -g).collect(),
            };
            let gap = match simplex::solve(&lp, T::of(1e-8))? {
                LpOutcome::Optimal { x: best, .. } => {
                    let mut gap = T::zero();
                    for ((&g, &b), &xi) in grad.iter().zip(&best).zip(&x) {
                        gap += g * (b - xi);
                    }
                    gap
                }
                _ => {
                    return Err(Error::Numerical(
                        "linearization LP over the polytope failed".into(),
                    ))
                }
            };
            if !(gap <= T::of(1e-6) * (T::one() + value.abs())) {
                return Err(Error::Numerical(format!(
                    "inner ascent finished with certified gap {:e}",
                    gap.as_f64()
                )));
            }
        }
        let beliefs = poly.unflatten(&x);
        let entropy = entropy_vector(self.graph, &beliefs);
        let result = InferenceResult {
            log_partition_estimate: value,
            beliefs,
            converged: true,
            iterations: 0,
        };
        Ok(InnerSolution { result, entropy })
    }
}

/// Strictly interior certified variable-valid start: constant
/// `c_alpha = t` with `t = min(1, 1/(d_max (1 - 1/s_max)))`, whose
/// certificate splits `t` evenly over each factor's incidences.
fn symmetric_start<T: Real>(graph: &FactorGraph) -> Result<CertifiedNumbers<T>> {
    let m = graph.num_factors();
    if m == 0 {
        let numbers = CountingNumbers::new(vec![T::one(); graph.num_vars()], vec![]);
        let certificate = ConvexityCertificate {
            node: vec![T::one(); graph.num_vars()],
            factor: vec![],
            incidence: vec![],
        };
        return Ok(CertifiedNumbers {
            numbers,
            certificate,
        });
    }
    let d_max = graph.max_degree() as f64;
    let s_max = graph.max_scope() as f64;
    let t = if s_max >= 2.0 {
        (1.0f64).min(1.0 / (d_max * (1.0 - 1.0 / s_max)))
    } else {
        1.0
    };
    if t < 2.0 * FACTOR_FLOOR {
        return Err(Error::Numerical(
            "graph degree too large for an interior certified start".into(),
        ));
    }
    let rho = vec![T::of(t); m];
    let numbers = counting_from_rho(graph, &rho);
    let mut incidence = vec![T::zero(); graph.num_incidences()];
    for a in 0..m {
        let share = T::of(t / graph.scope(a).len() as f64);
        for slot in 0..graph.scope(a).len() {
            incidence[graph.incidence_index(a, slot)] = share;
        }
    }
    let certificate = certificate_from_incidence(&numbers, graph, incidence);
    debug_assert!(certificate.min_entry() >= -T::of(1e-12));
    Ok(CertifiedNumbers {
        numbers,
        certificate,
    })
}

/// Direction oracle for the bound descent: minimizes `-s' I` over the
/// certified variable-valid set with `floor <= s_alpha <= 1`. Node
/// numbers are eliminated through variable-validity.
fn direction_lp<T: Real>(
    graph: &FactorGraph,
    multi_info: &[T],
    floor: T,
) -> Result<CertifiedNumbers<T>> {
    let n = graph.num_vars();
    let m = graph.num_factors();
    let inc = graph.num_incidences();
    // Columns: [cf' (m) | slack (m) | c_ii (n) | c_aa (m) | c_ia (inc)]
    // where cf' = c_alpha - floor >= 0.
    let cols = 3 * m + n + inc;
    let col_cf = |a: usize| a;
    let col_slack = |a: usize| m + a;
    let col_cii = |i: usize| 2 * m + i;
    let col_caa = |a: usize| 2 * m + n + a;
    let col_cia = |k: usize| 3 * m + n + k;

    let mut a_mat = Mat::zeros(2 * m + n, cols);
    let mut rhs = vec![T::zero(); 2 * m + n];
    for a in 0..m {
        // cf' - c_aa - sum c_ia = -floor
        a_mat[(a, col_cf(a))] = T::one();
        a_mat[(a, col_caa(a))] = -T::one();
        for slot in 0..graph.scope(a).len() {
            a_mat[(a, col_cia(graph.incidence_index(a, slot)))] = -T::one();
        }
        rhs[a] = -floor;
    }
    for i in 0..n {
        // sum_{a ∋ i} cf' + c_ii - sum c_ia = 1 - floor * d_i
        let r = m + i;
        for &(a, slot) in graph.var_factors(i) {
            a_mat[(r, col_cf(a))] += T::one();
            a_mat[(r, col_cia(graph.incidence_index(a, slot)))] = -T::one();
        }
        a_mat[(r, col_cii(i))] = T::one();
        rhs[r] = T::one() - floor * T::of(graph.degree(i) as f64);
    }
    for a in 0..m {
        // cf' + slack = 1 - floor
        let r = m + n + a;
        a_mat[(r, col_cf(a))] = T::one();
        a_mat[(r, col_slack(a))] = T::one();
        rhs[r] = T::one() - floor;
    }
    let mut objective = vec![T::zero(); cols];
    for a in 0..m {
        objective[col_cf(a)] = -multi_info[a];
    }
    let lp = StandardForm {
        constraints: a_mat,
        rhs,
        objective,
    };
    match simplex::solve(&lp, T::of(1e-8))? {
        LpOutcome::Optimal { x, .. } => {
            let rho: Vec<T> = (0..m).map(|a| x[col_cf(a)] + floor).collect();
            let numbers = counting_from_rho(graph, &rho);
            let incidence: Vec<T> = (0..inc)
                .map(|k| x[col_cia(k)].max(T::zero()))
                .collect();
            let certificate = certificate_from_incidence(&numbers, graph, incidence);
            Ok(CertifiedNumbers {
                numbers,
                certificate,
            })
        }
        LpOutcome::Infeasible { residual } => Err(Error::Infeasible(format!(
            "direction LP infeasible (residual {:e})",
            residual.as_f64()
        ))),
        LpOutcome::Unbounded => Err(Error::Numerical("direction LP unbounded".into())),
    }
}

fn blend_numbers<T: Real>(
    a: &CountingNumbers<T>,
    b: &CountingNumbers<T>,
    gamma: T,
) -> CountingNumbers<T> {
    let keep = T::one() - gamma;
    CountingNumbers::new(
        a.node
            .iter()
            .zip(&b.node)
            .map(|(&x, &y)| keep * x + gamma * y)
            .collect(),
        a.factor
            .iter()
            .zip(&b.factor)
            .map(|(&x, &y)| keep * x + gamma * y)
            .collect(),
    )
}

fn blend_certificates<T: Real>(
    a: &ConvexityCertificate<T>,
    b: &ConvexityCertificate<T>,
    gamma: T,
) -> ConvexityCertificate<T> {
    let keep = T::one() - gamma;
    let mix = |x: &[T], y: &[T]| -> Vec<T> {
        x.iter()
            .zip(y)
            .map(|(&u, &v)| (keep * u + gamma * v).max(T::zero()))
            .collect()
    };
    ConvexityCertificate {
        node: mix(&a.node, &b.node),
        factor: mix(&a.factor, &b.factor),
        incidence: mix(&a.incidence, &b.incidence),
    }
}

/// Directional derivative of the bound along `diff` (factor block) at an
/// inner solution: `-sum_a I_a(mu*) diff_a`.
fn slope<T: Real>(sol: &InnerSolution<T>, diff: &[T]) -> T {
    let mut s = T::zero();
    for (&i, &d) in sol.entropy.multi_information.iter().zip(diff) {
        s -= i * d;
    }
    s
}

/// Conditional-gradient minimization of the optimized free energy over
/// certified variable-valid counting numbers with `c_alpha <= 1`.
pub fn convex_bethe_u<T: Real>(
    graph: &FactorGraph,
    potentials: &LogPotentials<T>,
    opts: &BoundOptions,
) -> Result<BoundRun<T>> {
    let floor = T::of(FACTOR_FLOOR);
    let start = symmetric_start(graph)?;
    let mut inner = InnerSolver::new(graph, potentials, opts.propagation.clone());
    let mut current = start;
    let mut sol = inner.solve(&current.numbers)?;
    let mut trace = Vec::new();
    let mut best = (current.clone(), sol.result.clone());

    for iteration in 0..opts.max_outer {
        if graph.num_factors() == 0 {
            trace.push(TracePoint {
                iteration,
                bound: sol.result.log_partition_estimate,
                gap: T::zero(),
            });
            break;
        }
        let direction = direction_lp(graph, &sol.entropy.multi_information, floor)?;
        let diff: Vec<T> = direction
            .numbers
            .factor
            .iter()
            .zip(&current.numbers.factor)
            .map(|(&s, &c)| s - c)
            .collect();
        let gap: T = sol
            .entropy
            .multi_information
            .iter()
            .zip(&diff)
            .map(|(&i, &d)| i * d)
            .sum();
        trace.push(TracePoint {
            iteration,
            bound: sol.result.log_partition_estimate,
            gap,
        });
        if gap < T::of(opts.gap_tol) {
            break;
        }
        let (gamma, probe_sol) = bisect_segment(
            &mut inner,
            &diff,
            T::one(),
            opts.max_line_probes,
            |g| blend_numbers(&current.numbers, &direction.numbers, g),
        )?;
        if probe_sol.result.log_partition_estimate
            > sol.result.log_partition_estimate + T::of(1e-12)
        {
            break; // no further progress along this direction
        }
        current = CertifiedNumbers {
            numbers: blend_numbers(&current.numbers, &direction.numbers, gamma),
            certificate: blend_certificates(&current.certificate, &direction.certificate, gamma),
        };
        sol = probe_sol;
        if sol.result.log_partition_estimate < best.1.log_partition_estimate {
            best = (current.clone(), sol.result.clone());
        }
    }

    // The reported bound must be the certified inner optimum at the
    // chosen numbers; probes along the way were best-effort.
    let final_sol = inner.solve_certified(&best.0.numbers)?;
    Ok(BoundRun {
        bound: final_sol.result.log_partition_estimate,
        numbers: best.0.numbers,
        certificate: Some(best.0.certificate),
        final_run: final_sol.result,
        trace,
        inference_calls: inner.calls,
    })
}

/// Line search over `gamma in (0, gamma_max]` by bisection on the
/// directional derivative. Probes expand geometrically from a small step
/// so the far end of the segment (near a polytope vertex, where the
/// inner problem is badly scaled) is only visited when the slope
/// actually points there.
fn bisect_segment<T: Real>(
    inner: &mut InnerSolver<T>,
    diff: &[T],
    gamma_max: T,
    max_probes: usize,
    mut blend: impl FnMut(T) -> CountingNumbers<T>,
) -> Result<(T, InnerSolution<T>)> {
    let mut best: Option<(T, InnerSolution<T>)> = None;
    let mut probes = 0usize;
    let mut lo = T::zero();
    let mut hi = None; // first probed point with nonnegative slope
    let mut gamma = gamma_max * T::of(0.125);
    while probes < max_probes {
        let sol = inner.solve(&blend(gamma))?;
        probes += 1;
        let s = slope(&sol, diff);
        let better = best
            .as_ref()
            .map_or(true, |(_, b)| {
                sol.result.log_partition_estimate < b.result.log_partition_estimate
            });
        if better {
            best = Some((gamma, sol));
        }
        if s < T::zero() {
            lo = gamma;
            match hi {
                None => {
                    if gamma >= gamma_max {
                        break; // descending all the way to the end
                    }
                    gamma = (gamma * T::of(4.0)).min(gamma_max);
                }
                Some(h) => {
                    if h - lo < T::of(5e-3) * gamma_max {
                        break;
                    }
                    gamma = (lo + h) * T::of(0.5);
                }
            }
        } else {
            hi = Some(gamma);
            if gamma - lo < T::of(5e-3) * gamma_max {
                break;
            }
            gamma = (lo + gamma) * T::of(0.5);
        }
    }
    Ok(best.expect("at least one probe"))
}

/// Subgradient of the optimized free energy with respect to the factor
/// counting numbers inside the variable-valid set: the negated
/// multi-information of the inner maximizer.
pub fn subgradient_wrt_counting<T: Real>(
    graph: &FactorGraph,
    potentials: &LogPotentials<T>,
    counting: &CountingNumbers<T>,
    opts: &PropagationOptions,
) -> Result<Vec<T>> {
    if !is_variable_valid(counting, graph, T::of(1e-8)) {
        return Err(Error::InvalidArgument(
            "subgradient is defined within the variable-valid set".into(),
        ));
    }
    let mut inner = InnerSolver::new(graph, potentials, opts.clone());
    let sol = inner.solve_certified(counting)?;
    Ok(sol
        .entropy
        .multi_information
        .iter()
        .map(|&i| -i)
        .collect())
}

/// Kruskal over the given edge order; returns factor indices of a
/// spanning tree, or an error if the graph is disconnected.
fn kruskal(graph: &FactorGraph, order: &[usize]) -> Result<Vec<usize>> {
    let n = graph.num_vars();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = x;
        while parent[c] != r {
            let next = parent[c];
            parent[c] = r;
            c = next;
        }
        r
    }
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for &a in order {
        let (u, v) = (graph.scope(a)[0], graph.scope(a)[1]);
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            tree.push(a);
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    if tree.len() + 1 != n {
        return Err(Error::InvalidArgument(
            "graph is disconnected; no spanning tree exists".into(),
        ));
    }
    tree.sort_unstable();
    Ok(tree)
}

/// Deterministic set of spanning trees covering every edge: one Kruskal
/// run seeded with each edge, deduplicated.
fn covering_trees(graph: &FactorGraph) -> Result<Vec<Vec<usize>>> {
    let m = graph.num_factors();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for seed_edge in 0..m {
        order.clear();
        order.push(seed_edge);
        order.extend((0..m).filter(|&a| a != seed_edge));
        seen.insert(kruskal(graph, &order)?);
    }
    Ok(seen.into_iter().collect())
}

/// Maximum-weight spanning tree (Kruskal; ties broken by edge index).
fn max_weight_spanning_tree<T: Real>(graph: &FactorGraph, weights: &[T]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..graph.num_factors()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .expect("finite weights")
            .then(a.cmp(&b))
    });
    kruskal(graph, &order)
}

/// Tree-reweighted weight optimization: conditional gradient over the
/// spanning-tree polytope with maximum-weight spanning-tree directions.
/// Pairwise graphs only.
pub fn trw_opt<T: Real>(
    graph: &FactorGraph,
    potentials: &LogPotentials<T>,
    opts: &BoundOptions,
) -> Result<BoundRun<T>> {
    if !graph.is_pairwise() {
        return Err(Error::InvalidArgument(
            "tree-reweighted optimization requires a pairwise graph".into(),
        ));
    }
    let m = graph.num_factors();
    if m == 0 {
        return Err(Error::InvalidArgument(
            "tree-reweighted optimization needs at least one factor".into(),
        ));
    }
    let floor = T::of(1e-4);
    let trees = covering_trees(graph)?;
    let weights = vec![T::one() / T::of(trees.len() as f64); trees.len()];
    let dist = TreeDistribution::new(graph, trees, weights)?;
    let mut rho: Vec<T> = dist.edge_appearance(graph);

    let mut inner = InnerSolver::new(graph, potentials, opts.propagation.clone());
    let mut sol = inner.solve(&counting_from_rho(graph, &rho))?;
    let mut best_rho = rho.clone();
    let mut best_value = sol.result.log_partition_estimate;
    let mut trace = Vec::new();

    for iteration in 0..opts.max_outer {
        let tree = max_weight_spanning_tree(graph, &sol.entropy.multi_information)?;
        let mut indicator = vec![T::zero(); m];
        for &a in &tree {
            indicator[a] = T::one();
        }
        let diff: Vec<T> = indicator
            .iter()
            .zip(&rho)
            .map(|(&s, &r)| s - r)
            .collect();
        let gap: T = sol
            .entropy
            .multi_information
            .iter()
            .zip(&diff)
            .map(|(&i, &d)| i * d)
            .sum();
        trace.push(TracePoint {
            iteration,
            bound: sol.result.log_partition_estimate,
            gap,
        });
        if gap < T::of(opts.gap_tol) {
            break;
        }
        // Keep all appearance probabilities above the floor.
        let mut gamma_max = T::of(0.99);
        for a in 0..m {
            if indicator[a] < rho[a] && rho[a] > floor {
                let g = (rho[a] - floor) / (rho[a] - indicator[a]);
                gamma_max = gamma_max.min(g);
            } else if indicator[a] == T::zero() && rho[a] <= floor {
                gamma_max = T::zero();
            }
        }
        if gamma_max <= T::zero() {
            break;
        }
        let rho_snapshot = rho.clone();
        let (gamma, probe_sol) = bisect_segment(
            &mut inner,
            &diff,
            gamma_max,
            opts.max_line_probes,
            |g| {
                let keep = T::one() - g;
                let blended: Vec<T> = rho_snapshot
                    .iter()
                    .zip(&indicator)
                    .map(|(&r, &s)| keep * r + g * s)
                    .collect();
                counting_from_rho(graph, &blended)
            },
        )?;
        if probe_sol.result.log_partition_estimate
            > sol.result.log_partition_estimate + T::of(1e-12)
        {
            break;
        }
        let keep = T::one() - gamma;
        for (r, &s) in rho.iter_mut().zip(&indicator) {
            *r = keep * *r + gamma * s;
        }
        sol = probe_sol;
        if sol.result.log_partition_estimate < best_value {
            best_value = sol.result.log_partition_estimate;
            best_rho = rho.clone();
        }
    }

    let numbers = counting_from_rho(graph, &best_rho);
    let certificate = counting::find_convexity_certificate(&numbers, graph)?;
    // Certified re-solve at the chosen weights so the reported value is a
    // true upper bound on the log-partition function.
    let final_sol = inner.solve_certified(&numbers)?;
    Ok(BoundRun {
        bound: final_sol.result.log_partition_estimate,
        numbers,
        certificate,
        final_run: final_sol.result,
        trace,
        inference_calls: inner.calls,
    })
}

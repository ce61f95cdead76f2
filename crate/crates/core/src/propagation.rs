//! Generalized belief propagation for arbitrary counting numbers.
//!
//! With `q_i = (1 - c_i) / d_i` and `D = c_alpha - q_i + 1`, the damped
//! fixed-point iteration updates, per directed edge,
//!
//! ```text
//!     m0(x_i) = sum_{x_alpha \ x_i} exp(theta_alpha / c_alpha)
//!                   prod_{j != i} n_{j->alpha}(x_j)
//!     n0(x_i) = exp(theta_i) prod_{beta != alpha} m_{beta->i}(x_i)
//!
//!     m_{alpha->i} = m0^(c_alpha / D) * n0^((q_i - c_alpha) / D)
//!     n_{i->alpha} = m0^((q_i - 1) / D) * n0^(1 / D)
//! ```
//!
//! Bethe numbers give `q_i = 1`, the exponents collapse to (1, 0) and
//! (0, 1), and the iteration is standard belief propagation. All message
//! arithmetic is in log space; every message is normalized to sum one in
//! linear space after each update.

use crate::counting::{is_variable_valid, CountingNumbers};
use crate::error::{Error, Result};
use crate::model::{FactorGraph, LogPotentials};
use crate::real::Real;
use crate::rng::Stream;
use crate::tables::{self, log_sum_exp, normalize_log, shannon_entropy};

const SINGULARITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Sweep factors in canonical order, refreshing all incoming then all
    /// outgoing messages of each factor. Converges faster on grids.
    Sequential,
    /// Compute every update from the previous iterate, then apply all.
    Synchronous,
}

#[derive(Clone, Debug)]
pub struct PropagationOptions {
    /// Damping weight gamma in (0, 1] on the log-space update.
    pub damping: f64,
    pub max_iters: usize,
    /// Convergence threshold on the max absolute log-message change.
    pub tol: f64,
    pub schedule: Schedule,
    /// Seed for optional message-initialization noise.
    pub seed: u64,
    /// Scale of uniform log-space noise added to the initial messages;
    /// zero keeps the deterministic all-uniform start.
    pub init_noise: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            damping: 0.5,
            max_iters: 10_000,
            tol: 1e-8,
            schedule: Schedule::Sequential,
            seed: 0,
            init_noise: 0.0,
        }
    }
}

impl PropagationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(
                "damping must lie in (0, 1]".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Log-space messages, indexed by (factor, scope slot).
#[derive(Clone, Debug)]
pub struct MessageSet<T: Real = f64> {
    factor_to_node: Vec<Vec<Vec<T>>>,
    node_to_factor: Vec<Vec<Vec<T>>>,
}

impl<T: Real> MessageSet<T> {
    /// All-uniform messages (normalized zeros).
    pub fn uniform(graph: &FactorGraph) -> Self {
        let make = || -> Vec<Vec<Vec<T>>> {
            (0..graph.num_factors())
                .map(|a| {
                    graph
                        .scope(a)
                        .iter()
                        .map(|&i| {
                            let card = graph.cardinality(i);
                            vec![-T::of((card as f64).ln()); card]
                        })
                        .collect()
                })
                .collect()
        };
        MessageSet {
            factor_to_node: make(),
            node_to_factor: make(),
        }
    }

    pub fn factor_to_node(&self, a: usize, slot: usize) -> &[T] {
        &self.factor_to_node[a][slot]
    }

    pub fn node_to_factor(&self, a: usize, slot: usize) -> &[T] {
        &self.node_to_factor[a][slot]
    }

    fn perturb(&mut self, scale: f64, seed: u64) {
        let mut stream = Stream::new(seed);
        for block in self
            .factor_to_node
            .iter_mut()
            .chain(self.node_to_factor.iter_mut())
        {
            for msg in block.iter_mut() {
                for x in msg.iter_mut() {
                    *x += T::of(stream.range(-scale, scale));
                }
                normalize_log(msg);
            }
        }
    }

    /// Max absolute log-space difference against another message set.
    pub fn max_log_distance(&self, other: &MessageSet<T>) -> T {
        let mut d = T::zero();
        let pairs = self
            .factor_to_node
            .iter()
            .zip(&other.factor_to_node)
            .chain(self.node_to_factor.iter().zip(&other.node_to_factor));
        for (a, b) in pairs {
            for (x, y) in a.iter().zip(b) {
                for (&u, &v) in x.iter().zip(y) {
                    d = d.max((u - v).abs());
                }
            }
        }
        d
    }
}

/// Pseudo-marginals over variables and factors.
#[derive(Clone, Debug)]
pub struct BeliefSet<T: Real = f64> {
    pub node: Vec<Vec<T>>,
    pub factor: Vec<Vec<T>>,
}

impl<T: Real> BeliefSet<T> {
    pub fn uniform(graph: &FactorGraph) -> Self {
        BeliefSet {
            node: (0..graph.num_vars())
                .map(|i| {
                    let c = graph.cardinality(i);
                    vec![T::one() / T::of(c as f64); c]
                })
                .collect(),
            factor: (0..graph.num_factors())
                .map(|a| {
                    let s = graph.factor_states(a);
                    vec![T::one() / T::of(s as f64); s]
                })
                .collect(),
        }
    }

    pub fn to_f64(&self) -> BeliefSet<f64> {
        BeliefSet {
            node: self
                .node
                .iter()
                .map(|t| t.iter().map(|x| x.as_f64()).collect())
                .collect(),
            factor: self
                .factor
                .iter()
                .map(|t| t.iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
    }

    /// Max violation of the marginalization consistency between factor
    /// and node beliefs.
    pub fn consistency_residual(&self, graph: &FactorGraph) -> T {
        let mut r = T::zero();
        for a in 0..graph.num_factors() {
            let cards = graph.factor_cards(a);
            for (slot, &i) in graph.scope(a).iter().enumerate() {
                let mut marg = vec![T::zero(); graph.cardinality(i)];
                tables::for_each_assignment(&cards, |state, lin| {
                    marg[state[slot]] += self.factor[a][lin];
                });
                for (x, &m) in marg.iter().zip(&self.node[i]) {
                    r = r.max((*x - m).abs());
                }
            }
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct InferenceResult<T: Real = f64> {
    pub beliefs: BeliefSet<T>,
    /// Value of the approximate free-energy objective at `beliefs`.
    pub log_partition_estimate: T,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> InferenceResult<T> {
    pub fn to_f64(&self) -> InferenceResult<f64> {
        InferenceResult {
            beliefs: self.beliefs.to_f64(),
            log_partition_estimate: self.log_partition_estimate.as_f64(),
            converged: self.converged,
            iterations: self.iterations,
        }
    }
}

/// Per-region Shannon entropies plus the per-factor multi-information
/// `I_alpha = sum_{i in alpha} H_i - H_alpha`.
#[derive(Clone, Debug)]
pub struct EntropyVector<T: Real = f64> {
    pub node: Vec<T>,
    pub factor: Vec<T>,
    pub multi_information: Vec<T>,
}

impl<T: Real> EntropyVector<T> {
    /// Node entropies followed by factor entropies; matches the stacking
    /// of counting numbers and the moment matrix.
    pub fn stacked(&self) -> Vec<T> {
        let mut v = self.node.clone();
        v.extend_from_slice(&self.factor);
        v
    }
}

/// Per-edge precomputed exponents of the update rules.
#[derive(Clone, Debug)]
struct EdgeCoeffs<T> {
    m_from_m0: T,
    m_from_n0: T,
    n_from_m0: T,
    n_from_n0: T,
}

/// Stateful runner so callers can observe per-iteration trajectories and
/// warm-start from previous messages.
pub struct Propagator<'a, T: Real = f64> {
    graph: &'a FactorGraph,
    potentials: &'a LogPotentials<T>,
    counting: &'a CountingNumbers<T>,
    opts: PropagationOptions,
    messages: MessageSet<T>,
    iterations: usize,
    /// theta_alpha / c_alpha, precomputed per factor.
    scaled_tables: Vec<Vec<T>>,
    coeffs: Vec<Vec<EdgeCoeffs<T>>>,
}

impl<'a, T: Real> Propagator<'a, T> {
    pub fn new(
        graph: &'a FactorGraph,
        potentials: &'a LogPotentials<T>,
        counting: &'a CountingNumbers<T>,
        opts: PropagationOptions,
    ) -> Result<Self> {
        let mut messages = MessageSet::uniform(graph);
        if opts.init_noise > 0.0 {
            messages.perturb(opts.init_noise, opts.seed);
        }
        Propagator::with_messages(graph, potentials, counting, opts, messages)
    }

    /// Starts from the given messages (warm start).
    pub fn with_messages(
        graph: &'a FactorGraph,
        potentials: &'a LogPotentials<T>,
        counting: &'a CountingNumbers<T>,
        opts: PropagationOptions,
        messages: MessageSet<T>,
    ) -> Result<Self> {
        opts.validate()?;
        if !counting.matches(graph) || !counting.is_finite() {
            return Err(Error::InvalidArgument(
                "counting numbers do not match the graph or are not finite".into(),
            ));
        }
        let singular = T::of(SINGULARITY_TOL);
        let mut scaled_tables = Vec::with_capacity(graph.num_factors());
        let mut coeffs = Vec::with_capacity(graph.num_factors());
        for a in 0..graph.num_factors() {
            let ca = counting.factor[a];
            if ca.abs() <= singular {
                return Err(Error::ZeroFactorCount { factor: a });
            }
            scaled_tables.push(
                potentials
                    .factor_table(a)
                    .iter()
                    .map(|&t| t / ca)
                    .collect(),
            );
            let mut per_slot = Vec::with_capacity(graph.scope(a).len());
            for &i in graph.scope(a) {
                let d = T::of(graph.degree(i) as f64);
                let q = (T::one() - counting.node[i]) / d;
                let denom = ca - q + T::one();
                if denom.abs() <= singular {
                    return Err(Error::SingularExponent { factor: a, var: i });
                }
                per_slot.push(EdgeCoeffs {
                    m_from_m0: ca / denom,
                    m_from_n0: (q - ca) / denom,
                    n_from_m0: (q - T::one()) / denom,
                    n_from_n0: T::one() / denom,
                });
            }
            coeffs.push(per_slot);
        }
        Ok(Propagator {
            graph,
            potentials,
            counting,
            opts,
            messages,
            iterations: 0,
        scaled_tables,
            coeffs,
        })
    }

    pub fn messages(&self) -> &MessageSet<T> {
        &self.messages
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn into_messages(self) -> MessageSet<T> {
        self.messages
    }

    /// n0 for edge (a, slot): theta_i plus incoming messages from the
    /// other factors at variable i.
    fn n0(&self, msgs: &MessageSet<T>, a: usize, slot: usize) -> Vec<T> {
        let i = self.graph.scope(a)[slot];
        let mut out = self.potentials.node_table(i).to_vec();
        for &(b, bslot) in self.graph.var_factors(i) {
            if b != a {
                for (o, &m) in out.iter_mut().zip(&msgs.factor_to_node[b][bslot]) {
                    *o += m;
                }
            }
        }
        out
    }

    /// m0 for edge (a, slot): log-marginal of the scaled factor table
    /// times the other incoming node messages.
    fn m0(&self, msgs: &MessageSet<T>, a: usize, slot: usize) -> Vec<T> {
        let scope = self.graph.scope(a);
        let cards = self.graph.factor_cards(a);
        let i = scope[slot];
        let card_i = self.graph.cardinality(i);
        let mut acc: Vec<tables::OnlineLse<T>> =
            (0..card_i).map(|_| tables::OnlineLse::new()).collect();
        let table = &self.scaled_tables[a];
        tables::for_each_assignment(&cards, |state, lin| {
            let mut v = table[lin];
            for (s, n) in msgs.node_to_factor[a].iter().enumerate() {
                if s != slot {
                    v += n[state[s]];
                }
            }
            acc[state[slot]].push(v);
        });
        acc.into_iter().map(|l| l.value()).collect()
    }

    /// Damps `update` against `old`, normalizes, records the change, and
    /// reports the first non-finite entry.
    fn blend(
        old: &mut Vec<T>,
        mut update: Vec<T>,
        gamma: T,
        delta: &mut T,
    ) -> std::result::Result<(), ()> {
        let keep = T::one() - gamma;
        for (u, &o) in update.iter_mut().zip(old.iter()) {
            *u = keep * o + gamma * *u;
        }
        normalize_log(&mut update);
        for &x in update.iter() {
            if !x.is_finite() {
                return Err(());
            }
        }
        for (&new, &o) in update.iter().zip(old.iter()) {
            *delta = delta.max((new - o).abs());
        }
        *old = update;
        Ok(())
    }

    /// One full sweep. Returns the max log-message change, or the failing
    /// (factor, var) pair if an update went non-finite.
    pub fn sweep(&mut self) -> std::result::Result<T, (usize, usize)> {
        let gamma = T::of(self.opts.damping);
        let mut delta = T::zero();
        match self.opts.schedule {
            Schedule::Sequential => {
                for a in 0..self.graph.num_factors() {
                    let nslots = self.graph.scope(a).len();
                    for slot in 0..nslots {
                        let c = self.coeffs[a][slot].clone();
                        let m0 = self.m0(&self.messages, a, slot);
                        let n0 = self.n0(&self.messages, a, slot);
                        let update: Vec<T> = m0
                            .iter()
                            .zip(&n0)
                            .map(|(&m, &n)| c.n_from_m0 * m + c.n_from_n0 * n)
                            .collect();
                        Self::blend(
                            &mut self.messages.node_to_factor[a][slot],
                            update,
                            gamma,
                            &mut delta,
                        )
                        .map_err(|_| (a, self.graph.scope(a)[slot]))?;
                    }
                    for slot in 0..nslots {
                        let c = self.coeffs[a][slot].clone();
                        let m0 = self.m0(&self.messages, a, slot);
                        let n0 = self.n0(&self.messages, a, slot);
                        let update: Vec<T> = m0
                            .iter()
                            .zip(&n0)
                            .map(|(&m, &n)| c.m_from_m0 * m + c.m_from_n0 * n)
                            .collect();
                        Self::blend(
                            &mut self.messages.factor_to_node[a][slot],
                            update,
                            gamma,
                            &mut delta,
                        )
                        .map_err(|_| (a, self.graph.scope(a)[slot]))?;
                    }
                }
            }
            Schedule::Synchronous => {
                let snapshot = self.messages.clone();
                for a in 0..self.graph.num_factors() {
                    for slot in 0..self.graph.scope(a).len() {
                        let c = self.coeffs[a][slot].clone();
                        let m0 = self.m0(&snapshot, a, slot);
                        let n0 = self.n0(&snapshot, a, slot);
                        let n_update: Vec<T> = m0
                            .iter()
                            .zip(&n0)
                            .map(|(&m, &n)| c.n_from_m0 * m + c.n_from_n0 * n)
                            .collect();
                        let m_update: Vec<T> = m0
                            .iter()
                            .zip(&n0)
                            .map(|(&m, &n)| c.m_from_m0 * m + c.m_from_n0 * n)
                            .collect();
                        Self::blend(
                            &mut self.messages.node_to_factor[a][slot],
                            n_update,
                            gamma,
                            &mut delta,
                        )
                        .map_err(|_| (a, self.graph.scope(a)[slot]))?;
                        Self::blend(
                            &mut self.messages.factor_to_node[a][slot],
                            m_update,
                            gamma,
                            &mut delta,
                        )
                        .map_err(|_| (a, self.graph.scope(a)[slot]))?;
                    }
                }
            }
        }
        self.iterations += 1;
        Ok(delta)
    }

    /// Beliefs extracted from the current messages.
    pub fn extract(&self) -> BeliefSet<T> {
        extract_beliefs(self.graph, self.potentials, self.counting, &self.messages)
    }

    fn result(&self, converged: bool) -> InferenceResult<T> {
        let beliefs = self.extract();
        let log_partition_estimate = evaluate_objective(&beliefs, self.potentials, self.counting);
        InferenceResult {
            beliefs,
            log_partition_estimate,
            converged,
            iterations: self.iterations,
        }
    }

    /// Iterates to convergence or `max_iters`. Non-convergence is not an
    /// error: the last iterate is returned with `converged = false`. A
    /// non-finite update aborts with the last finite iterate attached to
    /// the error.
    pub fn run(&mut self) -> Result<InferenceResult<T>> {
        let tol = T::of(self.opts.tol);
        for _ in 0..self.opts.max_iters {
            let before = self.messages.clone();
            match self.sweep() {
                Ok(delta) => {
                    if delta < tol {
                        return Ok(self.result(true));
                    }
                }
                Err((factor, var)) => {
                    self.messages = before;
                    let last = self.result(false).to_f64();
                    return Err(Error::NonFiniteMessage {
                        iteration: self.iterations + 1,
                        factor,
                        var,
                        last: Box::new(last),
                    });
                }
            }
        }
        Ok(self.result(false))
    }
}

/// One-call wrapper around [`Propagator`].
pub fn run_counting_bp<T: Real>(
    graph: &FactorGraph,
    potentials: &LogPotentials<T>,
    counting: &CountingNumbers<T>,
    opts: &PropagationOptions,
) -> Result<InferenceResult<T>> {
    Propagator::new(graph, potentials, counting, opts.clone())?.run()
}

/// Factor beliefs are the scaled factor table times all incoming node
/// messages; node beliefs average the factor-belief marginalizations over
/// the adjacent factors (they all agree at a fixed point). Isolated
/// variables use the softmax of their node table.
pub fn extract_beliefs<T: Real>(
    graph: &FactorGraph,
    potentials: &LogPotentials<T>,
    counting: &CountingNumbers<T>,
    messages: &MessageSet<T>,
) -> BeliefSet<T> {
    let mut factor = Vec::with_capacity(graph.num_factors());
    for a in 0..graph.num_factors() {
        let cards = graph.factor_cards(a);
        let ca = counting.factor[a];
        let mut log_b: Vec<T> = potentials.factor_table(a).iter().map(|&t| t / ca).collect();
        tables::for_each_assignment(&cards, |state, lin| {
            for (slot, n) in messages.node_to_factor[a].iter().enumerate() {
                log_b[lin] += n[state[slot]];
            }
        });
        normalize_log(&mut log_b);
        factor.push(log_b.into_iter().map(|x| x.exp()).collect::<Vec<T>>());
    }
    let mut node = Vec::with_capacity(graph.num_vars());
    for i in 0..graph.num_vars() {
        let card = graph.cardinality(i);
        if graph.degree(i) == 0 {
            let mut log_b = potentials.node_table(i).to_vec();
            normalize_log(&mut log_b);
            node.push(log_b.into_iter().map(|x| x.exp()).collect::<Vec<T>>());
            continue;
        }
        let mut avg = vec![T::zero(); card];
        for &(a, slot) in graph.var_factors(i) {
            let cards = graph.factor_cards(a);
            tables::for_each_assignment(&cards, |state, lin| {
                avg[state[slot]] += factor[a][lin];
            });
        }
        let total: T = avg.iter().copied().sum();
        for x in avg.iter_mut() {
            *x /= total;
        }
        node.push(avg);
    }
    BeliefSet { node, factor }
}

/// The approximate free-energy objective
/// `theta' mu + sum_i c_i H_i + sum_alpha c_alpha H_alpha`
/// with the 0 log 0 = 0 convention.
pub fn evaluate_objective<T: Real>(
    beliefs: &BeliefSet<T>,
    potentials: &LogPotentials<T>,
    counting: &CountingNumbers<T>,
) -> T {
    let mut value = T::zero();
    for (i, b) in beliefs.node.iter().enumerate() {
        for (&t, &p) in potentials.node_table(i).iter().zip(b) {
            value += t * p;
        }
        value += counting.node[i] * shannon_entropy(b);
    }
    for (a, b) in beliefs.factor.iter().enumerate() {
        for (&t, &p) in potentials.factor_table(a).iter().zip(b) {
            value += t * p;
        }
        value += counting.factor[a] * shannon_entropy(b);
    }
    value
}

/// Region entropies and multi-informations of a belief set.
pub fn entropy_vector<T: Real>(graph: &FactorGraph, beliefs: &BeliefSet<T>) -> EntropyVector<T> {
    let node: Vec<T> = beliefs.node.iter().map(|b| shannon_entropy(b)).collect();
    let factor: Vec<T> = beliefs.factor.iter().map(|b| shannon_entropy(b)).collect();
    let multi_information = (0..graph.num_factors())
        .map(|a| {
            let mut s = -factor[a];
            for &i in graph.scope(a) {
                s += node[i];
            }
            s
        })
        .collect();
    EntropyVector {
        node,
        factor,
        multi_information,
    }
}

/// For variable-valid counting numbers the entropy difference against the
/// Bethe entropy equals a weighted sum of multi-informations:
/// `H_c - H_b = sum_alpha (1 - c_alpha) I_alpha`. Returns (lhs, rhs) so
/// the identity can be property-tested.
pub fn entropy_gap_identity<T: Real>(
    graph: &FactorGraph,
    beliefs: &BeliefSet<T>,
    counting: &CountingNumbers<T>,
) -> Result<(T, T)> {
    if !is_variable_valid(counting, graph, T::of(1e-8)) {
        return Err(Error::InvalidArgument(
            "entropy gap identity needs variable-valid counting numbers".into(),
        ));
    }
    let ev = entropy_vector(graph, beliefs);
    let bethe = crate::counting::bethe_numbers::<T>(graph);
    let h = |c: &CountingNumbers<T>| -> T {
        let mut s = T::zero();
        for (ci, hi) in c.node.iter().zip(&ev.node) {
            s += *ci * *hi;
        }
        for (ca, ha) in c.factor.iter().zip(&ev.factor) {
            s += *ca * *ha;
        }
        s
    };
    let lhs = h(counting) - h(&bethe);
    let rhs = counting
        .factor
        .iter()
        .zip(&ev.multi_information)
        .map(|(&ca, &ia)| (T::one() - ca) * ia)
        .sum();
    Ok((lhs, rhs))
}

/// Weighted entropy `H_c` of a belief set (used by concavity checks).
pub fn weighted_entropy<T: Real>(
    graph: &FactorGraph,
    beliefs: &BeliefSet<T>,
    counting: &CountingNumbers<T>,
) -> T {
    let ev = entropy_vector(graph, beliefs);
    let mut s = T::zero();
    for (ci, hi) in counting.node.iter().zip(&ev.node) {
        s += *ci * *hi;
    }
    for (ca, ha) in counting.factor.iter().zip(&ev.factor) {
        s += *ca * *ha;
    }
    s
}

/// Log-space aggregate of the per-variable softmax normalizers; the exact
/// log-partition of a fully factorized model.
pub fn factorized_log_partition<T: Real>(graph: &FactorGraph, pots: &LogPotentials<T>) -> T {
    (0..graph.num_vars())
        .map(|i| log_sum_exp(pots.node_table(i)))
        .sum()
}

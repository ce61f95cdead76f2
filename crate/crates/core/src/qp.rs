//! Dense active-set solver for convex quadratic programs of the form
//!
//! ```text
//!     minimize    1/2 x' Q x + g' x
//!     subject to  E x = f,   x_j >= 0  for j in `nonneg`
//! ```
//!
//! Q must be positive definite on the feasible subspace (callers add a
//! tiny ridge to blocks that would otherwise be singular). Bounds are
//! handled as a working set; every subproblem is a dense KKT solve.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::real::Real;
use crate::simplex::{self, LpOutcome, StandardForm};

#[derive(Clone, Debug)]
pub struct QpProblem<T> {
    pub hessian: Mat<T>,
    pub linear: Vec<T>,
    pub eq: Mat<T>,
    pub eq_rhs: Vec<T>,
    /// Indices with an x_j >= 0 bound.
    pub nonneg: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    pub eq_multipliers: Vec<T>,
    /// One multiplier per entry of `nonneg` (zero when inactive).
    pub bound_multipliers: Vec<T>,
    pub iterations: usize,
}

/// Finds a feasible point of the constraint system with a phase-one LP,
/// splitting unconstrained variables into positive and negative parts.
fn feasible_start<T: Real>(p: &QpProblem<T>) -> Result<Vec<T>> {
    let n = p.linear.len();
    let m = p.eq_rhs.len();
    let is_nonneg: Vec<bool> = {
        let mut v = vec![false; n];
        for &j in &p.nonneg {
            v[j] = true;
        }
        v
    };
    // Column map: nonneg j -> one column; free j -> (pos, neg) pair.
    let mut col_of = vec![(0usize, None); n];
    let mut ncols = 0usize;
    for j in 0..n {
        if is_nonneg[j] {
            col_of[j] = (ncols, None);
            ncols += 1;
        } else {
            col_of[j] = (ncols, Some(ncols + 1));
            ncols += 2;
        }
    }
    let mut a = Mat::zeros(m, ncols);
    for r in 0..m {
        for j in 0..n {
            let v = p.eq[(r, j)];
            if v != T::zero() {
                let (cp, cn) = col_of[j];
                a[(r, cp)] = v;
                if let Some(cn) = cn {
                    a[(r, cn)] = -v;
                }
            }
        }
    }
    let lp = StandardForm {
        constraints: a,
        rhs: p.eq_rhs.clone(),
        objective: vec![T::zero(); ncols],
    };
    match simplex::solve(&lp, T::of(1e-8))? {
        LpOutcome::Optimal { x, .. } => {
            let mut out = vec![T::zero(); n];
            for j in 0..n {
                let (cp, cn) = col_of[j];
                out[j] = x[cp] - cn.map_or(T::zero(), |c| x[c]);
            }
            Ok(out)
        }
        LpOutcome::Infeasible { residual } => Err(Error::Infeasible(format!(
            "QP equality system infeasible (phase-one residual {:e})",
            residual.as_f64()
        ))),
        LpOutcome::Unbounded => Err(Error::Numerical("phase-one LP unbounded".into())),
    }
}

/// KKT solve for the equality-constrained subproblem: step `p` from `x`
/// and multipliers for the equality rows and the working bounds.
///
/// Two safeguards keep this robust on hard instances: the variable block
/// is symmetrically equilibrated so wildly scaled Hessian diagonals
/// (entropy curvature near the boundary) do not defeat the pivot guard,
/// and the constraint block carries a tiny dual regularization so a
/// working set whose bound rows have become linearly dependent with the
/// equalities still factors. One iterative-refinement pass against the
/// unregularized system removes the perturbation where the system is
/// consistent.
fn kkt_step<T: Real>(
    q: &Mat<T>,
    grad: &[T],
    eq: &Mat<T>,
    working: &[usize],
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = grad.len();
    let me = eq.rows();
    let mw = working.len();
    let dim = n + me + mw;
    let delta = T::of(1e-9);
    let scale: Vec<T> = (0..n)
        .map(|d| T::one() / q[(d, d)].abs().max(T::one()).sqrt())
        .collect();
    let mut k = Mat::zeros(dim, dim);
    let mut rhs = vec![T::zero(); dim];
    for r in 0..n {
        for c in 0..n {
            k[(r, c)] = q[(r, c)] * scale[r] * scale[c];
        }
        rhs[r] = -grad[r] * scale[r];
    }
    for r in 0..me {
        for c in 0..n {
            let v = eq[(r, c)] * scale[c];
            k[(n + r, c)] = v;
            k[(c, n + r)] = -v;
        }
    }
    for (w, &j) in working.iter().enumerate() {
        k[(n + me + w, j)] = scale[j];
        k[(j, n + me + w)] = -scale[j];
    }
    for d in n..dim {
        k[(d, d)] = -delta;
    }
    let factors = linalg::LuFactors::factor(&k)?;
    let mut sol = factors.solve(&rhs);
    // Refine against the unregularized system K0 = K + delta on the
    // constraint diagonal.
    for _ in 0..2 {
        let mut residual = k.matvec(&sol);
        for (d, r) in residual.iter_mut().enumerate().take(dim).skip(n) {
            *r += delta * sol[d];
        }
        for (r, &b) in residual.iter_mut().zip(&rhs) {
            *r = b - *r;
        }
        let correction = factors.solve(&residual);
        for (s, c) in sol.iter_mut().zip(&correction) {
            *s += *c;
        }
    }
    let step: Vec<T> = sol[..n].iter().zip(&scale).map(|(&s, &d)| s * d).collect();
    let eq_mult = sol[n..n + me].to_vec();
    let bound_mult = sol[n + me..].to_vec();
    Ok((step, eq_mult, bound_mult))
}

pub fn solve<T: Real>(p: &QpProblem<T>, start: Option<&[T]>) -> Result<QpSolution<T>> {
    let n = p.linear.len();
    if p.hessian.rows() != n || p.hessian.cols() != n || p.eq.cols() != n {
        return Err(Error::InvalidArgument("QP dimension mismatch".into()));
    }
    let (eq, eq_rhs) = linalg::reduce_equalities(&p.eq, &p.eq_rhs, T::of(1e-10))?;
    let reduced = QpProblem {
        hessian: p.hessian.clone(),
        linear: p.linear.clone(),
        eq,
        eq_rhs,
        nonneg: p.nonneg.clone(),
    };
    // A warm start is only usable if it actually satisfies the equality
    // system; otherwise every active-set iterate inherits its residual.
    let mut x = match start {
        Some(x0) => {
            let ax = reduced.eq.matvec(x0);
            let residual = ax
                .iter()
                .zip(&reduced.eq_rhs)
                .map(|(v, b)| (*v - *b).abs())
                .fold(T::zero(), T::max);
            if residual <= T::of(1e-9) {
                x0.to_vec()
            } else {
                feasible_start(&reduced)?
            }
        }
        None => feasible_start(&reduced)?,
    };
    for &j in &reduced.nonneg {
        if x[j] < T::zero() {
            x[j] = T::zero();
        }
    }

    let zero_tol = T::of(1e-11);
    let mut working: Vec<usize> = reduced
        .nonneg
        .iter()
        .copied()
        .filter(|&j| x[j] <= zero_tol)
        .collect();

    let max_iters = 100 + 6 * n;
    for iter in 0..max_iters {
        let mut grad: Vec<T> = reduced.hessian.matvec(&x);
        for (gi, &li) in grad.iter_mut().zip(&reduced.linear) {
            *gi += li;
        }
        let (step, eq_mult, bound_mult) = kkt_step(&reduced.hessian, &grad, &reduced.eq, &working)?;
        let scale = T::one().max(linalg::norm_inf(&x));
        if linalg::norm_inf(&step) <= zero_tol * scale {
            // Stationary on the working set; check bound multipliers.
            let mut drop: Option<(usize, T)> = None;
            for (w, &mult) in bound_mult.iter().enumerate() {
                if mult < -T::of(1e-9) {
                    match drop {
                        None => drop = Some((w, mult)),
                        Some((_, best)) if mult < best => drop = Some((w, mult)),
                        _ => {}
                    }
                }
            }
            match drop {
                None => {
                    let mut bounds = vec![T::zero(); reduced.nonneg.len()];
                    for (w, &j) in working.iter().enumerate() {
                        let pos = reduced.nonneg.iter().position(|&k| k == j).unwrap();
                        bounds[pos] = bound_mult[w];
                    }
                    // Snap active bounds exactly to zero.
                    for &j in &working {
                        x[j] = T::zero();
                    }
                    return Ok(QpSolution {
                        x,
                        eq_multipliers: eq_mult,
                        bound_multipliers: bounds,
                        iterations: iter,
                    });
                }
                Some((w, _)) => {
                    working.remove(w);
                }
            }
        } else {
            // Step until a bound blocks.
            let mut alpha = T::one();
            let mut blocking = None;
            for &j in &reduced.nonneg {
                if working.contains(&j) {
                    continue;
                }
                if step[j] < -zero_tol {
                    let a = (-x[j].max(T::zero())) / step[j];
                    if a < alpha {
                        alpha = a.max(T::zero());
                        blocking = Some(j);
                    }
                }
            }
            linalg::axpy(alpha, &step, &mut x);
            if let Some(j) = blocking {
                x[j] = T::zero();
                working.push(j);
            }
        }
    }
    Err(Error::Numerical(
        "active-set QP iteration limit exceeded".into(),
    ))
}

/// Max KKT violation of a solution for the *original* problem: stationarity,
/// primal feasibility, bound feasibility, multiplier signs and
/// complementary slackness.
pub fn kkt_residual<T: Real>(p: &QpProblem<T>, sol: &QpSolution<T>) -> T {
    // Stationarity uses the reduced equality system the solver worked with.
    let (eq, eq_rhs) =
        linalg::reduce_equalities(&p.eq, &p.eq_rhs, T::of(1e-10)).expect("consistent system");
    let mut r = T::zero();
    let mut station: Vec<T> = p.hessian.matvec(&sol.x);
    for (s, &g) in station.iter_mut().zip(&p.linear) {
        *s += g;
    }
    let ete = eq.t_matvec(&sol.eq_multipliers);
    for j in 0..station.len() {
        station[j] -= ete[j];
    }
    for (pos, &j) in p.nonneg.iter().enumerate() {
        station[j] -= sol.bound_multipliers[pos];
    }
    r = r.max(linalg::norm_inf(&station));
    let ax = eq.matvec(&sol.x);
    for (v, &b) in ax.iter().zip(&eq_rhs) {
        r = r.max((*v - b).abs());
    }
    for (pos, &j) in p.nonneg.iter().enumerate() {
        r = r.max(-sol.x[j]); // bound violation
        r = r.max(-sol.bound_multipliers[pos]); // dual sign
        r = r.max((sol.x[j] * sol.bound_multipliers[pos]).abs()); // slackness
    }
    r
}

//! Two-phase dense simplex for small standard-form linear programs.
//!
//! Solves `min c'x  s.t.  A x = b, x >= 0` with Bland's rule throughout,
//! which guarantees termination on the degenerate systems the concavity
//! certificate produces. Problems in this crate have at most a few
//! hundred columns, so a dense tableau is fine.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct StandardForm<T> {
    pub constraints: Mat<T>,
    pub rhs: Vec<T>,
    pub objective: Vec<T>,
}

#[derive(Clone, Debug)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, objective: T },
    /// Phase one could not reach zero; `residual` is the remaining
    /// infeasibility mass.
    Infeasible { residual: T },
    Unbounded,
}

struct Tableau<T> {
    /// body[r] has n + m columns (structural then artificial).
    body: Mat<T>,
    rhs: Vec<T>,
    /// cost row (reduced costs) and its current objective value.
    cost: Vec<T>,
    cost_value: T,
    basis: Vec<usize>,
    n_struct: usize,
}

impl<T: Real> Tableau<T> {
    fn pivot(&mut self, row: usize, col: usize) {
        let m = self.rhs.len();
        let width = self.body.cols();
        let pivot = self.body[(row, col)];
        let inv = T::one() / pivot;
        for c in 0..width {
            self.body[(row, c)] *= inv;
        }
        self.rhs[row] *= inv;
        for r in 0..m {
            if r != row {
                let f = self.body[(r, col)];
                if f != T::zero() {
                    for c in 0..width {
                        let v = self.body[(row, c)];
                        self.body[(r, c)] -= f * v;
                    }
                    let v = self.rhs[row];
                    self.rhs[r] -= f * v;
                }
            }
        }
        let f = self.cost[col];
        if f != T::zero() {
            for c in 0..width {
                let v = self.body[(row, c)];
                self.cost[c] -= f * v;
            }
            // Objective moves by (reduced cost) * (entering value).
            self.cost_value += f * self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations with Bland's rule over the allowed columns.
    /// Returns false if the problem is unbounded in the current phase.
    fn iterate(&mut self, allow_artificial: bool, max_pivots: usize) -> Result<bool> {
        let cost_tol = T::of(1e-10);
        let pivot_tol = T::of(1e-11);
        let limit = if allow_artificial {
            self.body.cols()
        } else {
            self.n_struct
        };
        for _ in 0..max_pivots {
            // Bland: first column with negative reduced cost.
            let mut entering = None;
            for c in 0..limit {
                if self.cost[c] < -cost_tol {
                    entering = Some(c);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(true);
            };
            // Ratio test; ties broken by smallest basis index (Bland).
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rhs.len() {
                let a = self.body[(r, col)];
                if a > pivot_tol {
                    let ratio = self.rhs[r] / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - pivot_tol
                                || (ratio < bratio + pivot_tol && self.basis[r] < self.basis[br])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Ok(false);
            };
            self.pivot(row, col);
        }
        Err(Error::Numerical("simplex pivot limit exceeded".into()))
    }
}

/// Solves the standard-form LP. `feasibility_tol` bounds the phase-one
/// objective below which the system counts as feasible.
pub fn solve<T: Real>(lp: &StandardForm<T>, feasibility_tol: T) -> Result<LpOutcome<T>> {
    let m = lp.rhs.len();
    let n = lp.objective.len();
    if lp.constraints.rows() != m || lp.constraints.cols() != n {
        return Err(Error::InvalidArgument("LP dimension mismatch".into()));
    }

    // Build the phase-one tableau with b >= 0 and an artificial per row.
    let mut body = Mat::zeros(m, n + m);
    let mut rhs = vec![T::zero(); m];
    for r in 0..m {
        let flip = lp.rhs[r] < T::zero();
        for c in 0..n {
            let v = lp.constraints[(r, c)];
            body[(r, c)] = if flip { -v } else { v };
        }
        rhs[r] = if flip { -lp.rhs[r] } else { lp.rhs[r] };
        body[(r, n + r)] = T::one();
    }
    let basis: Vec<usize> = (n..n + m).collect();

    // Phase-one reduced costs: minimize the sum of artificials.
    let mut cost = vec![T::zero(); n + m];
    let mut cost_value = T::zero();
    for r in 0..m {
        for c in 0..n {
            cost[c] -= body[(r, c)];
        }
        cost_value += rhs[r];
    }

    let mut tab = Tableau {
        body,
        rhs,
        cost,
        cost_value,
        basis,
        n_struct: n,
    };
    let max_pivots = 200 + 50 * (n + m);
    if !tab.iterate(true, max_pivots)? {
        return Err(Error::Numerical("phase-one LP unbounded".into()));
    }
    if tab.cost_value > feasibility_tol {
        return Ok(LpOutcome::Infeasible {
            residual: tab.cost_value,
        });
    }

    // Drive remaining artificials out of the basis where possible.
    for r in 0..m {
        if tab.basis[r] >= n {
            let mut col = None;
            for c in 0..n {
                if tab.body[(r, c)].abs() > T::of(1e-9) {
                    col = Some(c);
                    break;
                }
            }
            if let Some(c) = col {
                tab.pivot(r, c);
            }
            // Otherwise the row is redundant; the artificial stays basic
            // at zero and is excluded from phase two.
        }
    }

    // Phase two: recompute reduced costs for the real objective.
    let mut cost = vec![T::zero(); n + m];
    cost[..n].copy_from_slice(&lp.objective);
    let mut cost_value = T::zero();
    for r in 0..m {
        let b = tab.basis[r];
        if b < n {
            let cb = lp.objective[b];
            if cb != T::zero() {
                for c in 0..n + m {
                    let v = tab.body[(r, c)];
                    cost[c] -= cb * v;
                }
                cost_value += cb * tab.rhs[r];
            }
        }
    }
    tab.cost = cost;
    tab.cost_value = cost_value;
    if !tab.iterate(false, max_pivots)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![T::zero(); n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs[r].max(T::zero());
        }
    }
    let objective = crate::linalg::dot(&lp.objective, &x);
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> StandardForm<f64> {
        StandardForm {
            constraints: Mat::from_rows(a),
            rhs: b,
            objective: c,
        }
    }

    #[test]
    fn solves_small_lp() {
        // min -x0 - 2 x1 s.t. x0 + x1 + s = 4, x1 + t = 3
        let p = lp(
            vec![vec![1.0, 1.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]],
            vec![4.0, 3.0],
            vec![-1.0, -2.0, 0.0, 0.0],
        );
        match solve(&p, 1e-8).unwrap() {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 1.0).abs() < 1e-9);
                assert!((x[1] - 3.0).abs() < 1e-9);
                assert!((objective + 7.0).abs() < 1e-9);
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible() {
        // x0 = -1 with x0 >= 0.
        let p = lp(vec![vec![1.0]], vec![-1.0], vec![0.0]);
        assert!(matches!(
            solve(&p, 1e-8).unwrap(),
            LpOutcome::Infeasible { .. }
        ));
    }

    #[test]
    fn detects_unbounded() {
        // min -x0 s.t. x0 - x1 = 0 (both can grow without bound).
        let p = lp(vec![vec![1.0, -1.0]], vec![0.0], vec![-1.0, 0.0]);
        assert!(matches!(solve(&p, 1e-8).unwrap(), LpOutcome::Unbounded));
    }

    #[test]
    fn feasibility_probe_with_zero_objective() {
        let p = lp(
            vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]],
            vec![2.0, 1.0],
            vec![0.0, 0.0, 0.0],
        );
        match solve(&p, 1e-8).unwrap() {
            LpOutcome::Optimal { x, .. } => {
                assert!((x[0] + x[1] - 2.0).abs() < 1e-9);
                assert!((x[1] + x[2] - 1.0).abs() < 1e-9);
                assert!(x.iter().all(|&v| v >= -1e-12));
            }
            other => panic!("expected feasible point, got {other:?}"),
        }
    }

    #[test]
    fn handles_redundant_rows() {
        let p = lp(
            vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 2.0],
            vec![1.0, 0.0],
        );
        match solve(&p, 1e-8).unwrap() {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] + x[1] - 1.0).abs() < 1e-9);
                assert!(objective.abs() < 1e-9);
            }
            other => panic!("expected optimum, got {other:?}"),
        }
    }
}

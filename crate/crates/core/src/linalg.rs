//! Minimal dense linear algebra used by the polytope and the solvers.
//!
//! Problem sizes here are a few hundred rows/columns, so plain dense
//! routines with partial pivoting are sufficient.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::real::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// A^T x.
    pub fn t_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi != T::zero() {
                for (o, &a) in out.iter_mut().zip(self.row(i)) {
                    *o += xi * a;
                }
            }
        }
        out
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// y += s * x.
pub fn axpy<T: Real>(s: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// LU factorization with partial pivoting, reusable across right-hand
/// sides.
pub struct LuFactors<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Real> LuFactors<T> {
    pub fn factor(a: &Mat<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::InvalidArgument("LU requires a square matrix".into()));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut scale = T::zero();
        for i in 0..n * n {
            scale = scale.max(lu.data[i].abs());
        }
        let tiny = T::of(1e-13) * scale.max(T::one());

        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for r in k + 1..n {
                let v = lu[(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= tiny {
                return Err(Error::Numerical(format!(
                    "singular linear system (pivot {best:e} at column {k})"
                )));
            }
            if p != k {
                for c in 0..n {
                    let t = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = t;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for r in k + 1..n {
                let f = lu[(r, k)] / pivot;
                lu[(r, k)] = f;
                if f != T::zero() {
                    for c in k + 1..n {
                        let v = lu[(k, c)];
                        lu[(r, c)] -= f * v;
                    }
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for k in 0..n {
            for c in 0..k {
                let f = self.lu[(k, c)];
                if f != T::zero() {
                    let v = x[c];
                    x[k] -= f * v;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..n {
                s -= self.lu[(k, c)] * x[c];
            }
            x[k] = s / self.lu[(k, k)];
        }
        x
    }
}

/// Solves A x = b by LU with partial pivoting. A is copied.
pub fn lu_solve<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>> {
    if a.rows() != b.len() {
        return Err(Error::InvalidArgument("lu_solve dimension mismatch".into()));
    }
    Ok(LuFactors::factor(a)?.solve(b))
}

fn project_out<T: Real>(v: &mut [T], basis: &[Vec<T>]) {
    for b in basis {
        let coef = dot(v, b);
        axpy(-coef, b, v);
    }
}

/// Orthonormal basis of the row space of `a` (modified Gram-Schmidt with
/// one re-orthogonalization pass). Rows with residual norm below `tol`
/// are treated as dependent and dropped.
pub fn orthonormal_rowspace<T: Real>(a: &Mat<T>, tol: T) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for i in 0..a.rows() {
        let mut v = a.row(i).to_vec();
        project_out(&mut v, &basis);
        project_out(&mut v, &basis);
        let n = norm2(&v);
        if n > tol {
            let inv = T::one() / n;
            for x in v.iter_mut() {
                *x *= inv;
            }
            basis.push(v);
        }
    }
    basis
}

/// Orthonormal basis of the null space of `a`.
pub fn nullspace<T: Real>(a: &Mat<T>, tol: T) -> Vec<Vec<T>> {
    let n = a.cols();
    let row_basis = orthonormal_rowspace(a, tol);
    let mut null_basis: Vec<Vec<T>> = Vec::new();
    let want = n - row_basis.len();
    for k in 0..n {
        if null_basis.len() == want {
            break;
        }
        let mut v = vec![T::zero(); n];
        v[k] = T::one();
        project_out(&mut v, &row_basis);
        project_out(&mut v, &null_basis);
        project_out(&mut v, &row_basis);
        project_out(&mut v, &null_basis);
        let nn = norm2(&v);
        if nn > tol {
            let inv = T::one() / nn;
            for x in v.iter_mut() {
                *x *= inv;
            }
            null_basis.push(v);
        }
    }
    null_basis
}

/// Reduces `a x = b` to an equivalent full-row-rank system by Gaussian
/// elimination. Returns `Err` when the system is inconsistent.
pub fn reduce_equalities<T: Real>(a: &Mat<T>, b: &[T], tol: T) -> Result<(Mat<T>, Vec<T>)> {
    let (m, n) = (a.rows(), a.cols());
    let mut work = a.clone();
    let mut rhs = b.to_vec();
    let mut pivot_rows: Vec<usize> = Vec::new();
    let mut row = 0usize;
    for col in 0..n {
        if row == m {
            break;
        }
        let mut p = row;
        let mut best = work[(row, col)].abs();
        for r in row + 1..m {
            let v = work[(r, col)].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= tol {
            continue;
        }
        if p != row {
            for c in 0..n {
                let t = work[(row, c)];
                work[(row, c)] = work[(p, c)];
                work[(p, c)] = t;
            }
            rhs.swap(row, p);
        }
        let pivot = work[(row, col)];
        for r in 0..m {
            if r != row {
                let f = work[(r, col)] / pivot;
                if f != T::zero() {
                    for c in 0..n {
                        let v = work[(row, c)];
                        work[(r, c)] -= f * v;
                    }
                    let v = rhs[row];
                    rhs[r] -= f * v;
                }
            }
        }
        pivot_rows.push(row);
        row += 1;
    }
    // Remaining rows must be 0 = 0.
    for r in row..m {
        if rhs[r].abs() > tol * T::of(10.0) {
            return Err(Error::Infeasible(format!(
                "inconsistent equality row (residual {:e})",
                rhs[r].as_f64()
            )));
        }
    }
    let mut out = Mat::zeros(0, n);
    let mut out_rhs = Vec::new();
    for &r in &pivot_rows {
        out.push_row(work.row(r));
        out_rhs.push(rhs[r]);
    }
    Ok((out, out_rhs))
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order.
pub fn symmetric_eigenvalues<T: Real>(a: &Mat<T>) -> Vec<T> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "symmetric_eigenvalues requires square input");
    let mut m = a.clone();
    let frob = {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    };
    let stop = T::of(1e-14) * frob.max(T::one());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)].abs();
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= stop / T::of((n * n) as f64) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() {
                        T::one()
                    } else {
                        -T::one()
                    };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_known_system() {
        let a: Mat<f64> = Mat::from_rows(vec![vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = lu_solve(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Mat::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(lu_solve(&a, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn nullspace_of_sum_constraint() {
        // x0 + x1 + x2 = 0 has a 2-dimensional null space.
        let a = Mat::from_rows(vec![vec![1.0, 1.0, 1.0]]);
        let basis = nullspace(&a, 1e-10);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert!(v.iter().sum::<f64>().abs() < 1e-10);
            assert!((norm2(v) - 1.0).abs() < 1e-10);
        }
        assert!(dot(&basis[0], &basis[1]).abs() < 1e-10);
    }

    #[test]
    fn reduce_drops_dependent_rows() {
        let a = Mat::from_rows(vec![
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 2.0],
        ]);
        let (r, rhs) = reduce_equalities(&a, &[1.0, 2.0, 3.0], 1e-10).unwrap();
        assert_eq!(r.rows(), 2);
        assert_eq!(rhs.len(), 2);
        // Inconsistent variant errors.
        assert!(reduce_equalities(&a, &[1.0, 2.0, 4.0], 1e-10).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_match_hand_computation() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let a: Mat<f64> = Mat::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigenvalues(&a);
        assert!((e[0] - 1.0).abs() < 1e-10);
        assert!((e[1] - 3.0).abs() < 1e-10);
    }
}

//! Compressed-row storage for assembled operators and thin wrappers over the
//! faer sparse factorizations.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix, summing duplicate entries in insertion order.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(entries.len());
        let mut val: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col, val }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `xᵀ A y`
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let entries = self.iter().chain(other.iter()).collect();
        CsrMatrix::from_triplets(self.n, entries)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.val)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let t = CsrMatrix::from_triplets(self.n, self.iter().map(|(i, j, v)| (j, i, v)).collect());
        t.col == self.col
            && t.row_ptr == self.row_ptr
            && t.val.iter().zip(&self.val).all(|(a, b)| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0))
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> =
            self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::SolverFailure(format!("sparse matrix creation: {e:?}")))
    }
}

/// Sparse LU with fill-reducing column ordering; supports transposed solves.
pub struct LuFactor {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::SolverFailure(format!("LU factorization: {e:?}")))?;
        Ok(Self { n: a.dim(), lu })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, 1));
    }

    pub fn solve_transpose_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        self.lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, 1));
    }
}

/// Sparse Cholesky for symmetric positive definite operators.
pub struct CholFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl CholFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SolverFailure(format!("Cholesky factorization: {e:?}")))?;
        Ok(Self { n: a.dim(), llt })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(rhs, self.n, 1));
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Normwise backward error accepted when the relative residual cannot reach
/// the requested tolerance in floating point (ill-conditioned but solvable).
const BACKWARD_TOL: f64 = 1e-13;

/// Solves `A x = b` with up to three steps of iterative refinement and checks
/// the relative residual against `tol`, or the backward error
/// `‖r‖ / (‖A‖_F ‖x‖ + ‖b‖)` when round-off dominates.
pub(crate) fn refined_solve(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    solve: impl Fn(&mut [f64]),
    rhs: &[f64],
    tol: f64,
    anorm: f64,
) -> Result<Vec<f64>> {
    let bnorm = norm2(rhs);
    let mut x = rhs.to_vec();
    solve(&mut x);
    if bnorm == 0.0 {
        return Ok(vec![0.0; rhs.len()]);
    }
    for _ in 0..3 {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure("non-finite solution (singular system?)".into()));
        }
        let ax = apply(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        if norm2(&r) <= 0.01 * tol * bnorm {
            return Ok(x);
        }
        solve(&mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
    }
    let ax = apply(&x);
    let res = rhs.iter().zip(&ax).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt();
    if res <= tol * bnorm || res <= BACKWARD_TOL * (anorm * norm2(&x) + bnorm) {
        Ok(x)
    } else {
        Err(Error::SolverFailure(format!("relative residual {:.2e} above {tol:.0e}", res / bnorm)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![3.0, 2.0]);
        assert_eq!(a.form(&[1.0, 0.0], &[1.0, 1.0]), 3.0);
    }

    #[test]
    fn lu_and_transpose() {
        let a = CsrMatrix::from_triplets(
            3,
            vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, -2.0), (1, 1, 3.0), (1, 2, 1.0), (2, 2, 5.0), (2, 0, 1.0)],
        );
        let lu = LuFactor::new(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let mut x = b.to_vec();
        lu.solve_in_place(&mut x);
        let ax = a.mul_vec(&x);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-13));
        let at = CsrMatrix::from_triplets(3, a.iter().map(|(i, j, v)| (j, i, v)).collect());
        let mut y = b.to_vec();
        lu.solve_transpose_in_place(&mut y);
        let aty = at.mul_vec(&y);
        assert!(aty.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-13));
    }
}

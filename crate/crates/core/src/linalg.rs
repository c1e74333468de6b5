//! Small dense-matrix helpers built on nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a matrix is ridged.
pub const RIDGE_TRIGGER: f64 = 1e-10;
/// Ridge added, as a multiple of `trace / p`.
pub const RIDGE_SIZE: f64 = 1e-8;

/// Cholesky factor of an SPD matrix with its log-determinant.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Decomposition(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Decomposition("matrix has non-finite entries".into()));
        }
        let chol = Cholesky::new(m.clone()).ok_or_else(|| Error::Decomposition("Cholesky factorization failed".into()))?;
        let l = chol.l_dirty();
        let log_det = 2.0 * (0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Decomposition("determinant is zero or not finite".into()));
        }
        Ok(Self { chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    pub fn solve_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(m)
    }

    /// `vᵀ M⁻¹ v`, via the triangular factor.
    pub fn quad(&self, v: &DVector<f64>) -> f64 {
        let z = self.chol.l_dirty().solve_lower_triangular(v).expect("triangular factor is nonsingular");
        z.norm_squared()
    }

    /// `M⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Lower-triangular factor `L` with `M = L Lᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// Eigen-decomposition with eigenvalues in descending order and each
/// eigenvector's first non-negligible component made positive.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let p = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(p, p);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v = -v;
            }
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Adds `RIDGE_SIZE * trace / p` to the diagonal when the smallest
/// eigenvalue falls below `RIDGE_TRIGGER` times the largest. Returns the
/// possibly ridged matrix and whether the ridge was applied.
pub fn ridge_if_needed(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let s = symmetrize(m);
    let eig = SymmetricEigen::new(s.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min >= RIDGE_TRIGGER * max && max > 0.0 {
        return (s, false);
    }
    let p = s.nrows() as f64;
    let bump = RIDGE_SIZE * (s.trace() / p).abs().max(f64::MIN_POSITIVE);
    let mut out = s;
    for i in 0..out.nrows() {
        out[(i, i)] += bump;
    }
    (out, true)
}

pub fn select_rows_cols(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

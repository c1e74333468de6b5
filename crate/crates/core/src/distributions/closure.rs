//! Affine maps, marginals and conditionals. Index sets are zero-based.

use nalgebra::{DMatrix, DVector};

use super::gh::{GhFullParams, GhdParams, StParams};
use crate::error::{Error, Result};
use crate::linalg::{select, select_rows_cols, symmetrize, SpdFactor};

/// Families closed under affine maps and marginalization, with conditionals
/// that land in the classical generalized hyperbolic form.
pub trait Closure: Sized {
    fn affine(&self, b: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Self>;
    fn marginal(&self, idx: &[usize]) -> Result<Self>;
    /// Law of the remaining coordinates, in ascending order, given `x1`.
    fn conditional(&self, idx1: &[usize], x1: &DVector<f64>) -> Result<GhFullParams>;
}

fn check_index_set(idx: &[usize], p: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::Argument("index set is empty".into()));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= p) {
        return Err(Error::Argument(format!("index {bad} out of range for dimension {p}")));
    }
    let mut seen = vec![false; p];
    for &i in idx {
        if seen[i] {
            return Err(Error::Argument(format!("index {i} repeated")));
        }
        seen[i] = true;
    }
    Ok(())
}

fn affine_parts(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    b: &DMatrix<f64>,
    shift: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    if b.ncols() != mu.len() || b.nrows() != shift.len() || b.nrows() == 0 {
        return Err(Error::Argument(format!(
            "affine map {}x{} with shift {} does not fit dimension {}",
            b.nrows(),
            b.ncols(),
            shift.len(),
            mu.len()
        )));
    }
    Ok((b * mu + shift, symmetrize(&(b * sigma * b.transpose())), b * beta))
}

/// Shared pieces of the conditional of block 2 given block 1.
struct CondParts {
    delta1: f64,
    skew1: f64,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    beta: DVector<f64>,
}

fn conditional_parts(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    idx1: &[usize],
    x1: &DVector<f64>,
) -> Result<CondParts> {
    let p = mu.len();
    check_index_set(idx1, p)?;
    if idx1.len() == p {
        return Err(Error::Argument("conditioning set must be a proper subset".into()));
    }
    if x1.len() != idx1.len() || x1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("conditioning values must be finite and match the index set".into()));
    }
    let idx2: Vec<usize> = (0..p).filter(|i| !idx1.contains(i)).collect();
    let s11 = select_rows_cols(sigma, idx1, idx1);
    let s21 = select_rows_cols(sigma, &idx2, idx1);
    let s22 = select_rows_cols(sigma, &idx2, &idx2);
    let f11 = SpdFactor::new(&s11)?;
    let d1 = x1 - select(mu, idx1);
    let b1 = select(beta, idx1);
    // Σ21 Σ11⁻¹
    let reg = f11.solve_mat(&s21.transpose()).transpose();
    Ok(CondParts {
        delta1: f11.quad(&d1),
        skew1: f11.quad(&b1),
        mu: select(mu, &idx2) + &reg * d1,
        sigma: symmetrize(&(s22 - &reg * s21.transpose())),
        beta: select(beta, &idx2) - &reg * b1,
    })
}

impl Closure for GhdParams {
    fn affine(&self, b: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Self> {
        let (mu, sigma, beta) = affine_parts(&self.mu, &self.sigma, &self.beta, b, shift)?;
        GhdParams::new(self.lambda, self.omega, mu, sigma, beta)
    }

    fn marginal(&self, idx: &[usize]) -> Result<Self> {
        check_index_set(idx, self.dim())?;
        GhdParams::new(self.lambda, self.omega, select(&self.mu, idx), select_rows_cols(&self.sigma, idx, idx), select(&self.beta, idx))
    }

    fn conditional(&self, idx1: &[usize], x1: &DVector<f64>) -> Result<GhFullParams> {
        let c = conditional_parts(&self.mu, &self.sigma, &self.beta, idx1, x1)?;
        GhFullParams::new(
            self.lambda - 0.5 * idx1.len() as f64,
            self.omega + c.delta1,
            self.omega + c.skew1,
            c.mu,
            c.sigma,
            c.beta,
        )
    }
}

impl Closure for StParams {
    fn affine(&self, b: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Self> {
        let (mu, sigma, beta) = affine_parts(&self.mu, &self.sigma, &self.beta, b, shift)?;
        StParams::new(self.dof, mu, sigma, beta)
    }

    fn marginal(&self, idx: &[usize]) -> Result<Self> {
        check_index_set(idx, self.dim())?;
        StParams::new(self.dof, select(&self.mu, idx), select_rows_cols(&self.sigma, idx, idx), select(&self.beta, idx))
    }

    fn conditional(&self, idx1: &[usize], x1: &DVector<f64>) -> Result<GhFullParams> {
        let c = conditional_parts(&self.mu, &self.sigma, &self.beta, idx1, x1)?;
        GhFullParams::new(
            -0.5 * (self.dof + idx1.len() as f64),
            self.dof + c.delta1,
            c.skew1,
            c.mu,
            c.sigma,
            c.beta,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ghd() -> GhdParams {
        GhdParams::new(
            1.0,
            2.0,
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0]),
            DVector::from_vec(vec![0.1, -0.2, 0.3]),
        )
        .unwrap()
    }

    #[test]
    fn identity_affine() {
        let p = ghd();
        let q = p.affine(&DMatrix::identity(3, 3), &DVector::zeros(3)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn selector_affine_is_marginal() {
        let p = ghd();
        let b = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.affine(&b, &DVector::zeros(2)).unwrap(), p.marginal(&[2, 0]).unwrap());
    }

    #[test]
    fn uncorrelated_blocks_keep_location() {
        let p = ghd();
        let c = p.conditional(&[2], &DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(c.mu, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(c.beta, DVector::from_vec(vec![0.1, -0.2]));
        assert!((c.lambda - 0.5).abs() < 1e-15);
        assert!((c.chi - (2.0 + 3.0)).abs() < 1e-12);
        assert!((c.psi - (2.0 + 0.03)).abs() < 1e-12);
    }

    #[test]
    fn bad_index_sets() {
        let p = ghd();
        assert!(p.marginal(&[]).is_err());
        assert!(p.marginal(&[3]).is_err());
        assert!(p.conditional(&[0, 1, 2], &DVector::zeros(3)).is_err());
    }

    #[test]
    fn unskewed_st_conditional_has_zero_psi() {
        let st = StParams::new(4.0, DVector::zeros(2), DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let c = st.conditional(&[0], &DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(c.psi, 0.0);
        assert_eq!(c.lambda, -2.5);
        assert_eq!(c.chi, 5.0);
    }
}

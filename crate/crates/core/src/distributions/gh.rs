//! Generalized hyperbolic and skew-t parameter bundles and log-densities.

use nalgebra::{DMatrix, DVector};

use super::gig::{gig_moment, GigParams};
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, SpdFactor};
use crate::special::{ln_gamma, log_bessel_k};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Below this value of `βᵀΣ⁻¹β` a zero-`ψ` density uses the symmetric form.
pub const SKEW_NULL: f64 = 1e-12;

/// GHD in the concentration form (`η = 1`, so `χ = ψ = ω`).
#[derive(Debug, Clone, PartialEq)]
pub struct GhdParams {
    pub lambda: f64,
    pub omega: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub beta: DVector<f64>,
}

/// GHD in the classical `(λ, χ, ψ)` form. `psi` is zero only for skew-t
/// conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct GhFullParams {
    pub lambda: f64,
    pub chi: f64,
    pub psi: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub beta: DVector<f64>,
}

/// Multivariate skew-t with `dof` degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct StParams {
    pub dof: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub beta: DVector<f64>,
}

fn check_location_scale(mu: &DVector<f64>, sigma: &DMatrix<f64>, beta: &DVector<f64>) -> Result<()> {
    let p = mu.len();
    if p == 0 || sigma.nrows() != p || sigma.ncols() != p || beta.len() != p {
        return Err(Error::Argument(format!(
            "dimension mismatch: mu {}, sigma {}x{}, beta {}",
            p,
            sigma.nrows(),
            sigma.ncols(),
            beta.len()
        )));
    }
    if mu.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Argument("mu and beta must be finite".into()));
    }
    if !is_symmetric(sigma, 1e-12) {
        return Err(Error::Argument("sigma must be symmetric".into()));
    }
    SpdFactor::new(sigma)?;
    Ok(())
}

impl GhdParams {
    pub fn new(lambda: f64, omega: f64, mu: DVector<f64>, sigma: DMatrix<f64>, beta: DVector<f64>) -> Result<Self> {
        if !lambda.is_finite() || !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Argument(format!("need finite lambda and omega > 0, got ({lambda}, {omega})")));
        }
        check_location_scale(&mu, &sigma, &beta)?;
        Ok(Self { lambda, omega, mu, sigma, beta })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn to_full(&self) -> GhFullParams {
        GhFullParams {
            lambda: self.lambda,
            chi: self.omega,
            psi: self.omega,
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            beta: self.beta.clone(),
        }
    }

    pub fn mixing(&self) -> GigParams {
        GigParams { lambda: self.lambda, chi: self.omega, psi: self.omega }
    }
}

impl GhFullParams {
    pub fn new(lambda: f64, chi: f64, psi: f64, mu: DVector<f64>, sigma: DMatrix<f64>, beta: DVector<f64>) -> Result<Self> {
        if !lambda.is_finite() || !(chi > 0.0 && chi.is_finite()) || !(psi >= 0.0 && psi.is_finite()) {
            return Err(Error::Argument(format!("need finite lambda, chi > 0, psi >= 0; got ({lambda}, {chi}, {psi})")));
        }
        if psi == 0.0 && lambda >= 0.0 {
            return Err(Error::Argument("psi = 0 requires lambda < 0".into()));
        }
        check_location_scale(&mu, &sigma, &beta)?;
        Ok(Self { lambda, chi, psi, mu, sigma, beta })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

impl StParams {
    pub fn new(dof: f64, mu: DVector<f64>, sigma: DMatrix<f64>, beta: DVector<f64>) -> Result<Self> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(Error::Argument(format!("degrees of freedom must be positive, got {dof}")));
        }
        check_location_scale(&mu, &sigma, &beta)?;
        Ok(Self { dof, mu, sigma, beta })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// The same law written as a zero-`ψ` generalized hyperbolic.
    pub fn to_full(&self) -> GhFullParams {
        GhFullParams {
            lambda: -0.5 * self.dof,
            chi: self.dof,
            psi: 0.0,
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            beta: self.beta.clone(),
        }
    }
}

/// Per-point quantities the log-density needs, given a factored `Σ`.
#[derive(Debug, Clone, Copy)]
pub struct Mahalanobis {
    /// `(x-μ)ᵀΣ⁻¹(x-μ)`
    pub delta: f64,
    /// `(x-μ)ᵀΣ⁻¹β`
    pub lin: f64,
    /// `βᵀΣ⁻¹β`
    pub skew: f64,
    pub log_det: f64,
    pub dim: usize,
}

impl Mahalanobis {
    pub fn compute(x: &DVector<f64>, mu: &DVector<f64>, beta: &DVector<f64>, factor: &SpdFactor) -> Result<Self> {
        if x.len() != mu.len() {
            return Err(Error::Argument(format!("point has dimension {}, model has {}", x.len(), mu.len())));
        }
        let d = x - mu;
        let u = factor.solve(beta);
        Ok(Self { delta: factor.quad(&d), lin: d.dot(&u), skew: beta.dot(&u), log_det: factor.log_det(), dim: x.len() })
    }
}

/// Log-density of the generalized hyperbolic family from its sufficient
/// quantities. Handles `ψ = 0` (skew-t) and, within it, the symmetric case.
pub fn gh_log_density_core(lambda: f64, chi: f64, psi: f64, m: &Mahalanobis) -> Result<f64> {
    gh_log_density_cached(lambda, chi, psi, m, gh_log_norm(lambda, chi, psi)?, None)
}

/// The point-independent part of the log-density.
pub(crate) fn gh_log_norm(lambda: f64, chi: f64, psi: f64) -> Result<f64> {
    if psi > 0.0 {
        return Ok(0.5 * lambda * (psi / chi).ln() - log_bessel_k(lambda, (chi * psi).sqrt())?);
    }
    if lambda >= 0.0 {
        return Err(Error::Argument("psi = 0 requires lambda < 0".into()));
    }
    // (ψ/χ)^{λ/2}/K_λ(√χψ) → 2^{1+λ} χ^{-λ} / Γ(-λ) as ψ → 0
    Ok((1.0 + lambda) * std::f64::consts::LN_2 - lambda * chi.ln() - ln_gamma(-lambda))
}

/// Log-density given `log_norm` and, optionally, the already computed
/// `log K_{λ-p/2}(√((χ+δ)(ψ+βᵀΣ⁻¹β)))`.
pub(crate) fn gh_log_density_cached(
    lambda: f64,
    chi: f64,
    psi: f64,
    m: &Mahalanobis,
    log_norm: f64,
    kernel_log_k: Option<f64>,
) -> Result<f64> {
    let p = m.dim as f64;
    let nu = lambda - 0.5 * p;
    let q = chi + m.delta;
    let r = psi + m.skew;
    if psi == 0.0 && r < SKEW_NULL {
        return Ok(symmetric_t_log_density(-2.0 * lambda, chi, m));
    }
    let common = -0.5 * p * LN_2PI - 0.5 * m.log_det + m.lin;
    let log_k = match kernel_log_k {
        Some(v) => v,
        None => log_bessel_k(nu, (q * r).sqrt())?,
    };
    Ok(log_norm + 0.5 * nu * (q.ln() - r.ln()) + log_k + common)
}

/// Symmetric limit of the zero-`ψ` density: a scaled multivariate t with
/// shape `v/2` and scale parameter `χ/2`. With `χ = v` this is the classical t.
fn symmetric_t_log_density(v: f64, chi: f64, m: &Mahalanobis) -> f64 {
    let p = m.dim as f64;
    let h = 0.5 * (v + p);
    ln_gamma(h) - ln_gamma(0.5 * v) - 0.5 * p * (std::f64::consts::PI * chi).ln() - 0.5 * m.log_det
        - h * (m.delta / chi).ln_1p()
        + m.lin
}

pub fn ghd_log_density(x: &DVector<f64>, params: &GhdParams) -> Result<f64> {
    let f = SpdFactor::new(&params.sigma)?;
    let m = Mahalanobis::compute(x, &params.mu, &params.beta, &f)?;
    gh_log_density_core(params.lambda, params.omega, params.omega, &m)
}

pub fn gh_full_log_density(x: &DVector<f64>, params: &GhFullParams) -> Result<f64> {
    let f = SpdFactor::new(&params.sigma)?;
    let m = Mahalanobis::compute(x, &params.mu, &params.beta, &f)?;
    gh_log_density_core(params.lambda, params.chi, params.psi, &m)
}

pub fn st_log_density(x: &DVector<f64>, params: &StParams) -> Result<f64> {
    let f = SpdFactor::new(&params.sigma)?;
    let m = Mahalanobis::compute(x, &params.mu, &params.beta, &f)?;
    gh_log_density_core(-0.5 * params.dof, params.dof, 0.0, &m)
}

/// Mean and covariance: `μ + E[W]β` and `E[W]Σ + Var(W)ββᵀ`.
pub fn ghd_mean_cov(params: &GhdParams) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let w = params.mixing();
    let m1 = gig_moment(1.0, &w)?;
    let m2 = gig_moment(2.0, &w)?;
    let var = m2 - m1 * m1;
    let mean = &params.mu + &params.beta * m1;
    let cov = &params.sigma * m1 + &params.beta * params.beta.transpose() * var;
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_2d(beta: [f64; 2]) -> GhdParams {
        GhdParams::new(
            -0.5,
            6.0,
            DVector::from_vec(vec![0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            DVector::from_vec(beta.to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_when_unskewed() {
        let p = params_2d([0.0, 0.0]);
        let d = DVector::from_vec(vec![0.7, -0.2]);
        let a = ghd_log_density(&(&p.mu + &d), &p).unwrap();
        let b = ghd_log_density(&(&p.mu - &d), &p).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn concentration_form_is_full_form() {
        let p = params_2d([1.0, -0.4]);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let a = ghd_log_density(&x, &p).unwrap();
        let b = gh_full_log_density(&x, &p.to_full()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn unskewed_st_is_classical_t() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.8]);
        let mu = DVector::from_vec(vec![0.1, 0.2]);
        let st = StParams::new(5.0, mu.clone(), sigma.clone(), DVector::zeros(2)).unwrap();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        let d = &x - &mu;
        let delta = (d.transpose() * sigma.clone().try_inverse().unwrap() * &d)[(0, 0)];
        let v: f64 = 5.0;
        let expected = ln_gamma(3.5) - ln_gamma(2.5) - (v * std::f64::consts::PI).ln() - 0.5 * sigma.determinant().ln()
            - 3.5 * (1.0 + delta / v).ln();
        assert!((st_log_density(&x, &st).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mean_without_skew_is_location() {
        let p = params_2d([0.0, 0.0]);
        let (mean, _) = ghd_mean_cov(&p).unwrap();
        assert_eq!(mean, p.mu);
    }

    #[test]
    fn rejects_bad_sigma() {
        let r = GhdParams::new(
            1.0,
            1.0,
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            DVector::zeros(2),
        );
        assert!(r.is_err());
    }
}

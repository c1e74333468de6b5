//! Generalized inverse Gaussian law: density, moments and expectations.
//!
//! `GigParams` may carry `psi == 0` with `lambda < 0` when it describes a
//! skew-t latent posterior with no skewness; the law is then inverse gamma
//! with shape `-lambda` and scale `chi / 2`, and every function here uses
//! that limit.

use crate::error::{Error, Result};
use crate::special::{digamma, dlog_bessel_k_dorder, ln_gamma, log_bessel_k, log_bessel_k_neighbors, BesselOrderDerivativeConfig};

/// GIG(λ, χ, ψ) with density ∝ `w^{λ-1} exp(-(χ/w + ψ w)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams {
    pub lambda: f64,
    pub chi: f64,
    pub psi: f64,
}

/// GIG in the concentration/scale form: `χ = ωη`, `ψ = ω/η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigBrowneParams {
    pub lambda: f64,
    pub eta: f64,
    pub omega: f64,
}

impl GigParams {
    pub fn new(lambda: f64, chi: f64, psi: f64) -> Result<Self> {
        if !lambda.is_finite() || !(chi > 0.0 && chi.is_finite()) || !(psi > 0.0 && psi.is_finite()) {
            return Err(Error::Argument(format!("GIG needs finite lambda and positive chi, psi; got ({lambda}, {chi}, {psi})")));
        }
        Ok(Self { lambda, chi, psi })
    }

    /// The `psi -> 0` inverse-gamma boundary, only defined for `lambda < 0`.
    pub fn inverse_gamma_limit(lambda: f64, chi: f64) -> Result<Self> {
        if !(lambda < 0.0) || !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::Argument(format!("psi = 0 needs lambda < 0 and chi > 0; got ({lambda}, {chi})")));
        }
        Ok(Self { lambda, chi, psi: 0.0 })
    }

    pub fn is_boundary(&self) -> bool {
        self.psi == 0.0
    }

    pub fn to_browne(&self) -> GigBrowneParams {
        GigBrowneParams { lambda: self.lambda, eta: (self.chi / self.psi).sqrt(), omega: (self.chi * self.psi).sqrt() }
    }
}

impl GigBrowneParams {
    pub fn new(lambda: f64, eta: f64, omega: f64) -> Result<Self> {
        if !lambda.is_finite() || !(eta > 0.0 && eta.is_finite()) || !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Argument(format!("GIG needs finite lambda and positive eta, omega; got ({lambda}, {eta}, {omega})")));
        }
        Ok(Self { lambda, eta, omega })
    }

    pub fn to_classical(&self) -> GigParams {
        GigParams { lambda: self.lambda, chi: self.omega * self.eta, psi: self.omega / self.eta }
    }
}

/// Log-density of GIG at `w`.
pub fn gig_log_pdf(w: f64, params: &GigParams) -> Result<f64> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::Domain(format!("GIG density needs w > 0, got {w}")));
    }
    let GigParams { lambda, chi, psi } = *params;
    let log_norm = if psi == 0.0 {
        // inverse gamma(-λ, χ/2)
        -lambda * (0.5 * chi).ln() - ln_gamma(-lambda)
    } else {
        0.5 * lambda * (psi / chi).ln() - std::f64::consts::LN_2 - log_bessel_k(lambda, (chi * psi).sqrt())?
    };
    Ok(log_norm + (lambda - 1.0) * w.ln() - 0.5 * (chi / w + psi * w))
}

/// `E[W^α]`.
pub fn gig_moment(alpha: f64, params: &GigParams) -> Result<f64> {
    let GigParams { lambda, chi, psi } = *params;
    if psi == 0.0 {
        let shape = -lambda;
        if alpha >= shape {
            return Ok(f64::INFINITY);
        }
        return Ok((alpha * (0.5 * chi).ln() + ln_gamma(shape - alpha) - ln_gamma(shape)).exp());
    }
    let omega = (chi * psi).sqrt();
    let log_m = 0.5 * alpha * (chi / psi).ln() + log_bessel_k(lambda + alpha, omega)? - log_bessel_k(lambda, omega)?;
    Ok(log_m.exp())
}

/// `E[log W]` with the default order-derivative step.
pub fn gig_expect_log(params: &GigParams) -> Result<f64> {
    gig_expect_log_with(params, &BesselOrderDerivativeConfig::default())
}

pub fn gig_expect_log_with(params: &GigParams, cfg: &BesselOrderDerivativeConfig) -> Result<f64> {
    let GigParams { lambda, chi, psi } = *params;
    if psi == 0.0 {
        return Ok((0.5 * chi).ln() - digamma(-lambda)?);
    }
    Ok(0.5 * (chi / psi).ln() + dlog_bessel_k_dorder(lambda, (chi * psi).sqrt(), cfg)?)
}

/// `(E[W], E[1/W], E[log W])`, the three latent expectations the EM needs.
pub fn gig_expectations(params: &GigParams, cfg: &BesselOrderDerivativeConfig) -> Result<(f64, f64, f64)> {
    Ok(gig_expectations_log_k(params, cfg)?.0)
}

/// As [`gig_expectations`], also returning `log K_λ(√χψ)` when `ψ > 0`.
pub(crate) fn gig_expectations_log_k(
    params: &GigParams,
    cfg: &BesselOrderDerivativeConfig,
) -> Result<((f64, f64, f64), Option<f64>)> {
    let GigParams { lambda, chi, psi } = *params;
    if psi == 0.0 {
        return Ok(((gig_moment(1.0, params)?, gig_moment(-1.0, params)?, gig_expect_log_with(params, cfg)?), None));
    }
    let omega = (chi * psi).sqrt();
    let half_log_ratio = 0.5 * (chi / psi).ln();
    let (lo, mid, hi) = log_bessel_k_neighbors(lambda, omega)?;
    let a = (half_log_ratio + hi - mid).exp();
    let b = (-half_log_ratio + lo - mid).exp();
    let c = half_log_ratio + dlog_bessel_k_dorder(lambda, omega, cfg)?;
    Ok(((a, b, c), Some(mid)))
}

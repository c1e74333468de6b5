//! Parameter updates given an E-step cache.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::estep::EStepCache;
use super::{FitConfig, MixtureModel};
use crate::error::{Error, Result};
use crate::gpcm::{constrain_from, CovarianceStructure, ScatterSet};
use crate::linalg::{ridge_if_needed, symmetrize, SpdFactor};
use crate::missing::{LatentModel, MaskedDataset};
use crate::special::{digamma, dlog_bessel_k_dorder, log_bessel_k, BesselOrderDerivativeConfig};

pub const OMEGA_MIN: f64 = 1e-4;
pub const OMEGA_MAX: f64 = 1e4;
pub const DOF_MIN: f64 = 2.001;
pub const DOF_MAX: f64 = 200.0;

/// Responsibility-weighted sums of the E-step expectations, per component.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    pub n_g: Vec<f64>,
    pub abar: Vec<f64>,
    pub bbar: Vec<f64>,
    pub cbar: Vec<f64>,
    /// Weighted mean of `E[X]`, missing blocks filled with `x̂`.
    pub xbar: Vec<DVector<f64>>,
    /// Weighted mean of `E[X/W]`.
    pub s1: Vec<DVector<f64>>,
    /// Weighted sum of `E[X Xᵀ / W]`.
    pub t: Vec<DMatrix<f64>>,
}

fn component_stats(ds: &MaskedDataset, cache: &EStepCache, g: usize) -> (f64, f64, f64, f64, DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let p = ds.p();
    let (mut n, mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0, 0.0);
    let mut ex = DVector::zeros(p);
    let mut exw = DVector::zeros(p);
    let mut t = DMatrix::zeros(p, p);
    for (q, group) in cache.groups.iter().enumerate() {
        let obs = group.observed();
        let mis = group.missing();
        let moments = cache.missing.iter().find(|m| m.group == q);
        for (r, &i) in group.row_indices.iter().enumerate() {
            let z = cache.resp[(i, g)];
            let (a, b, c) = (cache.a[(i, g)], cache.b[(i, g)], cache.c[(i, g)]);
            n += z;
            sa += z * a;
            sb += z * b;
            sc += z * c;
            let mut x = DVector::zeros(p);
            let mut xw = DVector::zeros(p);
            for &j in &obs {
                x[j] = ds.data()[(i, j)];
                xw[j] = b * x[j];
            }
            let mut xx = DMatrix::zeros(p, p);
            for &j in &obs {
                for &k in &obs {
                    xx[(j, k)] = b * x[j] * x[k];
                }
            }
            if let Some(m) = moments {
                let mm = &m.per_component[g][r];
                for (u, &j) in mis.iter().enumerate() {
                    x[j] = mm.xhat_m[u];
                    xw[j] = mm.xtilde_m[u];
                    for &k in &obs {
                        let v = ds.data()[(i, k)] * mm.xtilde_m[u];
                        xx[(k, j)] = v;
                        xx[(j, k)] = v;
                    }
                    for (w, &k) in mis.iter().enumerate() {
                        xx[(j, k)] = mm.xtt_m[(u, w)];
                    }
                }
            }
            ex += x * z;
            exw += xw * z;
            t += xx * z;
        }
    }
    (n, sa, sb, sc, ex, exw, t)
}

/// Collects the per-component statistics. Means are undefined (NaN) for a
/// component with zero total responsibility.
pub fn sufficient_stats(ds: &MaskedDataset, cache: &EStepCache) -> SufficientStats {
    let gk = cache.resp.ncols();
    let per: Vec<_> = (0..gk).into_par_iter().map(|g| component_stats(ds, cache, g)).collect();
    let mut st = SufficientStats {
        n_g: vec![],
        abar: vec![],
        bbar: vec![],
        cbar: vec![],
        xbar: vec![],
        s1: vec![],
        t: vec![],
    };
    for (n, sa, sb, sc, ex, exw, t) in per {
        st.n_g.push(n);
        st.abar.push(sa / n);
        st.bbar.push(sb / n);
        st.cbar.push(sc / n);
        st.xbar.push(ex / n);
        st.s1.push(exw / n);
        st.t.push(t);
    }
    st
}

/// Mixing weights, locations and skewness. With `freeze_skewness` the
/// skewness is held at zero and the location is the `1/W`-weighted mean.
pub fn m_step_weights_location_skew(
    stats: &SufficientStats,
    freeze_skewness: bool,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let n: f64 = stats.n_g.iter().sum();
    let mut weights = Vec::new();
    let mut mus = Vec::new();
    let mut betas = Vec::new();
    for g in 0..stats.n_g.len() {
        weights.push(stats.n_g[g] / n);
        if freeze_skewness {
            mus.push(&stats.s1[g] / stats.bbar[g]);
            betas.push(DVector::zeros(stats.s1[g].len()));
            continue;
        }
        let (a, b) = (stats.abar[g], stats.bbar[g]);
        let den = a * b - 1.0;
        if !(den.abs() >= 1e-12) {
            return Err(Error::Degenerate { component: g, reason: format!("location/skewness denominator {den:e} is too small") });
        }
        mus.push((&stats.s1[g] * a - &stats.xbar[g]) / den);
        betas.push((&stats.xbar[g] * b - &stats.s1[g]) / den);
    }
    Ok((weights, mus, betas))
}

/// Outcome of the scale update.
#[derive(Debug, Clone)]
pub struct ScaleUpdate {
    pub sigmas: Vec<DMatrix<f64>>,
    pub ridged: bool,
    pub inner_converged: bool,
}

/// Unconstrained scale estimate `Σ̂_g` for each component.
pub fn unconstrained_scales(stats: &SufficientStats, mus: &[DVector<f64>], betas: &[DVector<f64>]) -> Vec<DMatrix<f64>> {
    (0..stats.n_g.len())
        .map(|g| {
            let (mu, beta) = (&mus[g], &betas[g]);
            let s1m = &stats.s1[g] * mu.transpose();
            let dm = (&stats.xbar[g] - mu) * beta.transpose();
            let s = &stats.t[g] / stats.n_g[g] - &s1m - s1m.transpose() + mu * mu.transpose() * stats.bbar[g] - &dm
                - dm.transpose()
                + beta * beta.transpose() * stats.abar[g];
            symmetrize(&s)
        })
        .collect()
}

/// Scale matrices: the unconstrained estimate projected onto `structure`.
pub fn m_step_scale(
    stats: &SufficientStats,
    mus: &[DVector<f64>],
    betas: &[DVector<f64>],
    structure: CovarianceStructure,
    previous: Option<&[DMatrix<f64>]>,
    allow_ridge: bool,
) -> Result<ScaleUpdate> {
    let raw = unconstrained_scales(stats, mus, betas);
    let sc = ScatterSet { scatters: raw.iter().zip(&stats.n_g).map(|(s, n)| s * *n).collect(), weights: stats.n_g.clone() };
    let out = constrain_from(&sc, structure, previous).map_err(|e| Error::Degenerate { component: 0, reason: e.to_string() });
    let out = match out {
        Ok(o) => o,
        Err(e) if !allow_ridge => return Err(e),
        Err(_) => {
            // ridge the raw scatters and try once more
            let ridged: Vec<DMatrix<f64>> = sc.scatters.iter().map(|s| ridge_if_needed(s).0).collect();
            let sc2 = ScatterSet { scatters: ridged, weights: sc.weights.clone() };
            constrain_from(&sc2, structure, previous).map_err(|e| Error::Degenerate { component: 0, reason: e.to_string() })?
        }
    };
    let mut ridged = false;
    let mut sigmas = Vec::with_capacity(out.sigmas.len());
    for (g, s) in out.sigmas.into_iter().enumerate() {
        let (fixed, flag) = ridge_if_needed(&s);
        if flag && !allow_ridge {
            return Err(Error::Degenerate { component: g, reason: "scale matrix is near singular".into() });
        }
        ridged |= flag;
        SpdFactor::new(&fixed).map_err(|e| Error::Degenerate { component: g, reason: e.to_string() })?;
        sigmas.push(fixed);
    }
    Ok(ScaleUpdate { sigmas, ridged, inner_converged: out.converged })
}

fn q_index(lambda: f64, omega: f64, abar: f64, bbar: f64, cbar: f64) -> Result<f64> {
    Ok(-log_bessel_k(lambda, omega)? + (lambda - 1.0) * cbar - 0.5 * omega * (abar + bbar))
}

/// Result of the index/concentration update. `*_kept` marks a fallback to
/// the previous value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexUpdate {
    pub lambda: f64,
    pub omega: f64,
    pub lambda_kept: bool,
    pub omega_kept: bool,
}

/// Updates `λ` by the fixed-point rule `λ' = c̄ λ / ∂_λ log K_λ(ω)` and `ω`
/// by one safeguarded Newton step on
/// `q(λ, ω) = -log K_λ(ω) + (λ-1)c̄ - (ω/2)(ā+b̄)`.
/// Neither step is accepted if it lowers `q`.
pub fn update_index_concentration(
    abar: f64,
    bbar: f64,
    cbar: f64,
    lambda: f64,
    omega: f64,
    cfg: &BesselOrderDerivativeConfig,
) -> Result<IndexUpdate> {
    let q0 = q_index(lambda, omega, abar, bbar, cbar)?;
    let deriv = dlog_bessel_k_dorder(lambda, omega, cfg)?;
    let mut new_lambda = lambda;
    let mut lambda_kept = true;
    if deriv.abs() >= 1e-12 {
        let target = cbar * lambda / deriv;
        if target.is_finite() {
            let mut step = target - lambda;
            for _ in 0..=20 {
                let cand = lambda + step;
                if q_index(cand, omega, abar, bbar, cbar)? >= q0 {
                    new_lambda = cand;
                    lambda_kept = false;
                    break;
                }
                step *= 0.5;
            }
        }
    }

    let q1 = q_index(new_lambda, omega, abar, bbar, cbar)?;
    let h = 1e-5 * omega;
    let qp = q_index(new_lambda, omega + h, abar, bbar, cbar)?;
    let qm = q_index(new_lambda, omega - h, abar, bbar, cbar)?;
    let d1 = (qp - qm) / (2.0 * h);
    let d2 = (qp - 2.0 * q1 + qm) / (h * h);
    let mut step = if d2 < 0.0 { -d1 / d2 } else { 0.5 * omega * d1.signum() };
    let mut new_omega = omega;
    let mut omega_kept = true;
    if step.is_finite() && step != 0.0 {
        for _ in 0..=20 {
            let cand = (omega + step).clamp(OMEGA_MIN, OMEGA_MAX);
            if cand != omega && q_index(new_lambda, cand, abar, bbar, cbar)? > q1 {
                new_omega = cand;
                omega_kept = false;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(IndexUpdate { lambda: new_lambda, omega: new_omega, lambda_kept, omega_kept })
}

/// Degrees-of-freedom update result; `clamped` means no root in range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofUpdate {
    pub dof: f64,
    pub clamped: bool,
}

/// Left side of the degrees-of-freedom equation,
/// `log(v/2) + 1 - ψ(v/2) - mean(C + B)`.
pub fn dof_equation(v: f64, mean_cb: f64) -> Result<f64> {
    Ok((0.5 * v).ln() + 1.0 - digamma(0.5 * v)? - mean_cb)
}

/// Solves the degrees-of-freedom equation by bisection on `[2.001, 200]`.
/// `mean_cb` is the responsibility-weighted mean of `E[log W] + E[1/W]`.
pub fn update_dof(mean_cb: f64) -> Result<DofUpdate> {
    if !mean_cb.is_finite() {
        return Err(Error::Domain("degrees-of-freedom statistic is not finite".into()));
    }
    let (mut lo, mut hi) = (DOF_MIN, DOF_MAX);
    let flo = dof_equation(lo, mean_cb)?;
    let fhi = dof_equation(hi, mean_cb)?;
    // the left side decreases in v
    if flo <= 0.0 {
        return Ok(DofUpdate { dof: lo, clamped: flo < 0.0 });
    }
    if fhi >= 0.0 {
        return Ok(DofUpdate { dof: hi, clamped: fhi > 0.0 });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let f = dof_equation(mid, mean_cb)?;
        if f.abs() < 1e-13 || hi - lo < 1e-13 * mid {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DofUpdate { dof: mid, clamped: false })
}

/// Result of a full M-step.
#[derive(Debug, Clone)]
pub struct MStepOutcome {
    pub model: MixtureModel,
    pub ridged: bool,
    pub notes: Vec<String>,
}

/// All M-step updates in order: weights, location and skewness, scale,
/// then the index/concentration or degrees-of-freedom parameters.
pub fn m_step(ds: &MaskedDataset, cache: &EStepCache, model: &MixtureModel, cfg: &FitConfig) -> Result<MStepOutcome> {
    let stats = sufficient_stats(ds, cache);
    let p = ds.p() as f64;
    for (g, &n) in stats.n_g.iter().enumerate() {
        if !(n >= p + 1.0) {
            return Err(Error::Degenerate { component: g, reason: format!("effective size {n:.3} below p + 1") });
        }
    }
    let (weights, mus, betas) = m_step_weights_location_skew(&stats, cfg.freeze_skewness)?;
    let previous: Vec<DMatrix<f64>> = model.components.iter().map(|c| c.sigma().clone()).collect();
    let scale = m_step_scale(&stats, &mus, &betas, model.structure, Some(&previous), cfg.ridge)?;
    let mut notes = Vec::new();
    if scale.ridged {
        notes.push("ridge added to a near-singular scale matrix".to_string());
    }
    if !scale.inner_converged {
        notes.push(format!("{} projection hit its inner iteration cap", model.structure));
    }
    let mut components = Vec::with_capacity(model.g());
    for (g, comp) in model.components.iter().enumerate() {
        let latent = match (comp.latent(), cfg.freeze_shape) {
            (l, true) => l,
            (LatentModel::Ghd { lambda, omega }, false) => {
                let u = update_index_concentration(stats.abar[g], stats.bbar[g], stats.cbar[g], lambda, omega, &cfg.bessel)?;
                LatentModel::Ghd { lambda: u.lambda, omega: u.omega }
            }
            (LatentModel::St { .. }, false) => {
                let u = update_dof(stats.cbar[g] + stats.bbar[g])?;
                if u.clamped {
                    notes.push(format!("component {}: degrees of freedom clamped at {}", g + 1, u.dof));
                }
                LatentModel::St { dof: u.dof }
            }
        };
        let c = comp
            .with_parts(mus[g].clone(), scale.sigmas[g].clone(), betas[g].clone(), latent)
            .map_err(|e| Error::Degenerate { component: g, reason: e.to_string() })?;
        components.push(c);
    }
    let total: f64 = weights.iter().sum();
    let weights = weights.iter().map(|w| w / total).collect();
    let model = MixtureModel::new(model.family, model.structure, weights, components)
        .map_err(|e| Error::Degenerate { component: 0, reason: e.to_string() })?;
    Ok(MStepOutcome { model, ridged: scale.ridged, notes })
}

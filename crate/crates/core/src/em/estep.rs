//! Responsibilities and latent-variable expectations.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{ComponentParams, MixtureModel};
use crate::distributions::{gh_log_density_cached, gh_log_density_core, gh_log_norm, gig_expectations_log_k, Closure, Mahalanobis};
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::missing::{
    extract_patterns, moments_from_mean, partition_component, posterior_from_stats, LatentModel, MaskedDataset,
    MissingBlockMoments, MissingPatternGroup,
};
use crate::special::BesselOrderDerivativeConfig;

/// Missing-block moments of one pattern group, indexed `[component][row in group]`.
#[derive(Debug, Clone)]
pub struct GroupMoments {
    pub group: usize,
    pub per_component: Vec<Vec<MissingBlockMoments>>,
}

/// Everything the M-step reads. Matrices are `n x G`.
#[derive(Debug, Clone)]
pub struct EStepCache {
    pub groups: Vec<MissingPatternGroup>,
    pub resp: DMatrix<f64>,
    /// `E[W | x_o, z_g = 1]`
    pub a: DMatrix<f64>,
    /// `E[1/W | x_o, z_g = 1]`
    pub b: DMatrix<f64>,
    /// `E[log W | x_o, z_g = 1]`
    pub c: DMatrix<f64>,
    /// `log π_g + log f_g(x_o)`
    pub log_joint: DMatrix<f64>,
    /// Moments for groups that have missing coordinates, in group order.
    pub missing: Vec<GroupMoments>,
    pub loglik: f64,
}

impl EStepCache {
    /// Moments of the missing block of row `i` under component `g`, if any.
    pub fn row_moments(&self, group_pos: usize, g: usize, row_in_group: usize) -> Option<&MissingBlockMoments> {
        self.missing.iter().find(|m| m.group == group_pos).map(|m| &m.per_component[g][row_in_group])
    }
}

fn density_params(latent: LatentModel) -> (f64, f64, f64) {
    match latent {
        LatentModel::Ghd { lambda, omega } => (lambda, omega, omega),
        LatentModel::St { dof } => (-0.5 * dof, dof, 0.0),
    }
}

struct Block {
    log_f: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    moments: Vec<MissingBlockMoments>,
}

fn block(
    ds: &MaskedDataset,
    group: &MissingPatternGroup,
    g: usize,
    comp: &ComponentParams,
    cfg: &BesselOrderDerivativeConfig,
) -> Result<Block> {
    let degenerate = |e: Error| Error::Degenerate { component: g, reason: e.to_string() };
    let pc = partition_component(comp.mu(), comp.beta(), comp.sigma(), &group.pattern).map_err(degenerate)?;
    let latent = comp.latent();
    let (lambda, chi, psi) = density_params(latent);
    let u = pc.sigma_oo_chol.solve(&pc.beta_o);
    let log_norm = gh_log_norm(lambda, chi, psi).map_err(degenerate)?;
    let has_missing = !pc.mis.is_empty();
    let m = group.row_indices.len();
    let mut out = Block {
        log_f: Vec::with_capacity(m),
        a: Vec::with_capacity(m),
        b: Vec::with_capacity(m),
        c: Vec::with_capacity(m),
        moments: Vec::with_capacity(if has_missing { m } else { 0 }),
    };
    for &i in &group.row_indices {
        let x_o = ds.observed(i, &pc.obs);
        let d = &x_o - &pc.mu_o;
        let stats = Mahalanobis {
            delta: pc.sigma_oo_chol.quad(&d),
            lin: d.dot(&u),
            skew: pc.skew,
            log_det: pc.sigma_oo_chol.log_det(),
            dim: pc.obs.len(),
        };
        let post = posterior_from_stats(stats.delta, stats.skew, pc.obs.len(), latent);
        // the posterior normalizer is the density's kernel Bessel term
        let ((a, b, c), log_k) = gig_expectations_log_k(&post, cfg).map_err(degenerate)?;
        out.log_f.push(gh_log_density_cached(lambda, chi, psi, &stats, log_norm, log_k).map_err(degenerate)?);
        if !(a.is_finite() && b.is_finite() && c.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::Degenerate { component: g, reason: format!("latent expectations not finite at row {}", i + 1) });
        }
        out.a.push(a);
        out.b.push(b);
        out.c.push(c);
        if has_missing {
            let mean = &pc.mu_m + &pc.regression * d;
            out.moments.push(moments_from_mean(&mean, &pc, a, b));
        }
    }
    Ok(out)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One E-step over precomputed pattern groups.
pub(crate) fn e_step_grouped(
    ds: &MaskedDataset,
    groups: &[MissingPatternGroup],
    model: &MixtureModel,
    cfg: &BesselOrderDerivativeConfig,
) -> Result<EStepCache> {
    if ds.p() != model.p() {
        return Err(Error::Argument(format!("data has {} columns, model has {}", ds.p(), model.p())));
    }
    let n = ds.n();
    let gk = model.g();
    let tasks: Vec<(usize, usize)> = (0..groups.len()).flat_map(|q| (0..gk).map(move |g| (q, g))).collect();
    let blocks: Vec<Block> = tasks
        .par_iter()
        .map(|&(q, g)| block(ds, &groups[q], g, &model.components[g], cfg))
        .collect::<Result<_>>()?;

    let mut log_joint = DMatrix::zeros(n, gk);
    let mut a = DMatrix::zeros(n, gk);
    let mut b = DMatrix::zeros(n, gk);
    let mut c = DMatrix::zeros(n, gk);
    let mut missing = Vec::new();
    let mut blocks = blocks.into_iter();
    for (q, group) in groups.iter().enumerate() {
        let mut per_component = Vec::with_capacity(gk);
        for g in 0..gk {
            let blk = blocks.next().expect("one block per task");
            let lw = model.weights[g].ln();
            for (r, &i) in group.row_indices.iter().enumerate() {
                log_joint[(i, g)] = lw + blk.log_f[r];
                a[(i, g)] = blk.a[r];
                b[(i, g)] = blk.b[r];
                c[(i, g)] = blk.c[r];
            }
            per_component.push(blk.moments);
        }
        if !group.is_complete() {
            missing.push(GroupMoments { group: q, per_component });
        }
    }

    let mut resp = DMatrix::zeros(n, gk);
    let mut loglik = 0.0;
    for i in 0..n {
        let row: Vec<f64> = (0..gk).map(|g| log_joint[(i, g)]).collect();
        let lse = log_sum_exp(&row);
        if !lse.is_finite() {
            return Err(Error::Degenerate { component: 0, reason: format!("row {} has zero density under every component", i + 1) });
        }
        loglik += lse;
        for g in 0..gk {
            resp[(i, g)] = (row[g] - lse).exp();
        }
    }
    Ok(EStepCache { groups: groups.to_vec(), resp, a, b, c, log_joint, missing, loglik })
}

/// Responsibilities, `E[W]`, `E[1/W]`, `E[log W]` and missing-block moments
/// for every row and component.
pub fn e_step(ds: &MaskedDataset, model: &MixtureModel, cfg: &BesselOrderDerivativeConfig) -> Result<EStepCache> {
    let groups = extract_patterns(ds)?;
    e_step_grouped(ds, &groups, model, cfg)
}

/// `Σ_i log Σ_g π_g f_g(x_i^o)` with each `f_g` the marginal of the
/// component on the row's observed coordinates.
pub fn observed_log_likelihood(ds: &MaskedDataset, model: &MixtureModel) -> Result<f64> {
    if ds.p() != model.p() {
        return Err(Error::Argument(format!("data has {} columns, model has {}", ds.p(), model.p())));
    }
    let groups = extract_patterns(ds)?;
    let mut log_joint = DMatrix::zeros(ds.n(), model.g());
    for group in &groups {
        let obs = group.observed();
        for (g, comp) in model.components.iter().enumerate() {
            let fail = |e: Error| Error::Degenerate { component: g, reason: format!("pattern {:?}: {e}", group.pattern) };
            let (mu, sigma, beta, (lambda, chi, psi)) = match comp {
                ComponentParams::Ghd(p) => {
                    let m = p.marginal(&obs).map_err(fail)?;
                    (m.mu, m.sigma, m.beta, (m.lambda, m.omega, m.omega))
                }
                ComponentParams::St(p) => {
                    let m = p.marginal(&obs).map_err(fail)?;
                    (m.mu, m.sigma, m.beta, (-0.5 * m.dof, m.dof, 0.0))
                }
            };
            let factor = SpdFactor::new(&sigma).map_err(fail)?;
            for &i in &group.row_indices {
                let stats = Mahalanobis::compute(&ds.observed(i, &obs), &mu, &beta, &factor)?;
                log_joint[(i, g)] = model.weights[g].ln() + gh_log_density_core(lambda, chi, psi, &stats).map_err(fail)?;
            }
        }
    }
    Ok((0..ds.n())
        .map(|i| log_sum_exp(&(0..model.g()).map(|g| log_joint[(i, g)]).collect::<Vec<_>>()))
        .sum())
}

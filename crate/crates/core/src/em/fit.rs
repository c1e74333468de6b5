//! The EM loop, multiple starts and prediction.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::estep::{e_step_grouped, EStepCache};
use super::init::initialize;
use super::mstep::m_step;
use super::{Family, FitConfig, InitMethod, MixtureModel};
use crate::error::{Error, Result};
use crate::gpcm::{free_parameter_count_with, CovarianceStructure};
use crate::missing::{extract_patterns, MaskedDataset, MissingPatternGroup};
use crate::selection::{aitken_converged, bic, icl};

/// Result of [`fit`]. Row-indexed outputs follow the caller's row order.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: MixtureModel,
    pub loglik_trace: Vec<f64>,
    pub loglik: f64,
    pub bic: f64,
    pub icl: f64,
    pub free_parameters: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Zero-based MAP component per row.
    pub map_labels: Vec<usize>,
    /// Data with each missing cell replaced by its conditional mean under the
    /// MAP component.
    pub imputed: DMatrix<f64>,
    pub resp: DMatrix<f64>,
    /// Index of the start that produced `model`.
    pub best_start: usize,
    /// One line per failed start or fallback.
    pub notes: Vec<String>,
}

/// Output of [`predict`].
#[derive(Debug, Clone)]
pub struct Prediction {
    pub resp: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub imputed: DMatrix<f64>,
    pub loglik: f64,
}

struct Run {
    model: MixtureModel,
    cache: EStepCache,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
    notes: Vec<String>,
}

/// Row order by missing pattern, then by observed values. Fitting on this
/// order makes results independent of how the caller ordered the rows.
fn canonical_order(ds: &MaskedDataset) -> Vec<usize> {
    let key = |i: usize| -> (Vec<bool>, Vec<f64>) {
        let pat = ds.row_pattern(i);
        let vals = (0..ds.p()).map(|j| if pat[j] { 0.0 } else { ds.data()[(i, j)] }).collect();
        (pat, vals)
    };
    let keys: Vec<_> = (0..ds.n()).map(key).collect();
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.sort_by(|&a, &b| {
        let (pa, va) = &keys[a];
        let (pb, vb) = &keys[b];
        pa.cmp(pb).then_with(|| {
            va.iter().zip(vb).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
        })
    });
    order
}

fn run_em(ds: &MaskedDataset, groups: &[MissingPatternGroup], start: MixtureModel, cfg: &FitConfig) -> Result<Run> {
    let mut cache = e_step_grouped(ds, groups, &start, &cfg.bessel)?;
    let mut model = start;
    let mut trace = vec![cache.loglik];
    let mut notes = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        let step = m_step(ds, &cache, &model, cfg).and_then(|out| {
            let next = e_step_grouped(ds, groups, &out.model, &cfg.bessel)?;
            Ok((out, next))
        });
        let (out, next) = match step {
            Ok(s) => s,
            Err(e) if e.is_numerical() => {
                notes.push(format!("iteration {it}: {e}; kept the previous iterate"));
                break;
            }
            Err(e) => return Err(e),
        };
        for n in out.notes {
            if !notes.contains(&n) {
                notes.push(n);
            }
        }
        model = out.model;
        cache = next;
        trace.push(cache.loglik);
        iterations = it;
        let k = trace.len();
        // an exactly flat trace has a zero Aitken denominator; treat it as a fixed point
        let flat = k >= 3 && trace[k - 1] == trace[k - 2] && trace[k - 2] == trace[k - 3];
        if flat || (k >= 3 && aitken_converged(trace[k - 3], trace[k - 2], trace[k - 1], cfg.epsilon)) {
            converged = true;
            break;
        }
    }
    Ok(Run { model, cache, trace, converged, iterations, notes })
}

fn map_label(resp: &DMatrix<f64>, i: usize) -> usize {
    let mut best = 0;
    for g in 1..resp.ncols() {
        if resp[(i, g)] > resp[(i, best)] {
            best = g;
        }
    }
    best
}

fn labels_and_imputation(ds: &MaskedDataset, cache: &EStepCache) -> (Vec<usize>, DMatrix<f64>) {
    let labels: Vec<usize> = (0..ds.n()).map(|i| map_label(&cache.resp, i)).collect();
    let mut imputed = ds.data().clone();
    for (q, group) in cache.groups.iter().enumerate() {
        let mis = group.missing();
        if mis.is_empty() {
            continue;
        }
        for (r, &i) in group.row_indices.iter().enumerate() {
            if let Some(m) = cache.row_moments(q, labels[i], r) {
                for (u, &j) in mis.iter().enumerate() {
                    imputed[(i, j)] = m.xhat_m[u];
                }
            }
        }
    }
    (labels, imputed)
}

/// Responsibilities, MAP labels (ties to the lowest index) and conditional
/// mean imputation under `model`.
pub fn predict(model: &MixtureModel, ds: &MaskedDataset) -> Result<Prediction> {
    let groups = extract_patterns(ds)?;
    let cache = e_step_grouped(ds, &groups, model, &Default::default())?;
    let (labels, imputed) = labels_and_imputation(ds, &cache);
    Ok(Prediction { resp: cache.resp, labels, imputed, loglik: cache.loglik })
}

/// Fits a `g`-component mixture by EM from `cfg.n_starts` starts and keeps
/// the run with the highest final log-likelihood (ties to the first start).
pub fn fit(ds: &MaskedDataset, g: usize, family: Family, structure: CovarianceStructure, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    if g == 0 || g > ds.n() {
        return Err(Error::Argument(format!("G = {g} is not in 1..={}", ds.n())));
    }
    let order = canonical_order(ds);
    let sorted = ds.select_rows(&order);
    let groups = extract_patterns(&sorted)?;
    let mut base = cfg.clone();
    let n_starts = match &cfg.init {
        InitMethod::Labels(l) => {
            if l.len() != ds.n() {
                return Err(Error::Argument(format!("{} starting labels for {} rows", l.len(), ds.n())));
            }
            base.init = InitMethod::Labels(order.iter().map(|&i| l[i]).collect());
            1
        }
        _ => cfg.n_starts,
    };

    let runs: Vec<Result<Run>> = (0..n_starts)
        .into_par_iter()
        .map(|s| {
            let mut c = base.clone();
            c.seed = cfg.seed.wrapping_add(s as u64);
            let start = initialize(&sorted, g, family, structure, &c)?;
            run_em(&sorted, &groups, start, &c)
        })
        .collect();

    let mut notes = Vec::new();
    let mut best: Option<(usize, Run)> = None;
    for (s, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                let ll = *r.trace.last().expect("trace is never empty");
                let better = match &best {
                    None => true,
                    Some((_, b)) => ll > *b.trace.last().expect("trace is never empty"),
                };
                if better {
                    best = Some((s, r));
                }
            }
            Err(e) if e.is_numerical() => notes.push(format!("start {}: {e}", s + 1)),
            Err(e) => return Err(e),
        }
    }
    let (best_start, run) = best.ok_or_else(|| Error::Fit(format!("every start failed: {}", notes.join("; "))))?;
    notes.extend(run.notes.iter().map(|n| format!("start {}: {n}", best_start + 1)));

    let (labels_sorted, imputed_sorted) = labels_and_imputation(&sorted, &run.cache);
    let n = ds.n();
    let mut map_labels = vec![0; n];
    let mut imputed = DMatrix::zeros(n, ds.p());
    let mut resp = DMatrix::zeros(n, g);
    for (k, &i) in order.iter().enumerate() {
        map_labels[i] = labels_sorted[k];
        imputed.set_row(i, &imputed_sorted.row(k));
        resp.set_row(i, &run.cache.resp.row(k));
    }

    let mut rho = free_parameter_count_with(structure, ds.p(), g, family, !cfg.freeze_skewness);
    if cfg.freeze_shape {
        rho -= match family {
            Family::Mghd => 2 * g,
            Family::Mst => g,
        };
    }
    let loglik = *run.trace.last().expect("trace is never empty");
    let b = bic(loglik, rho, n);
    Ok(FitReport {
        icl: icl(b, &resp),
        bic: b,
        loglik,
        free_parameters: rho,
        model: run.model,
        loglik_trace: run.trace,
        converged: run.converged,
        iterations: run.iterations,
        map_labels,
        imputed,
        resp,
        best_start,
        notes,
    })
}

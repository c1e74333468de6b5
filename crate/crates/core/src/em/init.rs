//! Starting values: k-means on mean-imputed data, then moment estimates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ComponentParams, Family, FitConfig, InitMethod, MixtureModel};
use crate::distributions::{GhdParams, StParams};
use crate::error::{Error, Result};
use crate::gpcm::{constrain, CovarianceStructure, ScatterSet};
use crate::linalg::ridge_if_needed;
use crate::missing::{mean_impute, MaskedDataset};

const LLOYD_ITERATIONS: usize = 10;
const SEEDINGS: usize = 10;

fn sq_dist(x: &DMatrix<f64>, i: usize, c: &DVector<f64>) -> f64 {
    (0..x.ncols()).map(|j| (x[(i, j)] - c[j]).powi(2)).sum()
}

fn nearest(x: &DMatrix<f64>, i: usize, centers: &[DVector<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, i, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Best of ten k-means++ seedings, each followed by ten Lloyd iterations.
/// Partitions whose clusters all hold more than `p` rows are preferred,
/// then lower within-cluster sum of squares. Ties go to the lowest center
/// index; an emptied cluster keeps its previous center.
pub fn kmeans_labels(x: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("cannot form {k} clusters from {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(bool, f64, Vec<usize>)> = None;
    for _ in 0..SEEDINGS {
        let (labels, sse) = lloyd(x, k, &mut rng);
        let usable = (0..k).all(|c| labels.iter().filter(|&&l| l == c).count() > x.ncols());
        let better = match &best {
            None => true,
            Some((u, e, _)) => (usable && !u) || (usable == *u && sse < *e),
        };
        if better {
            best = Some((usable, sse, labels));
        }
    }
    Ok(best.expect("at least one seeding").2)
}

fn lloyd(x: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = x.nrows();
    let row = |i: usize| x.row(i).transpose();
    let mut centers = vec![row(rng.random_range(0..n))];
    while centers.len() < k {
        let d: Vec<f64> = (0..n).map(|i| nearest(x, i, &centers).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, di) in d.iter().enumerate() {
                acc += di;
                if acc > u {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(row(pick));
    }

    let mut labels: Vec<usize> = (0..n).map(|i| nearest(x, i, &centers).0).collect();
    for _ in 0..LLOYD_ITERATIONS {
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            let mut m = DVector::zeros(x.ncols());
            for &i in &members {
                m += row(i);
            }
            *center = m / members.len() as f64;
        }
        let next: Vec<usize> = (0..n).map(|i| nearest(x, i, &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let sse = (0..n).map(|i| nearest(x, i, &centers).1).sum();
    (labels, sse)
}

/// Moment estimates from hard labels on the mean-imputed data: proportions,
/// means and divisor-`n_g` covariances projected onto `structure`.
/// Skewness starts at `1e-3` per coordinate; MGHD starts at `λ = -1/2`,
/// `ω = 1`, MST at `cfg.initial_dof`.
pub fn model_from_labels(
    ds: &MaskedDataset,
    labels: &[usize],
    g: usize,
    family: Family,
    structure: CovarianceStructure,
    cfg: &FitConfig,
) -> Result<MixtureModel> {
    let n = ds.n();
    let p = ds.p();
    if labels.len() != n {
        return Err(Error::Argument(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= g) {
        return Err(Error::Argument(format!("label {bad} out of range for {g} components")));
    }
    let x = mean_impute(ds)?;
    let mut counts = vec![0.0; g];
    let mut means = vec![DVector::zeros(p); g];
    for i in 0..n {
        counts[labels[i]] += 1.0;
        means[labels[i]] += x.row(i).transpose();
    }
    for k in 0..g {
        if counts[k] < (p + 1) as f64 {
            return Err(Error::Degenerate { component: k, reason: format!("starting partition has {} rows", counts[k]) });
        }
        means[k] /= counts[k];
    }
    let mut scatters = vec![DMatrix::zeros(p, p); g];
    for i in 0..n {
        let d = x.row(i).transpose() - &means[labels[i]];
        scatters[labels[i]] += &d * d.transpose();
    }
    let scatters = scatters.into_iter().map(|s| ridge_if_needed(&s).0).collect();
    let sigmas = constrain(&ScatterSet { scatters, weights: counts.clone() }, structure)?.sigmas;
    let beta = DVector::from_element(p, 1e-3);
    let components = means
        .into_iter()
        .zip(sigmas)
        .map(|(mu, sigma)| {
            let sigma = ridge_if_needed(&sigma).0;
            let beta = if cfg.freeze_skewness { DVector::zeros(p) } else { beta.clone() };
            Ok(match family {
                Family::Mghd => ComponentParams::Ghd(GhdParams::new(-0.5, 1.0, mu, sigma, beta)?),
                Family::Mst => ComponentParams::St(StParams::new(cfg.initial_dof, mu, sigma, beta)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = counts.iter().map(|c| c / n as f64).collect();
    MixtureModel::new(family, structure, weights, components)
}

/// Starting model for one run, driven by `cfg.init` and `cfg.seed`.
pub fn initialize(
    ds: &MaskedDataset,
    g: usize,
    family: Family,
    structure: CovarianceStructure,
    cfg: &FitConfig,
) -> Result<MixtureModel> {
    if g == 0 {
        return Err(Error::Argument("G must be at least 1".into()));
    }
    if g > ds.n() {
        return Err(Error::Argument(format!("G = {g} exceeds the {} rows", ds.n())));
    }
    let labels = match &cfg.init {
        InitMethod::KMeans => kmeans_labels(&mean_impute(ds)?, g, cfg.seed)?,
        InitMethod::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..ds.n()).map(|_| rng.random_range(0..g)).collect()
        }
        InitMethod::Labels(l) => l.clone(),
    };
    model_from_labels(ds, &labels, g, family, structure, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_start_is_sample_moments() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, 0.0, 4.0, 5.0, 2.0, 2.0]);
        let ds = MaskedDataset::complete(x.clone()).unwrap();
        let m = initialize(&ds, 1, Family::Mghd, CovarianceStructure::VVV, &FitConfig::default()).unwrap();
        assert_eq!(m.weights, vec![1.0]);
        assert!((m.components[0].mu()[0] - 2.0).abs() < 1e-14);
        assert!((m.components[0].sigma()[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_components() {
        let ds = MaskedDataset::complete(DMatrix::zeros(3, 2)).unwrap();
        assert!(matches!(
            initialize(&ds, 4, Family::Mst, CovarianceStructure::EII, &FitConfig::default()),
            Err(Error::Argument(_))
        ));
    }
}

//! Information criteria, the Aitken stopping rule, the adjusted Rand index
//! and grid search over `G`, scale structure and family.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::em::{fit, Family, FitConfig, FitReport};
use crate::error::{Error, Result};
use crate::gpcm::CovarianceStructure;
use crate::missing::MaskedDataset;

/// `2 l - ρ log n`; larger is better.
pub fn bic(loglik: f64, rho: usize, n: usize) -> f64 {
    2.0 * loglik - rho as f64 * (n as f64).ln()
}

/// `BIC + 2 Σ_i log ẑ_{i,MAP(i)}`, with `0 log 0 = 0`.
pub fn icl(bic: f64, resp: &DMatrix<f64>) -> f64 {
    let mut pen = 0.0;
    for i in 0..resp.nrows() {
        let mut best = 0;
        for g in 1..resp.ncols() {
            if resp[(i, g)] > resp[(i, best)] {
                best = g;
            }
        }
        let z = resp[(i, best)];
        if z > 0.0 {
            pen += z.ln();
        }
    }
    bic + 2.0 * pen
}

/// Aitken stopping rule on three consecutive log-likelihoods. Converged
/// when the extrapolated limit exceeds `l_prev` by less than `epsilon`.
/// A negative gap, `a >= 1` or a zero denominator never converges.
pub fn aitken_converged(l_prev2: f64, l_prev: f64, l_curr: f64, epsilon: f64) -> bool {
    let den = l_prev - l_prev2;
    if den == 0.0 || !den.is_finite() {
        return false;
    }
    let a = (l_curr - l_prev) / den;
    if !(a < 1.0) {
        return false;
    }
    let l_inf = l_prev + (l_curr - l_prev) / (1.0 - a);
    let diff = l_inf - l_prev;
    diff >= 0.0 && diff < epsilon
}

fn choose2(k: u64) -> f64 {
    (k * k.saturating_sub(1)) as f64 / 2.0
}

/// Hubert–Arabie adjusted Rand index. When the expected and maximal index
/// coincide it returns 1 for equivalent partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("label vectors differ in length ({} vs {})", a.len(), b.len())));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut ra: BTreeMap<usize, u64> = BTreeMap::new();
    let mut rb: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = ra.values().map(|&c| choose2(c)).sum();
    let sb: f64 = rb.values().map(|&c| choose2(c)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if max - expected == 0.0 {
        let same = table.len() == ra.len() && table.len() == rb.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Cells to fit: every combination of the three lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrid {
    pub g_values: Vec<usize>,
    pub structures: Vec<CovarianceStructure>,
    pub families: Vec<Family>,
}

impl ModelGrid {
    pub fn new(g_values: Vec<usize>, structures: Vec<CovarianceStructure>, families: Vec<Family>) -> Result<Self> {
        if g_values.is_empty() || structures.is_empty() || families.is_empty() {
            return Err(Error::Argument("model grid lists must be nonempty".into()));
        }
        if g_values.contains(&0) {
            return Err(Error::Argument("G values must be at least 1".into()));
        }
        Ok(Self { g_values, structures, families })
    }

    /// Cells in family, structure, G order.
    pub fn cells(&self) -> Vec<(Family, CovarianceStructure, usize)> {
        let mut out = Vec::new();
        for &f in &self.families {
            for &s in &self.structures {
                for &g in &self.g_values {
                    out.push((f, s, g));
                }
            }
        }
        out
    }
}

/// One fitted grid cell.
#[derive(Debug, Clone)]
pub struct SelectionRow {
    pub family: Family,
    pub structure: CovarianceStructure,
    pub g: usize,
    pub loglik: f64,
    pub rho: usize,
    pub bic: f64,
    pub icl: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
    /// Fit behind each row, same order.
    pub fits: Vec<FitReport>,
    /// Cells that failed, with the reason.
    pub failures: Vec<(Family, CovarianceStructure, usize, String)>,
    /// Row indices of the best fits by each criterion.
    pub best_by_bic: Option<usize>,
    pub best_by_icl: Option<usize>,
    /// True when the best rows were chosen among converged fits. When no
    /// cell converged they are chosen among all fitted cells instead.
    pub selection_converged: bool,
}

fn argmax(rows: &[SelectionRow], converged_only: bool, key: impl Fn(&SelectionRow) -> f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if (r.converged || !converged_only) && key(r).is_finite() && best.is_none_or(|b| key(r) > key(&rows[b])) {
            best = Some(i);
        }
    }
    best
}

/// Fits every grid cell and picks the best converged rows by BIC and ICL,
/// or the best fitted rows if nothing converged. Ties go to the earlier cell.
pub fn search(ds: &MaskedDataset, grid: &ModelGrid, cfg: &FitConfig) -> Result<SelectionReport> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Argument("empty model grid".into()));
    }
    let results: Vec<Result<FitReport>> = cells.par_iter().map(|&(f, s, g)| fit(ds, g, f, s, cfg)).collect();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for (&(family, structure, g), r) in cells.iter().zip(results) {
        match r {
            Ok(rep) => {
                rows.push(SelectionRow {
                    family,
                    structure,
                    g,
                    loglik: rep.loglik,
                    rho: rep.free_parameters,
                    bic: rep.bic,
                    icl: rep.icl,
                    converged: rep.converged,
                });
                fits.push(rep);
            }
            Err(e) => failures.push((family, structure, g, e.to_string())),
        }
    }
    if rows.is_empty() {
        let diag: Vec<String> = failures.iter().map(|(f, s, g, e)| format!("{f} {s} G={g}: {e}")).collect();
        return Err(Error::Search(format!("every grid cell failed: {}", diag.join("; "))));
    }
    let selection_converged = rows.iter().any(|r| r.converged);
    let best_by_bic = argmax(&rows, selection_converged, |r| r.bic);
    let best_by_icl = argmax(&rows, selection_converged, |r| r.icl);
    Ok(SelectionReport { rows, fits, failures, best_by_bic, best_by_icl, selection_converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_arithmetic() {
        assert!((bic(-100.0, 10, 100) + 246.05170185988092).abs() < 1e-10);
        assert_eq!(bic(0.0, 0, 1), 0.0);
    }

    #[test]
    fn icl_cases() {
        let hard = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(icl(5.0, &hard), 5.0);
        let unif = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!((icl(0.0, &unif) - 2.0 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn aitken_examples() {
        assert!(!aitken_converged(0.0, 1.0, 1.5, 0.1));
        assert!(aitken_converged(0.0, 1.0, 1.0, 1e-12));
        assert!(!aitken_converged(1.0, 1.0, 1.0, 1.0));
    }

    fn row(g: usize, bic: f64, converged: bool) -> SelectionRow {
        SelectionRow { family: Family::Mghd, structure: CovarianceStructure::VVV, g, loglik: 0.0, rho: 1, bic, icl: bic, converged }
    }

    #[test]
    fn selection_prefers_converged_rows() {
        let rows = vec![row(1, -10.0, true), row(2, -5.0, false), row(3, -8.0, true)];
        assert_eq!(argmax(&rows, true, |r| r.bic), Some(2));
        assert_eq!(argmax(&rows, false, |r| r.bic), Some(1));
        let tie = vec![row(1, -5.0, true), row(2, -5.0, true)];
        assert_eq!(argmax(&tie, true, |r| r.bic), Some(0));
    }

    #[test]
    fn ari_edges() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&[3], &[1]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&[0], &[0, 1]).is_err());
    }
}

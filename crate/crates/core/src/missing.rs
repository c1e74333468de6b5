//! Missingness bookkeeping: masked datasets, pattern groups, partitioned
//! parameters, conditional moments of missing blocks, and synthetic
//! missingness.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::{GigParams, SKEW_NULL};
use crate::error::{Error, Result};
use crate::linalg::{select, select_rows_cols, symmetrize, SpdFactor};

/// An `n x p` matrix with a missingness mask (`true` = missing). Missing
/// cells hold NaN and are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    data: DMatrix<f64>,
    mask: DMatrix<bool>,
    column_names: Vec<String>,
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

impl MaskedDataset {
    pub fn new(data: DMatrix<f64>, mask: DMatrix<bool>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = data.shape();
        if mask.shape() != (n, p) {
            return Err(Error::Validation(format!("mask is {:?} but data is {:?}", mask.shape(), (n, p))));
        }
        if column_names.len() != p {
            return Err(Error::Validation(format!("{} column names for {p} columns", column_names.len())));
        }
        if n == 0 || p == 0 {
            return Err(Error::Validation("dataset is empty".into()));
        }
        let mut data = data;
        for i in 0..n {
            if (0..p).all(|j| mask[(i, j)]) {
                return Err(Error::Validation(format!("row {} has no observed values", i + 1)));
            }
            for j in 0..p {
                if mask[(i, j)] {
                    data[(i, j)] = f64::NAN;
                } else if !data[(i, j)].is_finite() {
                    return Err(Error::Validation(format!("row {}, column {} is not finite", i + 1, j + 1)));
                }
            }
        }
        Ok(Self { data, mask, column_names })
    }

    pub fn complete(data: DMatrix<f64>) -> Result<Self> {
        let (n, p) = data.shape();
        Self::new(data, DMatrix::from_element(n, p, false), default_names(p))
    }

    /// Builds a dataset from rows where `None` marks a missing cell.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Validation("rows have different lengths".into()));
        }
        let data = DMatrix::from_fn(n, p, |i, j| rows[i][j].unwrap_or(f64::NAN));
        let mask = DMatrix::from_fn(n, p, |i, j| rows[i][j].is_none());
        Self::new(data, mask, default_names(p))
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::Validation(format!("{} column names for {} columns", names.len(), self.p())));
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        (!self.mask[(i, j)]).then(|| self.data[(i, j)])
    }

    pub fn row_pattern(&self, i: usize) -> Vec<bool> {
        (0..self.p()).map(|j| self.mask[(i, j)]).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Observed values of row `i` at the given columns.
    pub fn observed(&self, i: usize, cols: &[usize]) -> DVector<f64> {
        DVector::from_iterator(cols.len(), cols.iter().map(|&j| self.data[(i, j)]))
    }

    /// The dataset restricted to `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let p = self.p();
        Self {
            data: DMatrix::from_fn(rows.len(), p, |r, j| self.data[(rows[r], j)]),
            mask: DMatrix::from_fn(rows.len(), p, |r, j| self.mask[(rows[r], j)]),
            column_names: self.column_names.clone(),
        }
    }

    /// Per-column mean and standard deviation of the observed cells.
    pub fn observed_moments(&self) -> Result<Vec<(f64, f64)>> {
        (0..self.p())
            .map(|j| {
                let vals: Vec<f64> = (0..self.n()).filter_map(|i| self.value(i, j)).collect();
                if vals.is_empty() {
                    return Err(Error::Validation(format!("column {} has no observed values", j + 1)));
                }
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = if vals.len() > 1 {
                    vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (vals.len() - 1) as f64
                } else {
                    0.0
                };
                Ok((m, var.sqrt()))
            })
            .collect()
    }
}

/// Rows sharing one missingness pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingPatternGroup {
    pub pattern: Vec<bool>,
    pub row_indices: Vec<usize>,
}

impl MissingPatternGroup {
    pub fn observed(&self) -> Vec<usize> {
        (0..self.pattern.len()).filter(|&j| !self.pattern[j]).collect()
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.pattern.len()).filter(|&j| self.pattern[j]).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.pattern.iter().all(|m| !m)
    }
}

/// Groups rows by missingness pattern, ordered lexicographically by pattern
/// (`false < true`), rows ascending within a group.
pub fn extract_patterns(ds: &MaskedDataset) -> Result<Vec<MissingPatternGroup>> {
    let mut groups: std::collections::BTreeMap<Vec<bool>, Vec<usize>> = Default::default();
    for i in 0..ds.n() {
        let pattern = ds.row_pattern(i);
        if pattern.iter().all(|&m| m) {
            return Err(Error::Validation(format!("row {} has no observed values", i + 1)));
        }
        groups.entry(pattern).or_default().push(i);
    }
    Ok(groups.into_iter().map(|(pattern, row_indices)| MissingPatternGroup { pattern, row_indices }).collect())
}

/// Component parameters split into observed (`o`) and missing (`m`) blocks.
#[derive(Debug, Clone)]
pub struct PartitionedComponent {
    pub obs: Vec<usize>,
    pub mis: Vec<usize>,
    pub mu_o: DVector<f64>,
    pub mu_m: DVector<f64>,
    pub beta_o: DVector<f64>,
    pub beta_m: DVector<f64>,
    pub sigma_oo: DMatrix<f64>,
    pub sigma_om: DMatrix<f64>,
    pub sigma_mm: DMatrix<f64>,
    pub sigma_oo_chol: SpdFactor,
    /// `Σ_mo Σ_oo⁻¹`
    pub regression: DMatrix<f64>,
    /// `Σ_mm - Σ_mo Σ_oo⁻¹ Σ_om`
    pub sigma_cond: DMatrix<f64>,
    /// `β_m - Σ_mo Σ_oo⁻¹ β_o`
    pub beta_cond: DVector<f64>,
    /// `β_oᵀ Σ_oo⁻¹ β_o`
    pub skew: f64,
}

pub fn partition_component(
    mu: &DVector<f64>,
    beta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    pattern: &[bool],
) -> Result<PartitionedComponent> {
    let p = mu.len();
    if pattern.len() != p || beta.len() != p || sigma.shape() != (p, p) {
        return Err(Error::Argument("pattern and parameters disagree on dimension".into()));
    }
    let obs: Vec<usize> = (0..p).filter(|&j| !pattern[j]).collect();
    let mis: Vec<usize> = (0..p).filter(|&j| pattern[j]).collect();
    if obs.is_empty() {
        return Err(Error::Argument("pattern has no observed coordinate".into()));
    }
    let sigma_oo = select_rows_cols(sigma, &obs, &obs);
    let sigma_om = select_rows_cols(sigma, &obs, &mis);
    let sigma_mm = select_rows_cols(sigma, &mis, &mis);
    let chol = SpdFactor::new(&sigma_oo)?;
    let beta_o = select(beta, &obs);
    let beta_m = select(beta, &mis);
    let regression = chol.solve_mat(&sigma_om).transpose();
    let sigma_cond = symmetrize(&(&sigma_mm - &regression * &sigma_om));
    let beta_cond = &beta_m - &regression * &beta_o;
    let skew = chol.quad(&beta_o);
    Ok(PartitionedComponent {
        mu_o: select(mu, &obs),
        mu_m: select(mu, &mis),
        beta_o,
        beta_m,
        sigma_oo,
        sigma_om,
        sigma_mm,
        sigma_oo_chol: chol,
        regression,
        sigma_cond,
        beta_cond,
        skew,
        obs,
        mis,
    })
}

impl PartitionedComponent {
    /// Puts the blocks back in the original coordinate order.
    pub fn reassemble(&self) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
        let p = self.obs.len() + self.mis.len();
        let mut mu = DVector::zeros(p);
        let mut beta = DVector::zeros(p);
        let mut sigma = DMatrix::zeros(p, p);
        for (a, &i) in self.obs.iter().enumerate() {
            mu[i] = self.mu_o[a];
            beta[i] = self.beta_o[a];
            for (b, &j) in self.obs.iter().enumerate() {
                sigma[(i, j)] = self.sigma_oo[(a, b)];
            }
            for (b, &j) in self.mis.iter().enumerate() {
                sigma[(i, j)] = self.sigma_om[(a, b)];
                sigma[(j, i)] = self.sigma_om[(a, b)];
            }
        }
        for (a, &i) in self.mis.iter().enumerate() {
            mu[i] = self.mu_m[a];
            beta[i] = self.beta_m[a];
            for (b, &j) in self.mis.iter().enumerate() {
                sigma[(i, j)] = self.sigma_mm[(a, b)];
            }
        }
        (mu, beta, sigma)
    }

    /// `(x_o - μ_o)ᵀ Σ_oo⁻¹ (x_o - μ_o)`.
    pub fn delta(&self, x_o: &DVector<f64>) -> f64 {
        self.sigma_oo_chol.quad(&(x_o - &self.mu_o))
    }

    /// `μ_m + Σ_mo Σ_oo⁻¹ (x_o - μ_o)`.
    pub fn conditional_mean(&self, x_o: &DVector<f64>) -> DVector<f64> {
        &self.mu_m + &self.regression * (x_o - &self.mu_o)
    }
}

/// Latent-scale model of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatentModel {
    Ghd { lambda: f64, omega: f64 },
    St { dof: f64 },
}

/// Posterior GIG of the latent scale given the observed block. For an
/// unskewed skew-t component the result sits on the `psi = 0` boundary.
pub fn latent_w_posterior(x_o: &DVector<f64>, pc: &PartitionedComponent, model: LatentModel) -> Result<GigParams> {
    if x_o.len() != pc.obs.len() {
        return Err(Error::Argument(format!("observed block has {} values, pattern has {}", x_o.len(), pc.obs.len())));
    }
    Ok(posterior_from_stats(pc.delta(x_o), pc.skew, pc.obs.len(), model))
}

pub(crate) fn posterior_from_stats(delta: f64, skew: f64, p_obs: usize, model: LatentModel) -> GigParams {
    let po = p_obs as f64;
    match model {
        LatentModel::Ghd { lambda, omega } => GigParams { lambda: lambda - 0.5 * po, chi: omega + delta, psi: omega + skew },
        LatentModel::St { dof } => GigParams {
            lambda: -0.5 * (dof + po),
            chi: dof + delta,
            psi: if skew < SKEW_NULL { 0.0 } else { skew },
        },
    }
}

/// `E[X_m | x_o]`, `E[X_m / W | x_o]` and `E[X_m X_mᵀ / W | x_o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingBlockMoments {
    pub xhat_m: DVector<f64>,
    pub xtilde_m: DVector<f64>,
    pub xtt_m: DMatrix<f64>,
}

pub fn conditional_missing_moments(x_o: &DVector<f64>, pc: &PartitionedComponent, a: f64, b: f64) -> MissingBlockMoments {
    moments_from_mean(&pc.conditional_mean(x_o), pc, a, b)
}

pub(crate) fn moments_from_mean(mu: &DVector<f64>, pc: &PartitionedComponent, a: f64, b: f64) -> MissingBlockMoments {
    let beta = &pc.beta_cond;
    let mb = mu * beta.transpose();
    let xtt = &pc.sigma_cond + mu * mu.transpose() * b + &mb + mb.transpose() + beta * beta.transpose() * a;
    MissingBlockMoments { xhat_m: mu + beta * a, xtilde_m: mu * b + beta, xtt_m: symmetrize(&xtt) }
}

/// Synthetic missingness mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Mcar,
    MarPattern1,
    MarPattern2,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Mcar, Mechanism::MarPattern1, Mechanism::MarPattern2];

    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::MarPattern1 => "MAR1",
            Mechanism::MarPattern2 => "MAR2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MCAR" => Some(Mechanism::Mcar),
            "MAR1" | "MAR_PATTERN1" => Some(Mechanism::MarPattern1),
            "MAR2" | "MAR_PATTERN2" => Some(Mechanism::MarPattern2),
            _ => None,
        }
    }

    /// Share of a column's deletions placed in each quarter of the rows
    /// sorted by the first column, largest values first.
    fn block_shares(&self) -> [f64; 4] {
        match self {
            Mechanism::Mcar => [0.25; 4],
            Mechanism::MarPattern1 => [0.5, 0.15, 0.3, 0.05],
            Mechanism::MarPattern2 => [0.05, 0.3, 0.15, 0.5],
        }
    }
}

// Guards the floor against products like 400 * 0.15 landing just below an integer.
fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor() as usize
}

fn delete_from(candidates: &[usize], count: usize, col: usize, mask: &mut DMatrix<bool>, rng: &mut ChaCha8Rng) -> Result<()> {
    let p = mask.ncols();
    let mut eligible: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| !mask[(i, col)] && (0..p).filter(|&j| !mask[(i, j)]).count() >= 2)
        .collect();
    if eligible.len() < count {
        return Err(Error::Generation(format!(
            "column {} needs {count} deletions but only {} rows can lose a value",
            col + 1,
            eligible.len()
        )));
    }
    eligible.shuffle(rng);
    for &i in &eligible[..count] {
        mask[(i, col)] = true;
    }
    Ok(())
}

/// Removes values from a complete matrix. MCAR removes `⌊n·rate⌋` cells per
/// column. The MAR mechanisms sort rows by the first column (descending),
/// split them into four equal blocks and delete `⌊n·rate·share⌋` cells of
/// every other column inside each block.
pub fn inject_missingness(data: &DMatrix<f64>, mechanism: Mechanism, rate: f64, seed: u64) -> Result<MaskedDataset> {
    let (n, p) = data.shape();
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Generation(format!("missingness rate must lie in [0, 1), got {rate}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Generation("input data must be complete and finite".into()));
    }
    let mut mask = DMatrix::from_element(n, p, false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mechanism {
        Mechanism::Mcar => {
            if p == 1 && rate > 0.0 {
                return Err(Error::Generation("a single column cannot lose values without orphaning rows".into()));
            }
            let all: Vec<usize> = (0..n).collect();
            for col in 0..p {
                delete_from(&all, floor_count(n as f64 * rate), col, &mut mask, &mut rng)?;
            }
        }
        Mechanism::MarPattern1 | Mechanism::MarPattern2 => {
            if p < 2 {
                return Err(Error::Generation("MAR mechanisms need at least two columns".into()));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| data[(b, 0)].total_cmp(&data[(a, 0)]));
            let shares = mechanism.block_shares();
            for col in 1..p {
                for (blk, share) in shares.iter().enumerate() {
                    let rows = &order[blk * n / 4..(blk + 1) * n / 4];
                    delete_from(rows, floor_count(n as f64 * rate * share), col, &mut mask, &mut rng)?;
                }
            }
        }
    }
    MaskedDataset::new(data.clone(), mask, default_names(p))
}

/// Fills every missing cell with its column's observed mean.
pub fn mean_impute(ds: &MaskedDataset) -> Result<DMatrix<f64>> {
    let moments = ds.observed_moments()?;
    Ok(DMatrix::from_fn(ds.n(), ds.p(), |i, j| ds.value(i, j).unwrap_or(moments[j].0)))
}

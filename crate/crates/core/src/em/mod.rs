//! EM fitting of generalized hyperbolic and skew-t mixtures to data with
//! missing values.

mod estep;
mod fit;
mod init;
mod mstep;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::distributions::{GhdParams, StParams};
use crate::error::{Error, Result};
use crate::gpcm::CovarianceStructure;
use crate::missing::LatentModel;
use crate::special::BesselOrderDerivativeConfig;

pub use estep::{e_step, observed_log_likelihood, EStepCache, GroupMoments};
pub use fit::{fit, predict, FitReport, Prediction};
pub use init::{initialize, kmeans_labels, model_from_labels};
pub use mstep::{
    m_step, m_step_scale, m_step_weights_location_skew, sufficient_stats, update_dof, update_index_concentration,
    DofUpdate, IndexUpdate, MStepOutcome, SufficientStats,
};

/// Mixture family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Generalized hyperbolic components.
    Mghd,
    /// Skew-t components.
    Mst,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Mghd => "MGHD",
            Family::Mst => "MST",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MGHD" | "GHD" => Ok(Family::Mghd),
            "MST" | "ST" => Ok(Family::Mst),
            _ => Err(Error::Argument(format!("unknown family '{s}'; expected MGHD or MST"))),
        }
    }
}

/// One mixture component.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentParams {
    Ghd(GhdParams),
    St(StParams),
}

impl ComponentParams {
    pub fn mu(&self) -> &DVector<f64> {
        match self {
            ComponentParams::Ghd(c) => &c.mu,
            ComponentParams::St(c) => &c.mu,
        }
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        match self {
            ComponentParams::Ghd(c) => &c.sigma,
            ComponentParams::St(c) => &c.sigma,
        }
    }

    pub fn beta(&self) -> &DVector<f64> {
        match self {
            ComponentParams::Ghd(c) => &c.beta,
            ComponentParams::St(c) => &c.beta,
        }
    }

    pub fn latent(&self) -> LatentModel {
        match self {
            ComponentParams::Ghd(c) => LatentModel::Ghd { lambda: c.lambda, omega: c.omega },
            ComponentParams::St(c) => LatentModel::St { dof: c.dof },
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ComponentParams::Ghd(_) => Family::Mghd,
            ComponentParams::St(_) => Family::Mst,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu().len()
    }

    /// Rebuilds a component of the same family from new parts.
    pub fn with_parts(&self, mu: DVector<f64>, sigma: DMatrix<f64>, beta: DVector<f64>, latent: LatentModel) -> Result<Self> {
        match latent {
            LatentModel::Ghd { lambda, omega } => Ok(ComponentParams::Ghd(GhdParams::new(lambda, omega, mu, sigma, beta)?)),
            LatentModel::St { dof } => Ok(ComponentParams::St(StParams::new(dof, mu, sigma, beta)?)),
        }
    }
}

/// Mixing weights, components and the scale structure they obey.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub family: Family,
    pub structure: CovarianceStructure,
    pub weights: Vec<f64>,
    pub components: Vec<ComponentParams>,
}

impl MixtureModel {
    pub fn new(
        family: Family,
        structure: CovarianceStructure,
        weights: Vec<f64>,
        components: Vec<ComponentParams>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::Argument("need one weight per component and at least one component".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Argument("mixing weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Argument(format!("mixing weights sum to {total}, not 1")));
        }
        let p = components[0].dim();
        for c in &components {
            if c.family() != family {
                return Err(Error::Argument("component family does not match the model family".into()));
            }
            if c.dim() != p {
                return Err(Error::Argument("components disagree on dimension".into()));
            }
        }
        Ok(Self { family, structure, weights, components })
    }

    pub fn g(&self) -> usize {
        self.components.len()
    }

    pub fn p(&self) -> usize {
        self.components[0].dim()
    }
}

/// How starting partitions are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMethod {
    /// k-means++ seeding then ten Lloyd iterations on mean-imputed data.
    KMeans,
    /// Uniformly random hard labels.
    Random,
    /// Zero-based labels supplied by the caller.
    Labels(Vec<usize>),
}

/// Fitting controls.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Aitken stopping threshold.
    pub epsilon: f64,
    pub n_starts: usize,
    pub init: InitMethod,
    pub seed: u64,
    /// Ridge near-singular scale matrices instead of failing.
    pub ridge: bool,
    /// Hold every skewness vector at zero.
    pub freeze_skewness: bool,
    /// Hold λ, ω (MGHD) or the degrees of freedom (MST) at their start values.
    pub freeze_shape: bool,
    /// Starting degrees of freedom for skew-t components.
    pub initial_dof: f64,
    pub bessel: BesselOrderDerivativeConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            epsilon: 1e-6,
            n_starts: 5,
            init: InitMethod::KMeans,
            seed: 0,
            ridge: true,
            freeze_skewness: false,
            freeze_shape: false,
            initial_dof: 50.0,
            bessel: BesselOrderDerivativeConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Argument("epsilon must be positive".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Argument("n_starts must be at least 1".into()));
        }
        if !(self.initial_dof > 0.0) {
            return Err(Error::Argument("initial degrees of freedom must be positive".into()));
        }
        Ok(())
    }
}

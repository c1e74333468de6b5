//! The fourteen eigen-decomposed scale structures `Σ_g = λ_g Γ_g Δ_g Γ_gᵀ`:
//! projection of weighted scatter matrices onto each structure and
//! free-parameter counts.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::em::Family;
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, sym_eigen_sorted, symmetrize, SpdFactor};

pub const INNER_TOL: f64 = 1e-8;
pub const INNER_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CovarianceStructure {
    EII,
    VII,
    EEI,
    VEI,
    EVI,
    VVI,
    EEE,
    VEE,
    EVE,
    EEV,
    VVE,
    VEV,
    EVV,
    VVV,
}

use CovarianceStructure::*;

impl CovarianceStructure {
    pub const ALL: [CovarianceStructure; 14] = [EII, VII, EEI, VEI, EVI, VVI, EEE, VEE, EVE, EEV, VVE, VEV, EVV, VVV];

    pub fn tag(&self) -> &'static str {
        match self {
            EII => "EII",
            VII => "VII",
            EEI => "EEI",
            VEI => "VEI",
            EVI => "EVI",
            VVI => "VVI",
            EEE => "EEE",
            VEE => "VEE",
            EVE => "EVE",
            EEV => "EEV",
            VVE => "VVE",
            VEV => "VEV",
            EVV => "EVV",
            VVV => "VVV",
        }
    }

    fn letters(&self) -> [u8; 3] {
        let t = self.tag().as_bytes();
        [t[0], t[1], t[2]]
    }

    pub fn equal_volume(&self) -> bool {
        self.letters()[0] == b'E'
    }

    pub fn equal_shape(&self) -> bool {
        self.letters()[1] != b'V'
    }

    pub fn is_spherical(&self) -> bool {
        self.letters()[1] == b'I'
    }

    pub fn is_diagonal(&self) -> bool {
        self.letters()[2] == b'I'
    }

    pub fn shared_orientation(&self) -> bool {
        self.letters()[2] == b'E'
    }

    /// Number of free parameters in the `G` scale matrices.
    pub fn scale_parameter_count(&self, p: usize, g: usize) -> usize {
        let rot = p * (p - 1) / 2;
        match self {
            EII => 1,
            VII => g,
            EEI => p,
            VEI => g + p - 1,
            EVI => 1 + g * (p - 1),
            VVI => g * p,
            EEE => p * (p + 1) / 2,
            VEE => g + p - 1 + rot,
            EVE => 1 + g * (p - 1) + rot,
            EEV => p + g * rot,
            VVE => g * p + rot,
            VEV => g + p - 1 + g * rot,
            EVV => 1 + g * (p - 1) + g * rot,
            VVV => g * p * (p + 1) / 2,
        }
    }
}

impl fmt::Display for CovarianceStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CovarianceStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Self::ALL.iter().copied().find(|c| c.tag() == up).ok_or_else(|| {
            let tags: Vec<&str> = Self::ALL.iter().map(|c| c.tag()).collect();
            Error::Argument(format!("unknown covariance structure '{s}'; valid tags: {}", tags.join(", ")))
        })
    }
}

/// Free parameters of a `G`-component model.
pub fn free_parameter_count(structure: CovarianceStructure, p: usize, g: usize, family: Family) -> usize {
    free_parameter_count_with(structure, p, g, family, true)
}

/// As [`free_parameter_count`], optionally without skewness parameters.
pub fn free_parameter_count_with(structure: CovarianceStructure, p: usize, g: usize, family: Family, skewed: bool) -> usize {
    let index = match family {
        Family::Mghd => 2 * g,
        Family::Mst => g,
    };
    (g - 1) + g * p + if skewed { g * p } else { 0 } + structure.scale_parameter_count(p, g) + index
}

/// Weighted scatter matrices `S_g = n_g Σ̂_g` and weights `n_g`.
#[derive(Debug, Clone)]
pub struct ScatterSet {
    pub scatters: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
}

/// Output of [`constrain`]. `converged` is false when an inner iteration hit
/// its cap; the best iterate is returned regardless.
#[derive(Debug, Clone)]
pub struct Constrained {
    pub sigmas: Vec<DMatrix<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

/// `-½ Σ_g [n_g log|Σ_g| + tr(Σ_g⁻¹ S_g)]`; `-∞` if some `Σ_g` is not SPD.
pub fn criterion(sc: &ScatterSet, sigmas: &[DMatrix<f64>]) -> f64 {
    let mut total = 0.0;
    for ((s, &n), sigma) in sc.scatters.iter().zip(&sc.weights).zip(sigmas) {
        let Ok(f) = SpdFactor::new(sigma) else {
            return f64::NEG_INFINITY;
        };
        total -= 0.5 * (n * f.log_det() + f.solve_mat(s).trace());
    }
    total
}

fn diag_of(m: &DMatrix<f64>) -> DVector<f64> {
    m.diagonal()
}

fn from_diag(d: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(d)
}

fn geo_norm(d: &DVector<f64>) -> f64 {
    (d.iter().map(|v| v.ln()).sum::<f64>() / d.len() as f64).exp()
}

fn det_root(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen_sorted(m);
    geo_norm(&vals)
}

/// Unit-determinant version of a symmetric PD matrix.
fn unit_det(m: &DMatrix<f64>) -> DMatrix<f64> {
    m / det_root(m)
}

fn validate(sc: &ScatterSet) -> Result<usize> {
    if sc.scatters.is_empty() || sc.scatters.len() != sc.weights.len() {
        return Err(Error::Argument("scatter set needs one weight per matrix and at least one matrix".into()));
    }
    let p = sc.scatters[0].nrows();
    for (s, &w) in sc.scatters.iter().zip(&sc.weights) {
        if s.shape() != (p, p) || p == 0 {
            return Err(Error::Argument("scatter matrices must be square and share a dimension".into()));
        }
        if !is_symmetric(s, 1e-8) {
            return Err(Error::Argument("scatter matrix is not symmetric".into()));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Argument(format!("weights must be positive, got {w}")));
        }
    }
    Ok(p)
}

/// Projects `S_g / n_g` onto `structure` by maximizing [`criterion`].
pub fn constrain(sc: &ScatterSet, structure: CovarianceStructure) -> Result<Constrained> {
    constrain_from(sc, structure, None)
}

/// As [`constrain`], with the previous scale matrices as an extra starting
/// point for the iterative structures; the better of the warm and cold
/// solutions is kept.
pub fn constrain_from(sc: &ScatterSet, structure: CovarianceStructure, warm: Option<&[DMatrix<f64>]>) -> Result<Constrained> {
    let p = validate(sc)?;
    let scatters: Vec<DMatrix<f64>> = sc.scatters.iter().map(symmetrize).collect();
    let sc = ScatterSet { scatters, weights: sc.weights.clone() };
    let n: f64 = sc.weights.iter().sum();
    let g = sc.weights.len();
    let pf = p as f64;
    let w = &sc.scatters;
    let nw = &sc.weights;
    let total: DMatrix<f64> = w.iter().fold(DMatrix::zeros(p, p), |acc, s| acc + s);
    let closed = |sigmas: Vec<DMatrix<f64>>| Constrained { sigmas, converged: true, iterations: 0 };
    let warm = warm.filter(|ws| ws.len() == g && ws.iter().all(|m| m.shape() == (p, p)));

    let out = match structure {
        EII => {
            let l = total.trace() / (n * pf);
            closed(vec![DMatrix::identity(p, p) * l; g])
        }
        VII => closed(w.iter().zip(nw).map(|(s, n)| DMatrix::identity(p, p) * (s.trace() / (n * pf))).collect()),
        EEI => closed(vec![from_diag(&diag_of(&total)) / n; g]),
        EVI => {
            let lam = w.iter().map(|s| geo_norm(&diag_of(s))).sum::<f64>() / n;
            closed(w.iter().map(|s| from_diag(&(diag_of(s) / geo_norm(&diag_of(s)))) * lam).collect())
        }
        VVI => closed(w.iter().zip(nw).map(|(s, n)| from_diag(&diag_of(s)) / *n).collect()),
        EEE => closed(vec![&total / n; g]),
        EEV => {
            let eig: Vec<_> = w.iter().map(sym_eigen_sorted).collect();
            let omega_sum = eig.iter().fold(DVector::zeros(p), |acc, (v, _)| acc + v);
            let a = &omega_sum / geo_norm(&omega_sum);
            let lam = geo_norm(&omega_sum) / n;
            closed(eig.iter().map(|(_, l)| l * from_diag(&a) * l.transpose() * lam).collect())
        }
        EVV => {
            let roots: Vec<f64> = w.iter().map(det_root).collect();
            let lam = roots.iter().sum::<f64>() / n;
            closed(w.iter().zip(&roots).map(|(s, r)| s / *r * lam).collect())
        }
        VVV => closed(w.iter().zip(nw).map(|(s, n)| s / *n).collect()),
        VEI => {
            let start = warm.map(|ws| ws.iter().map(det_root).collect());
            best_of(&sc, start, |l0| vei(&sc, l0))
        }
        VEE => {
            let start = warm.map(|ws| ws.iter().map(det_root).collect());
            best_of(&sc, start, |l0| vee(&sc, l0))
        }
        VEV => {
            let start = warm.map(|ws| ws.iter().map(det_root).collect());
            best_of(&sc, start, |l0| vev(&sc, l0))
        }
        EVE | VVE => {
            let start = warm.map(common_basis);
            best_of(&sc, start, |d0| shared_orientation(&sc, structure == VVE, d0))
        }
    };
    for s in &out.sigmas {
        SpdFactor::new(s)?;
    }
    Ok(out)
}

/// Runs an iterative projection from the cold start and, when given, from
/// a warm start; keeps the higher criterion.
fn best_of<S, F: Fn(Option<S>) -> Constrained>(sc: &ScatterSet, warm: Option<S>, run: F) -> Constrained {
    let cold = run(None);
    match warm {
        None => cold,
        Some(start) => {
            let hot = run(Some(start));
            if criterion(sc, &hot.sigmas) > criterion(sc, &cold.sigmas) {
                hot
            } else {
                cold
            }
        }
    }
}

/// Alternates `Σ_g = λ_g B` updates until the criterion settles.
fn iterate<F: FnMut() -> Vec<DMatrix<f64>>>(sc: &ScatterSet, mut step: F) -> Constrained {
    let mut sigmas = step();
    let mut prev = criterion(sc, &sigmas);
    for it in 1..=INNER_MAX_ITER {
        let next = step();
        let cur = criterion(sc, &next);
        let done = (cur - prev).abs() <= INNER_TOL;
        if cur >= prev || !cur.is_finite() {
            sigmas = next;
        }
        if done {
            return Constrained { sigmas, converged: true, iterations: it };
        }
        prev = cur.max(prev);
    }
    Constrained { sigmas, converged: false, iterations: INNER_MAX_ITER }
}

fn initial_volumes(sc: &ScatterSet) -> Vec<f64> {
    let p = sc.scatters[0].nrows() as f64;
    sc.scatters.iter().zip(&sc.weights).map(|(s, n)| s.trace() / (p * n)).collect()
}

fn vei(sc: &ScatterSet, start: Option<Vec<f64>>) -> Constrained {
    let p = sc.scatters[0].nrows();
    let mut lam = start.unwrap_or_else(|| initial_volumes(sc));
    iterate(sc, || {
        let b = sc.scatters.iter().zip(&lam).fold(DVector::zeros(p), |acc, (s, l)| acc + diag_of(s) / *l);
        let a = &b / geo_norm(&b);
        for ((l, s), n) in lam.iter_mut().zip(&sc.scatters).zip(&sc.weights) {
            *l = diag_of(s).component_div(&a).sum() / (p as f64 * n);
        }
        lam.iter().map(|l| from_diag(&a) * *l).collect()
    })
}

fn vee(sc: &ScatterSet, start: Option<Vec<f64>>) -> Constrained {
    let p = sc.scatters[0].nrows();
    let mut lam = start.unwrap_or_else(|| initial_volumes(sc));
    iterate(sc, || {
        let b = sc.scatters.iter().zip(&lam).fold(DMatrix::zeros(p, p), |acc, (s, l)| acc + s / *l);
        let c = unit_det(&symmetrize(&b));
        let ci = SpdFactor::new(&c).map(|f| f.inverse()).unwrap_or_else(|_| DMatrix::identity(p, p));
        for ((l, s), n) in lam.iter_mut().zip(&sc.scatters).zip(&sc.weights) {
            *l = (s * &ci).trace() / (p as f64 * n);
        }
        lam.iter().map(|l| &c * *l).collect()
    })
}

fn vev(sc: &ScatterSet, start: Option<Vec<f64>>) -> Constrained {
    let p = sc.scatters[0].nrows();
    let eig: Vec<_> = sc.scatters.iter().map(sym_eigen_sorted).collect();
    let mut lam = start.unwrap_or_else(|| initial_volumes(sc));
    iterate(sc, || {
        let b = eig.iter().zip(&lam).fold(DVector::zeros(p), |acc, ((o, _), l)| acc + o / *l);
        let a = &b / geo_norm(&b);
        for ((l, (o, _)), n) in lam.iter_mut().zip(&eig).zip(&sc.weights) {
            *l = o.component_div(&a).sum() / (p as f64 * n);
        }
        eig.iter().zip(&lam).map(|((_, d), l)| d * from_diag(&a) * d.transpose() * *l).collect()
    })
}

/// Orthogonal basis diagonalizing every matrix of a shared-orientation set.
fn common_basis(ms: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = ms[0].nrows();
    // generic weights keep the eigenvalues of the combination distinct
    let mix = ms.iter().enumerate().fold(DMatrix::zeros(p, p), |acc, (k, m)| {
        acc + m * ((1.0 + 0.618_033_988_75 * k as f64) / m.trace().max(f64::MIN_POSITIVE))
    });
    sym_eigen_sorted(&mix).1
}

/// EVE (`varying_volume = false`) and VVE: `Σ_g = D Λ_g Dᵀ` with a common
/// orthogonal `D`. Alternates the closed-form `Λ_g` given `D` with Jacobi
/// sweeps that minimize `Σ_g tr(S_g D Λ_g⁻¹ Dᵀ)` over `D`.
fn shared_orientation(sc: &ScatterSet, varying_volume: bool, start: Option<DMatrix<f64>>) -> Constrained {
    let n: f64 = sc.weights.iter().sum();
    let mut d = start.unwrap_or_else(|| common_basis(&sc.scatters));
    let mut scales: Vec<DVector<f64>> = Vec::new();
    iterate(sc, || {
        let rotated: Vec<DMatrix<f64>> = sc.scatters.iter().map(|s| d.transpose() * s * &d).collect();
        scales = if varying_volume {
            rotated.iter().zip(&sc.weights).map(|(r, ng)| diag_of(r) / *ng).collect()
        } else {
            let shapes: Vec<DVector<f64>> = rotated.iter().map(|r| diag_of(r) / geo_norm(&diag_of(r))).collect();
            let lam = rotated.iter().map(|r| geo_norm(&diag_of(r))).sum::<f64>() / n;
            shapes.into_iter().map(|a| a * lam).collect()
        };
        let sigmas = scales.iter().map(|l| &d * from_diag(l) * d.transpose()).collect();
        jacobi_sweeps(&sc.scatters, &scales, &mut d);
        sigmas
    })
}

fn jacobi_sweeps(scatters: &[DMatrix<f64>], scales: &[DVector<f64>], d: &mut DMatrix<f64>) {
    let p = d.nrows();
    if p < 2 {
        return;
    }
    for _ in 0..20 {
        let mut gain = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                // objective along the rotation angle θ is k + bc·cos2θ + bs·sin2θ
                let (mut bc, mut bs) = (0.0, 0.0);
                for (s, l) in scatters.iter().zip(scales) {
                    let di = d.column(i);
                    let dj = d.column(j);
                    let wii = di.dot(&(s * di));
                    let wjj = dj.dot(&(s * dj));
                    let wij = di.dot(&(s * dj));
                    let diff = 1.0 / l[i] - 1.0 / l[j];
                    bc += 0.5 * (wii - wjj) * diff;
                    bs += wij * diff;
                }
                let amp = (bc * bc + bs * bs).sqrt();
                if amp <= 1e-300 {
                    continue;
                }
                let delta = amp + bc;
                if delta <= 1e-14 * amp {
                    continue;
                }
                gain += delta;
                let phi = (-bs).atan2(-bc);
                let (s, c) = (0.5 * phi).sin_cos();
                let ci = d.column(i).into_owned();
                let cj = d.column(j).into_owned();
                d.set_column(i, &(&ci * c + &cj * s));
                d.set_column(j, &(&cj * c - &ci * s));
            }
        }
        if gain < 1e-12 {
            break;
        }
    }
}

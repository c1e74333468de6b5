//! Versioned text serialization of a fitted mixture: a header line followed
//! by a TOML body. Floats are written in shortest round-trip form, so a
//! reloaded model is bit-identical.

use hyperclust::distributions::{GhdParams, StParams};
use hyperclust::em::{ComponentParams, Family, MixtureModel};
use hyperclust::gpcm::CovarianceStructure;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const HEADER: &str = "hyperclust-model v1";

/// Column standardization applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Component {
    mu: Vec<f64>,
    beta: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dof: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Body {
    family: String,
    structure: String,
    columns: Vec<String>,
    weights: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<Scaling>,
    components: Vec<Component>,
}

/// A model with the column names it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: MixtureModel,
    pub columns: Vec<String>,
    pub scaling: Option<Scaling>,
}

pub fn to_text(saved: &SavedModel) -> CliResult<String> {
    let components = saved
        .model
        .components
        .iter()
        .map(|c| {
            let sigma = c.sigma();
            let mut comp = Component {
                mu: c.mu().iter().copied().collect(),
                beta: c.beta().iter().copied().collect(),
                sigma: (0..sigma.nrows()).map(|i| sigma.row(i).iter().copied().collect()).collect(),
                lambda: None,
                omega: None,
                dof: None,
            };
            match c {
                ComponentParams::Ghd(p) => {
                    comp.lambda = Some(p.lambda);
                    comp.omega = Some(p.omega);
                }
                ComponentParams::St(p) => comp.dof = Some(p.dof),
            }
            comp
        })
        .collect();
    let body = Body {
        family: saved.model.family.to_string(),
        structure: saved.model.structure.to_string(),
        columns: saved.columns.clone(),
        weights: saved.model.weights.clone(),
        scaling: saved.scaling.clone(),
        components,
    };
    let toml = toml::to_string(&body).map_err(|e| CliError::Io(format!("cannot serialize model: {e}")))?;
    Ok(format!("{HEADER}\n{toml}"))
}

pub fn from_text(text: &str) -> CliResult<SavedModel> {
    let bad = |m: String| CliError::Data(format!("model file: {m}"));
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end() != HEADER {
        return Err(bad(format!("expected header '{HEADER}', found '{}'", first.trim_end())));
    }
    let body: Body = toml::from_str(rest).map_err(|e| bad(e.to_string()))?;
    let family: Family = body.family.parse().map_err(|e: hyperclust::Error| bad(e.to_string()))?;
    let structure: CovarianceStructure = body.structure.parse().map_err(|e: hyperclust::Error| bad(e.to_string()))?;
    let p = body.columns.len();
    let components = body
        .components
        .into_iter()
        .enumerate()
        .map(|(g, c)| {
            if c.mu.len() != p || c.beta.len() != p || c.sigma.len() != p || c.sigma.iter().any(|r| r.len() != p) {
                return Err(bad(format!("component {} does not match the {p} columns", g + 1)));
            }
            let mu = DVector::from_vec(c.mu);
            let beta = DVector::from_vec(c.beta);
            let sigma = DMatrix::from_fn(p, p, |i, j| c.sigma[i][j]);
            let comp = match (family, c.lambda, c.omega, c.dof) {
                (Family::Mghd, Some(l), Some(w), None) => GhdParams::new(l, w, mu, sigma, beta).map(ComponentParams::Ghd),
                (Family::Mst, None, None, Some(v)) => StParams::new(v, mu, sigma, beta).map(ComponentParams::St),
                _ => return Err(bad(format!("component {} has the wrong shape parameters for {family}", g + 1))),
            };
            comp.map_err(|e| bad(format!("component {}: {e}", g + 1)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(s) = &body.scaling {
        if s.center.len() != p || s.scale.len() != p {
            return Err(bad("scaling does not match the columns".into()));
        }
    }
    let model = MixtureModel::new(family, structure, body.weights, components).map_err(|e| bad(e.to_string()))?;
    Ok(SavedModel { model, columns: body.columns, scaling: body.scaling })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SavedModel {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.1, 0.1, 2.0f64.sqrt()]);
        let c = |m: f64| {
            ComponentParams::Ghd(
                GhdParams::new(-0.5, 6.0, DVector::from_vec(vec![m, -0.0]), sigma.clone(), DVector::from_vec(vec![1e-300, 0.7])).unwrap(),
            )
        };
        SavedModel {
            model: MixtureModel::new(Family::Mghd, CovarianceStructure::VEE, vec![0.3, 0.7], vec![c(std::f64::consts::PI), c(-1e10)]).unwrap(),
            columns: vec!["a".into(), "b".into()],
            scaling: Some(Scaling { center: vec![0.1, 0.2], scale: vec![3.0, 1.0 / 7.0] }),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let s = sample();
        let text = to_text(&s).unwrap();
        assert!(text.starts_with("hyperclust-model v1\n"));
        let back = from_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(to_text(&back).unwrap(), text);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = to_text(&sample()).unwrap().replacen("v1", "v2", 1);
        assert!(matches!(from_text(&text), Err(CliError::Data(_))));
    }
}

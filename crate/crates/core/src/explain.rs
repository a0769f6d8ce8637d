//! Closed-form SHAP attributions for linear logit models, plain and diffused.
//!
//! Attributions are on the logit scale, relative to the empirical feature
//! means of the scored rows.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LogisticModel, RealDiffuser};

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    /// `n x d` per-row, per-feature contributions.
    pub shap: DMatrix<f64>,
    /// `n x d` effective coefficients of each row.
    pub effective_beta: DMatrix<f64>,
    /// Feature means the contributions are measured against.
    pub baseline: Vec<f64>,
    pub feature_names: Vec<String>,
}

fn check(m: &LogisticModel, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != m.beta.len() {
        return Err(Error::Shape(format!(
            "model has {} coefficients, data has {} columns",
            m.beta.len(),
            x.ncols()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::Shape("no rows to explain".into()));
    }
    Ok(())
}

fn names(m: &LogisticModel) -> Vec<String> {
    if m.feature_names.len() == m.beta.len() {
        m.feature_names.clone()
    } else {
        (0..m.beta.len()).map(|k| format!("x{k}")).collect()
    }
}

fn centered(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let c = DMatrix::from_fn(x.nrows(), x.ncols(), |i, k| x[(i, k)] - means[k]);
    (c, means)
}

fn scale_columns(mut x: DMatrix<f64>, beta: &[f64]) -> DMatrix<f64> {
    for (k, mut col) in x.column_iter_mut().enumerate() {
        col *= beta[k];
    }
    x
}

fn from_parts(m: &LogisticModel, diffused_centered: DMatrix<f64>, row_mass: &DVector<f64>, baseline: Vec<f64>) -> Attribution {
    let n = diffused_centered.nrows();
    let d = m.beta.len();
    Attribution {
        shap: scale_columns(diffused_centered, &m.beta),
        effective_beta: DMatrix::from_fn(n, d, |i, k| m.beta[k] * row_mass[i]),
        baseline,
        feature_names: names(m),
    }
}

/// `phi_ik = beta_k (x_ik - mean_k)`.
pub fn shap_linear(m: &LogisticModel, x: &DMatrix<f64>) -> Result<Attribution> {
    check(m, x)?;
    let (c, means) = centered(x);
    Ok(from_parts(m, c, &DVector::from_element(x.nrows(), 1.0), means))
}

/// Attributions of the post-processed logits `z_dif = D z`:
/// `phi_ik = sum_j D_ij beta_k (x_jk - mean_k)` and
/// `effective_beta_ik = beta_k sum_j D_ij`.
pub fn shap_diffused(m: &LogisticModel, diffusion: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Attribution> {
    check(m, x)?;
    let n = x.nrows();
    if diffusion.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "diffusion matrix is {}x{}, expected {n}x{n}",
            diffusion.nrows(),
            diffusion.ncols()
        )));
    }
    let (c, means) = centered(x);
    let mass = DVector::from_iterator(n, diffusion.row_iter().map(|r| r.sum()));
    Ok(from_parts(m, diffusion * c, &mass, means))
}

/// [`shap_diffused`] without materialising the diffusion matrix: the centred
/// feature columns and the all-ones vector are diffused directly.
pub fn shap_diffused_with(m: &LogisticModel, diffuser: &RealDiffuser<'_>, x: &DMatrix<f64>) -> Result<Attribution> {
    check(m, x)?;
    let n = x.nrows();
    let (c, means) = centered(x);
    let mut dc = DMatrix::zeros(n, c.ncols());
    for k in 0..c.ncols() {
        dc.set_column(k, &diffuser.apply(&c.column(k).into_owned())?);
    }
    let mass = diffuser.apply(&DVector::from_element(n, 1.0))?;
    Ok(from_parts(m, dc, &mass, means))
}

/// Mean absolute attribution per feature, optionally normalised to sum to 1.
///
/// Normalising all-zero attributions yields the uniform vector.
pub fn aggregate_importance(attr: &Attribution, normalized: bool) -> Vec<f64> {
    let n = attr.shap.nrows().max(1) as f64;
    let raw: Vec<f64> = attr.shap.column_iter().map(|c| c.abs().sum() / n).collect();
    if !normalized {
        return raw;
    }
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        log::warn!("all attributions are zero; reporting uniform importance");
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

#[derive(Serialize)]
struct ImportanceEntry<'a> {
    feature: &'a str,
    importance: f64,
    normalized: f64,
}

impl Attribution {
    /// Long-format CSV: `observation_id,feature,shap,effective_beta`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["observation_id", "feature", "shap", "effective_beta"])
            .map_err(|e| Error::csv(path, e))?;
        for i in 0..self.shap.nrows() {
            for (k, name) in self.feature_names.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    name.clone(),
                    self.shap[(i, k)].to_string(),
                    self.effective_beta[(i, k)].to_string(),
                ])
                .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// JSON list of `{feature, importance, normalized}`.
    pub fn write_importance_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw = aggregate_importance(self, false);
        let norm = aggregate_importance(self, true);
        let entries: Vec<ImportanceEntry> = self
            .feature_names
            .iter()
            .zip(raw.iter().zip(&norm))
            .map(|(f, (&importance, &normalized))| ImportanceEntry {
                feature: f,
                importance,
                normalized,
            })
            .collect();
        let text = serde_json::to_string_pretty(&entries).map_err(|e| Error::Serde {
            path: path.into(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

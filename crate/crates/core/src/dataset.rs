//! Dataset model, CSV ingestion, the synthetic simulation generator and
//! stratified hold-out / fold splitting.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Features, binary labels and a binary sensitive attribute (1 = privileged).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<u8>,
    sensitive: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<u8>,
        sensitive: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n < 2 {
            return Err(Error::Config(format!("a dataset needs at least 2 rows, got {n}")));
        }
        if labels.len() != n || sensitive.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} labels and {} sensitive values",
                labels.len(),
                sensitive.len()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Shape(format!(
                "{} feature columns but {} names",
                features.ncols(),
                feature_names.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Config(format!("label at row {i} is not binary")));
        }
        if let Some(i) = sensitive.iter().position(|&a| a > 1) {
            return Err(Error::Config(format!("sensitive value at row {i} is not binary")));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite feature at row {}",
                i % n
            )));
        }
        Ok(Self {
            features,
            labels,
            sensitive,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Feature rows at `rows`, in the given order.
    pub fn feature_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.features.select_rows(rows)
    }

    pub fn labels_at(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn sensitive_at(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&i| self.sensitive[i]).collect()
    }

    /// Row subset as a new dataset.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        Dataset::new(
            self.feature_rows(rows),
            self.labels_at(rows),
            self.sensitive_at(rows),
            self.feature_names.clone(),
        )
    }

    /// Writes the features followed by `label` and `sensitive` columns.
    ///
    /// [`Schema::passthrough`] reads the file back unchanged.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header: Vec<String> = self.feature_names.clone();
        header.push(PASSTHROUGH_LABEL.into());
        header.push(PASSTHROUGH_SENSITIVE.into());
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = self.features.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            rec.push(self.sensitive[i].to_string());
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

const PASSTHROUGH_LABEL: &str = "label";
const PASSTHROUGH_SENSITIVE: &str = "sensitive";

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Parameters of the synthetic benchmark with a noisily measured sensitive attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    /// Probability of drawing the privileged group.
    pub p: f64,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(n: usize, p: f64, seed: u64) -> Result<Self> {
        let cfg = Self { n, p, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("simulation needs n >= 2, got {}", self.n)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("p must lie in (0, 1), got {}", self.p)));
        }
        Ok(())
    }
}

/// Latent and observed draws of one simulated row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentRow {
    pub a: u8,
    pub v: f64,
    pub u: f64,
    pub w: f64,
    pub t: f64,
}

impl LatentRow {
    pub fn label(&self) -> u8 {
        u8::from(0.5 * self.w + 0.5 * self.t > 0.0)
    }
}

/// Draws the latent rows behind [`generate_simulation`].
///
/// For each row: `a ~ Bernoulli(p)`, `v ~ N(a, 1)`, `u, w ~ N(v, 1)`
/// independently and `t ~ N(-0.5, 1)`.
pub fn simulate_latent(cfg: &SimulationConfig) -> Result<Vec<LatentRow>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n)
        .map(|_| {
            let a = u8::from(rng.random::<f64>() < cfg.p);
            let v = f64::from(a) + rng.sample::<f64, _>(StandardNormal);
            let u = v + rng.sample::<f64, _>(StandardNormal);
            let w = v + rng.sample::<f64, _>(StandardNormal);
            let t = -0.5 + rng.sample::<f64, _>(StandardNormal);
            LatentRow { a, v, u, w, t }
        })
        .collect())
}

/// Synthetic dataset with features `(u, t, a)` and label
/// `y = 1(0.5 w + 0.5 t > 0)`. The biased feature `w` drives the label but
/// only its proxy `u` is observed.
pub fn generate_simulation(cfg: &SimulationConfig) -> Result<Dataset> {
    let rows = simulate_latent(cfg)?;
    let features = DMatrix::from_fn(rows.len(), 3, |i, j| match j {
        0 => rows[i].u,
        1 => rows[i].t,
        _ => f64::from(rows[i].a),
    });
    Dataset::new(
        features,
        rows.iter().map(LatentRow::label).collect(),
        rows.iter().map(|r| r.a).collect(),
        vec!["u".into(), "t".into(), "a".into()],
    )
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// How the sensitive column maps to the privileged group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivilegedRule {
    /// Privileged when the cell equals this value.
    Equals(String),
    /// Privileged when the numeric cell is strictly greater.
    GreaterThan(f64),
    /// Privileged when the numeric cell is strictly smaller.
    LessThan(f64),
}

/// Column roles for [`load_csv`], usually read from a JSON or TOML sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub label: String,
    /// Cell value mapped to label 1. When absent the column must already be 0/1.
    #[serde(default)]
    pub positive_label: Option<String>,
    pub sensitive: String,
    pub privileged: PrivilegedRule,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub drop: Vec<String>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Keep the sensitive column among the covariates.
    #[serde(default = "default_true")]
    pub sensitive_as_feature: bool,
}

fn default_true() -> bool {
    true
}

impl Schema {
    /// Schema for files written by [`Dataset::write_csv`].
    pub fn passthrough() -> Self {
        Self {
            label: PASSTHROUGH_LABEL.into(),
            positive_label: None,
            sensitive: PASSTHROUGH_SENSITIVE.into(),
            privileged: PrivilegedRule::Equals("1".into()),
            categorical: Vec::new(),
            drop: Vec::new(),
            standardize: false,
            sensitive_as_feature: false,
        }
    }

    /// Reads a `.json` or `.toml` sidecar.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Serde {
                path: path.into(),
                msg: e.to_string(),
            })
        } else {
            toml::from_str(&text).map_err(|e| Error::Serde {
                path: path.into(),
                msg: e.to_string(),
            })
        }
    }

    pub fn write_toml(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::Serde {
            path: path.into(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn cell_matches(cell: &str, target: &str) -> bool {
    if cell == target {
        return true;
    }
    match (cell.parse::<f64>(), target.parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Loads a CSV file according to `schema`. Warnings are logged.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (ds, warnings) = read_csv(file, schema)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(ds)
}

/// Parses CSV from any reader, returning the dataset and any warnings.
///
/// Categorical columns are one-hot encoded with one column per level (levels
/// sorted, none dropped). Numeric columns are standardized to zero mean and
/// unit population variance over the whole file when `schema.standardize`
/// is set; constant columns become all zeros with a warning.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<(Dataset, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Ingestion {
            row: 0,
            msg: e.to_string(),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let label_col = find(&schema.label)?;
    let sensitive_col = find(&schema.sensitive)?;
    for c in schema.categorical.iter().chain(&schema.drop) {
        find(c)?;
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingestion {
            row: i + 1,
            msg: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Ingestion {
                row: i + 1,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        rows.push(rec.iter().map(|s| s.trim().to_string()).collect());
    }
    let n = rows.len();

    let mut labels = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let cell = &row[label_col];
        let y = match &schema.positive_label {
            Some(pos) => u8::from(cell_matches(cell, pos)),
            None => match cell.parse::<f64>() {
                Ok(0.0) => 0,
                Ok(1.0) => 1,
                _ => {
                    return Err(Error::Ingestion {
                        row: i + 1,
                        msg: format!("label `{cell}` is not binary"),
                    })
                }
            },
        };
        labels.push(y);
        let cell = &row[sensitive_col];
        let a = match &schema.privileged {
            PrivilegedRule::Equals(v) => cell_matches(cell, v),
            PrivilegedRule::GreaterThan(t) | PrivilegedRule::LessThan(t) => {
                let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                    row: i + 1,
                    msg: format!("sensitive value `{cell}` is not numeric"),
                })?;
                if matches!(schema.privileged, PrivilegedRule::GreaterThan(_)) {
                    v > *t
                } else {
                    v < *t
                }
            }
        };
        sensitive.push(u8::from(a));
    }

    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut warnings = Vec::new();
    for (c, name) in header.iter().enumerate() {
        if c == label_col
            || (c == sensitive_col && !schema.sensitive_as_feature)
            || schema.drop.contains(name)
        {
            continue;
        }
        if schema.categorical.contains(name) {
            let levels: BTreeMap<&str, usize> = {
                let mut set: Vec<&str> = rows.iter().map(|r| r[c].as_str()).collect();
                set.sort_unstable();
                set.dedup();
                set.into_iter().enumerate().map(|(k, v)| (v, k)).collect()
            };
            let base = columns.len();
            for level in levels.keys() {
                names.push(format!("{name}={level}"));
                columns.push(vec![0.0; n]);
            }
            for (i, row) in rows.iter().enumerate() {
                columns[base + levels[row[c].as_str()]][i] = 1.0;
            }
        } else {
            let mut col = Vec::with_capacity(n);
            for (i, row) in rows.iter().enumerate() {
                let v: f64 = row[c].parse().map_err(|_| Error::Ingestion {
                    row: i + 1,
                    msg: format!("column `{name}`: `{}` is not numeric", row[c]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Ingestion {
                        row: i + 1,
                        msg: format!("column `{name}` is not finite"),
                    });
                }
                col.push(v);
            }
            if schema.standardize && n > 0 {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let sd = var.sqrt();
                if sd > 0.0 {
                    col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
                } else {
                    warnings.push(format!("column `{name}` is constant; standardized to zeros"));
                    col.iter_mut().for_each(|v| *v = 0.0);
                }
            }
            names.push(name.clone());
            columns.push(col);
        }
    }
    let features = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let ds = Dataset::new(features, labels, sensitive, names)?;
    Ok((ds, warnings))
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// One train/validation partition of the non-test rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Hold-out test rows plus cross-validation folds over the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_indices: Vec<usize>,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

impl SplitPlan {
    /// Every row outside the hold-out test set, sorted.
    pub fn non_test(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .folds
            .first()
            .map(|f| f.train.iter().chain(&f.validation).copied().collect())
            .unwrap_or_default();
        all.sort_unstable();
        all
    }

    /// Checks disjointness and coverage over `n` rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut in_test = vec![false; n];
        for &i in &self.test_indices {
            if i >= n || in_test[i] {
                return Err(Error::Split(format!("bad test index {i}")));
            }
            in_test[i] = true;
        }
        for (k, fold) in self.folds.iter().enumerate() {
            let mut seen = in_test.clone();
            for &i in fold.train.iter().chain(&fold.validation) {
                if i >= n || seen[i] {
                    return Err(Error::Split(format!("fold {k}: index {i} repeated or in test")));
                }
                seen[i] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::Split(format!("fold {k} does not cover all rows")));
            }
        }
        Ok(())
    }
}

/// Stratified split on the joint `(label, sensitive)` pair.
///
/// Each stratum is shuffled, `round(test_fraction * size)` rows go to the
/// hold-out set and the remainder is dealt round-robin over the folds.
pub fn make_split(ds: &Dataset, test_fraction: f64, n_folds: usize, seed: u64) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if n_folds < 2 {
        return Err(Error::Split(format!("need at least 2 folds, got {n_folds}")));
    }
    let mut strata: BTreeMap<(u8, u8), Vec<usize>> = BTreeMap::new();
    for i in 0..ds.n_rows() {
        strata
            .entry((ds.labels[i], ds.sensitive[i]))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    let mut validation: Vec<Vec<usize>> = vec![Vec::new(); n_folds];
    let mut next_fold = 0;
    for ((y, a), mut members) in strata {
        members.shuffle(&mut rng);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        if members.len() - n_test < n_folds {
            return Err(Error::Split(format!(
                "stratum (label={y}, sensitive={a}) has {} rows, {} left after the test split, \
                 too few for {n_folds} folds",
                members.len(),
                members.len() - n_test
            )));
        }
        test.extend_from_slice(&members[..n_test]);
        for &i in &members[n_test..] {
            validation[next_fold].push(i);
            next_fold = (next_fold + 1) % n_folds;
        }
    }
    test.sort_unstable();
    let folds = (0..n_folds)
        .map(|k| {
            let mut val = validation[k].clone();
            val.sort_unstable();
            let mut train: Vec<usize> = validation
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            Fold {
                train,
                validation: val,
            }
        })
        .collect();
    Ok(SplitPlan {
        test_indices: test,
        folds,
        seed,
    })
}

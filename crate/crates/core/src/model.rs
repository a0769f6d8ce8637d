//! Logistic regression and the three diffusion processors: identity-sheaf
//! pre-processing of covariates, identity-sheaf post-processing of logits,
//! and vector-sheaf in-processing with staged refits.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitPlan};
use crate::diffusion::{DiffusionConfig, Diffuser};
use crate::error::{Error, Result};
use crate::sheaf::{build_sheaf_laplacian, combine_laplacians, normalize, SheafLaplacian, SheafSpec};
use crate::topology::Topology;

/// Linear logit model `z = beta0 + beta . x` with a score threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub threshold: f64,
    #[serde(default)]
    pub feature_names: Vec<String>,
}

impl LogisticModel {
    pub fn new(beta0: f64, beta: Vec<f64>) -> Self {
        Self {
            beta0,
            beta,
            threshold: 0.5,
            feature_names: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() == self.beta.len() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "model has {} coefficients, data has {} columns",
                self.beta.len(),
                x.ncols()
            )))
        }
    }

    pub fn logits(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let beta = DVector::from_column_slice(&self.beta);
        Ok((x * beta).add_scalar(self.beta0))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde {
            path: path.into(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Serde {
            path: path.into(),
            msg: e.to_string(),
        })?;
        if m.beta.iter().chain([&m.beta0]).any(|v| !v.is_finite()) {
            return Err(Error::Serde {
                path: path.into(),
                msg: "non-finite coefficient".into(),
            });
        }
        Ok(m)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Scores `sigmoid(beta0 + beta . x)` for each row.
pub fn predict_scores(m: &LogisticModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(m.logits(x)?.iter().map(|&z| sigmoid(z)).collect())
}

/// `1` where the score is strictly above `threshold`.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s > threshold)).collect()
}

/// AdamW settings. Defaults lie inside the grid-search sampling ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub moment_decay_1: f64,
    pub moment_decay_2: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            weight_decay: 1e-4,
            moment_decay_1: 0.9,
            moment_decay_2: 0.999,
            max_epochs: 2000,
            seed: 0,
        }
    }
}

pub const LEARNING_RATE_RANGE: (f64, f64) = (1e-4, 1e-1);
pub const WEIGHT_DECAY_RANGE: (f64, f64) = (1e-6, 1e-2);
pub const MOMENT_DECAY_1_RANGE: (f64, f64) = (0.8, 0.95);
pub const MOMENT_DECAY_2_RANGE: (f64, f64) = (0.95, 0.9999);

/// Gradient max-norm below which training stops early.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

fn in_range(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} = {v} outside [{lo}, {hi}]")))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        in_range("learning_rate", self.learning_rate, LEARNING_RATE_RANGE)?;
        in_range("weight_decay", self.weight_decay, WEIGHT_DECAY_RANGE)?;
        in_range("moment_decay_1", self.moment_decay_1, MOMENT_DECAY_1_RANGE)?;
        in_range("moment_decay_2", self.moment_decay_2, MOMENT_DECAY_2_RANGE)?;
        if self.max_epochs == 0 {
            return Err(Error::Parameter("max_epochs must be positive".into()));
        }
        Ok(())
    }

    /// Draws learning rate and weight decay log-uniformly and the moment
    /// decays uniformly from their ranges.
    pub fn sample<R: Rng>(rng: &mut R, max_epochs: usize, seed: u64) -> Self {
        let log_uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        };
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| lo + rng.random::<f64>() * (hi - lo);
        Self {
            learning_rate: log_uniform(rng, LEARNING_RATE_RANGE),
            weight_decay: log_uniform(rng, WEIGHT_DECAY_RANGE),
            moment_decay_1: uniform(rng, MOMENT_DECAY_1_RANGE),
            moment_decay_2: uniform(rng, MOMENT_DECAY_2_RANGE),
            max_epochs,
            seed,
        }
    }
}

/// Fits by full-batch AdamW on the mean negative log-likelihood.
///
/// Weight decay is decoupled and applies to `beta` only, not the intercept.
/// Coefficients start from small seeded Gaussian noise.
pub fn fit_logistic(x: &DMatrix<f64>, y: &[u8], cfg: &TrainConfig) -> Result<LogisticModel> {
    cfg.validate()?;
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 rows, got {n}")));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels("only one class present".into()));
    }
    let yv = DVector::from_iterator(n, y.iter().map(|&v| f64::from(v)));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // theta = (beta0, beta)
    let mut theta = DVector::from_fn(d + 1, |i, _| {
        if i == 0 {
            0.0
        } else {
            0.01 * rng.sample::<f64, _>(StandardNormal)
        }
    });
    let mut m = DVector::<f64>::zeros(d + 1);
    let mut v = DVector::<f64>::zeros(d + 1);
    let (b1, b2) = (cfg.moment_decay_1, cfg.moment_decay_2);
    let eps = 1e-8;
    let mut grad = DVector::<f64>::zeros(d + 1);
    for epoch in 1..=cfg.max_epochs {
        let beta = theta.rows(1, d);
        let mut resid = x * beta;
        for (r, yi) in resid.iter_mut().zip(yv.iter()) {
            *r = sigmoid(*r + theta[0]) - yi;
        }
        grad[0] = resid.sum() / n as f64;
        let gb = x.tr_mul(&resid) / n as f64;
        grad.rows_mut(1, d).copy_from(&gb);
        if grad.amax() < GRADIENT_TOLERANCE {
            break;
        }
        let bias1 = 1.0 - b1.powi(epoch as i32);
        let bias2 = 1.0 - b2.powi(epoch as i32);
        for i in 0..=d {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            if i > 0 {
                theta[i] *= 1.0 - cfg.learning_rate * cfg.weight_decay;
            }
            theta[i] -= cfg.learning_rate * (m[i] / bias1) / ((v[i] / bias2).sqrt() + eps);
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Divergence { layer: 0 });
        }
    }
    Ok(LogisticModel::new(theta[0], theta.rows(1, d).iter().copied().collect()))
}

// ---------------------------------------------------------------------------
// Processors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Diffuse the covariates with an identity sheaf of stalk dimension `d`.
    Pre,
    /// Diffuse the logits with a scalar identity sheaf.
    Post,
    /// Diffuse the covariates with the vector sheaf of the current
    /// coefficients, then refit.
    InProcess,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Pre => "pre",
            Mode::Post => "post",
            Mode::InProcess => "in",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProcessorMode {
    pub mode: Mode,
    pub topology: Topology,
    pub diffusion: DiffusionConfig,
    /// Refit rounds for [`Mode::InProcess`].
    pub inprocess_rounds: usize,
}

impl ProcessorMode {
    pub fn new(mode: Mode, topology: Topology, diffusion: DiffusionConfig) -> Self {
        Self {
            mode,
            topology,
            diffusion,
            inprocess_rounds: 1,
        }
    }
}

/// Normalised Laplacian of `spec` over the (weighted) topology.
pub fn topology_laplacian(topology: &Topology, spec: &SheafSpec) -> Result<SheafLaplacian> {
    let parts = topology
        .parts()
        .iter()
        .map(|(g, w)| Ok((build_sheaf_laplacian(g, spec)?, *w)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(&SheafLaplacian, f64)> = parts.iter().map(|(l, w)| (l, *w)).collect();
    let combined = combine_laplacians(&refs)?.padded(topology.n_nodes())?;
    normalize(&combined)
}

/// Diffusion of signals living on the real nodes of a topology.
///
/// Virtual aggregator nodes start at the mean of their members' signal and
/// are dropped from the output.
pub struct RealDiffuser<'a> {
    topology: &'a Topology,
    diffuser: Diffuser<'a>,
    stalk: usize,
}

impl<'a> RealDiffuser<'a> {
    pub fn new(topology: &'a Topology, laplacian: &'a SheafLaplacian, cfg: DiffusionConfig) -> Result<Self> {
        if laplacian.n_nodes() != topology.n_nodes() {
            return Err(Error::Shape(format!(
                "Laplacian has {} nodes, topology {}",
                laplacian.n_nodes(),
                topology.n_nodes()
            )));
        }
        Ok(Self {
            topology,
            diffuser: Diffuser::new(laplacian, cfg)?,
            stalk: laplacian.stalk_dim(),
        })
    }

    /// Diffuses an `n_real x s` row signal.
    pub fn apply_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.topology.n_real();
        let s = self.stalk;
        if x.nrows() != n || x.ncols() != s {
            return Err(Error::Shape(format!(
                "signal is {}x{}, expected {n}x{s}",
                x.nrows(),
                x.ncols()
            )));
        }
        let n_nodes = self.topology.n_nodes();
        let mut flat = DVector::zeros(n_nodes * s);
        for i in 0..n {
            for j in 0..s {
                flat[i * s + j] = x[(i, j)];
            }
        }
        for (k, members) in self.topology.virtual_meta().iter().enumerate() {
            let node = n + k;
            for &m in members {
                for j in 0..s {
                    flat[node * s + j] += x[(m, j)];
                }
            }
            for j in 0..s {
                flat[node * s + j] /= members.len() as f64;
            }
        }
        let out = self.diffuser.apply(&flat)?;
        Ok(DMatrix::from_fn(n, s, |i, j| out[i * s + j]))
    }

    /// Diffuses a scalar signal on the real nodes.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        Ok(self.apply_rows(&m)?.column(0).into_owned())
    }

    /// Dense `n_real x n_real` matrix of the scalar real-node operator.
    pub fn effective_matrix(&self) -> Result<DMatrix<f64>> {
        if self.stalk != 1 {
            return Err(Error::Shape("effective matrix needs a scalar stalk".into()));
        }
        let n = self.topology.n_real();
        let mut d = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            d.set_column(j, &self.apply(&e)?);
        }
        Ok(d)
    }
}

/// Output of one pipeline run over all rows of a dataset.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub model: LogisticModel,
    /// Final (possibly diffused) logits for every row.
    pub logits: DVector<f64>,
    pub scores: Vec<f64>,
    /// Covariates the model was fitted on (diffused for pre/in-processing).
    pub features: DMatrix<f64>,
}

/// Fit-independent part of a processor, shared by all folds of a split.
enum Prepared<'a> {
    Plain,
    Pre(DMatrix<f64>),
    Post(RealDiffuser<'a>),
    InProcess(&'a ProcessorMode),
}

fn prepare<'a>(
    ds: &Dataset,
    proc: Option<&'a ProcessorMode>,
    slot: &'a mut Option<SheafLaplacian>,
) -> Result<Prepared<'a>> {
    let Some(proc) = proc else {
        return Ok(Prepared::Plain);
    };
    if proc.topology.n_real() != ds.n_rows() {
        return Err(Error::Shape(format!(
            "topology spans {} rows, dataset has {}",
            proc.topology.n_real(),
            ds.n_rows()
        )));
    }
    Ok(match proc.mode {
        Mode::Pre => {
            let spec = SheafSpec::Identity { stalk_dim: ds.n_features() };
            let l = topology_laplacian(&proc.topology, &spec)?;
            Prepared::Pre(RealDiffuser::new(&proc.topology, &l, proc.diffusion)?.apply_rows(ds.features())?)
        }
        Mode::Post => {
            let l = slot.insert(topology_laplacian(&proc.topology, &SheafSpec::Identity { stalk_dim: 1 })?);
            Prepared::Post(RealDiffuser::new(&proc.topology, l, proc.diffusion)?)
        }
        Mode::InProcess => {
            if proc.inprocess_rounds == 0 {
                return Err(Error::Parameter("inprocess_rounds must be at least 1".into()));
            }
            Prepared::InProcess(proc)
        }
    })
}

fn run_prepared(ds: &Dataset, fit_rows: &[usize], prep: &Prepared<'_>, cfg: &TrainConfig) -> Result<PipelineRun> {
    let x = ds.features();
    let y_fit = ds.labels_at(fit_rows);
    let fit = |features: &DMatrix<f64>| -> Result<LogisticModel> {
        let mut m = fit_logistic(&features.select_rows(fit_rows), &y_fit, cfg)?;
        m.feature_names = ds.feature_names().to_vec();
        Ok(m)
    };
    let finish = |model: LogisticModel, logits: DVector<f64>, features: DMatrix<f64>| PipelineRun {
        scores: logits.iter().map(|&z| sigmoid(z)).collect(),
        model,
        logits,
        features,
    };
    match prep {
        Prepared::Plain => {
            let model = fit(x)?;
            let logits = model.logits(x)?;
            Ok(finish(model, logits, x.clone()))
        }
        Prepared::Pre(xd) => {
            let model = fit(xd)?;
            let logits = model.logits(xd)?;
            Ok(finish(model, logits, xd.clone()))
        }
        Prepared::Post(diffuser) => {
            let model = fit(x)?;
            let zd = diffuser.apply(&model.logits(x)?)?;
            Ok(finish(model, zd, x.clone()))
        }
        Prepared::InProcess(proc) => {
            let mut model = fit(x)?;
            let mut xd = x.clone();
            for _ in 0..proc.inprocess_rounds {
                xd = vector_sheaf_diffuse(&proc.topology, &model.beta, x, proc.diffusion)?;
                model = fit(&xd)?;
            }
            let logits = model.logits(&xd)?;
            Ok(finish(model, logits, xd))
        }
    }
}

/// Fits on `fit_rows` and scores every row.
///
/// Diffusion is transductive: the topology spans all rows, but only labels
/// of `fit_rows` enter training.
pub fn run_pipeline(
    ds: &Dataset,
    fit_rows: &[usize],
    proc: Option<&ProcessorMode>,
    cfg: &TrainConfig,
) -> Result<PipelineRun> {
    let mut slot = None;
    let prep = prepare(ds, proc, &mut slot)?;
    run_prepared(ds, fit_rows, &prep, cfg)
}

/// Diffuses the covariate rows with the vector sheaf of `beta`.
pub fn vector_sheaf_diffuse(
    topology: &Topology,
    beta: &[f64],
    x: &DMatrix<f64>,
    cfg: DiffusionConfig,
) -> Result<DMatrix<f64>> {
    let l = topology_laplacian(topology, &SheafSpec::Vector { beta: beta.to_vec() })?;
    RealDiffuser::new(topology, &l, cfg)?.apply_rows(x)
}

/// Scores for the rows of one evaluation part.
#[derive(Debug, Clone)]
pub struct PartScores {
    pub rows: Vec<usize>,
    pub scores: Vec<f64>,
    pub model: LogisticModel,
}

/// Scores of every fold's validation rows and of the hold-out test rows.
#[derive(Debug, Clone)]
pub struct SplitScores {
    pub folds: Vec<PartScores>,
    /// Fitted on all non-test rows.
    pub test: PartScores,
    pub test_run: PipelineRun,
}

pub fn run_split(
    ds: &Dataset,
    split: &SplitPlan,
    proc: Option<&ProcessorMode>,
    cfg: &TrainConfig,
) -> Result<SplitScores> {
    split.validate(ds.n_rows())?;
    let mut slot = None;
    let prep = prepare(ds, proc, &mut slot)?;
    let pick = |run: &PipelineRun, rows: &[usize]| -> Vec<f64> { rows.iter().map(|&i| run.scores[i]).collect() };
    let mut folds = Vec::with_capacity(split.folds.len());
    for fold in &split.folds {
        let run = run_prepared(ds, &fold.train, &prep, cfg)?;
        folds.push(PartScores {
            rows: fold.validation.clone(),
            scores: pick(&run, &fold.validation),
            model: run.model,
        });
    }
    let test_run = run_prepared(ds, &split.non_test(), &prep, cfg)?;
    let test = PartScores {
        rows: split.test_indices.clone(),
        scores: pick(&test_run, &split.test_indices),
        model: test_run.model.clone(),
    };
    Ok(SplitScores { folds, test, test_run })
}

//! Grid search over topologies and diffusion settings, Pareto fronts,
//! best-model selection and report files.

mod pareto;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitPlan};
use crate::diffusion::{DiffusionConfig, Scheme, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::explain::{shap_diffused_with, shap_linear, Attribution};
use crate::metrics::{FairnessReport, ReportOptions};
use crate::model::{run_split, topology_laplacian, Mode, ProcessorMode, RealDiffuser, TrainConfig};
use crate::sheaf::SheafSpec;
use crate::topology::{
    build_knn_graph, build_subset_graph_with, build_unit_ball_graph, quantile_distance, BallWeighting,
    MemberWeight, Partition, Topology,
};

pub use pareto::{non_dominated, pareto_front, select_best, selection_score, Direction, ParetoPoint};
pub use report::{emit_report, ReportFiles};

/// Graph family of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyChoice {
    Knn { k: usize },
    /// Radius `Q(neighbours / n)` of the pairwise distance distribution, so
    /// each row has about `neighbours` neighbours.
    UnitBall { neighbours: f64 },
    /// Partition by the sensitive attribute.
    Subset,
    MixedKnn { k: usize, w_subset: f64 },
    MixedUnitBall { neighbours: f64, w_subset: f64 },
}

impl fmt::Display for TopologyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyChoice::Knn { k } => write!(f, "knn(k={k})"),
            TopologyChoice::UnitBall { neighbours } => write!(f, "ball(c={neighbours})"),
            TopologyChoice::Subset => write!(f, "subset"),
            TopologyChoice::MixedKnn { k, w_subset } => write!(f, "mixed-knn(k={k};w={w_subset})"),
            TopologyChoice::MixedUnitBall { neighbours, w_subset } => {
                write!(f, "mixed-ball(c={neighbours};w={w_subset})")
            }
        }
    }
}

/// Options shared by every topology of a grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologyOptions {
    #[serde(default)]
    pub member_weight: MemberWeight,
    #[serde(default)]
    pub ball_weighting: BallWeighting,
}

impl FromStr for TopologyChoice {
    type Err = Error;

    /// Parses `knn:K`, `ball:C`, `subset`, `mixed-knn:K:W` or
    /// `mixed-ball:C:W`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse topology {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad());
        let real = |v: &str| v.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["knn", k] => Ok(TopologyChoice::Knn { k: int(k)? }),
            ["ball", c] => Ok(TopologyChoice::UnitBall { neighbours: real(c)? }),
            ["subset"] => Ok(TopologyChoice::Subset),
            ["mixed-knn", k, w] => Ok(TopologyChoice::MixedKnn {
                k: int(k)?,
                w_subset: real(w)?,
            }),
            ["mixed-ball", c, w] => Ok(TopologyChoice::MixedUnitBall {
                neighbours: real(c)?,
                w_subset: real(w)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl TopologyChoice {
    pub fn build(&self, ds: &Dataset, opts: &TopologyOptions) -> Result<Topology> {
        let x = ds.features();
        let n = ds.n_rows();
        let ball = |c: f64| -> Result<_> {
            let q = (c / n as f64).min(1.0);
            let delta = quantile_distance(x, q)?;
            build_unit_ball_graph(x, delta, opts.ball_weighting)
        };
        let subset = || build_subset_graph_with(n, &[Partition::by_sensitive(ds)?], opts.member_weight);
        match *self {
            TopologyChoice::Knn { k } => Ok(Topology::single(build_knn_graph(x, k)?)),
            TopologyChoice::UnitBall { neighbours } => Ok(Topology::single(ball(neighbours)?)),
            TopologyChoice::Subset => Ok(Topology::single(subset()?)),
            TopologyChoice::MixedKnn { k, w_subset } => Topology::mixed(subset()?, build_knn_graph(x, k)?, w_subset),
            TopologyChoice::MixedUnitBall { neighbours, w_subset } => {
                Topology::mixed(subset()?, ball(neighbours)?, w_subset)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Discrete,
    Continuous,
}

/// Hyper-parameter grid. Every field has a default, so a config file only
/// needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub modes: Vec<Mode>,
    pub knn_k: Vec<usize>,
    pub unit_ball_neighbours: Vec<f64>,
    pub subset: bool,
    pub mixed_w_subset: Vec<f64>,
    pub alphas: Vec<f64>,
    pub n_layers: Vec<usize>,
    pub times: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    pub include_baseline: bool,
    /// Number of optimizer settings drawn from the sampling ranges. Draw `j`
    /// is shared by every configuration.
    pub optimizer_draws: usize,
    /// Use this optimizer setting instead of sampling.
    pub fixed_optimizer: Option<TrainConfig>,
    pub max_epochs: usize,
    pub seed: u64,
    pub topology_options: TopologyOptions,
    pub inprocess_rounds: usize,
    pub dense_cap: usize,
    pub con_k: usize,
    pub lip_quantile: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            modes: vec![Mode::Post],
            knn_k: vec![1, 5, 15],
            unit_ball_neighbours: vec![50.0, 100.0, 500.0],
            subset: true,
            mixed_w_subset: vec![0.5],
            alphas: vec![0.05, 0.1, 0.3],
            n_layers: vec![5, 10, 20],
            times: vec![0.1, 0.3, 1.0],
            schemes: vec![SchemeKind::Discrete, SchemeKind::Continuous],
            include_baseline: true,
            optimizer_draws: 1,
            fixed_optimizer: None,
            max_epochs: 2000,
            seed: 0,
            topology_options: TopologyOptions::default(),
            inprocess_rounds: 1,
            dense_cap: DEFAULT_DENSE_CAP,
            con_k: crate::metrics::CON_K,
            lip_quantile: crate::metrics::LIP_QUANTILE,
        }
    }
}

impl GridSpec {
    /// A grid holding only the plain logistic baseline.
    pub fn baseline_only() -> Self {
        Self {
            modes: Vec::new(),
            ..Self::default()
        }
    }

    pub fn topologies(&self) -> Vec<TopologyChoice> {
        let mut out: Vec<TopologyChoice> = self.knn_k.iter().map(|&k| TopologyChoice::Knn { k }).collect();
        out.extend(
            self.unit_ball_neighbours
                .iter()
                .map(|&neighbours| TopologyChoice::UnitBall { neighbours }),
        );
        if self.subset {
            out.push(TopologyChoice::Subset);
            for &w_subset in &self.mixed_w_subset {
                out.extend(self.knn_k.iter().map(|&k| TopologyChoice::MixedKnn { k, w_subset }));
                out.extend(
                    self.unit_ball_neighbours
                        .iter()
                        .map(|&neighbours| TopologyChoice::MixedUnitBall { neighbours, w_subset }),
                );
            }
        }
        out
    }

    pub fn diffusions(&self) -> Vec<DiffusionConfig> {
        let mut out = Vec::new();
        for kind in &self.schemes {
            for &alpha in &self.alphas {
                match kind {
                    SchemeKind::Discrete => out.extend(self.n_layers.iter().map(|&n_layers| DiffusionConfig {
                        alpha,
                        scheme: Scheme::Discrete { n_layers },
                        dense_cap: self.dense_cap,
                    })),
                    SchemeKind::Continuous => out.extend(self.times.iter().map(|&t| DiffusionConfig {
                        alpha,
                        scheme: Scheme::Continuous { t },
                        dense_cap: self.dense_cap,
                    })),
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.optimizer_draws == 0 && self.fixed_optimizer.is_none() {
            return bad("optimizer_draws must be at least 1".into());
        }
        if let Some(cfg) = &self.fixed_optimizer {
            cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.knn_k.contains(&0) {
            return bad("knn_k values must be positive".into());
        }
        if self.unit_ball_neighbours.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return bad("unit_ball_neighbours values must be positive".into());
        }
        if self.mixed_w_subset.iter().any(|w| !(*w > 0.0 && *w < 1.0)) {
            return bad("mixed_w_subset values must lie in (0, 1)".into());
        }
        if self.inprocess_rounds == 0 {
            return bad("inprocess_rounds must be at least 1".into());
        }
        for d in self.diffusions() {
            d.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let processed = !self.modes.is_empty() && !self.topologies().is_empty() && !self.diffusions().is_empty();
        if !processed && !self.include_baseline {
            return bad("grid is empty".into());
        }
        Ok(())
    }

    fn optimizer(&self, draw: usize) -> TrainConfig {
        if let Some(cfg) = self.fixed_optimizer {
            return cfg;
        }
        let seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(draw as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TrainConfig::sample(&mut rng, self.max_epochs, seed)
    }

    /// Every configuration of the grid, baseline first, with ids in order.
    pub fn configs(&self) -> Vec<RunConfig> {
        let draws = if self.fixed_optimizer.is_some() {
            1
        } else {
            self.optimizer_draws
        };
        let mut out = Vec::new();
        let mut push = |mode, topology, diffusion, draw| {
            out.push(RunConfig {
                id: out.len(),
                mode,
                topology,
                diffusion,
                draw,
                train: self.optimizer(draw),
            })
        };
        if self.include_baseline {
            for draw in 0..draws {
                push(None, None, None, draw);
            }
        }
        for &mode in &self.modes {
            for topology in self.topologies() {
                for diffusion in self.diffusions() {
                    for draw in 0..draws {
                        push(Some(mode), Some(topology), Some(diffusion), draw);
                    }
                }
            }
        }
        out
    }

    fn report_options(&self) -> ReportOptions {
        ReportOptions {
            con_k: self.con_k,
            lip_quantile: self.lip_quantile,
            lip_seed: self.seed,
            ..ReportOptions::default()
        }
    }
}

/// One evaluated configuration. `mode == None` is the plain logistic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub id: usize,
    pub mode: Option<Mode>,
    pub topology: Option<TopologyChoice>,
    pub diffusion: Option<DiffusionConfig>,
    pub draw: usize,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn label(&self) -> String {
        let (Some(mode), Some(topology), Some(diffusion)) = (self.mode, self.topology, self.diffusion) else {
            return format!("logistic#{}", self.draw);
        };
        let scheme = match diffusion.scheme {
            Scheme::Discrete { n_layers } => format!("disc(a={};n={n_layers})", diffusion.alpha),
            Scheme::Continuous { t } => format!("cont(a={};t={t})", diffusion.alpha),
        };
        format!("{mode}:{topology}:{scheme}#{}", self.draw)
    }

    /// The processor of this configuration over a built topology.
    pub fn processor(&self, topology: Topology, inprocess_rounds: usize) -> Option<ProcessorMode> {
        Some(ProcessorMode {
            mode: self.mode?,
            topology,
            diffusion: self.diffusion?,
            inprocess_rounds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Diverged { layer: usize },
    Failed { reason: String },
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::Diverged { layer } => write!(f, "diverged(layer={layer})"),
            RunStatus::Failed { reason } => write!(f, "failed({reason})"),
        }
    }
}

/// Metrics tracked across folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Balanced accuracy.
    Acc,
    Ind,
    Suf,
    Sep,
    Con,
    Lip,
    Ent,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Acc,
        Metric::Ind,
        Metric::Suf,
        Metric::Sep,
        Metric::Con,
        Metric::Lip,
        Metric::Ent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Acc => "acc",
            Metric::Ind => "ind",
            Metric::Suf => "suf",
            Metric::Sep => "sep",
            Metric::Con => "con",
            Metric::Lip => "lip",
            Metric::Ent => "ent",
        }
    }

    pub fn of(self, r: &FairnessReport) -> Option<f64> {
        match self {
            Metric::Acc => Some(r.balanced_accuracy),
            Metric::Ind => Some(r.ind),
            Metric::Suf => r.suf,
            Metric::Sep => r.sep,
            Metric::Con => Some(r.con),
            Metric::Lip => r.lip,
            Metric::Ent => r.ent,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub status: RunStatus,
    /// One report per fold, on that fold's validation rows.
    pub folds: Vec<FairnessReport>,
    /// Model fitted on all non-test rows, evaluated on the test rows.
    pub test: Option<FairnessReport>,
    pub wall_time_secs: f64,
}

impl RunResult {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// Per-fold values, or `None` when failed or undefined in some fold.
    pub fn fold_values(&self, metric: Metric) -> Option<Vec<f64>> {
        if !self.is_ok() || self.folds.is_empty() {
            return None;
        }
        self.folds.iter().map(|r| metric.of(r)).collect()
    }

    pub fn fold_mean(&self, metric: Metric) -> Option<f64> {
        let v = self.fold_values(metric)?;
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Sample standard deviation across folds (0 for a single fold).
    pub fn fold_std(&self, metric: Metric) -> Option<f64> {
        let v = self.fold_values(metric)?;
        if v.len() < 2 {
            return Some(0.0);
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some((v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
    }
}

fn evaluate(
    ds: &Dataset,
    split: &SplitPlan,
    config: &RunConfig,
    topology: Option<&Result<Topology>>,
    grid: &GridSpec,
) -> RunResult {
    let start = Instant::now();
    let outcome = (|| -> Result<(Vec<FairnessReport>, FairnessReport)> {
        let proc = match topology {
            Some(Ok(t)) => config.processor(t.clone(), grid.inprocess_rounds),
            Some(Err(e)) => return Err(Error::Config(format!("topology: {e}"))),
            None => None,
        };
        let scores = run_split(ds, split, proc.as_ref(), &config.train)?;
        let opts = grid.report_options();
        let report = |rows: &[usize], s: &[f64]| {
            FairnessReport::compute(
                &ds.labels_at(rows),
                s,
                &ds.sensitive_at(rows),
                &ds.feature_rows(rows),
                &opts,
            )
        };
        let folds = scores
            .folds
            .iter()
            .map(|p| report(&p.rows, &p.scores))
            .collect::<Result<Vec<_>>>()?;
        Ok((folds, report(&scores.test.rows, &scores.test.scores)?))
    })();
    let wall_time_secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok((folds, test)) => RunResult {
            config: config.clone(),
            status: RunStatus::Ok,
            folds,
            test: Some(test),
            wall_time_secs,
        },
        Err(e) => {
            log::warn!("config {} ({}) failed: {e}", config.id, config.label());
            let status = match e {
                Error::Divergence { layer } => RunStatus::Diverged { layer },
                other => RunStatus::Failed {
                    reason: other.to_string(),
                },
            };
            RunResult {
                config: config.clone(),
                status,
                folds: Vec::new(),
                test: None,
                wall_time_secs,
            }
        }
    }
}

fn topology_key(t: &TopologyChoice) -> String {
    t.to_string()
}

/// Evaluates every configuration on every fold and on the hold-out test.
///
/// Per-configuration errors are recorded in the result's status. Results
/// come back sorted by configuration id.
pub fn run_grid(ds: &Dataset, split: &SplitPlan, grid: &GridSpec) -> Result<Vec<RunResult>> {
    grid.validate()?;
    split.validate(ds.n_rows())?;
    let configs = grid.configs();
    let choices: BTreeMap<String, TopologyChoice> = configs
        .iter()
        .filter_map(|c| c.topology)
        .map(|t| (topology_key(&t), t))
        .collect();
    let topologies: BTreeMap<String, Result<Topology>> = choices
        .into_par_iter()
        .map(|(key, t)| {
            let built = t.build(ds, &grid.topology_options);
            (key, built)
        })
        .collect();
    let mut results: Vec<RunResult> = configs
        .par_iter()
        .map(|c| {
            let topology = c.topology.map(|t| &topologies[&topology_key(&t)]);
            evaluate(ds, split, c, topology, grid)
        })
        .collect();
    results.sort_by_key(|r| r.config.id);
    Ok(results)
}

/// [`run_grid`] on a dedicated pool of `threads` workers.
pub fn run_grid_with_threads(ds: &Dataset, split: &SplitPlan, grid: &GridSpec, threads: usize) -> Result<Vec<RunResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_grid(ds, split, grid))
}

/// Attributions of a configuration refitted on all non-test rows, over every
/// row of the dataset.
///
/// Post-processed models use the diffused attributions; pre- and in-processed
/// models are linear in their diffused covariates and use the plain ones.
pub fn explain_config(ds: &Dataset, split: &SplitPlan, config: &RunConfig, grid: &GridSpec) -> Result<Attribution> {
    let topology = config
        .topology
        .map(|t| t.build(ds, &grid.topology_options))
        .transpose()?;
    let proc = topology.and_then(|t| config.processor(t, grid.inprocess_rounds));
    let fit_rows = split.non_test();
    let run = crate::model::run_pipeline(ds, &fit_rows, proc.as_ref(), &config.train)?;
    match &proc {
        Some(p) if p.mode == Mode::Post => {
            let l = topology_laplacian(&p.topology, &SheafSpec::Identity { stalk_dim: 1 })?;
            let diffuser = RealDiffuser::new(&p.topology, &l, p.diffusion)?;
            shap_diffused_with(&run.model, &diffuser, ds.features())
        }
        _ => shap_linear(&run.model, &run.features),
    }
}

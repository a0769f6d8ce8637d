//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 numerical divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fairsheaf::dataset::{generate_simulation, load_csv, make_split, Dataset, Schema, SimulationConfig, SplitPlan};
use fairsheaf::diffusion::DiffusionConfig;
use fairsheaf::experiments::{
    emit_report, explain_config, run_grid, select_best, Direction, GridSpec, Metric,
    RunResult, TopologyChoice,
};
use fairsheaf::explain::{aggregate_importance, shap_diffused_with, shap_linear};
use fairsheaf::metrics::{FairnessReport, ReportOptions};
use fairsheaf::model::{run_pipeline, topology_laplacian, LogisticModel, Mode, ProcessorMode, RealDiffuser, TrainConfig};
use fairsheaf::sheaf::SheafSpec;
use fairsheaf::{Error, Result};

#[derive(Parser)]
#[command(name = "fairsheaf", version, about = "Fair sheaf diffusion toolkit")]
struct Cli {
    /// Seed for simulation, splits, optimizer draws and initialisation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// TOML or JSON file with `schema`, `split`, `train` and `grid` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset.
    Simulate {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
    },
    /// Load a raw CSV with a schema and write the cleaned data and a split.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Fit one model and score the hold-out rows.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        proc: ProcArgs,
    },
    /// Run the hyper-parameter grid and write the report tables.
    Gridsearch {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Pareto front of a saved grid search.
    Pareto {
        /// `results.json` written by `gridsearch`.
        #[arg(long)]
        results: PathBuf,
        /// Comma-separated `metric:max|min` pairs, 2 or 3 of them.
        #[arg(long, default_value = "acc:max,ind:min,con:min")]
        objectives: String,
    },
    /// SHAP attributions of a saved model.
    Shap {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        /// Post-processing topology; attributions are then diffused.
        #[command(flatten)]
        proc: ProcArgs,
    },
    /// Metrics of saved scores (`score` column, one row per data row).
    Metrics {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        scores: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV data file.
    #[arg(long)]
    data: PathBuf,
    /// Schema sidecar; defaults to the config's schema, then to the layout
    /// written by `simulate` and `ingest`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Split plan JSON; a fresh stratified split is drawn when absent.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Plain,
    Pre,
    Post,
    In,
}

#[derive(Args)]
struct ProcArgs {
    #[arg(long, value_enum, default_value = "plain")]
    mode: CliMode,
    /// `knn:K`, `ball:C`, `subset`, `mixed-knn:K:W` or `mixed-ball:C:W`.
    #[arg(long, default_value = "knn:5")]
    topology: String,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    /// Discrete layers (ignored when `--time` is given).
    #[arg(long, default_value_t = 10)]
    layers: usize,
    /// Continuous integration time.
    #[arg(long)]
    time: Option<f64>,
    /// Refit rounds for in-processing.
    #[arg(long, default_value_t = 1)]
    rounds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SplitSettings {
    test_fraction: f64,
    folds: usize,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            folds: 4,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    schema: Option<Schema>,
    split: SplitSettings,
    train: Option<TrainConfig>,
    grid: GridSpec,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    config: FileConfig,
}

impl Ctx {
    fn out(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| Error::Config(format!("{}: {e}", self.out_dir.display())))?;
        Ok(self.out_dir.join(name))
    }

    fn schema(&self, path: Option<&Path>) -> Result<Schema> {
        match (path, &self.config.schema) {
            (Some(p), _) => Schema::from_path(p),
            (None, Some(s)) => Ok(s.clone()),
            (None, None) => Ok(Schema::passthrough()),
        }
    }

    fn train_config(&self) -> TrainConfig {
        self.config.train.unwrap_or(TrainConfig {
            seed: self.seed,
            ..TrainConfig::default()
        })
    }

    fn split(&self, ds: &Dataset, path: Option<&Path>) -> Result<SplitPlan> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let plan: SplitPlan = serde_json::from_str(&text).map_err(|e| Error::Serde {
                    path: p.into(),
                    msg: e.to_string(),
                })?;
                plan.validate(ds.n_rows())?;
                Ok(plan)
            }
            None => make_split(ds, self.config.split.test_fraction, self.config.split.folds, self.seed),
        }
    }

    fn load(&self, data: &DataArgs) -> Result<(Dataset, SplitPlan)> {
        let ds = load_csv(&data.data, &self.schema(data.schema.as_deref())?)?;
        let split = self.split(&ds, data.split.as_deref())?;
        Ok((ds, split))
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde {
        path: path.into(),
        msg: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn processor(ds: &Dataset, args: &ProcArgs, cfg: &FileConfig) -> Result<Option<ProcessorMode>> {
    let mode = match args.mode {
        CliMode::Plain => return Ok(None),
        CliMode::Pre => Mode::Pre,
        CliMode::Post => Mode::Post,
        CliMode::In => Mode::InProcess,
    };
    let topology = args
        .topology
        .parse::<TopologyChoice>()?
        .build(ds, &cfg.grid.topology_options)?;
    let diffusion = match args.time {
        Some(t) => DiffusionConfig::continuous(args.alpha, t)?,
        None => DiffusionConfig::discrete(args.alpha, args.layers)?,
    };
    Ok(Some(ProcessorMode {
        mode,
        topology,
        diffusion,
        inprocess_rounds: args.rounds,
    }))
}

fn report_for(ds: &Dataset, rows: &[usize], scores: &[f64], seed: u64) -> Result<FairnessReport> {
    FairnessReport::compute(
        &ds.labels_at(rows),
        scores,
        &ds.sensitive_at(rows),
        &ds.feature_rows(rows),
        &ReportOptions {
            lip_seed: seed,
            ..ReportOptions::default()
        },
    )
}

fn importance_rows(names: &[String], raw: &[f64], norm: &[f64]) -> Vec<(String, f64, f64)> {
    names
        .iter()
        .zip(raw.iter().zip(norm))
        .map(|(f, (&r, &n))| (f.clone(), r, n))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir,
        config,
    };
    match cli.command {
        Command::Simulate { n, p } => {
            let ds = generate_simulation(&SimulationConfig::new(n, p, ctx.seed)?)?;
            let path = ctx.out("simulation.csv")?;
            ds.write_csv(&path)?;
            Schema::passthrough().write_toml(ctx.out("schema.toml")?)?;
            println!("wrote {} rows to {}", ds.n_rows(), path.display());
        }
        Command::Ingest { input, schema } => {
            let schema = ctx.schema(schema.as_deref())?;
            let (ds, warnings) = fairsheaf::dataset::read_csv(
                std::fs::File::open(&input).map_err(|e| Error::Io {
                    path: input.clone(),
                    source: e,
                })?,
                &schema,
            )?;
            for w in &warnings {
                log::warn!("{w}");
            }
            let split = make_split(&ds, ctx.config.split.test_fraction, ctx.config.split.folds, ctx.seed)?;
            ds.write_csv(ctx.out("dataset.csv")?)?;
            Schema::passthrough().write_toml(ctx.out("schema.toml")?)?;
            write_json(&split, &ctx.out("split.json")?)?;
            std::fs::write(ctx.out("warnings.txt")?, warnings.join("\n"))
                .map_err(|e| Error::Config(e.to_string()))?;
            println!(
                "ingested {} rows, {} features, {} warnings",
                ds.n_rows(),
                ds.n_features(),
                warnings.len()
            );
        }
        Command::Train { data, proc } => {
            let (ds, split) = ctx.load(&data)?;
            let proc = processor(&ds, &proc, &ctx.config)?;
            let run = run_pipeline(&ds, &split.non_test(), proc.as_ref(), &ctx.train_config())?;
            run.model.save_json(ctx.out("model.json")?)?;
            let test_scores: Vec<f64> = split.test_indices.iter().map(|&i| run.scores[i]).collect();
            let report = report_for(&ds, &split.test_indices, &test_scores, ctx.seed)?;
            write_json(&report, &ctx.out("report.json")?)?;
            let path = ctx.out("scores.csv")?;
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Config(e.to_string()))?;
            let mut in_test = vec![false; ds.n_rows()];
            for &i in &split.test_indices {
                in_test[i] = true;
            }
            w.write_record(["row", "label", "sensitive", "score", "part"])
                .map_err(|e| Error::Config(e.to_string()))?;
            for i in 0..ds.n_rows() {
                w.write_record([
                    i.to_string(),
                    ds.labels()[i].to_string(),
                    ds.sensitive()[i].to_string(),
                    run.scores[i].to_string(),
                    if in_test[i] { "test" } else { "train" }.to_string(),
                ])
                .map_err(|e| Error::Config(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
            println!(
                "test: acc {:.4} ind {:.4} con {:.4}",
                report.balanced_accuracy, report.ind, report.con
            );
        }
        Command::Gridsearch { data } => {
            let (ds, split) = ctx.load(&data)?;
            let mut grid = ctx.config.grid.clone();
            grid.seed = ctx.seed;
            let results = run_grid(&ds, &split, &grid)?;
            write_json(&results, &ctx.out("results.json")?)?;
            let selection = select_best(&results).ok();
            let importance = match selection {
                Some(id) => {
                    let cfg = &results.iter().find(|r| r.config.id == id).expect("selected id exists").config;
                    let attr = explain_config(&ds, &split, cfg, &grid)?;
                    Some(importance_rows(
                        &attr.feature_names,
                        &aggregate_importance(&attr, false),
                        &aggregate_importance(&attr, true),
                    ))
                }
                None => None,
            };
            emit_report(&results, selection, importance.as_deref(), &ctx.out_dir)?;
            let failed = results.iter().filter(|r| !r.is_ok()).count();
            println!(
                "{} configs, {failed} failed, selected {}",
                results.len(),
                selection
                    .and_then(|id| results.iter().find(|r| r.config.id == id))
                    .map_or("none".to_string(), |r| r.config.label())
            );
        }
        Command::Pareto { results, objectives } => {
            let text = std::fs::read_to_string(&results).map_err(|e| Error::Io {
                path: results.clone(),
                source: e,
            })?;
            let runs: Vec<RunResult> = serde_json::from_str(&text).map_err(|e| Error::Serde {
                path: results.clone(),
                msg: e.to_string(),
            })?;
            let objectives = parse_objectives(&objectives)?;
            let front = fairsheaf::experiments::pareto_front(&runs, &objectives)?;
            let path = ctx.out("pareto.csv")?;
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Config(e.to_string()))?;
            let mut header = vec!["id".to_string()];
            header.extend(objectives.iter().map(|(m, _)| m.name().to_string()));
            w.write_record(&header).map_err(|e| Error::Config(e.to_string()))?;
            for p in &front {
                let mut row = vec![p.id.to_string()];
                row.extend(p.objectives.iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(|e| Error::Config(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::Config(e.to_string()))?;
            println!("{} of {} runs on the front", front.len(), runs.len());
        }
        Command::Shap { data, model, proc } => {
            let (ds, _) = ctx.load(&data)?;
            let m = LogisticModel::load_json(&model)?;
            let attr = match processor(&ds, &proc, &ctx.config)? {
                Some(p) if p.mode == Mode::Post => {
                    let l = topology_laplacian(&p.topology, &SheafSpec::Identity { stalk_dim: 1 })?;
                    let diffuser = RealDiffuser::new(&p.topology, &l, p.diffusion)?;
                    shap_diffused_with(&m, &diffuser, ds.features())?
                }
                Some(_) => return Err(Error::Config("shap supports plain and post modes".into())),
                None => shap_linear(&m, ds.features())?,
            };
            attr.write_csv(ctx.out("shap.csv")?)?;
            attr.write_importance_json(ctx.out("importance.json")?)?;
            println!("attributions for {} rows x {} features", ds.n_rows(), ds.n_features());
        }
        Command::Metrics { data, scores } => {
            let ds = load_csv(&data.data, &ctx.schema(data.schema.as_deref())?)?;
            let s = read_scores(&scores)?;
            if s.len() != ds.n_rows() {
                return Err(Error::Shape(format!("{} scores for {} rows", s.len(), ds.n_rows())));
            }
            let rows: Vec<usize> = (0..ds.n_rows()).collect();
            let report = report_for(&ds, &rows, &s, ctx.seed)?;
            write_json(&report, &ctx.out("metrics.json")?)?;
            println!(
                "acc {:.4} ind {:.4} con {:.4}",
                report.balanced_accuracy, report.ind, report.con
            );
        }
    }
    Ok(())
}

fn parse_objectives(spec: &str) -> Result<Vec<(Metric, Direction)>> {
    spec.split(',')
        .map(|item| {
            let (m, d) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("objective {item:?} needs metric:max|min")))?;
            let dir = match d {
                "max" => Direction::Maximize,
                "min" => Direction::Minimize,
                _ => return Err(Error::Config(format!("direction must be max or min, got {d:?}"))),
            };
            Ok((m.parse()?, dir))
        })
        .collect()
}

fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "score")
        .ok_or_else(|| Error::Schema(format!("{} has no score column", path.display())))?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| Error::Ingestion {
                row: i + 1,
                msg: e.to_string(),
            })?;
            rec.get(col)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Ingestion {
                    row: i + 1,
                    msg: "score is not a finite number".into(),
                })
        })
        .collect()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        Error::Config(_) | Error::Parameter(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

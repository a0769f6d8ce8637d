//! A reduced hyper-parameter grid with best-model selection and the full set
//! of report files.
//!
//! `cargo run --release --example gridsearch -- [out_dir]`

use fairsheaf::dataset::{generate_simulation, make_split, SimulationConfig};
use fairsheaf::experiments::{emit_report, explain_config, run_grid, select_best, GridSpec, Metric, SchemeKind};
use fairsheaf::explain::aggregate_importance;
use fairsheaf::model::Mode;

fn main() -> fairsheaf::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("fairsheaf-grid"));
    let ds = generate_simulation(&SimulationConfig::new(1000, 0.5, 0)?)?;
    let split = make_split(&ds, 0.2, 4, 0)?;

    let grid = GridSpec {
        modes: vec![Mode::Post],
        knn_k: vec![5, 15],
        unit_ball_neighbours: vec![100.0],
        alphas: vec![0.1, 0.3],
        n_layers: vec![10],
        schemes: vec![SchemeKind::Discrete],
        ..GridSpec::default()
    };
    let results = run_grid(&ds, &split, &grid)?;
    println!("{} configurations", results.len());
    for r in &results {
        let m = |metric| r.fold_mean(metric).map_or("-".into(), |v| format!("{v:.3}"));
        println!(
            "{:>3} {:<40} acc {} ind {} con {}",
            r.config.id,
            r.config.label(),
            m(Metric::Acc),
            m(Metric::Ind),
            m(Metric::Con)
        );
    }

    let best = select_best(&results)?;
    println!("selected {}", results[best].config.label());
    let attr = explain_config(&ds, &split, &results[best].config, &grid)?;
    let raw = aggregate_importance(&attr, false);
    let norm = aggregate_importance(&attr, true);
    let importance: Vec<(String, f64, f64)> = attr
        .feature_names
        .iter()
        .enumerate()
        .map(|(k, f)| (f.clone(), raw[k], norm[k]))
        .collect();

    let files = emit_report(&results, Some(best), Some(&importance), &out)?;
    println!("summary table: {}", files.summary.display());
    println!("3-objective front: {}", files.pareto_3d.display());
    Ok(())
}

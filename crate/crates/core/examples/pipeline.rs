//! Plain logistic regression against pre-, post- and in-processing with a
//! kNN topology, evaluated on a stratified hold-out split.

use fairsheaf::dataset::{generate_simulation, make_split, SimulationConfig};
use fairsheaf::diffusion::DiffusionConfig;
use fairsheaf::metrics::{FairnessReport, ReportOptions};
use fairsheaf::model::{run_split, Mode, ProcessorMode, TrainConfig};
use fairsheaf::topology::{build_knn_graph, Topology};

fn main() -> fairsheaf::Result<()> {
    let ds = generate_simulation(&SimulationConfig::new(2000, 0.5, 7)?)?;
    let split = make_split(&ds, 0.2, 4, 7)?;
    let topology = Topology::single(build_knn_graph(ds.features(), 5)?);
    let cfg = TrainConfig { seed: 7, ..TrainConfig::default() };

    let rows = &split.test_indices;
    let x = ds.feature_rows(rows);
    let report = |scores: &[f64]| {
        FairnessReport::compute(&ds.labels_at(rows), scores, &ds.sensitive_at(rows), &x, &ReportOptions::default())
    };

    println!("{:<8} {:>6} {:>6} {:>6} {:>6}", "model", "bacc", "ind", "con", "lip");
    let mut runs = vec![("plain".to_string(), None)];
    for mode in [Mode::Pre, Mode::Post, Mode::InProcess] {
        let proc = ProcessorMode::new(mode, topology.clone(), DiffusionConfig::discrete(0.3, 10)?);
        runs.push((mode.to_string(), Some(proc)));
    }
    for (name, proc) in &runs {
        let out = run_split(&ds, &split, proc.as_ref(), &cfg)?;
        let r = report(&out.test.scores)?;
        println!(
            "{name:<8} {:>6.3} {:>6.3} {:>6.4} {:>6.3}",
            r.balanced_accuracy,
            r.ind,
            r.con,
            r.lip.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

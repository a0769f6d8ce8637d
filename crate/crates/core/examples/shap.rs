//! Linear SHAP attributions of a fitted model, and how post-processing
//! diffusion redistributes them across neighbouring rows.

use fairsheaf::dataset::{generate_simulation, SimulationConfig};
use fairsheaf::diffusion::DiffusionConfig;
use fairsheaf::explain::{aggregate_importance, shap_diffused_with, shap_linear};
use fairsheaf::model::{fit_logistic, topology_laplacian, RealDiffuser, TrainConfig};
use fairsheaf::sheaf::SheafSpec;
use fairsheaf::topology::{build_knn_graph, Topology};

fn main() -> fairsheaf::Result<()> {
    let ds = generate_simulation(&SimulationConfig::new(500, 0.5, 3)?)?;
    let x = ds.features();
    let model = fit_logistic(x, ds.labels(), &TrainConfig::default())?;
    println!("beta0 {:.3}  beta {:.3?}", model.beta0, model.beta);

    let plain = shap_linear(&model, x)?;
    let topology = Topology::single(build_knn_graph(x, 5)?);
    let l = topology_laplacian(&topology, &SheafSpec::Identity { stalk_dim: 1 })?;
    let diffuser = RealDiffuser::new(&topology, &l, DiffusionConfig::discrete(0.3, 10)?)?;
    let diffused = shap_diffused_with(&model, &diffuser, x)?;

    let names = ds.feature_names();
    let imp_plain = aggregate_importance(&plain, true);
    let imp_diff = aggregate_importance(&diffused, true);
    println!("{:<4} {:>8} {:>8}", "", "plain", "diffused");
    for (k, name) in names.iter().enumerate() {
        println!("{name:<4} {:>8.3} {:>8.3}", imp_plain[k], imp_diff[k]);
    }

    // each row's effective coefficients are a weighted mix of the global ones
    for i in 0..3 {
        println!("row {i}: effective beta {:.3?}", diffused.effective_beta.row(i).iter().collect::<Vec<_>>());
    }

    let dir = std::env::temp_dir().join("fairsheaf-shap");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    diffused.write_csv(dir.join("shap.csv"))?;
    diffused.write_importance_json(dir.join("importance.json"))?;
    println!("attributions written to {}", dir.display());
    Ok(())
}

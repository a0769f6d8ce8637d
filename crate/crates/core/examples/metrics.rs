//! Group and individual fairness metrics, computed one by one and through
//! the combined report.

use fairsheaf::dataset::{generate_simulation, SimulationConfig};
use fairsheaf::metrics::{
    balanced_accuracy, consistency, generalized_entropy, independence, lipschitz, separation, sufficiency,
    FairnessReport, ReportOptions,
};
use fairsheaf::model::{classify, fit_logistic, predict_scores, TrainConfig};

fn main() -> fairsheaf::Result<()> {
    let ds = generate_simulation(&SimulationConfig::new(1000, 0.3, 9)?)?;
    let (x, y, a) = (ds.features(), ds.labels(), ds.sensitive());
    let model = fit_logistic(x, y, &TrainConfig::default())?;
    let scores = predict_scores(&model, x)?;
    let yhat = classify(&scores, model.threshold);

    println!("balanced accuracy {:.4}", balanced_accuracy(y, &yhat, a)?);
    println!("IND {:.4}", independence(&yhat, a)?);
    match separation(y, &yhat, a) {
        Ok(v) => println!("SEP {v:.4}"),
        Err(e) => println!("SEP n/a ({e})"),
    }
    match sufficiency(y, &yhat, a) {
        Ok(v) => println!("SUF {v:.4}"),
        Err(e) => println!("SUF n/a ({e})"),
    }
    println!("CON (k=5) {:.4}", consistency(&scores, x, 5)?);
    println!("LIP (q=0.99) {:.4}", lipschitz(&scores, x, 0.99)?);
    let ent = generalized_entropy(y, &yhat, a)?;
    println!("ENT {:.4} = within {:.4} + between {:.4}", ent.ent, ent.within, ent.between);

    let report = FairnessReport::compute(y, &scores, a, x, &ReportOptions::default())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

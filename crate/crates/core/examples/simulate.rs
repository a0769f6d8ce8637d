//! Draws the synthetic dataset, reports its marginals and writes it to CSV.
//!
//! `cargo run --example simulate -- [n] [p] [seed]`

use fairsheaf::dataset::{generate_simulation, load_csv, Schema, SimulationConfig};

fn main() -> fairsheaf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().map_or(5000, |s| s.parse().expect("n"));
    let p = args.get(1).map_or(0.5, |s| s.parse().expect("p"));
    let seed = args.get(2).map_or(0, |s| s.parse().expect("seed"));

    let ds = generate_simulation(&SimulationConfig::new(n, p, seed)?)?;
    let rate = |v: &[u8]| v.iter().map(|&b| b as f64).sum::<f64>() / v.len() as f64;
    println!("rows {}  features {:?}", ds.n_rows(), ds.feature_names());
    println!("privileged rate {:.3}  positive label rate {:.3}", rate(ds.sensitive()), rate(ds.labels()));

    for g in [0u8, 1] {
        let rows: Vec<usize> = (0..n).filter(|&i| ds.sensitive()[i] == g).collect();
        println!("  group a={g}: {} rows, label rate {:.3}", rows.len(), rate(&ds.labels_at(&rows)));
    }

    let path = std::env::temp_dir().join("fairsheaf-simulation.csv");
    ds.write_csv(&path)?;
    let back = load_csv(&path, &Schema::passthrough())?;
    println!("wrote {} and read back {} rows", path.display(), back.n_rows());
    Ok(())
}

//! Sheaf diffusion on a small graph: energy decay, convergence to the kernel
//! projection and the two integration schemes.

use fairsheaf::diffusion::{diffuse, discrete_trajectory, kernel_projection, DiffusionConfig};
use fairsheaf::sheaf::{build_sheaf_laplacian, dirichlet_energy, normalize, SheafSpec};
use fairsheaf::topology::{Edge, FairGraph};
use nalgebra::DVector;

fn fmt(x: &DVector<f64>) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:7.4}")).collect();
    parts.join(" ")
}

fn main() -> fairsheaf::Result<()> {
    // a path 0-1-2-3-4 with one heavier edge
    let edges = (0..4)
        .map(|u| Edge { u, v: u + 1, weight: if u == 2 { 3.0 } else { 1.0 } })
        .collect();
    let g = FairGraph::new(5, edges, Vec::new())?;
    let l = normalize(&build_sheaf_laplacian(&g, &SheafSpec::Identity { stalk_dim: 1 })?)?;
    let x0 = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0]);

    let limit = kernel_projection(&l, &x0)?;
    println!("kernel projection         {}", fmt(&limit));

    println!("layer  energy      distance to limit");
    for (n, x) in discrete_trajectory(&l, &x0, 0.5, 30)?.iter().enumerate().step_by(5) {
        println!("{n:>5}  {:.3e}  {:.3e}", dirichlet_energy(&l, x)?, (x - &limit).norm());
    }

    let disc = diffuse(&l, &x0, &DiffusionConfig::discrete(0.3, 10)?)?;
    let cont = diffuse(&l, &x0, &DiffusionConfig::continuous(0.3, 10.0)?)?;
    println!("discrete (a=0.3, n=10)    {}", fmt(&disc));
    println!("continuous (a=0.3, t=10)  {}", fmt(&cont));

    // steps larger than 2 / lambda_max amplify the top mode
    let blown = discrete_trajectory(&l, &x0, 1.9, 20)?;
    println!(
        "alpha 1.9: energy {:.3e} -> {:.3e}",
        dirichlet_energy(&l, &blown[0])?,
        dirichlet_energy(&l, blown.last().unwrap())?
    );
    Ok(())
}

//! Builds each fairness topology on the same data and compares their shape
//! and the size of the resulting sheaf Laplacian kernel.

use fairsheaf::dataset::{generate_simulation, SimulationConfig};
use fairsheaf::diffusion::kernel_projector;
use fairsheaf::model::topology_laplacian;
use fairsheaf::sheaf::SheafSpec;
use fairsheaf::topology::{
    build_knn_graph, build_subset_graph, build_unit_ball_graph, quantile_distance, BallWeighting, FairGraph,
    Partition, Topology,
};

fn describe(name: &str, topology: &Topology) -> fairsheaf::Result<()> {
    let l = topology_laplacian(topology, &SheafSpec::Identity { stalk_dim: 1 })?;
    let kernel_dim = kernel_projector(&l, 4096)?.trace().round();
    let edges: usize = topology.parts().iter().map(|(g, _)| g.edges().len()).sum();
    println!("{name:<22} nodes {:>4}  edges {:>6}  kernel dim {kernel_dim}", topology.n_nodes(), edges);
    Ok(())
}

fn stats(g: &FairGraph) -> String {
    let deg = g.degrees();
    let real = &deg[..g.n_real()];
    format!(
        "degree min {} max {}  connected {}",
        real.iter().min().unwrap(),
        real.iter().max().unwrap(),
        g.is_connected()
    )
}

fn main() -> fairsheaf::Result<()> {
    let ds = generate_simulation(&SimulationConfig::new(400, 0.5, 1)?)?;
    let x = ds.features();

    let knn = build_knn_graph(x, 5)?;
    println!("knn(k=5): {}", stats(&knn));

    // radius chosen so that a point has about 50 neighbours on average
    let delta = quantile_distance(x, 50.0 / ds.n_rows() as f64)?;
    let ball = build_unit_ball_graph(x, delta, BallWeighting::Uniform)?;
    println!("ball(delta={delta:.3}): {}", stats(&ball));

    let subset = build_subset_graph(ds.n_rows(), &[Partition::by_sensitive(&ds)?])?;
    println!("subset: {} virtual aggregators, {}", subset.n_virtual(), stats(&subset));

    describe("knn", &Topology::single(knn.clone()))?;
    describe("unit ball", &Topology::single(ball))?;
    describe("subset", &Topology::single(subset.clone()))?;
    // a mixed topology keeps only signals that are constant in both parts
    describe("mixed knn (w=0.5)", &Topology::mixed(subset, knn, 0.5)?)?;
    Ok(())
}

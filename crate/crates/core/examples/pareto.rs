//! Non-dominated filtering on raw objective vectors.

use fairsheaf::experiments::{non_dominated, Direction};

fn main() {
    // (accuracy, independence gap, consistency) for a handful of models
    let points = vec![
        vec![0.80, 0.30, 0.040],
        vec![0.78, 0.10, 0.035],
        vec![0.75, 0.12, 0.036],
        vec![0.79, 0.20, 0.030],
        vec![0.70, 0.05, 0.050],
        vec![0.80, 0.30, 0.041],
    ];
    let two = [Direction::Maximize, Direction::Minimize];
    let three = [Direction::Maximize, Direction::Minimize, Direction::Minimize];

    let front2: Vec<Vec<f64>> = points.iter().map(|p| p[..2].to_vec()).collect();
    println!("acc vs ind front: {:?}", non_dominated(&front2, &two));
    println!("acc vs ind vs con front: {:?}", non_dominated(&points, &three));
}

use serde::{Deserialize, Serialize};

use super::{Metric, RunResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    fn oriented(self, v: f64) -> f64 {
        match self {
            Direction::Maximize => v,
            Direction::Minimize => -v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub id: usize,
    /// Fold means, in the order of the requested objectives.
    pub objectives: Vec<f64>,
}

/// Indices (ascending) of the points no other point dominates.
///
/// `p` dominates `q` when it is at least as good in every objective and
/// strictly better in one. Points are visited in decreasing lexicographic
/// order of their oriented values, so a point can only be dominated by one
/// visited earlier, and it suffices to check against the front so far.
pub fn non_dominated(points: &[Vec<f64>], directions: &[Direction]) -> Vec<usize> {
    let oriented: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(directions).map(|(&v, d)| d.oriented(v)).collect())
        .collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        oriented[b]
            .iter()
            .zip(&oriented[a])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let dominates = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(a, b)| a >= b) && p.iter().zip(q).any(|(a, b)| a > b);
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates(&oriented[f], &oriented[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

/// Non-dominated successful runs under fold-mean objectives. Runs that
/// failed or lack one of the metrics are skipped.
pub fn pareto_front(results: &[RunResult], objectives: &[(Metric, Direction)]) -> Result<Vec<ParetoPoint>> {
    if !(2..=3).contains(&objectives.len()) {
        return Err(Error::Parameter(format!(
            "need 2 or 3 objectives, got {}",
            objectives.len()
        )));
    }
    let candidates: Vec<ParetoPoint> = results
        .iter()
        .filter_map(|r| {
            let objectives = objectives
                .iter()
                .map(|(m, _)| r.fold_mean(*m).filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()?;
            Some(ParetoPoint {
                id: r.config.id,
                objectives,
            })
        })
        .collect();
    let values: Vec<Vec<f64>> = candidates.iter().map(|p| p.objectives.clone()).collect();
    let directions: Vec<Direction> = objectives.iter().map(|(_, d)| *d).collect();
    Ok(non_dominated(&values, &directions)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect())
}

/// `acc - ind - con` on fold means, or `None` when unavailable.
pub fn selection_score(r: &RunResult) -> Option<f64> {
    Some(r.fold_mean(Metric::Acc)? - r.fold_mean(Metric::Ind)? - r.fold_mean(Metric::Con)?)
}

/// Id of the run maximising [`selection_score`]; ties go to the lower id.
pub fn select_best(results: &[RunResult]) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for r in results {
        let Some(score) = selection_score(r) else {
            continue;
        };
        let id = r.config.id;
        let better = match best {
            None => true,
            Some((s, bid)) => score > s || (score == s && id < bid),
        };
        if better {
            best = Some((score, id));
        }
    }
    best.map(|(_, id)| id)
        .ok_or_else(|| Error::Selection("no successful run to select from".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAX_MIN: [Direction; 2] = [Direction::Maximize, Direction::Minimize];

    #[test]
    fn front_examples() {
        let pts = vec![vec![0.8, 0.1], vec![0.9, 0.2], vec![0.7, 0.05]];
        assert_eq!(non_dominated(&pts, &MAX_MIN), vec![0, 1, 2]);
        let mut more = pts.clone();
        more.push(vec![0.75, 0.15]);
        assert_eq!(non_dominated(&more, &MAX_MIN), vec![0, 1, 2]);
        assert_eq!(non_dominated(&[vec![0.5, 0.5]], &MAX_MIN), vec![0]);
        // exact duplicates dominate neither each other
        assert_eq!(non_dominated(&[vec![1.0, 1.0], vec![1.0, 1.0]], &MAX_MIN), vec![0, 1]);
    }
}

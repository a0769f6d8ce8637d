//! Helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use fairsheaf::topology::{Edge, FairGraph};

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Random connected graph: a random spanning tree plus extra edges, with
/// weights in `[0.2, 2]`.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> FairGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = std::collections::BTreeSet::new();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        let (u, v) = (order[i].min(parent), order[i].max(parent));
        pairs.insert((u, v));
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            pairs.insert((u.min(v), u.max(v)));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            weight: rng.random_range(0.2..2.0),
        })
        .collect();
    FairGraph::new(n, edges, Vec::new()).unwrap()
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().map(|v| v.abs()).fold(0.0, f64::max) * a.nrows() as f64;
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled = a / 2f64.powi(s);
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Exact Shapley values of `f(x) = b0 + beta . x` for row `i`, with absent
/// features imputed by the column mean, by enumerating all coalitions.
pub fn brute_force_shapley(b0: f64, beta: &[f64], x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    let d = beta.len();
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let value = |mask: usize| -> f64 {
        b0 + (0..d)
            .map(|k| beta[k] * if mask & (1 << k) != 0 { x[(i, k)] } else { means[k] })
            .sum::<f64>()
    };
    let fact = |m: usize| (1..=m).product::<usize>() as f64;
    (0..d)
        .map(|k| {
            let mut phi = 0.0;
            for mask in 0..(1usize << d) {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let weight = fact(s) * fact(d - s - 1) / fact(d);
                phi += weight * (value(mask | (1 << k)) - value(mask));
            }
            phi
        })
        .collect()
}

/// Indices not dominated by any other point, by checking every pair.
/// `maximize[j]` tells the direction of objective `j`.
pub fn brute_force_front(points: &[Vec<f64>], maximize: &[bool]) -> Vec<usize> {
    let better_eq = |a: f64, b: f64, max: bool| if max { a >= b } else { a <= b };
    let better = |a: f64, b: f64, max: bool| if max { a > b } else { a < b };
    (0..points.len())
        .filter(|&i| {
            !(0..points.len()).any(|j| {
                j != i
                    && (0..maximize.len()).all(|k| better_eq(points[j][k], points[i][k], maximize[k]))
                    && (0..maximize.len()).any(|k| better(points[j][k], points[i][k], maximize[k]))
            })
        })
        .collect()
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

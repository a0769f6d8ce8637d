//! Cellular sheaves on fair graphs: coboundaries, sheaf Laplacians, degree
//! normalisation, weighted combination and Dirichlet energy.
//!
//! Signals are laid out node-major: entry `v * s + i` holds coordinate `i`
//! of the stalk at node `v`. An edge of weight `w` uses restriction maps
//! scaled by `sqrt(w)` at both endpoints, so the identity sheaf reproduces
//! the weighted graph Laplacian exactly.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::topology::FairGraph;

/// Relative eigenvalue threshold below which a direction counts as kernel.
pub const KERNEL_RTOL: f64 = 1e-8;

/// Which restriction maps to place on every node-edge incidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheafSpec {
    /// Node and edge stalks `R^s`, restriction maps proportional to the identity.
    Identity { stalk_dim: usize },
    /// Node stalks `R^d`, edge stalks `R`, restriction map `x -> beta . x`.
    Vector { beta: Vec<f64> },
}

impl SheafSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SheafSpec::Identity { stalk_dim: 0 } => {
                Err(Error::Parameter("identity sheaf needs stalk_dim >= 1".into()))
            }
            SheafSpec::Vector { beta } if beta.is_empty() || beta.iter().all(|&b| b == 0.0) => {
                Err(Error::Parameter("vector sheaf needs a non-zero beta".into()))
            }
            SheafSpec::Vector { beta } if beta.iter().any(|b| !b.is_finite()) => {
                Err(Error::Parameter("vector sheaf beta must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn node_stalk_dim(&self) -> usize {
        match self {
            SheafSpec::Identity { stalk_dim } => *stalk_dim,
            SheafSpec::Vector { beta } => beta.len(),
        }
    }

    pub fn edge_stalk_dim(&self) -> usize {
        match self {
            SheafSpec::Identity { stalk_dim } => *stalk_dim,
            SheafSpec::Vector { .. } => 1,
        }
    }

    /// `F^T F` for a unit-weight restriction map.
    fn gram(&self) -> DMatrix<f64> {
        match self {
            SheafSpec::Identity { stalk_dim } => DMatrix::identity(*stalk_dim, *stalk_dim),
            SheafSpec::Vector { beta } => {
                let b = DVector::from_column_slice(beta);
                &b * b.transpose()
            }
        }
    }
}

/// Coboundary `delta`: node signals to per-edge disagreements
/// `F_v x_v - F_u x_u` for each edge `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coboundary {
    matrix: CsrMatrix,
    node_stalk: usize,
}

impl Coboundary {
    /// Wraps an arbitrary coboundary matrix whose columns are node-major
    /// with `node_stalk` coordinates per node.
    pub fn from_matrix(matrix: CsrMatrix, node_stalk: usize) -> Result<Self> {
        if node_stalk == 0 || !matrix.ncols().is_multiple_of(node_stalk) {
            return Err(Error::Shape(format!(
                "{} columns is not a multiple of stalk dimension {node_stalk}",
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, node_stalk })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn node_stalk(&self) -> usize {
        self.node_stalk
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.ncols() / self.node_stalk
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.matrix.mul_vec(x)
    }
}

pub fn build_coboundary(g: &FairGraph, spec: &SheafSpec) -> Result<Coboundary> {
    spec.validate()?;
    let s = spec.node_stalk_dim();
    let es = spec.edge_stalk_dim();
    let mut triplets = Vec::new();
    for (k, e) in g.edges().iter().enumerate() {
        let w = e.weight.sqrt();
        match spec {
            SheafSpec::Identity { .. } => {
                for i in 0..s {
                    triplets.push((k * es + i, e.u * s + i, -w));
                    triplets.push((k * es + i, e.v * s + i, w));
                }
            }
            SheafSpec::Vector { beta } => {
                for (i, &b) in beta.iter().enumerate() {
                    if b != 0.0 {
                        triplets.push((k, e.u * s + i, -w * b));
                        triplets.push((k, e.v * s + i, w * b));
                    }
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(g.edges().len() * es, g.n_nodes() * s, triplets);
    Coboundary::from_matrix(matrix, s)
}

/// Symmetric positive semi-definite block Laplacian, raw or degree-normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct SheafLaplacian {
    matrix: CsrMatrix,
    stalk_dim: usize,
    normalized: bool,
    /// Diagonal blocks `L_vv` of the raw Laplacian, one per node.
    degree_blocks: Vec<DMatrix<f64>>,
}

impl SheafLaplacian {
    /// `delta^T delta`.
    pub fn from_coboundary(delta: &Coboundary) -> Result<Self> {
        let matrix = delta.matrix.transpose().mul_sparse(&delta.matrix)?;
        Ok(Self::from_raw_matrix(matrix, delta.node_stalk))
    }

    fn from_raw_matrix(matrix: CsrMatrix, stalk_dim: usize) -> Self {
        let n_nodes = matrix.nrows() / stalk_dim;
        let degree_blocks = (0..n_nodes)
            .map(|v| {
                DMatrix::from_fn(stalk_dim, stalk_dim, |i, j| {
                    matrix.get(v * stalk_dim + i, v * stalk_dim + j)
                })
            })
            .collect();
        Self {
            matrix,
            stalk_dim,
            normalized: false,
            degree_blocks,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn stalk_dim(&self) -> usize {
        self.stalk_dim
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.nrows() / self.stalk_dim
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn degree_blocks(&self) -> &[DMatrix<f64>] {
        &self.degree_blocks
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.matrix.mul_vec(x)
    }

    /// Same operator on `n_nodes` nodes; the extra nodes get zero blocks.
    pub fn padded(&self, n_nodes: usize) -> Result<Self> {
        if n_nodes < self.n_nodes() {
            return Err(Error::Shape(format!(
                "cannot pad {} nodes down to {n_nodes}",
                self.n_nodes()
            )));
        }
        let dim = n_nodes * self.stalk_dim;
        let mut degree_blocks = self.degree_blocks.clone();
        degree_blocks.resize(n_nodes, DMatrix::zeros(self.stalk_dim, self.stalk_dim));
        Ok(Self {
            matrix: self.matrix.padded(dim, dim)?,
            stalk_dim: self.stalk_dim,
            normalized: self.normalized,
            degree_blocks,
        })
    }

    /// Writes one `row col value` line per stored entry.
    pub fn write_coo(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for (r, c, v) in self.matrix.triplets() {
            writeln!(out, "{r} {c} {v}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Assembles the block Laplacian directly:
/// `L_uv = -F_u^T F_v` on edges and `L_vv = sum_e F_v^T F_v`.
pub fn build_sheaf_laplacian(g: &FairGraph, spec: &SheafSpec) -> Result<SheafLaplacian> {
    spec.validate()?;
    let s = spec.node_stalk_dim();
    let gram = spec.gram();
    let nz: Vec<(usize, usize, f64)> = (0..s)
        .flat_map(|a| (0..s).map(move |b| (a, b)))
        .filter_map(|(a, b)| {
            let q = gram[(a, b)];
            (q != 0.0).then_some((a, b, q))
        })
        .collect();
    let mut triplets = Vec::with_capacity(g.edges().len() * nz.len() * 4);
    for e in g.edges() {
        for &(a, b, q) in &nz {
            let val = e.weight * q;
            triplets.push((e.u * s + a, e.u * s + b, val));
            triplets.push((e.v * s + a, e.v * s + b, val));
            triplets.push((e.u * s + a, e.v * s + b, -val));
            triplets.push((e.v * s + a, e.u * s + b, -val));
        }
    }
    let dim = g.n_nodes() * s;
    Ok(SheafLaplacian::from_raw_matrix(
        CsrMatrix::from_triplets(dim, dim, triplets),
        s,
    ))
}

/// Moore-Penrose inverse square root of a symmetric PSD block.
fn pinv_sqrt(block: &DMatrix<f64>) -> DMatrix<f64> {
    let n = block.nrows();
    let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || block[(i, j)] == 0.0));
    if is_diagonal {
        return DMatrix::from_fn(n, n, |i, j| {
            let d = block[(i, i)];
            if i == j && d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        });
    }
    let eig = SymmetricEigen::new(block.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let tol = max * n as f64 * f64::EPSILON;
    let inv = eig
        .eigenvalues
        .map(|l| if l > tol { 1.0 / l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// `D^{-1/2} L D^{-1/2}` with `D` the block diagonal of `L`; singular blocks
/// use the pseudoinverse square root, so isolated nodes get zero rows.
pub fn normalize(l: &SheafLaplacian) -> Result<SheafLaplacian> {
    if l.normalized {
        return Err(Error::Parameter("Laplacian is already normalized".into()));
    }
    let s = l.stalk_dim;
    let mut triplets = Vec::new();
    for (v, block) in l.degree_blocks.iter().enumerate() {
        let p = pinv_sqrt(block);
        for i in 0..s {
            for j in 0..s {
                if p[(i, j)] != 0.0 {
                    triplets.push((v * s + i, v * s + j, p[(i, j)]));
                }
            }
        }
    }
    let p = CsrMatrix::from_triplets(l.dim(), l.dim(), triplets);
    let raw = p.mul_sparse(&l.matrix)?.mul_sparse(&p)?;
    let sym = raw.add(&raw.transpose())?.scaled(0.5);
    Ok(SheafLaplacian {
        matrix: sym,
        stalk_dim: s,
        normalized: true,
        degree_blocks: l.degree_blocks.clone(),
    })
}

/// Weighted sum of raw Laplacians, padding smaller ones with zero blocks.
///
/// The kernel of the result is the intersection of the component kernels.
pub fn combine_laplacians(parts: &[(&SheafLaplacian, f64)]) -> Result<SheafLaplacian> {
    let Some((first, _)) = parts.first() else {
        return Err(Error::Parameter("nothing to combine".into()));
    };
    let s = first.stalk_dim;
    let n_nodes = parts.iter().map(|(l, _)| l.n_nodes()).max().unwrap_or(0);
    let mut triplets = Vec::new();
    for (l, w) in parts {
        if l.stalk_dim != s {
            return Err(Error::Shape(format!(
                "stalk dimensions differ ({} vs {s})",
                l.stalk_dim
            )));
        }
        if l.normalized {
            return Err(Error::Parameter("combine raw Laplacians, then normalize".into()));
        }
        if !(*w > 0.0 && w.is_finite()) {
            return Err(Error::Parameter(format!("combination weight must be positive, got {w}")));
        }
        triplets.extend(l.matrix.triplets().map(|(r, c, v)| (r, c, v * w)));
    }
    let dim = n_nodes * s;
    Ok(SheafLaplacian::from_raw_matrix(
        CsrMatrix::from_triplets(dim, dim, triplets),
        s,
    ))
}

/// `x^T L x`.
pub fn dirichlet_energy(l: &SheafLaplacian, x: &DVector<f64>) -> Result<f64> {
    let lx = l.apply(x)?;
    Ok(x.dot(&lx))
}

/// Eigenvalue threshold used to classify kernel directions of `eigenvalues`.
pub(crate) fn kernel_threshold(eigenvalues: &DVector<f64>) -> f64 {
    let lmax = eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    KERNEL_RTOL * lmax
}

//! Fairness-encoding graph topologies over data rows.
//!
//! Local topologies (k-nearest-neighbour and unit-ball graphs) link similar
//! rows. The subset topology appends one virtual aggregator node per group
//! and links the aggregators, so that diffusion equalises group averages.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Undirected weighted edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Weighted undirected graph over `n_real` data nodes followed by
/// `n_virtual` aggregator nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FairGraph {
    n_real: usize,
    edges: Vec<Edge>,
    /// Real members represented by each virtual node, in virtual-id order.
    virtual_meta: Vec<Vec<usize>>,
}

impl FairGraph {
    /// Validates and canonicalises the edge list (endpoints swapped to
    /// `u < v`, sorted). Rejects self-loops, duplicates, non-positive weights
    /// and out-of-range ids.
    pub fn new(n_real: usize, edges: Vec<Edge>, virtual_meta: Vec<Vec<usize>>) -> Result<Self> {
        let n_nodes = n_real + virtual_meta.len();
        let mut canon = Vec::with_capacity(edges.len());
        for e in edges {
            let (u, v) = if e.u < e.v { (e.u, e.v) } else { (e.v, e.u) };
            if u == v {
                return Err(Error::Parameter(format!("self-loop on node {u}")));
            }
            if v >= n_nodes {
                return Err(Error::Parameter(format!("node {v} out of range ({n_nodes} nodes)")));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::Parameter(format!(
                    "edge ({u}, {v}) has invalid weight {}",
                    e.weight
                )));
            }
            canon.push(Edge { u, v, weight: e.weight });
        }
        canon.sort_by_key(|e| (e.u, e.v));
        if let Some(w) = canon.windows(2).find(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::Parameter(format!("duplicate edge ({}, {})", w[0].u, w[0].v)));
        }
        for members in &virtual_meta {
            if let Some(&m) = members.iter().find(|&&m| m >= n_real) {
                return Err(Error::Partition(format!("virtual member {m} is not a real node")));
            }
        }
        Ok(Self {
            n_real,
            edges: canon,
            virtual_meta,
        })
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn n_virtual(&self) -> usize {
        self.virtual_meta.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_real + self.virtual_meta.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn virtual_meta(&self) -> &[Vec<usize>] {
        &self.virtual_meta
    }

    pub fn is_virtual(&self, node: usize) -> bool {
        node >= self.n_real
    }

    /// `(u, v)` pairs without weights.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.u, e.v)).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes()];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    /// Connectivity over all nodes, virtual ones included.
    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Writes `u,v,weight,is_virtual_u,is_virtual_v`.
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["u", "v", "weight", "is_virtual_u", "is_virtual_v"])
            .map_err(|e| Error::csv(path, e))?;
        for e in &self.edges {
            w.write_record([
                e.u.to_string(),
                e.v.to_string(),
                e.weight.to_string(),
                u8::from(self.is_virtual(e.u)).to_string(),
                u8::from(self.is_virtual(e.v)).to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads an edge list written by [`FairGraph::write_edge_list`].
    ///
    /// Virtual nodes are those flagged in the file; their members are
    /// recovered as their real neighbours.
    pub fn read_edge_list(path: impl AsRef<Path>, n_real: usize) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut edges = Vec::new();
        let mut max_virtual: Option<usize> = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let field = |k: usize| -> Result<&str> {
                rec.get(k).ok_or_else(|| Error::Ingestion {
                    row: i + 1,
                    msg: "missing field".into(),
                })
            };
            let parse_usize = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|_| Error::Ingestion {
                    row: i + 1,
                    msg: format!("`{s}` is not a node id"),
                })
            };
            let u = parse_usize(field(0)?)?;
            let v = parse_usize(field(1)?)?;
            let weight: f64 = field(2)?.trim().parse().map_err(|_| Error::Ingestion {
                row: i + 1,
                msg: "bad weight".into(),
            })?;
            for node in [u, v] {
                if node >= n_real {
                    max_virtual = Some(max_virtual.map_or(node, |m| m.max(node)));
                }
            }
            edges.push(Edge { u, v, weight });
        }
        let n_virtual = max_virtual.map_or(0, |m| m + 1 - n_real);
        let mut meta = vec![Vec::new(); n_virtual];
        for e in &edges {
            let (a, b) = (e.u.min(e.v), e.u.max(e.v));
            if a < n_real && b >= n_real {
                meta[b - n_real].push(a);
            }
        }
        meta.iter_mut().for_each(|m| m.sort_unstable());
        FairGraph::new(n_real, edges, meta)
    }
}

/// Disjoint groups of real nodes covering all of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(name: impl Into<String>, groups: Vec<Vec<usize>>) -> Self {
        Self {
            name: name.into(),
            groups,
        }
    }

    /// Two groups by sensitive value: protected (0) first, then privileged (1).
    pub fn by_sensitive(ds: &Dataset) -> Result<Self> {
        let mut groups = vec![Vec::new(), Vec::new()];
        for (i, &a) in ds.sensitive().iter().enumerate() {
            groups[usize::from(a)].push(i);
        }
        let p = Partition::new("sensitive", groups);
        p.validate(ds.n_rows())?;
        Ok(p)
    }

    pub fn validate(&self, n_real: usize) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Partition(format!("partition `{}` has no groups", self.name)));
        }
        let mut seen = vec![false; n_real];
        for (g, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Partition(format!(
                    "partition `{}`: group {g} is empty",
                    self.name
                )));
            }
            for &i in group {
                if i >= n_real || seen[i] {
                    return Err(Error::Partition(format!(
                        "partition `{}`: node {i} out of range or in two groups",
                        self.name
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Partition(format!(
                "partition `{}` does not cover every node",
                self.name
            )));
        }
        Ok(())
    }
}

fn row_major(x: &DMatrix<f64>) -> Vec<f64> {
    x.transpose().as_slice().to_vec()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// The `k` nearest other rows of each row by Euclidean distance, ties broken
/// by lower row index. Shared by the kNN topology and the consistency metric.
pub fn knn_indices(x: &DMatrix<f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("k must satisfy 1 <= k < n = {n}, got {k}")));
    }
    let d = x.ncols();
    let rows = row_major(x);
    let neighbours = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &rows[i * d..(i + 1) * d];
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(xi, &rows[j * d..(j + 1) * d]), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(cmp);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    Ok(neighbours)
}

/// Symmetrised kNN graph: `(u, v)` is an edge when either endpoint is among
/// the other's `k` nearest rows. All weights are 1.
pub fn build_knn_graph(x: &DMatrix<f64>, k: usize) -> Result<FairGraph> {
    let nn = knn_indices(x, k)?;
    let mut pairs: Vec<(usize, usize)> = nn
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i.min(j), i.max(j))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge { u, v, weight: 1.0 })
        .collect();
    FairGraph::new(x.nrows(), edges, Vec::new())
}

/// Edge weighting for the unit-ball graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallWeighting {
    #[default]
    Uniform,
    /// Weight `1 / distance` (floored at `1e-9`).
    InverseDistance,
}

/// Links every pair of rows strictly closer than `delta`. May be empty.
pub fn build_unit_ball_graph(
    x: &DMatrix<f64>,
    delta: f64,
    weighting: BallWeighting,
) -> Result<FairGraph> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    let n = x.nrows();
    let d = x.ncols();
    let rows = row_major(x);
    let edges: Vec<Edge> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let xu = rows[u * d..(u + 1) * d].to_vec();
            let rows = &rows;
            (u + 1..n).filter_map(move |v| {
                let dist = sq_dist(&xu, &rows[v * d..(v + 1) * d]).sqrt();
                (dist < delta).then(|| Edge {
                    u,
                    v,
                    weight: match weighting {
                        BallWeighting::Uniform => 1.0,
                        BallWeighting::InverseDistance => 1.0 / dist.max(1e-9),
                    },
                })
            })
        })
        .collect();
    FairGraph::new(n, edges, Vec::new())
}

/// Nearest-rank quantile of all `n(n-1)/2` pairwise Euclidean distances.
///
/// The rank is `round(q * m)` clamped to `[1, m]` over the `m` sorted distances.
pub fn quantile_distance(x: &DMatrix<f64>, q: f64) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 rows, got {n}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Parameter(format!("quantile must lie in (0, 1], got {q}")));
    }
    let d = x.ncols();
    let rows = row_major(x);
    let mut dists: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let rows = &rows;
            (u + 1..n).map(move |v| sq_dist(&rows[u * d..(u + 1) * d], &rows[v * d..(v + 1) * d]).sqrt())
        })
        .collect();
    if dists.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateDistance("all rows are identical".into()));
    }
    let pos = nearest_rank(q, dists.len()) - 1;
    let (_, kth, _) = dists.select_nth_unstable_by(pos, f64::total_cmp);
    Ok(*kth)
}

/// 1-based nearest rank `round(q * m)` clamped to `[1, m]`.
pub(crate) fn nearest_rank(q: f64, m: usize) -> usize {
    ((q * m as f64).round() as usize).clamp(1, m)
}

/// Weight of the edge joining a member of subset `D` to its representative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberWeight {
    /// `1 / sqrt(|D|)`.
    #[default]
    InverseSqrtSize,
    /// `1 / |D|`, i.e. restriction maps scaled by `1 / sqrt(|D|)`. With this
    /// weighting the representative's energy term is the squared gap to
    /// the subset average, which makes the aggregators mix quickly.
    InverseSize,
}

impl MemberWeight {
    pub fn weight(self, size: usize) -> f64 {
        match self {
            MemberWeight::InverseSqrtSize => 1.0 / (size as f64).sqrt(),
            MemberWeight::InverseSize => 1.0 / size as f64,
        }
    }
}

/// Subset topology over arbitrary subsets of real nodes.
///
/// Adds one virtual node per subset (ids `n_real..`), links each member to its
/// representative with weight `1 / sqrt(|subset|)`, and links representatives
/// `(i, j)` listed in `relations` with weight 1.
pub fn build_relation_graph(
    n_real: usize,
    subsets: &[Vec<usize>],
    relations: &[(usize, usize)],
) -> Result<FairGraph> {
    build_relation_graph_with(n_real, subsets, relations, MemberWeight::default())
}

/// [`build_relation_graph`] with a chosen member weighting.
pub fn build_relation_graph_with(
    n_real: usize,
    subsets: &[Vec<usize>],
    relations: &[(usize, usize)],
    member_weight: MemberWeight,
) -> Result<FairGraph> {
    let mut edges = Vec::new();
    for (j, members) in subsets.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Partition(format!("subset {j} is empty")));
        }
        let w = member_weight.weight(members.len());
        let rep = n_real + j;
        edges.extend(members.iter().map(|&m| Edge { u: m, v: rep, weight: w }));
    }
    for &(i, j) in relations {
        if i >= subsets.len() || j >= subsets.len() {
            return Err(Error::Partition(format!("relation ({i}, {j}) names a missing subset")));
        }
        edges.push(Edge {
            u: n_real + i,
            v: n_real + j,
            weight: 1.0,
        });
    }
    FairGraph::new(n_real, edges, subsets.to_vec())
}

/// Partition topology: one aggregator per group, aggregators of the same
/// partition fully connected, different partitions not connected. A
/// single-group partition yields a star.
pub fn build_subset_graph(n_real: usize, partitions: &[Partition]) -> Result<FairGraph> {
    build_subset_graph_with(n_real, partitions, MemberWeight::default())
}

/// [`build_subset_graph`] with a chosen member weighting.
pub fn build_subset_graph_with(
    n_real: usize,
    partitions: &[Partition],
    member_weight: MemberWeight,
) -> Result<FairGraph> {
    if partitions.is_empty() {
        return Err(Error::Partition("no partitions given".into()));
    }
    let mut subsets = Vec::new();
    let mut relations = Vec::new();
    for p in partitions {
        p.validate(n_real)?;
        let base = subsets.len();
        for i in 0..p.groups.len() {
            for j in i + 1..p.groups.len() {
                relations.push((base + i, base + j));
            }
        }
        subsets.extend(p.groups.iter().cloned());
    }
    build_relation_graph_with(n_real, &subsets, &relations, member_weight)
}

/// Positive-weighted collection of graphs over a shared node indexing.
///
/// Graphs may have fewer nodes than the largest one; the missing (trailing)
/// nodes are padded. At most one part may carry virtual nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    parts: Vec<(FairGraph, f64)>,
}

impl Topology {
    pub fn single(graph: FairGraph) -> Self {
        Self {
            parts: vec![(graph, 1.0)],
        }
    }

    pub fn new(parts: Vec<(FairGraph, f64)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Parameter("a topology needs at least one graph".into()));
        }
        let n_real = parts[0].0.n_real();
        for (g, w) in &parts {
            if !(*w > 0.0 && w.is_finite()) {
                return Err(Error::Parameter(format!("combination weight must be positive, got {w}")));
            }
            if g.n_real() != n_real {
                return Err(Error::Shape(format!(
                    "graphs disagree on real node count ({} vs {n_real})",
                    g.n_real()
                )));
            }
        }
        if parts.iter().filter(|(g, _)| g.n_virtual() > 0).count() > 1 {
            return Err(Error::Parameter(
                "only one combined graph may carry virtual nodes; put all partitions in one subset graph".into(),
            ));
        }
        Ok(Self { parts })
    }

    /// Convex mix `w_subset * subset + (1 - w_subset) * local`.
    pub fn mixed(subset: FairGraph, local: FairGraph, w_subset: f64) -> Result<Self> {
        if !(w_subset > 0.0 && w_subset < 1.0) {
            return Err(Error::Parameter(format!("w_subset must lie in (0, 1), got {w_subset}")));
        }
        Self::new(vec![(subset, w_subset), (local, 1.0 - w_subset)])
    }

    pub fn parts(&self) -> &[(FairGraph, f64)] {
        &self.parts
    }

    pub fn n_real(&self) -> usize {
        self.parts[0].0.n_real()
    }

    pub fn n_nodes(&self) -> usize {
        self.parts.iter().map(|(g, _)| g.n_nodes()).max().unwrap_or(0)
    }

    /// Members of each virtual node, in virtual-id order.
    pub fn virtual_meta(&self) -> &[Vec<usize>] {
        self.parts
            .iter()
            .map(|(g, _)| g.virtual_meta())
            .find(|m| !m.is_empty())
            .unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn member_weight_sets_edge_weights() {
        let subsets = vec![vec![0, 1, 2, 3], vec![4]];
        for (mw, expect) in [(MemberWeight::InverseSqrtSize, 0.5), (MemberWeight::InverseSize, 0.25)] {
            let g = build_relation_graph_with(5, &subsets, &[(0, 1)], mw).unwrap();
            let to_rep: Vec<f64> = g.edges().iter().filter(|e| e.v == 5).map(|e| e.weight).collect();
            assert_eq!(to_rep, vec![expect; 4]);
            let single = g.edges().iter().find(|e| e.u == 4).unwrap();
            assert_eq!(single.weight, 1.0);
            assert!(g.edges().iter().any(|e| (e.u, e.v, e.weight) == (5, 6, 1.0)));
        }
    }

    #[test]
    fn knn_small_cases() {
        let g = build_knn_graph(&col(&[0.0, 1.0, 10.0]), 1).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (1, 2)]);
        let g = build_knn_graph(&col(&[3.0, 4.0]), 1).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1)]);
        // node 2 is equidistant to 0 and 1; the lower index wins
        let g = build_knn_graph(&col(&[0.0, 0.0, 5.0]), 1).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (0, 2)]);
        assert!(matches!(build_knn_graph(&col(&[0.0, 1.0]), 2), Err(Error::Parameter(_))));
    }

    #[test]
    fn unit_ball_cases() {
        let x = col(&[0.0, 1.0, 10.0]);
        let g = build_unit_ball_graph(&x, 2.0, BallWeighting::Uniform).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1)]);
        let g = build_unit_ball_graph(&x, 0.5, BallWeighting::Uniform).unwrap();
        assert!(g.edges().is_empty());
        let g = build_unit_ball_graph(&x, 11.0, BallWeighting::Uniform).unwrap();
        assert_eq!(g.edges().len(), 3);
        // strict inequality
        let g = build_unit_ball_graph(&x, 1.0, BallWeighting::Uniform).unwrap();
        assert!(g.edges().is_empty());
        let g = build_unit_ball_graph(&x, 2.0, BallWeighting::InverseDistance).unwrap();
        assert_eq!(g.edges()[0].weight, 1.0);
        assert!(build_unit_ball_graph(&x, 0.0, BallWeighting::Uniform).is_err());
    }

    #[test]
    fn quantiles() {
        let x = col(&[0.0, 1.0, 10.0]);
        assert_eq!(quantile_distance(&x, 1.0).unwrap(), 10.0);
        assert_eq!(quantile_distance(&x, 0.34).unwrap(), 1.0);
        let two = col(&[1.0, 4.0]);
        for q in [0.01, 0.5, 1.0] {
            assert_eq!(quantile_distance(&two, q).unwrap(), 3.0);
        }
        assert!(matches!(
            quantile_distance(&col(&[2.0, 2.0, 2.0]), 0.5),
            Err(Error::DegenerateDistance(_))
        ));
    }

    #[test]
    fn subset_two_groups() {
        let p = Partition::new("p", vec![vec![0, 1], vec![2]]);
        let g = build_subset_graph(3, &[p]).unwrap();
        assert_eq!(g.n_virtual(), 2);
        let s = 1.0 / 2f64.sqrt();
        let expect = [(0, 3, s), (1, 3, s), (2, 4, 1.0), (3, 4, 1.0)];
        assert_eq!(g.edges().len(), expect.len());
        for (e, (u, v, w)) in g.edges().iter().zip(expect) {
            assert_eq!((e.u, e.v), (u, v));
            assert!((e.weight - w).abs() < 1e-15);
        }
        assert_eq!(g.virtual_meta(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn subset_star() {
        let p = Partition::new("all", vec![vec![0, 1, 2]]);
        let g = build_subset_graph(3, &[p]).unwrap();
        assert_eq!(g.n_virtual(), 1);
        assert_eq!(g.edge_pairs(), vec![(0, 3), (1, 3), (2, 3)]);
        for e in g.edges() {
            assert!((e.weight - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_independent_partitions() {
        let p1 = Partition::new("shape", vec![vec![0, 1], vec![2, 3]]);
        let p2 = Partition::new("colour", vec![vec![0, 2], vec![1, 3]]);
        let g = build_subset_graph(4, &[p1, p2]).unwrap();
        assert_eq!(g.n_virtual(), 4);
        let deg = g.degrees();
        for node in 0..4 {
            assert_eq!(deg[node], 2);
        }
        // reps 4-5 linked, 6-7 linked, nothing across partitions
        assert!(g.edge_pairs().contains(&(4, 5)));
        assert!(g.edge_pairs().contains(&(6, 7)));
        assert!(!g.edge_pairs().contains(&(4, 6)));
    }

    #[test]
    fn partition_errors() {
        let p = Partition::new("p", vec![vec![0, 1], vec![]]);
        assert!(matches!(build_subset_graph(2, &[p]), Err(Error::Partition(_))));
        let p = Partition::new("p", vec![vec![0], vec![0, 1]]);
        assert!(p.validate(2).is_err());
        let p = Partition::new("p", vec![vec![0]]);
        assert!(p.validate(2).is_err());
    }

    #[test]
    fn graph_rejects_bad_edges() {
        let e = |u, v, weight| Edge { u, v, weight };
        assert!(FairGraph::new(2, vec![e(0, 0, 1.0)], vec![]).is_err());
        assert!(FairGraph::new(2, vec![e(0, 1, 0.0)], vec![]).is_err());
        assert!(FairGraph::new(2, vec![e(0, 2, 1.0)], vec![]).is_err());
        assert!(FairGraph::new(2, vec![e(0, 1, 1.0), e(1, 0, 2.0)], vec![]).is_err());
        let g = FairGraph::new(2, vec![e(1, 0, 2.0)], vec![]).unwrap();
        assert_eq!((g.edges()[0].u, g.edges()[0].v), (0, 1));
    }

    #[test]
    fn edge_list_round_trip() {
        let p = Partition::new("p", vec![vec![0, 2], vec![1, 3]]);
        let g = build_subset_graph(4, &[p]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        g.write_edge_list(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("u,v,weight,is_virtual_u,is_virtual_v\n"));
        let back = FairGraph::read_edge_list(&path, 4).unwrap();
        assert_eq!(back, g);
    }
}

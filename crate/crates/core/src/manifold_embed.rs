//! k-NN graphs, geodesic distances, ISOMAP, LLE and neighborhood sweeps.
//!
//! Graphs are built from directed k-nearest-neighbor lists (ties broken by
//! the smaller index) and symmetrized by union. A disconnected graph is an
//! error for a single ISOMAP call and a marked cell in a sweep.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Order};
use crate::linear_embed::{cmds, DistanceMatrix, Embedding, Method, Metric};
use crate::{Error, Result};

pub const DEFAULT_LLE_REG: f64 = 1e-3;

/// Symmetrized k-NN graph with Euclidean edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodGraph {
    pub n_nodes: usize,
    pub k: usize,
    /// Neighbors of each node, sorted by index.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Component id per node; ids are assigned in order of each component's
    /// smallest node.
    pub components: Vec<usize>,
    pub component_count: usize,
}

impl NeighborhoodGraph {
    pub fn is_connected(&self) -> bool {
        self.component_count == 1
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, nbrs)| {
            nbrs.iter()
                .filter(move |(j, _)| *j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.component_count];
        for &c in &self.components {
            sizes[c] += 1;
        }
        sizes
    }

    fn from_directed(k: usize, directed: &[Vec<(usize, f64)>]) -> Self {
        let n = directed.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, nbrs) in directed.iter().enumerate() {
            for &(j, w) in nbrs {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
        for list in adjacency.iter_mut() {
            list.sort_by(|a, b| a.0.cmp(&b.0));
            list.dedup_by(|a, b| a.0 == b.0);
        }
        let (components, component_count) = label_components(&adjacency);
        NeighborhoodGraph {
            n_nodes: n,
            k,
            adjacency,
            components,
            component_count,
        }
    }

    fn disconnection_error(&self) -> Error {
        Error::Disconnected {
            k: self.k,
            component_count: self.component_count,
            sizes: self.component_sizes(),
        }
    }
}

fn label_components(adjacency: &[Vec<(usize, f64)>]) -> (Vec<usize>, usize) {
    let n = adjacency.len();
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &(v, _) in &adjacency[u] {
                if label[v] == usize::MAX {
                    label[v] = count;
                    stack.push(v);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "neighborhood size {k} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

/// The `k` nearest other points of every node, nearest first, ties by index.
pub fn directed_knn(dm: &DistanceMatrix, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = dm.len();
    check_k(k, n)?;
    let d = dm.values();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(usize, f64)> =
                (0..n).filter(|&j| j != i).map(|j| (j, d[[i, j]])).collect();
            let by = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by);
                cand.truncate(k);
            }
            cand.sort_by(by);
            cand
        })
        .collect())
}

pub fn knn_graph_from_distances(dm: &DistanceMatrix, k: usize) -> Result<NeighborhoodGraph> {
    Ok(NeighborhoodGraph::from_directed(k, &directed_knn(dm, k)?))
}

pub fn knn_graph(x: ArrayView2<f64>, k: usize) -> Result<NeighborhoodGraph> {
    check_k(k, x.nrows())?;
    knn_graph_from_distances(&DistanceMatrix::euclidean(x), k)
}

#[derive(Copy, Clone, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, then node index.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adjacency: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        node: source,
    });
    while let Some(Frontier { dist: du, node: u }) = heap.pop() {
        if du > dist[u] {
            continue;
        }
        for &(v, w) in &adjacency[u] {
            let alt = du + w;
            if alt < dist[v] {
                dist[v] = alt;
                heap.push(Frontier { dist: alt, node: v });
            }
        }
    }
    dist
}

/// All-pairs shortest paths over the graph by one Dijkstra search per
/// source. The result is symmetrized as `min(d_ij, d_ji)`, which only
/// differs from either side by rounding.
pub fn geodesic_distances(g: &NeighborhoodGraph) -> Result<DistanceMatrix> {
    if !g.is_connected() {
        return Err(g.disconnection_error());
    }
    let n = g.n_nodes;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| dijkstra(&g.adjacency, s))
        .collect();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = rows[i][j].min(rows[j][i]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    Ok(DistanceMatrix::from_trusted(m, Metric::Geodesic))
}

pub fn isomap_from_distances(dm: &DistanceMatrix, k: usize, d: usize) -> Result<Embedding> {
    let g = knn_graph_from_distances(dm, k)?;
    let geo = geodesic_distances(&g)?;
    let mut e = cmds(&geo, d)?;
    e.method = Method::Isomap;
    e.k = Some(k);
    Ok(e)
}

/// cMDS on geodesic distances over the k-NN graph. The residual-variance
/// curve is measured against those geodesic distances.
pub fn isomap(x: ArrayView2<f64>, k: usize, d: usize) -> Result<Embedding> {
    check_k(k, x.nrows())?;
    isomap_from_distances(&DistanceMatrix::euclidean(x), k, d)
}

/// Sparse LLE reconstruction weights: row `i` has entries only on the `k`
/// nearest neighbors of `i` and sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionWeights {
    pub k: usize,
    pub reg_scale: f64,
    pub neighbors: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl ReconstructionWeights {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut w = Array2::zeros((n, n));
        for (i, (nb, ws)) in self.neighbors.iter().zip(&self.weights).enumerate() {
            for (&j, &v) in nb.iter().zip(ws) {
                w[[i, j]] = v;
            }
        }
        w
    }

    /// `(I - W)^T (I - W)`, dense.
    pub fn cost_matrix(&self) -> Array2<f64> {
        let n = self.n();
        let mut m = Array2::eye(n);
        for (i, (nb, ws)) in self.neighbors.iter().zip(&self.weights).enumerate() {
            for (&j, &w) in nb.iter().zip(ws) {
                m[[i, j]] -= w;
                m[[j, i]] -= w;
            }
            for (&j, &wj) in nb.iter().zip(ws) {
                for (&l, &wl) in nb.iter().zip(ws) {
                    m[[j, l]] += wj * wl;
                }
            }
        }
        m
    }
}

fn local_weights(x: ArrayView2<f64>, i: usize, nbrs: &[usize], reg_scale: f64) -> Result<Vec<f64>> {
    let k = nbrs.len();
    let xi = x.row(i);
    let z = Array2::from_shape_fn((k, x.ncols()), |(a, c)| x[[nbrs[a], c]] - xi[c]);
    let mut gram = z.dot(&z.t());
    let trace: f64 = gram.diag().sum();
    if !(trace > 0.0) {
        // All neighbors coincide with the point: any convex combination
        // reconstructs it exactly.
        return Ok(vec![1.0 / k as f64; k]);
    }
    let eps = reg_scale * trace / k as f64;
    for a in 0..k {
        gram[[a, a]] += eps;
    }
    let w = linalg::solve_spd(gram.view(), &vec![1.0; k])?;
    let s: f64 = w.iter().sum();
    if !s.is_finite() || s == 0.0 {
        return Err(Error::Degenerate(format!(
            "reconstruction weights for point {i} do not normalize"
        )));
    }
    Ok(w.into_iter().map(|v| v / s).collect())
}

pub fn lle_weights_from_distances(
    x: ArrayView2<f64>,
    dm: &DistanceMatrix,
    k: usize,
    reg_scale: f64,
) -> Result<ReconstructionWeights> {
    if !(reg_scale >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularization scale must be non-negative, got {reg_scale}"
        )));
    }
    let directed = directed_knn(dm, k)?;
    let neighbors: Vec<Vec<usize>> = directed
        .iter()
        .map(|l| l.iter().map(|&(j, _)| j).collect())
        .collect();
    let weights = neighbors
        .par_iter()
        .enumerate()
        .map(|(i, nb)| local_weights(x, i, nb, reg_scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReconstructionWeights {
        k,
        reg_scale,
        neighbors,
        weights,
    })
}

/// Solve for the weights that best reconstruct each point from its `k`
/// nearest neighbors, with the local Gram matrix regularized by
/// `reg_scale * trace / k` on its diagonal.
pub fn lle_weights(x: ArrayView2<f64>, k: usize, reg_scale: f64) -> Result<ReconstructionWeights> {
    check_k(k, x.nrows())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lle input"));
    }
    lle_weights_from_distances(x, &DistanceMatrix::euclidean(x), k, reg_scale)
}

/// Embed from precomputed reconstruction weights: the eigenvectors of
/// `(I-W)^T (I-W)` after the bottom (constant) one, scaled by `sqrt(N)`.
pub fn lle_from_weights(w: &ReconstructionWeights, d: usize) -> Result<Embedding> {
    let n = w.n();
    if d == 0 || d + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "lle target dimension {d} outside 1..={}",
            n.saturating_sub(2)
        )));
    }
    let m = w.cost_matrix();
    let eig = linalg::sym_eigen(m.view(), Order::Ascending)?;
    let largest = eig.values[n - 1].abs().max(f64::MIN_POSITIVE);
    let null = eig
        .values
        .iter()
        .filter(|v| v.abs() <= 1e-8 * largest)
        .count();
    if null > 1 {
        log::warn!("lle: {null} near-zero eigenvalues; the neighborhood graph may be disconnected");
    }
    // The kept eigenvectors are orthogonal to the constant one in exact
    // arithmetic; with eigenvalues near zero the solver leaks some of it
    // back in, so remove it and re-orthonormalize (modified Gram-Schmidt).
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = eig.vectors.column(j + 1).to_owned();
        let mean = v.sum() / n as f64;
        v.mapv_inplace(|a| a - mean);
        for b in &basis {
            let p = v.dot(b);
            v.scaled_add(-p, b);
        }
        let norm = v.dot(&v).sqrt();
        if !(norm > 1e-6) {
            return Err(Error::Degenerate(format!(
                "lle eigenvector {} is indistinguishable from the constant one",
                j + 1
            )));
        }
        basis.push(v / norm);
    }
    let scale = (n as f64).sqrt();
    let mut coords = Array2::zeros((n, d));
    for (j, b) in basis.iter().enumerate() {
        coords.column_mut(j).assign(&b.mapv(|v| v * scale));
    }
    linalg::fix_column_signs(&mut coords);
    Ok(Embedding {
        method: Method::Lle,
        k: Some(w.k),
        coords,
        eigenvalues: eig.values.iter().take(d + 1).copied().collect(),
        explained_variance: None,
        residual_variance: None,
        negative_eigenvalues: 0,
    })
}

pub fn lle_from_distances(
    x: ArrayView2<f64>,
    dm: &DistanceMatrix,
    k: usize,
    d: usize,
    reg_scale: f64,
) -> Result<Embedding> {
    let w = lle_weights_from_distances(x, dm, k, reg_scale)?;
    let g = knn_graph_from_distances(dm, k)?;
    if !g.is_connected() {
        log::warn!(
            "lle: k={k} neighborhood graph has {} components",
            g.component_count
        );
    }
    lle_from_weights(&w, d)
}

pub fn lle(x: ArrayView2<f64>, k: usize, d: usize) -> Result<Embedding> {
    check_k(k, x.nrows())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lle input"));
    }
    lle_from_distances(x, &DistanceMatrix::euclidean(x), k, d, DEFAULT_LLE_REG)
}

/// Result of embedding once at one neighborhood size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGroup {
    pub method: Method,
    pub k: usize,
    pub connected: bool,
    pub component_count: usize,
    /// Embedding at the largest feasible requested dimension; cells at
    /// smaller `d` are its leading columns.
    pub embedding: Option<Embedding>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: Method,
    pub k: usize,
    pub d: usize,
    pub connected: bool,
    pub component_count: usize,
    /// ISOMAP only: residual variance against this k's geodesics.
    pub residual_variance: Option<f64>,
    /// Leading eigenvalues of the spectrum the embedding was drawn from.
    pub eigenvalues: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub groups: Vec<SweepGroup>,
    pub cells: Vec<SweepCell>,
}

impl Sweep {
    pub fn embedding(&self, k: usize, d: usize) -> Option<Embedding> {
        self.groups
            .iter()
            .find(|g| g.k == k)?
            .embedding
            .as_ref()?
            .truncated(d)
            .ok()
    }
}

/// Embed with every `k` in `k_values` and report one cell per `(k, d)`.
/// Disconnected graphs, out-of-range parameters and solver failures are
/// recorded on their cells; the sweep itself never fails.
pub fn neighborhood_sweep(
    x: ArrayView2<f64>,
    dm: &DistanceMatrix,
    k_values: &[usize],
    d_values: &[usize],
    method: Method,
    lle_reg: f64,
) -> Sweep {
    let n = x.nrows();
    let max_d_allowed = match method {
        Method::Lle => n.saturating_sub(2),
        _ => n.saturating_sub(1),
    };
    let target_d = d_values
        .iter()
        .copied()
        .filter(|&d| d >= 1 && d <= max_d_allowed)
        .max();

    let groups: Vec<SweepGroup> = k_values
        .par_iter()
        .map(|&k| {
            let graph = knn_graph_from_distances(dm, k);
            let (connected, component_count) = match &graph {
                Ok(g) => (g.is_connected(), g.component_count),
                Err(_) => (false, 0),
            };
            let result = match (graph, target_d) {
                (Err(e), _) => Err(e),
                (Ok(_), None) => Err(Error::InvalidArgument(format!(
                    "no requested dimension is within 1..={max_d_allowed}"
                ))),
                (Ok(g), Some(d)) => match method {
                    Method::Isomap => geodesic_distances(&g).and_then(|geo| {
                        let mut e = cmds(&geo, d)?;
                        e.method = Method::Isomap;
                        e.k = Some(k);
                        Ok(e)
                    }),
                    Method::Lle => lle_weights_from_distances(x, dm, k, lle_reg)
                        .and_then(|w| lle_from_weights(&w, d)),
                    _ => Err(Error::InvalidArgument(format!(
                        "{method} has no neighborhood parameter"
                    ))),
                },
            };
            let (embedding, error) = match result {
                Ok(e) => (Some(e), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepGroup {
                method,
                k,
                connected,
                component_count,
                embedding,
                error,
            }
        })
        .collect();

    let mut cells = Vec::with_capacity(groups.len() * d_values.len());
    for g in &groups {
        for &d in d_values {
            let mut cell = SweepCell {
                method,
                k: g.k,
                d,
                connected: g.connected,
                component_count: g.component_count,
                residual_variance: None,
                eigenvalues: Vec::new(),
                error: g.error.clone(),
            };
            if let Some(e) = &g.embedding {
                if d == 0 || d > e.dims() {
                    cell.error = Some(format!("dimension {d} outside 1..={}", e.dims()));
                } else {
                    cell.residual_variance = e
                        .residual_variance
                        .as_ref()
                        .and_then(|r| r.get(d - 1).copied());
                    cell.eigenvalues = e.eigenvalues.iter().take(d + 1).copied().collect();
                }
            }
            cells.push(cell);
        }
    }
    Sweep { groups, cells }
}

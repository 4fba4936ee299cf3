//! k-means (careful seeding, Lloyd iterations, best of several restarts)
//! and the Davies-Bouldin index.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::squared_distance;
use crate::linear_embed::{Embedding, Method};
use crate::{seed, Error, Result};

pub const DEFAULT_CLUSTERS: usize = 10;
pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub n_clusters: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        KMeansConfig {
            n_clusters,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_clusters: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Mean Euclidean distance of each cluster's members to its centroid.
    pub within_scatter: Vec<f64>,
    /// Total within-cluster squared distance of the chosen restart.
    pub inertia: f64,
    /// Objective after every iteration of the chosen restart.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub dbi: Option<f64>,
    pub seed: u64,
    pub restarts: usize,
}

type Rows = Vec<Vec<f64>>;

fn rows_of(x: ArrayView2<f64>) -> Rows {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cent) in centroids.iter().enumerate() {
        let d = squared_distance(p, cent);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Nearest centroid, keeping the current cluster on exact ties so that
/// repaired assignments of coincident points are stable.
fn reassign(p: &[f64], centroids: &[Vec<f64>], current: usize) -> usize {
    let (best, d) = nearest(p, centroids);
    if squared_distance(p, &centroids[current]) <= d {
        current
    } else {
        best
    }
}

/// Careful seeding: first centre uniform, each further centre drawn with
/// probability proportional to its squared distance from the nearest
/// centre chosen so far.
fn seed_centroids<R: Rng>(points: &Rows, k: usize, rng: &mut R) -> Rows {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn update_centroids(points: &Rows, assign: &[usize], k: usize, dim: usize) -> (Rows, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    (sums, counts)
}

/// Refill empty clusters: move the member of the largest cluster that lies
/// farthest from its centroid into the empty one.
fn repair_empty(points: &Rows, assign: &mut [usize], k: usize, dim: usize) -> Rows {
    loop {
        let (centroids, counts) = update_centroids(points, assign, k, dim);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return centroids;
        };
        let largest = (0..k)
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        let mut far = (usize::MAX, -1.0);
        for (i, p) in points.iter().enumerate() {
            if assign[i] == largest {
                let d = squared_distance(p, &centroids[largest]);
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        assign[far.0] = empty;
    }
}

fn objective(points: &Rows, assign: &[usize], centroids: &Rows) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum()
}

struct Run {
    assign: Vec<usize>,
    centroids: Rows,
    inertia: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn lloyd<R: Rng>(points: &Rows, k: usize, max_iter: usize, rng: &mut R) -> Run {
    let dim = points[0].len();
    let init = seed_centroids(points, k, rng);
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &init).0).collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut centroids = init;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        centroids = repair_empty(points, &mut assign, k, dim);
        let obj = objective(points, &assign, &centroids);
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            assert!(
                obj <= prev + 1e-9 * prev.abs().max(1.0),
                "k-means objective increased from {prev} to {obj}"
            );
        }
        trace.push(obj);
        let next: Vec<usize> = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| reassign(p, &centroids, a))
            .collect();
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
    }
    let inertia = *trace
        .last()
        .unwrap_or(&objective(points, &assign, &centroids));
    Run {
        assign,
        centroids,
        inertia,
        trace,
        iterations,
        converged,
    }
}

/// Best-of-restarts k-means. Restart `r` draws from its own generator
/// derived from `cfg.seed`, and the lowest-inertia restart wins (lowest
/// index on ties), so the report does not depend on thread scheduling.
pub fn kmeans(x: ArrayView2<f64>, cfg: &KMeansConfig) -> Result<ClusterReport> {
    let n = x.nrows();
    let k = cfg.n_clusters;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let points = rows_of(x);
    let restarts = cfg.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::derived_rng(cfg.seed, "kmeans-restart", r as u64);
            lloyd(&points, k, cfg.max_iter.max(1), &mut rng)
        })
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.inertia.total_cmp(&b.inertia).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one restart");

    let within_scatter = mean_scatter(&points, &best.assign, &best.centroids);
    Ok(ClusterReport {
        n_clusters: k,
        assignments: best.assign,
        centroids: best.centroids,
        within_scatter,
        inertia: best.inertia,
        objective_trace: best.trace,
        iterations: best.iterations,
        converged: best.converged,
        dbi: None,
        seed: cfg.seed,
        restarts,
    })
}

fn mean_scatter(points: &Rows, assign: &[usize], centroids: &Rows) -> Vec<f64> {
    let mut sums = vec![0.0; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assign) {
        sums[a] += squared_distance(p, &centroids[a]).sqrt();
        counts[a] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect()
}

/// Davies-Bouldin index with mean-distance scatter and Euclidean centroid
/// separation: the mean over clusters of `max_j (S_i + S_j) / M_ij`.
/// Cluster labels with no members are ignored.
pub fn davies_bouldin(x: ArrayView2<f64>, assignments: &[usize]) -> Result<f64> {
    let n = x.nrows();
    if assignments.len() != n {
        return Err(Error::Shape(format!(
            "{} assignments for {n} points",
            assignments.len()
        )));
    }
    let points = rows_of(x);
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let dim = x.ncols();
    let (centroids, counts) = update_centroids(&points, assignments, k, dim);
    let scatter = mean_scatter(&points, assignments, &centroids);
    let live: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    if live.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "Davies-Bouldin needs at least 2 non-empty clusters, got {}",
            live.len()
        )));
    }
    let mut total = 0.0;
    for &i in &live {
        let mut worst = 0.0_f64;
        for &j in &live {
            if i == j {
                continue;
            }
            let m = squared_distance(&centroids[i], &centroids[j]).sqrt();
            if m == 0.0 {
                return Err(Error::CoincidentCentroids {
                    a: i.min(j),
                    b: i.max(j),
                });
            }
            worst = worst.max((scatter[i] + scatter[j]) / m);
        }
        total += worst;
    }
    Ok(total / live.len() as f64)
}

/// k-means followed by Davies-Bouldin on its assignments.
pub fn cluster_and_score(x: ArrayView2<f64>, cfg: &KMeansConfig) -> Result<ClusterReport> {
    let mut report = kmeans(x, cfg)?;
    report.dbi = Some(davies_bouldin(x, &report.assignments)?);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbiRow {
    pub method: Method,
    pub k: Option<usize>,
    pub d: usize,
    pub n_clusters: usize,
    pub dbi: Option<f64>,
    pub inertia: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub assignments: Vec<usize>,
}

/// One row per (embedding, d, n_clusters), in that nesting order. Every cell
/// clusters with the same master seed; failures are recorded on the row.
pub fn dbi_sweep(
    embeddings: &[Embedding],
    cluster_range: &[usize],
    dims: &[usize],
    seed: u64,
    restarts: usize,
) -> Vec<DbiRow> {
    let cells: Vec<(usize, usize, usize)> = embeddings
        .iter()
        .enumerate()
        .flat_map(|(e, _)| {
            dims.iter()
                .flat_map(move |&d| cluster_range.iter().map(move |&c| (e, d, c)))
        })
        .collect();
    cells
        .par_iter()
        .map(|&(e, d, c)| {
            let emb = &embeddings[e];
            let mut row = DbiRow {
                method: emb.method,
                k: emb.k,
                d,
                n_clusters: c,
                dbi: None,
                inertia: None,
                error: None,
                assignments: Vec::new(),
            };
            let cfg = KMeansConfig {
                restarts,
                ..KMeansConfig::new(c, seed)
            };
            match emb
                .truncated(d)
                .and_then(|t| cluster_and_score(t.coords.view(), &cfg))
            {
                Ok(r) => {
                    row.dbi = r.dbi;
                    row.inertia = Some(r.inertia);
                    row.assignments = r.assignments;
                }
                Err(err) => row.error = Some(err.to_string()),
            }
            row
        })
        .collect()
}

/// Centroid matrix of a report, as an array.
pub fn centroid_array(report: &ClusterReport) -> Array2<f64> {
    let k = report.centroids.len();
    let d = report.centroids.first().map_or(0, Vec::len);
    Array2::from_shape_fn((k, d), |(i, j)| report.centroids[i][j])
}

//! PCA, classical MDS and the residual-variance scree diagnostic.
//!
//! PCA uses the covariance matrix when `D <= N` and the `N x N` Gram matrix
//! of the centered data otherwise, so wide spectra (tens of thousands of
//! wavelengths, a few hundred instances) never form a `D x D` matrix.
//! Covariance is normalized by `1/(N-1)`, which makes the cMDS eigenvalues of
//! the Euclidean distance matrix exactly `(N-1)` times the PCA eigenvalues.

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Order};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Cmds,
    Isomap,
    Lle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Cmds => "cmds",
            Method::Isomap => "isomap",
            Method::Lle => "lle",
        }
    }

    pub fn is_manifold(self) -> bool {
        matches!(self, Method::Isomap | Method::Lle)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Method::Pca),
            "cmds" | "mds" => Ok(Method::Cmds),
            "isomap" => Ok(Method::Isomap),
            "lle" => Ok(Method::Lle),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Geodesic,
}

/// Symmetric, non-negative, zero-diagonal dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Array2<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    pub fn new(values: Array2<f64>, metric: Metric) -> Result<Self> {
        let n = values.nrows();
        if n != values.ncols() {
            return Err(Error::Shape(format!(
                "distance matrix is {}x{}",
                n,
                values.ncols()
            )));
        }
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "distance diagonal entry {i} is {}",
                    values[[i, i]]
                )));
            }
            for j in 0..i {
                let (a, b) = (values[[i, j]], values[[j, i]]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite("distance matrix"));
                }
                if a < 0.0 || b < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "negative distance at ({i}, {j})"
                    )));
                }
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "distance matrix asymmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { values, metric })
    }

    pub(crate) fn from_trusted(values: Array2<f64>, metric: Metric) -> Self {
        DistanceMatrix { values, metric }
    }

    pub fn euclidean(x: ArrayView2<f64>) -> Self {
        DistanceMatrix::from_trusted(linalg::pairwise_euclidean(x), Metric::Euclidean)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// An `N x d` embedding and the spectrum it was cut from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub method: Method,
    /// Neighborhood size, for manifold methods.
    pub k: Option<usize>,
    #[serde(skip)]
    pub coords: Array2<f64>,
    /// PCA: covariance eigenvalues, descending. cMDS / ISOMAP: eigenvalues
    /// of the double-centered squared-distance matrix, descending, unclamped.
    /// LLE: the bottom eigenvalues of `(I-W)^T (I-W)`, ascending, starting
    /// with the discarded near-zero one.
    pub eigenvalues: Vec<f64>,
    /// Fraction of variance per component over the positive spectrum.
    /// Not defined for LLE.
    pub explained_variance: Option<Vec<f64>>,
    /// `residual_variance[j]` is the residual at dimension `j + 1`.
    pub residual_variance: Option<Vec<f64>>,
    /// cMDS-family only: eigenvalues below zero that were clamped.
    pub negative_eigenvalues: usize,
}

impl Embedding {
    pub fn n_instances(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dims(&self) -> usize {
        self.coords.ncols()
    }

    /// The same embedding restricted to its leading `d` columns.
    pub fn truncated(&self, d: usize) -> Result<Embedding> {
        if d == 0 || d > self.dims() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-dimensional embedding to {d}",
                self.dims()
            )));
        }
        let mut e = self.clone();
        e.coords = self.coords.slice(s![.., ..d]).to_owned();
        if let Some(r) = e.residual_variance.as_mut() {
            r.truncate(d);
        }
        Ok(e)
    }
}

fn check_finite(x: ArrayView2<f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn explained(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().filter(|v| **v > 0.0).sum();
    values
        .iter()
        .map(|&v| {
            if v > 0.0 && total > 0.0 {
                v / total
            } else {
                0.0
            }
        })
        .collect()
}

/// Project `x` onto its top-`d` principal axes. Each axis is oriented so its
/// largest-magnitude loading is positive.
pub fn pca(x: ArrayView2<f64>, d: usize) -> Result<Embedding> {
    let (n, dim) = x.dim();
    if n < 2 || d == 0 || d > (n - 1).min(dim) {
        return Err(Error::InvalidArgument(format!(
            "pca target dimension {d} outside 1..={} for {n}x{dim} data",
            n.saturating_sub(1).min(dim)
        )));
    }
    check_finite(x, "pca input")?;
    let xc = linalg::center_columns(x);
    let scale = 1.0 / (n as f64 - 1.0);

    let (mut eigenvalues, mut loadings) = if dim <= n {
        let cov = xc.t().dot(&xc) * scale;
        let eig = linalg::sym_eigen(cov.view(), Order::Descending)?;
        (
            eig.values.to_vec(),
            eig.vectors.slice(s![.., ..d]).to_owned(),
        )
    } else {
        let gram = xc.dot(&xc.t());
        let eig = linalg::sym_eigen(gram.view(), Order::Descending)?;
        let mut loadings = Array2::zeros((dim, d));
        for j in 0..d {
            let lambda = eig.values[j];
            if lambda > 0.0 {
                let v = eig.vectors.column(j);
                let a = xc.t().dot(&v) / lambda.sqrt();
                loadings.column_mut(j).assign(&a);
            }
        }
        (eig.values.iter().map(|v| v * scale).collect(), loadings)
    };
    for v in eigenvalues.iter_mut() {
        // Rounding can push the null directions slightly below zero.
        *v = v.max(0.0);
    }
    linalg::fix_column_signs(&mut loadings);
    let coords = xc.dot(&loadings);
    let explained_variance = Some(explained(&eigenvalues));
    Ok(Embedding {
        method: Method::Pca,
        k: None,
        coords,
        eigenvalues,
        explained_variance,
        residual_variance: None,
        negative_eigenvalues: 0,
    })
}

/// `B = -1/2 J D^2 J` with `J` the centering operator.
pub fn double_center(dm: &DistanceMatrix) -> Array2<f64> {
    let sq = dm.values().mapv(|v| v * v);
    let n = sq.nrows();
    let row = sq
        .mean_axis(Axis(1))
        .unwrap_or_else(|| ndarray::Array1::zeros(n));
    let grand = row.mean().unwrap_or(0.0);
    Array2::from_shape_fn((n, n), |(i, j)| {
        -0.5 * (sq[[i, j]] - row[i] - row[j] + grand)
    })
}

/// Classical (Torgerson) MDS. Negative eigenvalues are clamped to zero,
/// counted, and excluded from the explained-variance denominator. If `d`
/// exceeds the number of positive eigenvalues the extra columns are zero.
/// The residual-variance curve for `1..=d` is filled in when the distances
/// are not all equal.
pub fn cmds(dm: &DistanceMatrix, d: usize) -> Result<Embedding> {
    let n = dm.len();
    if n < 2 || d == 0 || d > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "cmds target dimension {d} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    let b = double_center(dm);
    let eig = linalg::sym_eigen(b.view(), Order::Descending)?;
    let values = eig.values.to_vec();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-12 * scale;
    let negative = values.iter().filter(|&&v| v < -zero_tol).count();
    if negative > 0 {
        log::warn!("cmds: clamped {negative} negative eigenvalues to zero");
    }
    let positive = values.iter().filter(|&&v| v > zero_tol).count();
    if d > positive {
        log::warn!("cmds: requested {d} dimensions but only {positive} eigenvalues are positive; padding with zeros");
    }

    let mut coords = Array2::zeros((n, d));
    for j in 0..d.min(positive) {
        let s = values[j].sqrt();
        coords
            .column_mut(j)
            .assign(&eig.vectors.column(j).mapv(|v| v * s));
    }
    linalg::fix_column_signs(&mut coords);

    let clamped: Vec<f64> = values
        .iter()
        .map(|&v| if v > zero_tol { v } else { 0.0 })
        .collect();
    let dims: Vec<usize> = (1..=d).collect();
    let residual_variance = residual_variance(dm, coords.view(), &dims).ok();
    Ok(Embedding {
        method: Method::Cmds,
        k: None,
        coords,
        explained_variance: Some(explained(&clamped)),
        eigenvalues: values,
        residual_variance,
        negative_eigenvalues: negative,
    })
}

/// `1 - r^2` between the upper-triangle entries of `dm` and the Euclidean
/// distances among the first `d` embedding columns, for each `d` in `dims`.
///
/// If the embedding distances are all equal (e.g. every point at the origin)
/// the correlation is taken as zero and the residual is 1.
pub fn residual_variance(
    dm: &DistanceMatrix,
    coords: ArrayView2<f64>,
    dims: &[usize],
) -> Result<Vec<f64>> {
    let n = dm.len();
    if coords.nrows() != n {
        return Err(Error::Shape(format!(
            "{} embedding rows for a {n}-point distance matrix",
            coords.nrows()
        )));
    }
    if let Some(&bad) = dims.iter().find(|&&d| d == 0 || d > coords.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "residual dimension {bad} outside 1..={}",
            coords.ncols()
        )));
    }
    let reference: Vec<f64> = upper_triangle(dm.values().view());
    let (ref_mean, ref_var) = mean_var(&reference);
    if !(ref_var > 0.0) {
        return Err(Error::Degenerate(
            "reference distances are constant; correlation undefined".into(),
        ));
    }

    let max_d = dims.iter().copied().max().unwrap_or(0);
    let mut acc = vec![0.0; reference.len()];
    let mut by_dim = vec![f64::NAN; max_d + 1];
    for c in 0..max_d {
        let col = coords.column(c);
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let diff = col[i] - col[j];
                acc[p] += diff * diff;
                p += 1;
            }
        }
        let dist: Vec<f64> = acc.iter().map(|v| v.sqrt()).collect();
        let (m, var) = mean_var(&dist);
        let r2 = if var > 0.0 {
            let cov = reference
                .iter()
                .zip(&dist)
                .map(|(a, b)| (a - ref_mean) * (b - m))
                .sum::<f64>()
                / reference.len() as f64;
            (cov * cov / (ref_var * var)).min(1.0)
        } else {
            0.0
        };
        by_dim[c + 1] = 1.0 - r2;
    }
    Ok(dims.iter().map(|&d| by_dim[d]).collect())
}

fn upper_triangle(a: ArrayView2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(a[[i, j]]);
        }
    }
    out
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var)
}

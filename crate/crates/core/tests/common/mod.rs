//! Reference implementations used as test oracles. They are deliberately
//! naive and share no code with the crate under test.

#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues in descending order and the matching unit eigenvectors as
/// the columns of the second value.
pub fn jacobi_eigen(a: ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]] == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = idx.iter().map(|&i| m[[i, i]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, idx[c]]]);
    (values, vectors)
}

/// Sample covariance with the `N - 1` denominator, by explicit loops.
pub fn covariance(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let means: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[[i, j]]).sum::<f64>() / n as f64)
        .collect();
    Array2::from_shape_fn((d, d), |(a, b)| {
        (0..n)
            .map(|i| (x[[i, a]] - means[a]) * (x[[i, b]] - means[b]))
            .sum::<f64>()
            / (n - 1) as f64
    })
}

/// Flip the columns of `a` to agree in sign with the same columns of
/// `reference`.
pub fn align_signs(a: &Array2<f64>, reference: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    for j in 0..a.ncols() {
        let dot: f64 = a.column(j).dot(&reference.column(j));
        if dot < 0.0 {
            out.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    out
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

fn centered(x: ArrayView2<f64>) -> DMatrix<f64> {
    let (n, d) = x.dim();
    let mut m = DMatrix::from_fn(n, d, |i, j| x[[i, j]]);
    for j in 0..d {
        let mean = m.column(j).mean();
        m.column_mut(j).add_scalar_mut(-mean);
    }
    m
}

/// Frobenius residual after the best rigid alignment (translation plus
/// orthogonal map) of `fitted` onto `target`.
pub fn procrustes_residual(target: ArrayView2<f64>, fitted: ArrayView2<f64>) -> f64 {
    let t = centered(target);
    let f = centered(fitted);
    let svd = (f.transpose() * &t).svd(true, true);
    let r = svd.u.unwrap() * svd.v_t.unwrap();
    (f * r - t).norm()
}

/// Root-mean-square residual of the least-squares affine map from `coords`
/// to `target`.
pub fn affine_fit_rms(coords: ArrayView2<f64>, target: ArrayView2<f64>) -> f64 {
    let (n, d) = coords.dim();
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { coords[[i, j]] } else { 1.0 });
    let b = DMatrix::from_fn(n, target.ncols(), |i, j| target[[i, j]]);
    let beta = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
    let r = a * beta - b;
    (r.norm_squared() / (n * target.ncols()) as f64).sqrt()
}

/// All-pairs shortest paths by Floyd-Warshall over an undirected edge list.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, w) in edges {
        d[a][b] = d[a][b].min(w);
        d[b][a] = d[b][a].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

pub fn rows(x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

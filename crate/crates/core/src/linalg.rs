//! Dense linear-algebra helpers shared by the embedding modules.
//!
//! Data matrices are `ndarray::Array2<f64>` with one instance per row. The
//! symmetric eigensolver is nalgebra's; this module only adapts layouts and
//! fixes the ordering and sign conventions the rest of the crate relies on.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Eigenpairs of a symmetric matrix, sorted by eigenvalue.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Array1<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Ascending,
    Descending,
}

pub fn to_nalgebra(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Full eigendecomposition of a symmetric matrix. Only the lower triangle is
/// trusted; the input is symmetrized first so rounding asymmetry from the
/// caller cannot leak into the result.
pub fn sym_eigen(a: ArrayView2<f64>, order: Order) -> Result<SymEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Shape(format!("eigen input is {}x{}", n, a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigen input"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("no convergence on {n}x{n} matrix")))?;

    let mut idx: Vec<usize> = (0..n).collect();
    // Index tie-break keeps the permutation deterministic for repeated eigenvalues.
    idx.sort_by(|&i, &j| {
        let ord = eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]);
        let ord = match order {
            Order::Ascending => ord,
            Order::Descending => ord.reverse(),
        };
        ord.then(i.cmp(&j))
    });

    let values = Array1::from_iter(idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in idx.iter().enumerate() {
        for r in 0..n {
            vectors[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Flip each column so that its largest-magnitude entry is positive
/// (first such entry on ties).
pub fn fix_column_signs(m: &mut Array2<f64>) {
    for mut col in m.columns_mut() {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

pub fn column_means(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(x.ncols()))
}

pub fn center_columns(x: ArrayView2<f64>) -> Array2<f64> {
    let mean = column_means(x);
    &x - &mean.insert_axis(Axis(0))
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// All pairwise Euclidean distances between rows of `x`, computed from
/// explicit differences (no Gram-matrix cancellation).
pub fn pairwise_euclidean(x: ArrayView2<f64>) -> Array2<f64> {
    use rayon::prelude::*;

    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| squared_distance(&rows[i], &rows[j]).sqrt())
                .collect()
        })
        .collect();
    let mut d = Array2::zeros((n, n));
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Solve `a x = b` for a symmetric positive-definite `a`, falling back to LU
/// when Cholesky rejects the matrix.
pub fn solve_spd(a: ArrayView2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let m = to_nalgebra(a);
    let rhs = DVector::from_column_slice(b);
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.solve(&rhs).iter().copied().collect());
    }
    m.lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Degenerate("singular local system".into()))
}

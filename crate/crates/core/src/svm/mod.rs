//! Polynomial-kernel support vector machines.
//!
//! Binary models are trained by SMO, pairing the maximal violator with a
//! second-order choice of its partner; multiclass problems are decomposed
//! one-vs-one and decided by vote. [`cv`] wraps both in stratified k-fold
//! cross-validation and the (method, k, d, K) accuracy sweep.

mod cv;
mod multiclass;
mod smo;

pub use cv::{
    accuracy_sweep, best_by_group, cross_validate, AccuracySweep, CvConfig, CvReport, FoldDetail,
    SweepCellResult, SweepSource,
};
pub use multiclass::OneVsOne;
pub use smo::{smo_train, solve_dual, DualSolution, SmoConfig, SvmModel};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub degree: u32,
    /// `(x.y)^K` when true, `(x.y + 1)^K` otherwise.
    pub homogeneous: bool,
    /// Standardize features on the training data before training.
    pub standardize: bool,
}

impl KernelSpec {
    pub fn polynomial(degree: u32) -> Self {
        KernelSpec {
            degree,
            homogeneous: true,
            standardize: true,
        }
    }

    fn check(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::InvalidArgument("kernel degree must be >= 1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, dot: f64) -> f64 {
        let base = if self.homogeneous { dot } else { dot + 1.0 };
        base.powi(self.degree as i32)
    }

    /// Kernel matrix between the rows of `a` and the rows of `b`.
    pub fn matrix(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
        a.dot(&b.t()).mapv(|v| self.apply(v))
    }
}

pub fn poly_kernel(x: ArrayView1<f64>, y: ArrayView1<f64>, spec: &KernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "kernel arguments have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    spec.check()?;
    Ok(spec.apply(x.dot(&y)))
}

/// Per-feature affine map to zero mean and unit (population) standard
/// deviation. Constant features keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean = x
            .mean_axis(Axis(0))
            .map(|m| m.to_vec())
            .unwrap_or_else(|| vec![0.0; x.ncols()]);
        let scale = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, &m)| {
                let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(x.dim(), |(i, j)| (x[[i, j]] - self.mean[j]) / self.scale[j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kernel_closed_forms() {
        let x = array![1.0, 2.0, 3.0];
        let y = array![0.5, -1.0, 2.0];
        let lin = poly_kernel(x.view(), y.view(), &KernelSpec::polynomial(1)).unwrap();
        assert_eq!(lin, x.dot(&y));

        let u = array![0.6, 0.8];
        for k in 1..=5 {
            let v = poly_kernel(u.view(), u.view(), &KernelSpec::polynomial(k)).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }

        let a = array![1.0, 1.0];
        let b = array![1.0, 1.0];
        assert_eq!(
            poly_kernel(a.view(), b.view(), &KernelSpec::polynomial(3)).unwrap(),
            8.0
        );
        let inhom = KernelSpec {
            homogeneous: false,
            ..KernelSpec::polynomial(2)
        };
        assert_eq!(poly_kernel(a.view(), b.view(), &inhom).unwrap(), 9.0);

        assert!(poly_kernel(a.view(), x.view(), &KernelSpec::polynomial(1)).is_err());
        assert!(poly_kernel(a.view(), b.view(), &KernelSpec::polynomial(0)).is_err());
    }

    #[test]
    fn standardizer_maps_training_stats() {
        let x = array![[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]];
        let s = Standardizer::fit(x.view());
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.scale[1], 1.0);
        let z = s.transform(x.view());
        assert!((z.column(0).sum()).abs() < 1e-12);
        let var = z.column(0).mapv(|v| v * v).sum() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
    }
}

use std::ops::Not;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{KernelSpec, Standardizer, DEFAULT_C, DEFAULT_TOL};
use crate::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub c: f64,
    /// Stopping threshold on the maximal KKT violation gap.
    pub tol: f64,
    /// Iteration cap; `None` picks `max(10_000_000, 100 n)`.
    pub max_iter: Option<usize>,
    /// Skip bounded multipliers that cannot move; the result is checked on
    /// the full problem before returning.
    pub shrinking: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
            max_iter: None,
            shrinking: true,
        }
    }
}

/// Solution of `min 1/2 a^T Q a - 1^T a` s.t. `0 <= a <= C`, `y^T a = 0`
/// with `Q_ij = y_i y_j K_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal violating-pair gap.
    pub gap: f64,
}

/// SMO on a precomputed kernel matrix.
///
/// Each iteration takes the maximal violator `i = argmax_{I_up} -y_t G_t`
/// and, among the `j` in `I_low` that violate against it, the one with the
/// largest second-order decrease of the objective; the two-variable
/// subproblem is then solved in closed form and clipped to the box.
/// Training stops once the gap between the two extremes drops below `tol`. The bias is the
/// mean of `-y_t G_t` over free multipliers, or the midpoint of the feasible
/// interval when none are free.
pub fn solve_dual(kernel: ArrayView2<f64>, y: &[f64], cfg: &SmoConfig) -> Result<DualSolution> {
    let n = y.len();
    if kernel.dim() != (n, n) {
        return Err(Error::Shape(format!(
            "kernel is {:?} for {n} labels",
            kernel.dim()
        )));
    }
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {}",
            cfg.c
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument(
            "binary labels must be +1 or -1".into(),
        ));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(Error::SingleClass);
    }
    if kernel.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel matrix"));
    }

    if y[0] < 0.0 {
        // Solve in the orientation where the first label is +1, so that
        // flipping every label reproduces the same multipliers exactly and
        // only negates the bias.
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        let sol = solve_dual(kernel, &flipped, cfg)?;
        return Ok(DualSolution {
            bias: -sol.bias,
            ..sol
        });
    }

    let c = cfg.c;
    let max_iter = cfg.max_iter.unwrap_or_else(|| 10_000_000usize.max(100 * n));
    let kernel = kernel.as_standard_layout();
    let k = kernel.as_slice().expect("standard layout");
    // Q_st = y_s y_t K_st, row-major.
    let q: Vec<f64> = (0..n * n).map(|st| y[st / n] * y[st % n] * k[st]).collect();
    let diag: Vec<f64> = (0..n).map(|t| k[t * n + t]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    // Full recomputation, used after the working set has been shrunk.
    let reconstruct = |alpha: &[f64], grad: &mut [f64]| {
        for (t, g) in grad.iter_mut().enumerate() {
            let row = &q[t * n..(t + 1) * n];
            *g = row
                .iter()
                .zip(alpha)
                .filter(|(_, &a)| a != 0.0)
                .map(|(qv, a)| qv * a)
                .sum::<f64>()
                - 1.0;
        }
    };

    let mut active: Vec<usize> = (0..n).collect();
    let shrink_every = n.clamp(1, 1000);
    let mut countdown = shrink_every;
    let mut unshrunk = false;
    let mut iterations = 0;
    let gap = loop {
        if cfg.shrinking {
            countdown -= 1;
            if countdown == 0 {
                countdown = shrink_every;
                shrink(
                    &mut active,
                    &alpha,
                    &mut grad,
                    y,
                    c,
                    cfg.tol,
                    &mut unshrunk,
                    &reconstruct,
                );
            }
        }

        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for &t in &active {
            let v = -y[t] * grad[t];
            if v > gmax && in_up(alpha[t], y[t]) {
                gmax = v;
                i = t;
            }
        }
        // Second-order choice of j against the maximal violator i.
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_gain = f64::INFINITY;
        if i != usize::MAX {
            let ki = &k[i * n..(i + 1) * n];
            for &t in &active {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                if v < gmin {
                    gmin = v;
                }
                let b = gmax - v;
                if b > 0.0 {
                    let a = positive(diag[i] + diag[t] - 2.0 * ki[t]);
                    let gain = -(b * b) / a;
                    if gain < best_gain {
                        best_gain = gain;
                        j = t;
                    }
                }
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < cfg.tol {
            if active.len() < n {
                // Optimal on the shrunk set; check again on everything.
                reconstruct(&alpha, &mut grad);
                active = (0..n).collect();
                countdown = shrink_every;
                continue;
            }
            break gap.max(0.0);
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged { iterations, gap });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = positive(diag[i] + diag[j] - 2.0 * k[i * n + j]);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        if di == 0.0 && dj == 0.0 {
            // No representable progress on the most violating pair.
            return Err(Error::NotConverged { iterations, gap });
        }
        let (qi, qj) = (&q[i * n..(i + 1) * n], &q[j * n..(j + 1) * n]);
        for &t in &active {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    };
    if active.len() < n {
        reconstruct(&alpha, &mut grad);
    }

    Ok(DualSolution {
        bias: bias(&alpha, &grad, y, c),
        alpha,
        iterations,
        gap,
    })
}

#[inline]
fn positive(q: f64) -> f64 {
    if q > 0.0 {
        q
    } else {
        TAU
    }
}

/// Drop bounded multipliers that cannot enter the next working pair. The
/// first time the gap falls within `10 tol`, gradients are rebuilt and every
/// variable is reactivated once before shrinking resumes.
#[allow(clippy::too_many_arguments)]
fn shrink(
    active: &mut Vec<usize>,
    alpha: &[f64],
    grad: &mut [f64],
    y: &[f64],
    c: f64,
    tol: f64,
    unshrunk: &mut bool,
    reconstruct: &impl Fn(&[f64], &mut [f64]),
) {
    let n = alpha.len();
    let (mut gmax1, mut gmax2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &t in active.iter() {
        let v = -y[t] * grad[t];
        let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
        let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
        if up {
            gmax1 = gmax1.max(v);
        }
        if low {
            gmax2 = gmax2.max(-v);
        }
    }
    if !*unshrunk && gmax1 + gmax2 <= 10.0 * tol {
        *unshrunk = true;
        reconstruct(alpha, grad);
        *active = (0..n).collect();
    }
    active.retain(|&t| {
        let g = grad[t];
        if alpha[t] >= c {
            if y[t] > 0.0 {
                -g > gmax1
            } else {
                -g > gmax2
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                g > gmax2
            } else {
                g > gmax1
            }
        } else {
            false
        }
        .not()
    });
}

fn bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free += 1;
            continue;
        }
        // Bounded multipliers limit b from one side.
        let at_upper = alpha[t] >= c;
        if (y[t] > 0.0) == at_upper {
            ub = ub.min(v);
        } else {
            lb = lb.max(v);
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        match (lb.is_finite(), ub.is_finite()) {
            (true, true) => 0.5 * (lb + ub),
            (true, false) => lb,
            (false, true) => ub,
            (false, false) => 0.0,
        }
    }
}

/// A trained binary classifier. Label `+1` is the positive side of the
/// decision function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Training-set indices with `alpha > 0`.
    pub support: Vec<usize>,
    /// The support vectors, in the (standardized) space the kernel sees.
    #[serde(skip)]
    pub support_vectors: Array2<f64>,
    /// `alpha_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    /// Full multiplier vector over the training set.
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub kernel: KernelSpec,
    pub scaler: Option<Standardizer>,
    pub iterations: usize,
    pub gap: f64,
}

impl SvmModel {
    pub(crate) fn from_solution(
        sol: DualSolution,
        y: &[f64],
        x_kernel_space: ArrayView2<f64>,
        c: f64,
        kernel: KernelSpec,
        scaler: Option<Standardizer>,
    ) -> Self {
        let support: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
        let dual_coef = support.iter().map(|&i| sol.alpha[i] * y[i]).collect();
        let support_vectors = x_kernel_space.select(Axis(0), &support);
        SvmModel {
            support,
            support_vectors,
            dual_coef,
            alpha: sol.alpha,
            bias: sol.bias,
            c,
            kernel,
            scaler,
            iterations: sol.iterations,
            gap: sol.gap,
        }
    }

    fn to_kernel_space(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match &self.scaler {
            Some(s) => s.transform(x),
            None => x.to_owned(),
        }
    }

    /// `f(x) = sum_i alpha_i y_i k(x_i, x) + b` for every row of `x`.
    pub fn decision_function(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let z = self.to_kernel_space(x);
        if self.support.is_empty() {
            return Array1::from_elem(x.nrows(), self.bias);
        }
        let k = self.kernel.matrix(z.view(), self.support_vectors.view());
        let coef = ArrayView1::from(&self.dual_coef);
        k.dot(&coef) + self.bias
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.decision_function(x)
            .iter()
            .map(|&f| if f >= 0.0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// Per-point KKT violation on the training data: `max(0, 1 - y f)` for
    /// `alpha = 0`, `|1 - y f|` for free multipliers, `max(0, y f - 1)` at
    /// `alpha = C`.
    pub fn kkt_residuals(&self, x: ArrayView2<f64>, y: &[f64]) -> Vec<f64> {
        let f = self.decision_function(x);
        y.iter()
            .zip(f.iter())
            .zip(&self.alpha)
            .map(|((&yi, &fi), &a)| {
                let m = yi * fi;
                if a <= 0.0 {
                    (1.0 - m).max(0.0)
                } else if a >= self.c {
                    (m - 1.0).max(0.0)
                } else {
                    (1.0 - m).abs()
                }
            })
            .collect()
    }
}

/// Train a binary SVM on labels in `{-1, +1}`.
pub fn smo_train(
    x: ArrayView2<f64>,
    y: &[f64],
    spec: &KernelSpec,
    cfg: &SmoConfig,
) -> Result<SvmModel> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            x.nrows(),
            y.len()
        )));
    }
    spec.check()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svm training data"));
    }
    let scaler = spec.standardize.then(|| Standardizer::fit(x));
    let z = match &scaler {
        Some(s) => s.transform(x),
        None => x.to_owned(),
    };
    let k = spec.matrix(z.view(), z.view());
    let sol = solve_dual(k.view(), y, cfg)?;
    Ok(SvmModel::from_solution(
        sol,
        y,
        z.view(),
        cfg.c,
        *spec,
        scaler,
    ))
}

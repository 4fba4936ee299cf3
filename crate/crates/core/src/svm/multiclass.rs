use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smo::{solve_dual, SmoConfig};
use super::{KernelSpec, Standardizer};
use crate::{Error, Result};

/// Binary model for the class pair `(positive, negative)`; support indices
/// refer to the multiclass training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<usize>,
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub gap: f64,
}

/// One binary SVM per class pair, combined by majority vote. Vote ties go to
/// the class with the larger summed `|f|` over the comparisons it won, then
/// to the lower class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsOne {
    pub classes: Vec<usize>,
    pub pairs: Vec<PairModel>,
    pub kernel: KernelSpec,
    pub c: f64,
    /// Fit once on the whole training set and shared by every pair.
    pub scaler: Option<Standardizer>,
    #[serde(skip)]
    train: Array2<f64>,
}

impl OneVsOne {
    pub fn train(
        x: ArrayView2<f64>,
        labels: &[usize],
        spec: &KernelSpec,
        cfg: &SmoConfig,
    ) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows for {} labels",
                x.nrows(),
                labels.len()
            )));
        }
        spec.check()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("svm training data"));
        }
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }

        let scaler = spec.standardize.then(|| Standardizer::fit(x));
        let z = match &scaler {
            Some(s) => s.transform(x),
            None => x.to_owned(),
        };
        let kernel = spec.matrix(z.view(), z.view());

        let pair_ids: Vec<(usize, usize)> = (0..classes.len())
            .flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b)))
            .collect();
        let pairs = pair_ids
            .par_iter()
            .map(|&(a, b)| {
                let (pos, neg) = (classes[a], classes[b]);
                let idx: Vec<usize> = (0..labels.len())
                    .filter(|&i| labels[i] == pos || labels[i] == neg)
                    .collect();
                let y: Vec<f64> = idx
                    .iter()
                    .map(|&i| if labels[i] == pos { 1.0 } else { -1.0 })
                    .collect();
                let sub = kernel.select(Axis(0), &idx).select(Axis(1), &idx);
                let sol = solve_dual(sub.view(), &y, cfg)?;
                let mut support = Vec::new();
                let mut dual_coef = Vec::new();
                for (local, &global) in idx.iter().enumerate() {
                    if sol.alpha[local] > 0.0 {
                        support.push(global);
                        dual_coef.push(sol.alpha[local] * y[local]);
                    }
                }
                Ok(PairModel {
                    positive: pos,
                    negative: neg,
                    support,
                    dual_coef,
                    bias: sol.bias,
                    iterations: sol.iterations,
                    gap: sol.gap,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(OneVsOne {
            classes,
            pairs,
            kernel: *spec,
            c: cfg.c,
            scaler,
            train: z,
        })
    }

    /// Decision values, one column per pair in `self.pairs` order.
    pub fn decision_values(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let z = match &self.scaler {
            Some(s) => s.transform(x),
            None => x.to_owned(),
        };
        let k = self.kernel.matrix(z.view(), self.train.view());
        let mut out = Array2::zeros((x.nrows(), self.pairs.len()));
        for (p, pair) in self.pairs.iter().enumerate() {
            let cols = k.select(Axis(1), &pair.support);
            let f = cols.dot(&Array1::from(pair.dual_coef.clone())) + pair.bias;
            out.column_mut(p).assign(&f);
        }
        out
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        let f = self.decision_values(x);
        let n_classes = self.classes.iter().max().map_or(0, |m| m + 1);
        f.rows()
            .into_iter()
            .map(|row| {
                let mut votes = vec![0usize; n_classes];
                let mut strength = vec![0.0; n_classes];
                for (pair, &v) in self.pairs.iter().zip(row.iter()) {
                    let winner = if v >= 0.0 {
                        pair.positive
                    } else {
                        pair.negative
                    };
                    votes[winner] += 1;
                    strength[winner] += v.abs();
                }
                let mut best = self.classes[0];
                for &c in &self.classes[1..] {
                    let better = votes[c] > votes[best]
                        || (votes[c] == votes[best] && strength[c] > strength[best]);
                    if better {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    pub fn n_models(&self) -> usize {
        self.pairs.len()
    }
}

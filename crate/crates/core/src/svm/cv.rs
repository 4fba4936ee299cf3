use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::multiclass::OneVsOne;
use super::smo::SmoConfig;
use super::{KernelSpec, Standardizer};
use crate::dataset::stratified_folds_for_labels;
use crate::linear_embed::{Embedding, Method};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    pub smo: SmoConfig,
}

impl CvConfig {
    pub fn new(degree: u32, seed: u64) -> Self {
        CvConfig {
            folds: 10,
            seed,
            kernel: KernelSpec::polynomial(degree),
            smo: SmoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDetail {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub accuracy: f64,
    /// Standardization fitted on `train` for this fold.
    pub scaler: Option<Standardizer>,
    pub predictions: Vec<usize>,
}

/// Accuracy of one configuration under k-fold cross-validation. Accuracies
/// are percentages; `std` is the sample standard deviation across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub degree: u32,
    pub folds: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub seed: u64,
    pub c: f64,
    pub homogeneous: bool,
    pub standardize: bool,
    #[serde(skip)]
    pub fold_details: Vec<FoldDetail>,
}

fn sample_std(v: &[f64], mean: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    (v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Stratified k-fold cross-validation of a one-vs-one SVM. Standardization
/// (when enabled) is fitted on each training split and applied unchanged to
/// its test split.
pub fn cross_validate(
    x: ArrayView2<f64>,
    labels: &[usize],
    class_names: &[String],
    cfg: &CvConfig,
) -> Result<CvReport> {
    if x.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    let folds = stratified_folds_for_labels(labels, class_names, cfg.folds, cfg.seed)?;
    let details = folds
        .into_par_iter()
        .map(|fold| {
            let xtr = x.select(Axis(0), &fold.train);
            let ytr: Vec<usize> = fold.train.iter().map(|&i| labels[i]).collect();
            let model = OneVsOne::train(xtr.view(), &ytr, &cfg.kernel, &cfg.smo)?;
            let xte = x.select(Axis(0), &fold.test);
            let predictions = model.predict(xte.view());
            let correct = predictions
                .iter()
                .zip(&fold.test)
                .filter(|(p, &i)| **p == labels[i])
                .count();
            Ok(FoldDetail {
                accuracy: 100.0 * correct as f64 / fold.test.len() as f64,
                train: fold.train,
                test: fold.test,
                scaler: model.scaler,
                predictions,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fold_accuracies: Vec<f64> = details.iter().map(|d| d.accuracy).collect();
    let mean = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(CvReport {
        degree: cfg.kernel.degree,
        folds: cfg.folds,
        std: sample_std(&fold_accuracies, mean),
        mean,
        fold_accuracies,
        seed: cfg.seed,
        c: cfg.smo.c,
        homogeneous: cfg.kernel.homogeneous,
        standardize: cfg.kernel.standardize,
        fold_details: details,
    })
}

/// An embedding (at its largest dimension) to be cut down to each `d` of a
/// sweep, or the reason it is unavailable.
#[derive(Debug, Clone)]
pub struct SweepSource {
    pub method: Method,
    pub k: Option<usize>,
    pub embedding: std::result::Result<Embedding, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCellResult {
    /// `raw` for the unreduced data, otherwise the embedding method.
    pub source: String,
    pub k: Option<usize>,
    pub d: usize,
    pub degree: u32,
    pub report: Option<CvReport>,
    pub error: Option<String>,
}

impl SweepCellResult {
    pub fn mean(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySweep {
    /// One row per kernel degree on the unreduced data.
    pub baseline: Vec<SweepCellResult>,
    pub cells: Vec<SweepCellResult>,
}

impl AccuracySweep {
    pub fn all(&self) -> impl Iterator<Item = &SweepCellResult> {
        self.baseline.iter().chain(&self.cells)
    }
}

/// Cross-validate every (source, d, degree) cell, plus the unreduced data
/// once per degree when `raw` is given. Every cell uses the same folds
/// (same seed). Failing cells carry their error; the sweep always returns.
pub fn accuracy_sweep(
    raw: Option<ArrayView2<f64>>,
    sources: &[SweepSource],
    labels: &[usize],
    class_names: &[String],
    d_values: &[usize],
    degrees: &[u32],
    cfg: &CvConfig,
) -> AccuracySweep {
    let run = |x: ArrayView2<f64>, degree: u32| {
        let cell_cfg = CvConfig {
            kernel: KernelSpec {
                degree,
                ..cfg.kernel
            },
            ..*cfg
        };
        cross_validate(x, labels, class_names, &cell_cfg)
    };

    let baseline = match raw {
        Some(x) => degrees
            .par_iter()
            .map(|&degree| {
                let res = run(x, degree);
                SweepCellResult {
                    source: "raw".into(),
                    k: None,
                    d: x.ncols(),
                    degree,
                    error: res.as_ref().err().map(ToString::to_string),
                    report: res.ok(),
                }
            })
            .collect(),
        None => Vec::new(),
    };

    let jobs: Vec<(usize, usize, u32)> = (0..sources.len())
        .flat_map(|s| {
            d_values
                .iter()
                .flat_map(move |&d| degrees.iter().map(move |&k| (s, d, k)))
        })
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(s, d, degree)| {
            let src = &sources[s];
            let res = match &src.embedding {
                Ok(e) => e
                    .truncated(d)
                    .and_then(|t| run(t.coords.view(), degree))
                    .map_err(|e| e.to_string()),
                Err(msg) => Err(msg.clone()),
            };
            SweepCellResult {
                source: src.method.name().into(),
                k: src.k,
                d,
                degree,
                error: res.as_ref().err().cloned(),
                report: res.ok(),
            }
        })
        .collect();
    AccuracySweep { baseline, cells }
}

/// The highest-mean cell of each (source, k) group, groups in first-seen
/// order. Ties go to the smaller `d`, then the smaller degree.
pub fn best_by_group(cells: &[SweepCellResult]) -> Vec<&SweepCellResult> {
    let mut groups: Vec<(&str, Option<usize>)> = Vec::new();
    for c in cells {
        let key = (c.source.as_str(), c.k);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    groups
        .into_iter()
        .filter_map(|(src, k)| {
            cells
                .iter()
                .filter(|c| c.source == src && c.k == k && c.report.is_some())
                .max_by(|a, b| {
                    let (ma, mb) = (a.mean().unwrap_or(f64::MIN), b.mean().unwrap_or(f64::MIN));
                    ma.total_cmp(&mb)
                        .then(b.d.cmp(&a.d))
                        .then(b.degree.cmp(&a.degree))
                })
        })
        .collect()
}

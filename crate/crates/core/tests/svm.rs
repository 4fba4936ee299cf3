mod common;

use common::euclid;
use ndarray::{array, Array2, Axis};
use proptest::prelude::*;
use spectra_core::dataset::stratified_folds_for_labels;
use spectra_core::fixtures;
use spectra_core::seed;
use spectra_core::svm::{
    cross_validate, smo_train, solve_dual, CvConfig, KernelSpec, OneVsOne, SmoConfig,
};

fn pm(labels: &[usize]) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == 0 { 1.0 } else { -1.0 })
        .collect()
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

fn training_accuracy(x: &Array2<f64>, labels: &[usize], degree: u32) -> f64 {
    let y = pm(labels);
    let m = smo_train(
        x.view(),
        &y,
        &KernelSpec::polynomial(degree),
        &SmoConfig::default(),
    )
    .unwrap();
    let p = m.predict(x.view());
    100.0 * p.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// `1/2 a^T Q a - sum a`.
fn dual_objective(k: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

#[test]
fn two_point_analytic_dual() {
    let x = array![[1.0, 0.0], [-1.0, 0.0]];
    let y = [1.0, -1.0];
    let spec = KernelSpec {
        standardize: false,
        ..KernelSpec::polynomial(1)
    };
    let m = smo_train(x.view(), &y, &spec, &SmoConfig::default()).unwrap();
    // w = (1, 0), b = 0, both points on the margin: alpha = 1/2 each.
    for a in &m.alpha {
        assert!((a - 0.5).abs() < 1e-6);
    }
    assert!(m.bias.abs() < 1e-6);
}

#[test]
fn kkt_holds_on_separable_blobs() {
    let (x, labels) = fixtures::blobs(&[vec![-3.0, 0.0], vec![3.0, 1.0]], 50, 1.0, 4);
    let y = pm(&labels);
    let cfg = SmoConfig::default();
    let m = smo_train(x.view(), &y, &KernelSpec::polynomial(1), &cfg).unwrap();
    let f = m.decision_function(x.view());
    for ((&yi, &fi), &a) in y.iter().zip(f.iter()).zip(&m.alpha) {
        let margin = yi * fi;
        let violation = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= cfg.c {
            (margin - 1.0).max(0.0)
        } else {
            (1.0 - margin).abs()
        };
        assert!(violation <= cfg.tol, "violation {violation} at alpha {a}");
        assert!((0.0..=cfg.c).contains(&a));
    }
    let balance: f64 = m.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
    assert!(balance.abs() < 1e-9);
    assert!(m.kkt_residuals(x.view(), &y).iter().all(|&r| r <= cfg.tol));
}

#[test]
fn xor_needs_degree_two() {
    let (x, labels) = fixtures::xor(40, 3);
    assert!(training_accuracy(&x, &labels, 1) < 100.0);
    assert_eq!(training_accuracy(&x, &labels, 2), 100.0);
}

#[test]
fn annulus_cv_gap_between_degrees() {
    let (x, labels) = fixtures::annulus(60, 12);
    let n = names(2);
    let k1 = cross_validate(x.view(), &labels, &n, &CvConfig::new(1, 7)).unwrap();
    let k2 = cross_validate(x.view(), &labels, &n, &CvConfig::new(2, 7)).unwrap();
    assert!(
        k2.mean >= k1.mean + 20.0,
        "K=1 {} vs K=2 {}",
        k1.mean,
        k2.mean
    );
}

#[test]
fn one_vs_one_agrees_with_nearest_centroid() {
    let centers = vec![vec![0.0, 0.0], vec![8.0, 0.0], vec![4.0, 7.0]];
    let (x, labels) = fixtures::blobs(&centers, 30, 0.7, 2);
    let model = OneVsOne::train(
        x.view(),
        &labels,
        &KernelSpec::polynomial(1),
        &SmoConfig::default(),
    )
    .unwrap();
    assert_eq!(model.n_models(), 3);
    let (probe, _) = fixtures::blobs(&centers, 30, 0.7, 99);
    let pred = model.predict(probe.view());
    for (row, p) in probe.rows().into_iter().zip(pred) {
        let r = row.to_vec();
        let nearest = (0..3)
            .min_by(|&a, &b| euclid(&r, &centers[a]).total_cmp(&euclid(&r, &centers[b])))
            .unwrap();
        assert_eq!(p, nearest);
    }
}

#[test]
fn shrinking_does_not_change_the_optimum() {
    let (x, labels) = fixtures::annulus(80, 5);
    let y = pm(&labels);
    let spec = KernelSpec::polynomial(2);
    let z = spectra_core::svm::Standardizer::fit(x.view()).transform(x.view());
    let k = spec.matrix(z.view(), z.view());
    let on = solve_dual(k.view(), &y, &SmoConfig::default()).unwrap();
    let off = solve_dual(
        k.view(),
        &y,
        &SmoConfig {
            shrinking: false,
            ..SmoConfig::default()
        },
    )
    .unwrap();
    let (a, b) = (
        dual_objective(&k, &y, &on.alpha),
        dual_objective(&k, &y, &off.alpha),
    );
    assert!((a - b).abs() < 1e-3 * a.abs().max(1.0), "{a} vs {b}");
    assert!(on.gap < 1e-3 && off.gap < 1e-3);
}

#[test]
fn perfect_classifier_scores_full_marks() {
    let (x, labels) = fixtures::blobs(
        &[vec![0.0; 3], vec![50.0; 3], vec![-50.0, 50.0, 0.0]],
        20,
        0.5,
        3,
    );
    let r = cross_validate(x.view(), &labels, &names(3), &CvConfig::new(1, 0)).unwrap();
    assert_eq!(r.fold_accuracies, vec![100.0; 10]);
    assert_eq!(r.mean, 100.0);
    assert_eq!(r.std, 0.0);
}

#[test]
fn scaler_is_fit_on_the_training_split_only() {
    let (x, labels) = fixtures::blobs(&[vec![0.0, 0.0, 5.0], vec![3.0, 1.0, -2.0]], 25, 2.0, 6);
    let r = cross_validate(x.view(), &labels, &names(2), &CvConfig::new(1, 4)).unwrap();
    for fold in &r.fold_details {
        let s = fold.scaler.as_ref().unwrap();
        let train = x.select(Axis(0), &fold.train);
        let full = x.view();
        for j in 0..3 {
            let col: Vec<f64> = train.column(j).to_vec();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd =
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            assert!((s.mean[j] - mean).abs() < 1e-12);
            assert!((s.scale[j] - sd).abs() < 1e-12);
            // The full-data statistics differ, so a leak would be visible.
            let all_mean = full.column(j).sum() / full.nrows() as f64;
            assert!((s.mean[j] - all_mean).abs() > 1e-9);
        }
        assert!(fold.test.iter().all(|i| !fold.train.contains(i)));
    }
}

#[test]
fn shuffled_labels_sit_at_chance() {
    use rand::seq::SliceRandom;
    let centers: Vec<Vec<f64>> = (0..6).map(|c| vec![c as f64 * 6.0, 0.0]).collect();
    let (x, labels) = fixtures::blobs(&centers, 20, 0.5, 1);
    let n = names(6);
    let mut means = Vec::new();
    for s in 0..20u64 {
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut seed::rng(s));
        let r = cross_validate(x.view(), &shuffled, &n, &CvConfig::new(1, s)).unwrap();
        means.push(r.mean);
    }
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    let chance = 100.0 / 6.0;
    assert!((avg - chance).abs() < 6.0, "mean {avg} vs chance {chance}");
    let real = cross_validate(x.view(), &labels, &n, &CvConfig::new(1, 0)).unwrap();
    assert!(real.mean > 95.0);
}

#[test]
fn cv_is_deterministic() {
    let (x, labels) = fixtures::annulus(30, 1);
    let n = names(2);
    let a = cross_validate(x.view(), &labels, &n, &CvConfig::new(2, 3)).unwrap();
    let b = cross_validate(x.view(), &labels, &n, &CvConfig::new(2, 3)).unwrap();
    assert_eq!(a, b);
    let mean = a.fold_accuracies.iter().sum::<f64>() / 10.0;
    let var = a
        .fold_accuracies
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / 9.0;
    assert!((a.mean - mean).abs() < 1e-12);
    assert!((a.std - var.sqrt()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn folds_are_stratified_partitions(
        counts in prop::collection::vec(10usize..40, 2..6),
        folds in 2usize..11,
        seed in 0u64..1000,
    ) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &m)| std::iter::repeat_n(c, m)).collect();
        let f = stratified_folds_for_labels(&labels, &names(counts.len()), folds, seed).unwrap();
        prop_assert_eq!(f.len(), folds);
        let mut seen = vec![0usize; labels.len()];
        for fold in &f {
            prop_assert_eq!(fold.train.len() + fold.test.len(), labels.len());
            for &i in &fold.test {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for (c, &m) in counts.iter().enumerate() {
            let per: Vec<usize> = f.iter().map(|fold| fold.test.iter().filter(|&&i| labels[i] == c).count()).collect();
            let lo = m / folds;
            prop_assert!(per.iter().all(|&p| p == lo || p == lo + 1), "class {} per-fold {:?}", c, per);
        }
        let sizes: Vec<usize> = f.iter().map(|fold| fold.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn label_flip_mirrors_the_decision(seed in 0u64..1000) {
        let (x, labels) = fixtures::blobs(&[vec![-2.0, 0.0], vec![2.0, 0.5]], 15, 1.2, seed);
        let y = pm(&labels);
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        let spec = KernelSpec::polynomial(1);
        let a = smo_train(x.view(), &y, &spec, &SmoConfig::default()).unwrap();
        let b = smo_train(x.view(), &flipped, &spec, &SmoConfig::default()).unwrap();
        let fa = a.decision_function(x.view());
        let fb = b.decision_function(x.view());
        for (p, q) in fa.iter().zip(fb.iter()) {
            prop_assert!((p + q).abs() < 1e-8, "{} vs {}", p, q);
        }
    }

    #[test]
    fn polynomial_kernel_is_positive_semidefinite(seed in 0u64..1000, degree in 1u32..6) {
        let x = fixtures::gaussian(12, 3, seed);
        let k = KernelSpec::polynomial(degree).matrix(x.view(), x.view());
        let (values, _) = common::jacobi_eigen(k.view());
        let top = values[0].abs().max(1.0);
        prop_assert!(values.iter().all(|&v| v > -1e-9 * top));
    }
}

mod common;

use common::{align_signs, covariance, jacobi_eigen, max_abs_diff, procrustes_residual};
use ndarray::{array, Array2};
use proptest::prelude::*;
use spectra_core::fixtures;
use spectra_core::linear_embed::{cmds, pca, residual_variance, DistanceMatrix};

#[test]
fn pca_matches_covariance_eigenpairs() {
    let x = fixtures::gaussian(60, 6, 3);
    let (values, vectors) = jacobi_eigen(covariance(x.view()).view());
    let e = pca(x.view(), 6).unwrap();
    for (got, want) in e.eigenvalues.iter().zip(&values) {
        assert!(
            (got - want).abs() <= 1e-10 * want.abs().max(1.0),
            "{got} vs {want}"
        );
    }
    // Scores are the centered data projected on the oracle eigenvectors.
    let means = x.mean_axis(ndarray::Axis(0)).unwrap();
    let scores = (&x - &means).dot(&vectors);
    let aligned = align_signs(&e.coords, &scores);
    assert!(max_abs_diff(&aligned, &scores) < 1e-9);
}

#[test]
fn pca_gram_path_for_wide_data() {
    // D > N goes through the N x N Gram matrix.
    let x = fixtures::gaussian(12, 40, 5);
    let (values, _) = jacobi_eigen(covariance(x.view()).view());
    let e = pca(x.view(), 5).unwrap();
    for (got, want) in e.eigenvalues.iter().zip(&values) {
        assert!((got - want).abs() < 1e-9 * want.max(1.0));
    }
    let means = x.mean_axis(ndarray::Axis(0)).unwrap();
    let narrow = (&x - &means).dot(&jacobi_eigen(covariance(x.view()).view()).1);
    let want = narrow.slice(ndarray::s![.., ..5]).to_owned();
    assert!(max_abs_diff(&align_signs(&e.coords, &want), &want) < 1e-8);
}

#[test]
fn cmds_pca_duality() {
    let x = fixtures::gaussian(50, 10, 11);
    let n = x.nrows() as f64;
    let p = pca(x.view(), 10).unwrap();
    let c = cmds(&DistanceMatrix::euclidean(x.view()), 10).unwrap();
    for (pc, mc) in p.eigenvalues.iter().zip(&c.eigenvalues) {
        let rel = (mc - (n - 1.0) * pc).abs() / ((n - 1.0) * pc);
        assert!(rel < 1e-6, "relative error {rel}");
    }
    let aligned = align_signs(&c.coords, &p.coords);
    assert!(max_abs_diff(&aligned, &p.coords) < 1e-6);
}

#[test]
fn cmds_recovers_unit_square() {
    let square = array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let e = cmds(&DistanceMatrix::euclidean(square.view()), 2).unwrap();
    assert!(procrustes_residual(square.view(), e.coords.view()) < 1e-8);
    assert_eq!(e.negative_eigenvalues, 0);
}

#[test]
fn cmds_full_rank_residual_vanishes() {
    let x = fixtures::gaussian(30, 3, 2);
    let dm = DistanceMatrix::euclidean(x.view());
    let e = cmds(&dm, 3).unwrap();
    let r = e.residual_variance.unwrap();
    assert!(r[2] < 1e-12);
    assert!(r[0] > r[2]);
    let again = residual_variance(&dm, e.coords.view(), &[1, 2, 3]).unwrap();
    assert_eq!(again, r);
}

#[test]
fn non_euclidean_distances_are_clamped() {
    // Path metric of a 4-cycle plus one point at distance 3 from all; the
    // 4-cycle metric has no Euclidean realization.
    let d = array![
        [0.0, 1.0, 2.0, 1.0, 3.0],
        [1.0, 0.0, 1.0, 2.0, 3.0],
        [2.0, 1.0, 0.0, 1.0, 3.0],
        [1.0, 2.0, 1.0, 0.0, 3.0],
        [3.0, 3.0, 3.0, 3.0, 0.0],
    ];
    let dm = DistanceMatrix::new(d, spectra_core::linear_embed::Metric::Geodesic).unwrap();
    let e = cmds(&dm, 3).unwrap();
    assert!(e.negative_eigenvalues >= 1);
    let ev = e.explained_variance.unwrap();
    assert!(ev.iter().all(|v| (0.0..=1.0).contains(v)));
}

fn rotation(theta: f64) -> Array2<f64> {
    array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cmds_spectrum_is_rigid_motion_invariant(
        seed in 0u64..1000,
        theta in -3.2f64..3.2,
        dx in -50.0f64..50.0,
        dy in -50.0f64..50.0,
    ) {
        let x = fixtures::gaussian(15, 2, seed);
        let y = x.dot(&rotation(theta)) + &array![dx, dy];
        let a = cmds(&DistanceMatrix::euclidean(x.view()), 2).unwrap();
        let b = cmds(&DistanceMatrix::euclidean(y.view()), 2).unwrap();
        for (p, q) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((p - q).abs() < 1e-8 * p.abs().max(1.0));
        }
        prop_assert!(procrustes_residual(a.coords.view(), b.coords.view()) < 1e-7);
    }

    #[test]
    fn pca_explained_variance_is_a_distribution(seed in 0u64..1000, n in 5usize..30, d in 1usize..8) {
        let x = fixtures::gaussian(n, d, seed);
        let k = d.min(n - 1);
        let e = pca(x.view(), k).unwrap();
        let ev = e.explained_variance.unwrap();
        prop_assert!(ev.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        prop_assert!(ev.iter().sum::<f64>() <= 1.0 + 1e-9);
        let (values, _) = jacobi_eigen(covariance(x.view()).view());
        let total: f64 = values.iter().filter(|v| **v > 0.0).sum();
        prop_assert!((ev[0] - values[0] / total).abs() < 1e-9);
    }

    #[test]
    fn pca_scores_are_centered(seed in 0u64..1000, shift in -1e3f64..1e3) {
        let x = fixtures::gaussian(20, 4, seed) + shift;
        let e = pca(x.view(), 3).unwrap();
        for c in e.coords.columns() {
            prop_assert!(c.sum().abs() < 1e-8 * (1.0 + shift.abs()));
        }
    }
}

mod common;

use std::collections::HashMap;

use common::{euclid, rows};
use ndarray::{array, Array2};
use proptest::prelude::*;
use spectra_core::cluster_eval::{cluster_and_score, davies_bouldin, kmeans, KMeansConfig};
use spectra_core::fixtures;

/// Textbook DBI straight from its definition.
fn dbi_oracle(x: &Array2<f64>, labels: &[usize]) -> f64 {
    let pts = rows(x.view());
    let mut groups: HashMap<usize, Vec<&Vec<f64>>> = HashMap::new();
    for (p, &l) in pts.iter().zip(labels) {
        groups.entry(l).or_default().push(p);
    }
    let mut keys: Vec<usize> = groups.keys().copied().collect();
    keys.sort();
    let dim = x.ncols();
    let cents: Vec<Vec<f64>> = keys
        .iter()
        .map(|k| {
            let g = &groups[k];
            (0..dim)
                .map(|j| g.iter().map(|p| p[j]).sum::<f64>() / g.len() as f64)
                .collect()
        })
        .collect();
    let scat: Vec<f64> = keys
        .iter()
        .zip(&cents)
        .map(|(k, c)| groups[k].iter().map(|p| euclid(p, c)).sum::<f64>() / groups[k].len() as f64)
        .collect();
    let m = keys.len();
    (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i)
                .map(|j| (scat[i] + scat[j]) / euclid(&cents[i], &cents[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / m as f64
}

/// Same partition up to a renaming of the cluster labels.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&p, &q)| *fwd.entry(p).or_insert(q) == q && *back.entry(q).or_insert(p) == p)
}

#[test]
fn dbi_hand_case() {
    let x = array![[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]];
    let dbi = davies_bouldin(x.view(), &[0, 0, 1, 1]).unwrap();
    assert!((dbi - 0.2).abs() <= 1e-12, "{dbi}");
}

#[test]
fn dbi_scales_inversely_with_separation() {
    let base = davies_bouldin(
        array![[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]].view(),
        &[0, 0, 1, 1],
    )
    .unwrap();
    for t in [1.0, 2.0, 10.0] {
        let x = array![[0.0, 0.0], [0.0, 2.0], [10.0 * t, 0.0], [10.0 * t, 2.0]];
        let dbi = davies_bouldin(x.view(), &[0, 0, 1, 1]).unwrap();
        assert!((dbi - base / t).abs() < 1e-12, "t={t}: {dbi}");
    }
}

#[test]
fn kmeans_recovers_separated_blobs() {
    let centers = vec![
        vec![0.0, 0.0],
        vec![20.0, 0.0],
        vec![0.0, 20.0],
        vec![20.0, 20.0],
    ];
    let (x, truth) = fixtures::blobs(&centers, 40, 1.0, 8);
    let r = cluster_and_score(x.view(), &KMeansConfig::new(4, 1)).unwrap();
    assert_eq!(r.restarts, 10);
    assert!(r.converged);
    assert!(same_partition(&r.assignments, &truth));
    assert!((r.dbi.unwrap() - dbi_oracle(&x, &truth)).abs() < 1e-12);
    assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn kmeans_fixed_point_conditions() {
    let x = fixtures::gaussian(120, 3, 6);
    let r = kmeans(x.view(), &KMeansConfig::new(5, 3)).unwrap();
    assert!(r.converged);
    let pts = rows(x.view());
    for (p, &a) in pts.iter().zip(&r.assignments) {
        let own = euclid(p, &r.centroids[a]);
        assert!(r.centroids.iter().all(|c| own <= euclid(p, c) + 1e-12));
    }
    for (c, cent) in r.centroids.iter().enumerate() {
        let members: Vec<&Vec<f64>> = pts
            .iter()
            .zip(&r.assignments)
            .filter(|(_, &a)| a == c)
            .map(|(p, _)| p)
            .collect();
        assert!(!members.is_empty());
        for j in 0..3 {
            let mean = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
            assert!((cent[j] - mean).abs() < 1e-12);
        }
    }
    let inertia: f64 = pts
        .iter()
        .zip(&r.assignments)
        .map(|(p, &a)| euclid(p, &r.centroids[a]).powi(2))
        .sum();
    assert!((inertia - r.inertia).abs() < 1e-9 * inertia);
}

#[test]
fn kmeans_is_deterministic_per_seed() {
    let x = fixtures::gaussian(90, 4, 1);
    let a = kmeans(x.view(), &KMeansConfig::new(6, 42)).unwrap();
    let b = kmeans(x.view(), &KMeansConfig::new(6, 42)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn more_restarts_never_hurt() {
    let x = fixtures::gaussian(100, 2, 13);
    let one = kmeans(
        x.view(),
        &KMeansConfig {
            restarts: 1,
            ..KMeansConfig::new(7, 5)
        },
    )
    .unwrap();
    let ten = kmeans(x.view(), &KMeansConfig::new(7, 5)).unwrap();
    assert!(ten.inertia <= one.inertia);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dbi_matches_oracle(seed in 0u64..10_000, k in 2usize..6) {
        let x = fixtures::gaussian(40, 3, seed);
        let labels: Vec<usize> = (0..40).map(|i| i % k).collect();
        let got = davies_bouldin(x.view(), &labels).unwrap();
        prop_assert!((got - dbi_oracle(&x, &labels)).abs() < 1e-12 * got.max(1.0));
    }

    #[test]
    fn dbi_invariant_under_similarity_and_relabeling(
        seed in 0u64..10_000,
        theta in -3.2f64..3.2,
        scale in 0.01f64..100.0,
        shift in prop::array::uniform2(-1e3f64..1e3),
    ) {
        let x = fixtures::gaussian(30, 2, seed);
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let rot = array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
        let y = x.dot(&rot) * scale + &ndarray::Array1::from(shift.to_vec());
        let renamed: Vec<usize> = labels.iter().map(|&l| [7, 2, 4][l]).collect();
        let a = davies_bouldin(x.view(), &labels).unwrap();
        let b = davies_bouldin(y.view(), &renamed).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * a);
    }

    #[test]
    fn kmeans_partition_sizes(seed in 0u64..10_000, k in 1usize..8) {
        let x = fixtures::gaussian(25, 2, seed);
        let r = kmeans(x.view(), &KMeansConfig { restarts: 3, ..KMeansConfig::new(k, seed) }).unwrap();
        prop_assert_eq!(r.assignments.len(), 25);
        let mut counts = vec![0usize; k];
        for &a in &r.assignments {
            counts[a] += 1;
        }
        prop_assert!(counts.iter().all(|&c| c > 0));
        prop_assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

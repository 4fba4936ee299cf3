//! Seeded geometric fixtures for tests and benchmarks.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::seed;

/// Swiss roll with `t = 1.5*pi*(1 + 2u)` and height `21v`, `u, v ~ U(0,1)`.
/// Returns the 3-D points and the intrinsic `(t, h)` coordinates.
pub fn swiss_roll(n: usize, noise: f64, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = seed::derived_rng(seed, "swiss-roll", 0);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let mut x = Array2::zeros((n, 3));
    let mut latent = Array2::zeros((n, 2));
    for i in 0..n {
        let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
        let h = 21.0 * rng.random::<f64>();
        x[[i, 0]] = t * t.cos();
        x[[i, 1]] = h;
        x[[i, 2]] = t * t.sin();
        if noise > 0.0 {
            for j in 0..3 {
                x[[i, j]] += normal.sample(&mut rng);
            }
        }
        latent[[i, 0]] = t;
        latent[[i, 1]] = h;
    }
    (x, latent)
}

/// Isotropic Gaussian blobs of `per_cluster` points around the given centers.
/// Labels follow center order; rows are grouped by label.
pub fn blobs(
    centers: &[Vec<f64>],
    per_cluster: usize,
    sd: f64,
    seed: u64,
) -> (Array2<f64>, Vec<usize>) {
    let dim = centers.first().map_or(0, Vec::len);
    let mut rng = seed::derived_rng(seed, "blobs", 0);
    let mut x = Array2::zeros((centers.len() * per_cluster, dim));
    let mut labels = Vec::with_capacity(centers.len() * per_cluster);
    for (c, center) in centers.iter().enumerate() {
        for p in 0..per_cluster {
            let row = c * per_cluster + p;
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[[row, j]] = center[j] + sd * z;
            }
            labels.push(c);
        }
    }
    (x, labels)
}

/// `n` points evenly spaced on a circle of the given radius in the plane.
pub fn circle(n: usize, radius: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, 2), |(i, j)| {
        let a = 2.0 * PI * i as f64 / n as f64;
        radius * if j == 0 { a.cos() } else { a.sin() }
    })
}

/// Two-class concentric rings: class 0 has radius in `[0.5, 1]`, class 1 in
/// `[2, 2.5]`. Not linearly separable; separable with a degree-2 kernel.
pub fn annulus(per_class: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = seed::derived_rng(seed, "annulus", 0);
    let mut x = Array2::zeros((2 * per_class, 2));
    let mut labels = Vec::with_capacity(2 * per_class);
    for c in 0..2 {
        for p in 0..per_class {
            let r = if c == 0 { 0.5 } else { 2.0 } + 0.5 * rng.random::<f64>();
            let a = 2.0 * PI * rng.random::<f64>();
            x[[c * per_class + p, 0]] = r * a.cos();
            x[[c * per_class + p, 1]] = r * a.sin();
            labels.push(c);
        }
    }
    (x, labels)
}

/// XOR quadrants: label 0 when `sign(x) == sign(y)`. Points keep a margin of
/// `0.2` from both axes.
pub fn xor(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = seed::derived_rng(seed, "xor", 0);
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let q = i % 4;
        let sx = if q & 1 == 0 { 1.0 } else { -1.0 };
        let sy = if q & 2 == 0 { 1.0 } else { -1.0 };
        x[[i, 0]] = sx * rng.random_range(0.2..1.0);
        x[[i, 1]] = sy * rng.random_range(0.2..1.0);
        labels.push(usize::from(sx != sy));
    }
    (x, labels)
}

/// Points on a random 2-D plane through the origin in `dim` dimensions.
/// Returns the points and their plane coordinates.
pub fn plane(n: usize, dim: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = seed::derived_rng(seed, "plane", 0);
    // Gram-Schmidt on two Gaussian directions.
    let mut u: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    u.iter_mut().for_each(|a| *a /= nu);
    let proj: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(b, a)| *b -= proj * a);
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= nv);

    let mut x = Array2::zeros((n, dim));
    let mut latent = Array2::zeros((n, 2));
    for i in 0..n {
        let a = rng.random_range(-5.0..5.0);
        let b = rng.random_range(-5.0..5.0);
        latent[[i, 0]] = a;
        latent[[i, 1]] = b;
        for j in 0..dim {
            x[[i, j]] = a * u[j] + b * v[j];
        }
    }
    (x, latent)
}

/// Two well-separated groups of `per_group` points in `dim` dimensions:
/// around the origin and around `(gap, 0, ..., 0)`.
pub fn two_groups(per_group: usize, dim: usize, gap: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut far = vec![0.0; dim];
    far[0] = gap;
    blobs(&[vec![0.0; dim], far], per_group, 0.1, seed)
}

/// Standard Gaussian matrix.
pub fn gaussian(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::derived_rng(seed, "gaussian", 0);
    Array2::from_shape_simple_fn((n, dim), || StandardNormal.sample(&mut rng))
}

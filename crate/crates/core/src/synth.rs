//! A seeded stand-in for a LIBS dataset: six compounds, thirteen physical
//! samples, Gaussian emission lines over a continuum, multiplicative
//! shot-to-shot energy variation and additive detector noise.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::dataset::SpectralDataset;
use crate::seed;
use crate::spectral_stats::brass_lines;
use crate::Result;

pub const COMPOUNDS: [&str; 6] = ["Water", "ASP", "Cys", "Glu", "Polysac", "Ser_D"];
/// Physical samples per compound; 13 in total.
pub const SAMPLES_PER_COMPOUND: [usize; 6] = [3, 2, 2, 2, 2, 2];
pub const GRID_LOW_NM: f64 = 199.0;
pub const GRID_HIGH_NM: f64 = 981.54;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_instances: usize,
    pub n_features: usize,
    pub seed: u64,
    /// Standard deviation of the additive noise, in continuum units.
    pub noise: f64,
    /// Lines shared by every compound.
    pub shared_lines: usize,
    /// Extra lines specific to each compound.
    pub compound_lines: usize,
}

impl SynthConfig {
    pub fn new(n_instances: usize, n_features: usize, seed: u64) -> Self {
        SynthConfig {
            n_instances,
            n_features,
            seed,
            noise: 0.6,
            shared_lines: 24,
            compound_lines: 6,
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::new(670, 1000, 0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    center: f64,
    width: f64,
    amplitude: f64,
}

fn random_lines(rng: &mut impl Rng, n: usize, amp: (f64, f64)) -> Vec<Line> {
    (0..n)
        .map(|_| Line {
            center: rng.random_range(GRID_LOW_NM + 5.0..GRID_HIGH_NM - 5.0),
            width: rng.random_range(0.4..1.5),
            amplitude: rng.random_range(amp.0..amp.1),
        })
        .collect()
}

/// Evenly spaced grid over the stand-in wavelength range.
pub fn grid(n_features: usize) -> Vec<f64> {
    if n_features == 1 {
        return vec![GRID_LOW_NM];
    }
    let step = (GRID_HIGH_NM - GRID_LOW_NM) / (n_features - 1) as f64;
    (0..n_features)
        .map(|j| {
            if j + 1 == n_features {
                GRID_HIGH_NM
            } else {
                GRID_LOW_NM + step * j as f64
            }
        })
        .collect()
}

/// Generate the dataset. Instances are spread over the compounds as evenly
/// as possible (earlier compounds take the remainder) and, within a
/// compound, round-robin over its samples. `Ser_D` additionally carries the
/// Cu I / Zn I lines.
pub fn libs_like(cfg: &SynthConfig) -> Result<SpectralDataset> {
    let wl = grid(cfg.n_features);
    let mut rng = seed::derived_rng(cfg.seed, "synth-lines", 0);
    let shared = random_lines(&mut rng, cfg.shared_lines, (5.0, 40.0));
    let per_compound: Vec<Vec<Line>> = (0..COMPOUNDS.len())
        .map(|_| random_lines(&mut rng, cfg.compound_lines, (2.0, 10.0)))
        .collect();
    let brass: Vec<Line> = brass_lines()
        .iter()
        .map(|l| Line {
            center: l.wavelength_nm,
            width: 0.6,
            amplitude: 25.0,
        })
        .collect();
    // Each physical sample scales the shared lines slightly differently.
    let sample_gain: Vec<Vec<f64>> = (0..SAMPLES_PER_COMPOUND.iter().sum::<usize>())
        .map(|_| {
            (0..shared.len())
                .map(|_| rng.random_range(0.7..1.3))
                .collect()
        })
        .collect();

    let n_c = COMPOUNDS.len();
    let mut compounds = Vec::with_capacity(cfg.n_instances);
    let mut samples = Vec::with_capacity(cfg.n_instances);
    let mut sample_index = Vec::with_capacity(cfg.n_instances);
    let mut offset = 0;
    for (c, &n_s) in SAMPLES_PER_COMPOUND.iter().enumerate() {
        let count = cfg.n_instances / n_c + usize::from(c < cfg.n_instances % n_c);
        for i in 0..count {
            let s = i % n_s;
            compounds.push(COMPOUNDS[c].to_string());
            samples.push(format!("{}-{:02}", COMPOUNDS[c], s + 1));
            sample_index.push((c, offset + s));
        }
        offset += n_s;
    }

    let energy = LogNormal::new(0.0, 0.25).expect("valid lognormal");
    let noise = Normal::new(0.0, cfg.noise).expect("valid normal");
    let mut matrix = Array2::zeros((cfg.n_instances, cfg.n_features));
    for (row, &(c, s)) in sample_index.iter().enumerate() {
        let mut shot = seed::derived_rng(cfg.seed, "synth-shot", row as u64);
        let e = energy.sample(&mut shot);
        let tilt = shot.random_range(-0.5..0.5);
        let add = |line: &Line, gain: f64, out: &mut ndarray::ArrayViewMut1<f64>| {
            for (j, &w) in wl.iter().enumerate() {
                let z = (w - line.center) / line.width;
                if z.abs() < 6.0 {
                    out[j] += gain * line.amplitude * (-0.5 * z * z).exp();
                }
            }
        };
        let mut out = matrix.row_mut(row);
        for (j, &w) in wl.iter().enumerate() {
            let t = (w - GRID_LOW_NM) / (GRID_HIGH_NM - GRID_LOW_NM);
            out[j] = 1.0 + tilt * (t - 0.5);
        }
        for (l, line) in shared.iter().enumerate() {
            add(line, sample_gain[s][l], &mut out);
        }
        for line in &per_compound[c] {
            add(line, 1.0, &mut out);
        }
        if COMPOUNDS[c] == "Ser_D" {
            for line in &brass {
                add(line, shot.random_range(0.5..1.5), &mut out);
            }
        }
        for v in out.iter_mut() {
            *v = *v * e + noise.sample(&mut shot);
        }
    }

    SpectralDataset::new(wl, matrix, &compounds, samples, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::validate_dataset;

    #[test]
    fn default_shape() {
        let ds = libs_like(&SynthConfig::default()).unwrap();
        let r = validate_dataset(&ds);
        assert_eq!((r.n_instances, r.n_features, r.n_classes), (670, 1000, 6));
        assert_eq!(r.sample_histogram.len(), 13);
        assert!(r.negative_count > 0);
        assert_eq!(ds.wavelengths()[0], GRID_LOW_NM);
        assert_eq!(ds.wavelengths()[999], GRID_HIGH_NM);
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::new(30, 50, 9);
        assert_eq!(libs_like(&cfg).unwrap(), libs_like(&cfg).unwrap());
    }
}

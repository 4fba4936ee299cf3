//! Region statistics, entropy density and emission-line matching.
//!
//! Region totals keep negative intensities as recorded. Entropy density
//! clamps negatives to zero before normalizing each spectrum into a
//! probability vector over wavelengths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{SpectralDataset, Spectrum};
use crate::{Error, Result};

pub const DEFAULT_REGIONS: usize = 8;
pub const DEFAULT_BINS: usize = 10;
/// Value written for `log10(h)` where `h == 0`.
pub const LOG10_FLOOR: f64 = -12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Half-open index span `[start, end)` over the grid.
    pub start: usize,
    pub end: usize,
    pub low_nm: f64,
    pub high_nm: f64,
}

impl Region {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub n_features: usize,
    pub regions: Vec<Region>,
}

/// Split the grid into `n_regions` contiguous index ranges of equal size;
/// the last `D mod n_regions` regions take one extra index.
pub fn partition_regions(grid: &[f64], n_regions: usize) -> Result<RegionPartition> {
    let d = grid.len();
    if n_regions == 0 || n_regions > d {
        return Err(Error::InvalidArgument(format!(
            "cannot split {d} wavelengths into {n_regions} regions"
        )));
    }
    let base = d / n_regions;
    let extra_from = n_regions - d % n_regions;
    let mut start = 0;
    let regions = (0..n_regions)
        .map(|r| {
            let len = base + usize::from(r >= extra_from);
            let region = Region {
                start,
                end: start + len,
                low_nm: grid[start],
                high_nm: grid[start + len - 1],
            };
            start += len;
            region
        })
        .collect();
    Ok(RegionPartition {
        n_features: d,
        regions,
    })
}

/// `totals[i][r]`: summed intensity of instance `i` over region `r`.
pub fn region_totals(ds: &SpectralDataset, part: &RegionPartition) -> Result<Vec<Vec<f64>>> {
    if part.n_features != ds.n_features() {
        return Err(Error::Shape(format!(
            "partition covers {} wavelengths, dataset has {}",
            part.n_features,
            ds.n_features()
        )));
    }
    Ok((0..ds.n_instances())
        .map(|i| {
            let row = ds.row(i);
            part.regions
                .iter()
                .map(|r| row.slice(ndarray::s![r.start..r.end]).sum())
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` equal-width edges over `[min, max]` of the data.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn midpoint(&self, b: usize) -> f64 {
        0.5 * (self.edges[b] + self.edges[b + 1])
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedIntensity {
    pub histogram: Histogram,
    /// Mean of the histogram read as a distribution over bin midpoints.
    pub expected: f64,
    /// Plain sample mean of the totals, for comparison.
    pub raw_mean: f64,
}

/// Histogram the totals into `n_bins` equal-width bins spanning their range
/// and return the midpoint-weighted mean. If every total is equal the
/// histogram collapses: all edges sit at that value and bin 0 holds the mass.
pub fn expected_intensity(totals: &[f64], n_bins: usize) -> Result<ExpectedIntensity> {
    if totals.is_empty() {
        return Err(Error::InvalidArgument("no totals to histogram".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be at least 1".into()));
    }
    if totals.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("region totals"));
    }
    let lo = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw_mean = totals.iter().sum::<f64>() / totals.len() as f64;

    let mut counts = vec![0usize; n_bins];
    let edges: Vec<f64>;
    if hi > lo {
        let width = (hi - lo) / n_bins as f64;
        edges = (0..=n_bins)
            .map(|b| {
                if b == n_bins {
                    hi
                } else {
                    lo + width * b as f64
                }
            })
            .collect();
        for &t in totals {
            let b = (((t - lo) / width) as usize).min(n_bins - 1);
            counts[b] += 1;
        }
    } else {
        edges = vec![lo; n_bins + 1];
        counts[0] = totals.len();
    }
    let histogram = Histogram { edges, counts };
    let n = totals.len() as f64;
    let expected = (0..n_bins)
        .map(|b| histogram.counts[b] as f64 / n * histogram.midpoint(b))
        .sum::<f64>()
        // Midpoints lie inside [lo, hi]; clamp away last-ulp drift.
        .clamp(lo, hi);
    Ok(ExpectedIntensity {
        histogram,
        expected,
        raw_mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStatsEntry {
    pub compound: String,
    pub region: usize,
    pub low_nm: f64,
    pub high_nm: f64,
    pub stats: ExpectedIntensity,
}

/// Expected intensity for every (compound, region) pair, compounds in class
/// order and regions in grid order.
pub fn region_stats(
    ds: &SpectralDataset,
    part: &RegionPartition,
    n_bins: usize,
) -> Result<Vec<RegionStatsEntry>> {
    let totals = region_totals(ds, part)?;
    let mut out = Vec::with_capacity(ds.n_classes() * part.regions.len());
    for (c, name) in ds.classes().iter().enumerate() {
        let members = ds.indices_of(c);
        for (r, region) in part.regions.iter().enumerate() {
            let t: Vec<f64> = members.iter().map(|&i| totals[i][r]).collect();
            out.push(RegionStatsEntry {
                compound: name.clone(),
                region: r,
                low_nm: region.low_nm,
                high_nm: region.high_nm,
                stats: expected_intensity(&t, n_bins)?,
            });
        }
    }
    Ok(out)
}

/// Shannon entropy in bits. Requires non-negative entries summing to one
/// within 1e-9.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "probability entry {v} is not a finite non-negative number"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "probabilities sum to {s}, not 1"
        )));
    }
    Ok(p.iter().map(|&v| entropy_term(v)).sum())
}

#[inline]
fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Clamp negatives to zero and normalize to a probability vector.
pub fn clamp_normalize(intensities: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = intensities.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate(
            "spectrum has no positive intensity to normalize".into(),
        ));
    }
    Ok(intensities.iter().map(|v| v.max(0.0) / total).collect())
}

/// Per-wavelength Shannon contributions `-p log2 p` of one spectrum. They sum
/// to the spectrum's entropy.
pub fn entropy_contributions(intensities: &[f64]) -> Result<Vec<f64>> {
    Ok(clamp_normalize(intensities)?
        .into_iter()
        .map(entropy_term)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub compound: String,
    pub n_instances: usize,
    /// Mean over the compound's instances of the per-wavelength contributions.
    pub h: Vec<f64>,
    /// `log10(h)`, with [`LOG10_FLOOR`] where `h == 0`.
    pub log10_h: Vec<f64>,
}

pub fn log10_floor(h: f64) -> f64 {
    if h > 0.0 {
        h.log10()
    } else {
        LOG10_FLOOR
    }
}

pub fn entropy_density(ds: &SpectralDataset, compound: usize) -> Result<EntropyProfile> {
    if compound >= ds.n_classes() {
        return Err(Error::InvalidArgument(format!("no class index {compound}")));
    }
    let members = ds.indices_of(compound);
    if members.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "compound `{}` has no instances",
            ds.class_name(compound)
        )));
    }
    let per_instance = members
        .par_iter()
        .map(|&i| {
            let row = ds.row(i);
            entropy_contributions(row.as_slice().unwrap_or(&row.to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    let d = ds.n_features();
    let n = per_instance.len() as f64;
    // Fixed summation order, independent of scheduling.
    let h: Vec<f64> = (0..d)
        .map(|j| per_instance.iter().map(|c| c[j]).sum::<f64>() / n)
        .collect();
    let log10_h = h.iter().map(|&v| log10_floor(v)).collect();
    Ok(EntropyProfile {
        compound: ds.class_name(compound).to_string(),
        n_instances: members.len(),
        h,
        log10_h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLine {
    pub species: String,
    pub wavelength_nm: f64,
}

impl ReferenceLine {
    pub fn new(species: &str, wavelength_nm: f64) -> Self {
        ReferenceLine {
            species: species.to_string(),
            wavelength_nm,
        }
    }
}

/// Neutral copper and zinc lines characteristic of brass sample holders.
pub fn brass_lines() -> Vec<ReferenceLine> {
    vec![
        ReferenceLine::new("Cu I", 324.754),
        ReferenceLine::new("Cu I", 327.396),
        ReferenceLine::new("Cu I", 521.820),
        ReferenceLine::new("Zn I", 334.501),
        ReferenceLine::new("Zn I", 330.258),
        ReferenceLine::new("Zn I", 481.053),
    ]
}

pub fn read_reference_lines<R: std::io::Read>(reader: R) -> Result<Vec<ReferenceLine>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub wavelength_nm: f64,
    pub intensity: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMatch {
    pub line: ReferenceLine,
    pub tolerance_nm: f64,
    /// `None` when no detected peak lies within the tolerance.
    pub peak: Option<Peak>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Minimum prominence as a multiple of the spectrum's median absolute
    /// deviation.
    pub mad_multiplier: f64,
    /// Absolute floor on prominence, applied together with the MAD rule.
    pub min_prominence: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        PeakOptions {
            mad_multiplier: 5.0,
            min_prominence: 0.0,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn median_absolute_deviation(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut v = x.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = x.iter().map(|a| (a - m).abs()).collect();
    median(&mut dev)
}

/// Topographic prominence of the local maximum at `i`: its height above the
/// higher of the two lowest points reached before climbing to a taller
/// sample (or the array edge) on each side.
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left_min = h;
    for j in (0..i).rev() {
        if y[j] > h {
            break;
        }
        left_min = left_min.min(y[j]);
    }
    let mut right_min = h;
    for &v in &y[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Local maxima whose prominence exceeds the configured threshold. A plateau
/// counts once, at its first sample.
pub fn find_peaks(s: &Spectrum, opts: PeakOptions) -> Vec<Peak> {
    let y = s.intensities();
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let threshold = (opts.mad_multiplier * median_absolute_deviation(y)).max(opts.min_prominence);
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if y[i] > y[i - 1] {
            // Walk across a plateau, if any.
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let p = prominence(y, i);
                if p > threshold {
                    peaks.push(Peak {
                        index: i,
                        wavelength_nm: s.wavelengths()[i],
                        intensity: y[i],
                        prominence: p,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Match each reference line to the nearest detected peak within
/// `tolerance_nm` (ties go to the more prominent, then the lower-index peak).
pub fn match_emission_lines(
    s: &Spectrum,
    refs: &[ReferenceLine],
    tolerance_nm: f64,
    opts: PeakOptions,
) -> Result<Vec<LineMatch>> {
    if !(tolerance_nm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance_nm}"
        )));
    }
    let peaks = find_peaks(s, opts);
    Ok(refs
        .iter()
        .map(|line| {
            let peak = peaks
                .iter()
                .filter(|p| (p.wavelength_nm - line.wavelength_nm).abs() <= tolerance_nm)
                .min_by(|a, b| {
                    let da = (a.wavelength_nm - line.wavelength_nm).abs();
                    let db = (b.wavelength_nm - line.wavelength_nm).abs();
                    da.total_cmp(&db)
                        .then(b.prominence.total_cmp(&a.prominence))
                        .then(a.index.cmp(&b.index))
                })
                .cloned();
            LineMatch {
                line: line.clone(),
                tolerance_nm,
                peak,
            }
        })
        .collect())
}

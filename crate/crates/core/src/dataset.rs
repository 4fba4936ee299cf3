//! Spectral data model, ingestion and stratified fold assignment.
//!
//! The canonical on-disk layout is a wide CSV:
//!
//! ```text
//! sample_id,compound,199.0,199.03,...,981.54
//! set111,water,12.5,-3.1,...,40.2
//! ```
//!
//! A JSON manifest can instead list one CSV per instance against a shared
//! wavelength-grid file (see [`Manifest`]).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// One spectrum: intensities over a strictly increasing wavelength grid (nm).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    wavelengths: Vec<f64>,
    intensities: Vec<f64>,
}

impl Spectrum {
    pub fn new(wavelengths: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != intensities.len() {
            return Err(Error::Shape(format!(
                "{} wavelengths but {} intensities",
                wavelengths.len(),
                intensities.len()
            )));
        }
        check_grid(&wavelengths)?;
        Ok(Spectrum {
            wavelengths,
            intensities,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Format("empty wavelength grid".into()));
    }
    if grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("wavelength grid"));
    }
    if let Some(pos) = grid.windows(2).position(|w| w[1] <= w[0]) {
        let kind = if grid[pos + 1] == grid[pos] {
            "duplicate"
        } else {
            "out-of-order"
        };
        return Err(Error::Format(format!(
            "{kind} wavelength {} at column {}",
            grid[pos + 1],
            pos + 2
        )));
    }
    Ok(())
}

/// N instances over a shared grid of D wavelengths, each with a compound
/// label and the id of the physical sample it was shot from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    wavelengths: Vec<f64>,
    matrix: Array2<f64>,
    labels: Vec<usize>,
    classes: Vec<String>,
    sample_ids: Vec<String>,
}

impl SpectralDataset {
    /// Build a dataset from row-major data. Classes are indexed in order of
    /// first appearance unless `class_whitelist` is given, in which case the
    /// whitelist order is used and any other label is rejected.
    pub fn new(
        wavelengths: Vec<f64>,
        matrix: Array2<f64>,
        compounds: &[String],
        sample_ids: Vec<String>,
        class_whitelist: Option<&[String]>,
    ) -> Result<Self> {
        check_grid(&wavelengths)?;
        let (n, d) = matrix.dim();
        if n == 0 {
            return Err(Error::Format("dataset has no instances".into()));
        }
        if d != wavelengths.len() {
            return Err(Error::Shape(format!(
                "matrix has {d} columns but the grid has {} wavelengths",
                wavelengths.len()
            )));
        }
        if compounds.len() != n || sample_ids.len() != n {
            return Err(Error::Shape(format!(
                "{n} rows but {} labels and {} sample ids",
                compounds.len(),
                sample_ids.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("intensity matrix"));
        }

        let mut classes: Vec<String> = class_whitelist.map(<[String]>::to_vec).unwrap_or_default();
        let mut index: HashMap<String, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let mut labels = Vec::with_capacity(n);
        for (row, c) in compounds.iter().enumerate() {
            let id = match index.get(c) {
                Some(&id) => id,
                None if class_whitelist.is_some() => {
                    return Err(Error::UnknownClass {
                        row: row + 1,
                        class: c.clone(),
                    })
                }
                None => {
                    classes.push(c.clone());
                    index.insert(c.clone(), classes.len() - 1);
                    classes.len() - 1
                }
            };
            labels.push(id);
        }

        Ok(SpectralDataset {
            wavelengths,
            matrix,
            labels,
            classes,
            sample_ids,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Class index per instance.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_name(&self, label: usize) -> &str {
        &self.classes[label]
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    pub fn spectrum(&self, i: usize) -> Spectrum {
        Spectrum {
            wavelengths: self.wavelengths.clone(),
            intensities: self.matrix.row(i).to_vec(),
        }
    }

    /// Instances carrying class `label`, in dataset order.
    pub fn indices_of(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    WideCsv,
    Manifest,
}

impl Format {
    /// `.json` files are manifests; everything else is read as wide CSV.
    pub fn infer(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Manifest,
            _ => Format::WideCsv,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub format: Option<Format>,
    pub class_whitelist: Option<Vec<String>>,
}

/// Per-instance entry in a JSON manifest. Paths are relative to the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub compound: String,
    pub path: PathBuf,
}

/// JSON manifest: a grid file (one wavelength per line, optional header) and
/// one CSV per instance holding either a single intensity column or
/// `wavelength_nm,intensity` pairs that must agree with the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub grid: PathBuf,
    pub instances: Vec<ManifestEntry>,
}

pub fn load_dataset(path: &Path, opts: &LoadOptions) -> Result<SpectralDataset> {
    let format = opts.format.unwrap_or_else(|| Format::infer(path));
    let whitelist = opts.class_whitelist.as_deref();
    match format {
        Format::WideCsv => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_wide_csv(file, whitelist)
        }
        Format::Manifest => load_manifest(path, whitelist),
    }
}

fn parse_number(s: &str, row: usize, column: usize) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NotNumeric {
            row,
            column,
            value: t.to_string(),
        })
}

/// Parse the wide-CSV layout from any reader. `row` numbers in errors are
/// 1-based data rows (the header is row 0).
pub fn read_wide_csv<R: std::io::Read>(
    reader: R,
    class_whitelist: Option<&[String]>,
) -> Result<SpectralDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = records
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))??;
    if header.len() < 3 {
        return Err(Error::Format(
            "header must be `sample_id,compound,<wavelength>...`".into(),
        ));
    }
    let mut grid = Vec::with_capacity(header.len() - 2);
    for (col, cell) in header.iter().enumerate().skip(2) {
        if cell.is_empty() {
            return Err(Error::Format(format!(
                "missing wavelength in header column {}",
                col + 1
            )));
        }
        grid.push(parse_number(cell, 0, col + 1)?);
    }
    check_grid(&grid)?;
    let d = grid.len();

    let mut values = Vec::new();
    let mut compounds = Vec::new();
    let mut sample_ids = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 2 || rec.len() - 2 != d {
            return Err(Error::Arity {
                row,
                expected: d,
                found: rec.len().saturating_sub(2),
            });
        }
        sample_ids.push(rec[0].to_string());
        compounds.push(rec[1].to_string());
        for (col, cell) in rec.iter().enumerate().skip(2) {
            values.push(parse_number(cell, row, col + 1)?);
        }
    }
    let n = compounds.len();
    let matrix = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Shape(e.to_string()))?;
    SpectralDataset::new(grid, matrix, &compounds, sample_ids, class_whitelist)
}

fn read_column_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        // A non-numeric first line is a header.
        if i == 0 && rec.iter().any(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, v)| parse_number(v, i + 1, c + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn load_manifest(path: &Path, whitelist: Option<&[String]>) -> Result<SpectralDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_reader(file)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let grid: Vec<f64> = read_column_file(&base.join(&manifest.grid))?
        .into_iter()
        .map(|r| r[0])
        .collect();
    check_grid(&grid)?;
    let d = grid.len();

    let mut values = Vec::with_capacity(manifest.instances.len() * d);
    let mut compounds = Vec::new();
    let mut sample_ids = Vec::new();
    for (i, entry) in manifest.instances.iter().enumerate() {
        let row = i + 1;
        let rows = read_column_file(&base.join(&entry.path))?;
        if rows.len() != d {
            return Err(Error::Arity {
                row,
                expected: d,
                found: rows.len(),
            });
        }
        for (j, r) in rows.iter().enumerate() {
            match r.as_slice() {
                [v] => values.push(*v),
                [w, v] => {
                    if (w - grid[j]).abs() > 1e-9 * grid[j].abs().max(1.0) {
                        return Err(Error::Format(format!(
                            "{}: wavelength {w} at line {} does not match grid value {}",
                            entry.path.display(),
                            j + 1,
                            grid[j]
                        )));
                    }
                    values.push(*v);
                }
                _ => {
                    return Err(Error::Format(format!(
                        "{}: expected 1 or 2 columns, found {}",
                        entry.path.display(),
                        r.len()
                    )))
                }
            }
        }
        compounds.push(entry.compound.clone());
        sample_ids.push(entry.sample_id.clone());
    }
    let n = compounds.len();
    let matrix = Array2::from_shape_vec((n, d), values).map_err(|e| Error::Shape(e.to_string()))?;
    SpectralDataset::new(grid, matrix, &compounds, sample_ids, whitelist)
}

/// Write the canonical wide CSV. Floats use Rust's shortest round-trip
/// representation, so reading the file back is value-identical.
pub fn write_dataset<W: Write>(ds: &SpectralDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sample_id".to_string(), "compound".to_string()];
    header.extend(ds.wavelengths.iter().map(|w| w.to_string()));
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(ds.n_features() + 2);
    for i in 0..ds.n_instances() {
        rec.clear();
        rec.push(ds.sample_ids[i].clone());
        rec.push(ds.classes[ds.labels[i]].clone());
        rec.extend(ds.matrix.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_dataset_file(ds: &SpectralDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(ds, BufWriter::new(file))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub n_instances: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_histogram: BTreeMap<String, usize>,
    pub sample_histogram: BTreeMap<String, usize>,
    pub min_intensity: f64,
    pub max_intensity: f64,
    pub negative_count: usize,
    pub wavelength_min_nm: f64,
    pub wavelength_max_nm: f64,
}

pub fn validate_dataset(ds: &SpectralDataset) -> DatasetReport {
    let mut class_histogram = BTreeMap::new();
    for &l in &ds.labels {
        *class_histogram.entry(ds.classes[l].clone()).or_insert(0) += 1;
    }
    let mut sample_histogram = BTreeMap::new();
    for s in &ds.sample_ids {
        *sample_histogram.entry(s.clone()).or_insert(0) += 1;
    }
    let (mut lo, mut hi, mut neg) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for &v in &ds.matrix {
        lo = lo.min(v);
        hi = hi.max(v);
        if v < 0.0 {
            neg += 1;
        }
    }
    DatasetReport {
        n_instances: ds.n_instances(),
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
        class_histogram,
        sample_histogram,
        min_intensity: lo,
        max_intensity: hi,
        negative_count: neg,
        wavelength_min_nm: ds.wavelengths[0],
        wavelength_max_nm: *ds.wavelengths.last().unwrap_or(&f64::NAN),
    }
}

/// One cross-validation split; both index lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn stratified_folds(ds: &SpectralDataset, folds: usize, seed: u64) -> Result<Vec<Fold>> {
    stratified_folds_for_labels(ds.labels(), ds.classes(), folds, seed)
}

/// Stratified k-fold assignment over class indices `labels[i] < class_names.len()`.
///
/// Each class is shuffled with its own derived generator and dealt
/// round-robin into the folds. The dealing position carries over from one
/// class to the next, so fold sizes differ by at most one overall and each
/// class's per-fold count differs by at most one across folds.
pub fn stratified_folds_for_labels(
    labels: &[usize],
    class_names: &[String],
    folds: usize,
    seed: u64,
) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let n_classes = class_names.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} at index {i} outside {n_classes} classes"
            )));
        }
        members[l].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.len() < folds {
            return Err(Error::ClassTooSmall {
                class: class_names[c].clone(),
                count: m.len(),
                folds,
            });
        }
    }

    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); folds];
    let mut cursor = 0usize;
    for (c, m) in members.iter_mut().enumerate() {
        let mut rng = seed::derived_rng(seed, "stratified-folds", c as u64);
        m.shuffle(&mut rng);
        for &i in m.iter() {
            tests[cursor % folds].push(i);
            cursor += 1;
        }
    }

    let n = labels.len();
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let in_test: HashSet<usize> = test.iter().copied().collect();
            let train = (0..n).filter(|i| !in_test.contains(i)).collect();
            Fold { train, test }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fixture_csv() -> &'static str {
        "sample_id,compound,200,201,202,203,204\n\
         s1,a,1,2,3,4,5\n\
         s1,a,1,2,3,4,-5\n\
         s2,b,0.5,0,0,0,1e3\n"
    }

    #[test]
    fn three_row_fixture() {
        let ds = read_wide_csv(fixture_csv().as_bytes(), None).unwrap();
        assert_eq!(ds.n_instances(), 3);
        assert_eq!(ds.n_features(), 5);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.labels(), &[0, 0, 1]);
        assert_eq!(ds.row(2)[4], 1000.0);
        // negatives are preserved
        assert_eq!(ds.row(1)[4], -5.0);
    }

    #[test]
    fn short_row_is_an_arity_error() {
        let csv = "sample_id,compound,1,2,3\ns,a,1,2,3\ns,a,1,2\n";
        match read_wide_csv(csv.as_bytes(), None) {
            Err(Error::Arity {
                row: 2,
                expected: 3,
                found: 2,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_and_value_errors() {
        let dup = "sample_id,compound,1,1,3\ns,a,1,2,3\n";
        assert!(
            matches!(read_wide_csv(dup.as_bytes(), None), Err(Error::Format(m)) if m.contains("duplicate"))
        );
        let missing = "sample_id,compound,1,,3\ns,a,1,2,3\n";
        assert!(
            matches!(read_wide_csv(missing.as_bytes(), None), Err(Error::Format(m)) if m.contains("missing"))
        );
        let bad = "sample_id,compound,1,2,3\ns,a,1,x,3\n";
        assert!(matches!(
            read_wide_csv(bad.as_bytes(), None),
            Err(Error::NotNumeric {
                row: 1,
                column: 4,
                ..
            })
        ));
    }

    #[test]
    fn whitelist_rejects_unknown_class_and_fixes_order() {
        let wl = vec!["b".to_string(), "a".to_string()];
        let ds = read_wide_csv(fixture_csv().as_bytes(), Some(&wl)).unwrap();
        assert_eq!(ds.labels(), &[1, 1, 0]);
        let wl = vec!["a".to_string()];
        assert!(matches!(
            read_wide_csv(fixture_csv().as_bytes(), Some(&wl)),
            Err(Error::UnknownClass { row: 3, .. })
        ));
    }

    #[test]
    fn report_counts() {
        let ds = read_wide_csv(fixture_csv().as_bytes(), None).unwrap();
        let r = validate_dataset(&ds);
        assert_eq!(r.negative_count, 1);
        assert_eq!(r.n_instances, 3);
        assert_eq!(r.n_features, 5);
        assert_eq!(r.class_histogram["a"], 2);
        assert_eq!(r.sample_histogram["s2"], 1);
        assert_eq!(r.min_intensity, -5.0);
        assert_eq!(r.max_intensity, 1000.0);
    }

    fn balanced(n: usize, classes: usize) -> SpectralDataset {
        let compounds: Vec<String> = (0..n).map(|i| format!("c{}", i % classes)).collect();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        let m = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        SpectralDataset::new(vec![1.0, 2.0], m, &compounds, ids, None).unwrap()
    }

    #[test]
    fn balanced_report_histogram() {
        let r = validate_dataset(&balanced(10, 2));
        assert_eq!(
            r.class_histogram.values().copied().collect::<Vec<_>>(),
            vec![5, 5]
        );
    }

    #[test]
    fn twenty_instances_ten_folds() {
        let ds = balanced(20, 2);
        let folds = stratified_folds(&ds, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            assert_eq!(f.test.len(), 2);
            let c0 = f.test.iter().filter(|&&i| ds.labels()[i] == 0).count();
            assert_eq!(c0, 1);
            assert_eq!(f.train.len() + f.test.len(), 20);
        }
        assert_eq!(folds, stratified_folds(&ds, 10, 3).unwrap());
        assert_ne!(folds, stratified_folds(&ds, 10, 4).unwrap());
    }

    #[test]
    fn folds_of_670_instances_hold_67() {
        // 670 instances over 6 unequal classes.
        let sizes = [120, 110, 110, 110, 100, 120];
        let compounds: Vec<String> = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat(format!("c{c}")).take(s))
            .collect();
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat(c).take(s))
            .collect();
        let names: Vec<String> = (0..6).map(|c| format!("c{c}")).collect();
        assert_eq!(compounds.len(), 670);
        let folds = stratified_folds_for_labels(&labels, &names, 10, 0).unwrap();
        assert!(folds.iter().all(|f| f.test.len() == 67));
    }

    #[test]
    fn too_small_class() {
        let ds = balanced(6, 3);
        assert!(matches!(
            stratified_folds(&ds, 3, 0),
            Err(Error::ClassTooSmall {
                count: 2,
                folds: 3,
                ..
            })
        ));
        assert!(stratified_folds(&ds, 1, 0).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("grid.csv"),
            "wavelength_nm\n300\n301\n302\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("a.csv"), "1\n2\n3\n").unwrap();
        std::fs::write(
            dir.path().join("b.csv"),
            "wavelength_nm,intensity\n300,4\n301,-5\n302,6\n",
        )
        .unwrap();
        let manifest = r#"{"grid":"grid.csv","instances":[
            {"sample_id":"x","compound":"water","path":"a.csv"},
            {"sample_id":"y","compound":"asp","path":"b.csv"}]}"#;
        let mpath = dir.path().join("m.json");
        std::fs::write(&mpath, manifest).unwrap();
        let ds = load_dataset(&mpath, &LoadOptions::default()).unwrap();
        assert_eq!(ds.matrix(), &array![[1.0, 2.0, 3.0], [4.0, -5.0, 6.0]]);
        assert_eq!(ds.classes(), &["water".to_string(), "asp".to_string()]);

        // Mismatched grid in a two-column file is rejected.
        std::fs::write(dir.path().join("b.csv"), "300,4\n301.5,-5\n302,6\n").unwrap();
        assert!(load_dataset(&mpath, &LoadOptions::default()).is_err());
    }
}

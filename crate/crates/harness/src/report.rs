use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spectra_core::linear_embed::Method;
use spectra_core::spectral_stats::{log10_floor, LOG10_FLOOR};
use spectra_core::svm::{best_by_group, SweepCellResult};

use crate::pipeline::RunState;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    /// Expected intensity per (compound, region).
    Table1,
    /// Histograms behind `table1`.
    Histograms,
    /// Variance explained by the first component of each embedding.
    Table2,
    /// Best DBI per method at the summary cluster count.
    Table3,
    /// Best cross-validated accuracy per (method, k).
    Table4,
    Scree,
    Sweep,
    Dbi,
    Errorbar,
    /// Every accuracy cell with its per-fold accuracies.
    Cv,
    Entropy,
    Lines,
}

impl ReportKind {
    pub const ALL: [ReportKind; 12] = [
        ReportKind::Table1,
        ReportKind::Histograms,
        ReportKind::Table2,
        ReportKind::Table3,
        ReportKind::Table4,
        ReportKind::Scree,
        ReportKind::Sweep,
        ReportKind::Dbi,
        ReportKind::Errorbar,
        ReportKind::Cv,
        ReportKind::Entropy,
        ReportKind::Lines,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Table1 => "table1",
            ReportKind::Histograms => "histograms",
            ReportKind::Table2 => "table2",
            ReportKind::Table3 => "table3",
            ReportKind::Table4 => "table4",
            ReportKind::Scree => "scree",
            ReportKind::Sweep => "sweep",
            ReportKind::Dbi => "dbi",
            ReportKind::Errorbar => "errorbar",
            ReportKind::Cv => "cv",
            ReportKind::Entropy => "entropy",
            ReportKind::Lines => "lines",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

impl std::str::FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<&str> = ReportKind::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown report `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn method_label(m: Method) -> &'static str {
    m.name()
}

/// CSV with `# key=value` comment lines ahead of the header. The seed line
/// always comes first.
struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    fn new(
        path: PathBuf,
        seed: u64,
        meta: &[(&str, String)],
        header: &[String],
    ) -> Result<Self, HarnessError> {
        let mut buf = Vec::new();
        writeln!(buf, "# seed={seed}").expect("write to memory");
        for (k, v) in meta {
            writeln!(buf, "# {k}={v}").expect("write to memory");
        }
        let mut inner = csv::WriterBuilder::new().from_writer(buf);
        inner.write_record(header)?;
        Ok(CsvOut { path, inner })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), HarnessError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<PathBuf, HarnessError> {
        let bytes = self
            .inner
            .into_inner()
            .map_err(|e| HarnessError::io(&self.path, e.into_error()))?;
        if let Some(parent) = self.path.parent() {
            fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        }
        fs::write(&self.path, bytes).map_err(|e| HarnessError::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub(crate) fn write_dataset_report(state: &RunState, out: &Path) -> Result<PathBuf, HarnessError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        seed: u64,
        dataset: &'a str,
        #[serde(flatten)]
        report: &'a spectra_core::dataset::DatasetReport,
    }
    let path = out.join("dataset_report.json");
    let doc = Doc {
        seed: state.config.seed,
        dataset: &state.dataset_label,
        report: &state.dataset_report,
    };
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// Write one report into `out` and return its path. Fails with
/// [`HarnessError::StageMissing`] when the stage behind it did not succeed.
pub fn emit_report(
    state: &RunState,
    kind: ReportKind,
    out: &Path,
) -> Result<PathBuf, HarnessError> {
    let seed = state.config.seed;
    let path = out.join(kind.file_name());
    match kind {
        ReportKind::Table1 => {
            let stats = state
                .region_stats
                .as_ref()
                .ok_or(HarnessError::StageMissing("regions"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &[
                    ("bins", state.config.bins.to_string()),
                    (
                        "ei",
                        "histogram mean over equal-width bins, bin midpoints".into(),
                    ),
                ],
                &strings(&[
                    "compound",
                    "region",
                    "region_low_nm",
                    "region_high_nm",
                    "ei",
                    "raw_mean",
                    "n_instances",
                ]),
            )?;
            for e in stats {
                let n: usize = e.stats.histogram.counts.iter().sum();
                w.row([
                    e.compound.clone(),
                    (e.region + 1).to_string(),
                    e.low_nm.to_string(),
                    e.high_nm.to_string(),
                    e.stats.expected.to_string(),
                    e.stats.raw_mean.to_string(),
                    n.to_string(),
                ])?;
            }
            w.finish()
        }
        ReportKind::Histograms => {
            let stats = state
                .region_stats
                .as_ref()
                .ok_or(HarnessError::StageMissing("regions"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &[],
                &strings(&["compound", "region", "bin", "low", "high", "count"]),
            )?;
            for e in stats {
                let h = &e.stats.histogram;
                for (b, c) in h.counts.iter().enumerate() {
                    w.row([
                        e.compound.clone(),
                        (e.region + 1).to_string(),
                        (b + 1).to_string(),
                        h.edges[b].to_string(),
                        h.edges[b + 1].to_string(),
                        c.to_string(),
                    ])?;
                }
            }
            w.finish()
        }
        ReportKind::Table2 => {
            let embed = state
                .embed
                .as_ref()
                .ok_or(HarnessError::StageMissing("embed"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &[("denominator", "sum of positive eigenvalues".into())],
                &strings(&[
                    "model",
                    "variance_explained_pct",
                    "components",
                    "nbd",
                    "negative_eigenvalues",
                    "error",
                ]),
            )?;
            for s in &embed.sources {
                let (pct, neg, err) = match &s.embedding {
                    Ok(e) => (
                        e.explained_variance
                            .as_ref()
                            .and_then(|v| v.first())
                            .map(|v| 100.0 * v),
                        Some(e.negative_eigenvalues),
                        None,
                    ),
                    Err(msg) => (None, None, Some(msg.clone())),
                };
                w.row([
                    method_label(s.method).to_string(),
                    opt(pct),
                    "1".to_string(),
                    opt(s.k),
                    opt(neg),
                    err.unwrap_or_default(),
                ])?;
            }
            w.finish()
        }
        ReportKind::Table3 => {
            let rows = state
                .dbi
                .as_ref()
                .ok_or(HarnessError::StageMissing("cluster"))?;
            let target = state
                .config
                .table3_clusters
                .unwrap_or(state.dataset.n_classes());
            let mut w = CsvOut::new(
                path,
                seed,
                &[
                    ("clusters", target.to_string()),
                    ("restarts", state.config.restarts.to_string()),
                ],
                &strings(&["model", "dbi", "dimensions", "clusters", "nbd"]),
            )?;
            let mut methods: Vec<Method> = Vec::new();
            for r in rows {
                if !methods.contains(&r.method) {
                    methods.push(r.method);
                }
            }
            for m in methods {
                // Lowest DBI; ties to the earlier row (smaller k, then d).
                let best = rows
                    .iter()
                    .filter(|r| r.method == m && r.n_clusters == target && r.dbi.is_some())
                    .fold(
                        None::<&spectra_core::cluster_eval::DbiRow>,
                        |acc, r| match acc {
                            Some(a) if a.dbi <= r.dbi => Some(a),
                            _ => Some(r),
                        },
                    );
                if let Some(b) = best {
                    w.row([
                        method_label(m).to_string(),
                        opt(b.dbi),
                        b.d.to_string(),
                        b.n_clusters.to_string(),
                        opt(b.k),
                    ])?;
                }
            }
            w.finish()
        }
        ReportKind::Table4 => {
            let acc = state
                .accuracy
                .as_ref()
                .ok_or(HarnessError::StageMissing("classify"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &cv_meta(state),
                &strings(&[
                    "model",
                    "accuracy_pct",
                    "kernel",
                    "dimensions",
                    "std_pct",
                    "nbd",
                ]),
            )?;
            let rows = best_by_group(&acc.baseline)
                .into_iter()
                .chain(best_by_group(&acc.cells));
            for c in rows {
                let r = c.report.as_ref().expect("best cells have reports");
                w.row([
                    c.source.clone(),
                    r.mean.to_string(),
                    c.degree.to_string(),
                    c.d.to_string(),
                    r.std.to_string(),
                    opt(c.k),
                ])?;
            }
            w.finish()
        }
        ReportKind::Scree => {
            let embed = state
                .embed
                .as_ref()
                .ok_or(HarnessError::StageMissing("embed"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &[(
                    "residual_reference",
                    "euclidean for pca/cmds, geodesic for isomap".into(),
                )],
                &strings(&[
                    "method",
                    "k",
                    "d",
                    "residual_variance",
                    "explained_variance",
                    "eigenvalue",
                ]),
            )?;
            for r in &embed.scree {
                w.row([
                    method_label(r.method).to_string(),
                    opt(r.k),
                    r.d.to_string(),
                    opt(r.residual_variance),
                    opt(r.explained_variance),
                    opt(r.eigenvalue),
                ])?;
            }
            w.finish()
        }
        ReportKind::Sweep => {
            let embed = state
                .embed
                .as_ref()
                .ok_or(HarnessError::StageMissing("embed"))?;
            let max_d = state.config.max_dim();
            let mut header = strings(&[
                "method",
                "k",
                "d",
                "connected",
                "component_count",
                "residual_variance",
            ]);
            header.extend((1..=max_d + 1).map(|j| format!("eigenvalue_{j}")));
            header.push("error".into());
            let mut w = CsvOut::new(
                path,
                seed,
                &[
                    ("symmetrization", "union".into()),
                    ("shortest_paths", "dijkstra per source".into()),
                    ("lle_reg", state.config.lle_reg.to_string()),
                ],
                &header,
            )?;
            for sweep in &embed.sweeps {
                for c in &sweep.cells {
                    let mut row = vec![
                        method_label(c.method).to_string(),
                        c.k.to_string(),
                        c.d.to_string(),
                        c.connected.to_string(),
                        c.component_count.to_string(),
                        opt(c.residual_variance),
                    ];
                    row.extend((0..=max_d).map(|j| opt(c.eigenvalues.get(j))));
                    row.push(c.error.clone().unwrap_or_default());
                    w.row(row)?;
                }
            }
            w.finish()
        }
        ReportKind::Dbi => {
            let rows = state
                .dbi
                .as_ref()
                .ok_or(HarnessError::StageMissing("cluster"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &[
                    ("restarts", state.config.restarts.to_string()),
                    ("scatter", "mean distance to centroid".into()),
                    ("separation", "euclidean".into()),
                ],
                &strings(&["method", "k", "d", "n_clusters", "dbi", "inertia", "error"]),
            )?;
            for r in rows {
                w.row([
                    method_label(r.method).to_string(),
                    opt(r.k),
                    r.d.to_string(),
                    r.n_clusters.to_string(),
                    opt(r.dbi),
                    opt(r.inertia),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
            w.finish()
        }
        ReportKind::Errorbar => {
            let acc = state
                .accuracy
                .as_ref()
                .ok_or(HarnessError::StageMissing("classify"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &cv_meta(state),
                &strings(&["method", "k", "d", "K", "mean", "std"]),
            )?;
            for c in acc.all() {
                w.row([
                    c.source.clone(),
                    opt(c.k),
                    c.d.to_string(),
                    c.degree.to_string(),
                    opt(c.report.as_ref().map(|r| r.mean)),
                    opt(c.report.as_ref().map(|r| r.std)),
                ])?;
            }
            w.finish()
        }
        ReportKind::Cv => {
            let acc = state
                .accuracy
                .as_ref()
                .ok_or(HarnessError::StageMissing("classify"))?;
            let folds = state.config.folds;
            let mut header = strings(&["method", "k", "d", "K", "mean", "std"]);
            header.extend((1..=folds).map(|f| format!("fold_{f}")));
            header.push("error".into());
            let mut w = CsvOut::new(path, seed, &cv_meta(state), &header)?;
            for c in acc.all() {
                w.row(cv_row(c, folds))?;
            }
            w.finish()
        }
        ReportKind::Entropy => {
            let profiles = state
                .entropy
                .as_ref()
                .ok_or(HarnessError::StageMissing("entropy"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &[
                    ("h", "per-instance -p*log2(p) of the clamped, normalized spectrum, averaged per compound".into()),
                    ("log10_floor", LOG10_FLOOR.to_string()),
                ],
                &strings(&["wavelength_nm", "compound", "h", "log10_h"]),
            )?;
            let wl = state.dataset.wavelengths();
            for p in profiles {
                for (j, &h) in p.h.iter().enumerate() {
                    w.row([
                        wl[j].to_string(),
                        p.compound.clone(),
                        h.to_string(),
                        log10_floor(h).to_string(),
                    ])?;
                }
            }
            w.finish()
        }
        ReportKind::Lines => {
            let lines = state
                .lines
                .as_ref()
                .ok_or(HarnessError::StageMissing("lines"))?;
            let mut w = CsvOut::new(
                path,
                seed,
                &[
                    ("spectrum", "compound mean".into()),
                    ("prominence", "> 5 x MAD".into()),
                ],
                &strings(&[
                    "compound",
                    "species",
                    "reference_nm",
                    "tolerance_nm",
                    "matched",
                    "observed_nm",
                    "intensity",
                    "prominence",
                ]),
            )?;
            for (compound, matches) in lines {
                for m in matches {
                    let p = m.peak.as_ref();
                    w.row([
                        compound.clone(),
                        m.line.species.clone(),
                        m.line.wavelength_nm.to_string(),
                        m.tolerance_nm.to_string(),
                        p.is_some().to_string(),
                        opt(p.map(|p| p.wavelength_nm)),
                        opt(p.map(|p| p.intensity)),
                        opt(p.map(|p| p.prominence)),
                    ])?;
                }
            }
            w.finish()
        }
    }
}

fn cv_meta(state: &RunState) -> Vec<(&'static str, String)> {
    let c = &state.config;
    vec![
        ("folds", c.folds.to_string()),
        ("C", c.c.to_string()),
        (
            "kernel",
            if c.homogeneous {
                "(x.y)^K"
            } else {
                "(x.y+1)^K"
            }
            .into(),
        ),
        ("standardize", c.standardize.to_string()),
        ("std", "sample standard deviation across folds".into()),
        ("fold_shuffle", "stratified, seeded".into()),
    ]
}

fn cv_row(c: &SweepCellResult, folds: usize) -> Vec<String> {
    let mut row = vec![
        c.source.clone(),
        opt(c.k),
        c.d.to_string(),
        c.degree.to_string(),
        opt(c.report.as_ref().map(|r| r.mean)),
        opt(c.report.as_ref().map(|r| r.std)),
    ];
    row.extend((0..folds).map(|f| opt(c.report.as_ref().and_then(|r| r.fold_accuracies.get(f)))));
    row.push(c.error.clone().unwrap_or_default());
    row
}

fn source_tag(method: Method, k: Option<usize>) -> String {
    match k {
        Some(k) => format!("{}_k{k}", method.name()),
        None => method.name().to_string(),
    }
}

/// Coordinates (`embeddings/<method>[_k<k>].csv`) and a JSON sidecar per
/// successful embedding source. Cells at smaller `d` are the leading columns.
pub(crate) fn write_embeddings(state: &RunState, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let embed = state
        .embed
        .as_ref()
        .ok_or(HarnessError::StageMissing("embed"))?;
    let dir = out.join("embeddings");
    let ds = &state.dataset;
    let mut written = Vec::new();
    for s in &embed.sources {
        let Ok(e) = &s.embedding else { continue };
        let tag = source_tag(s.method, s.k);
        let mut header = strings(&["instance_id", "sample_id", "label"]);
        header.extend((1..=e.dims()).map(|j| format!("c{j}")));
        let mut w = CsvOut::new(
            dir.join(format!("{tag}.csv")),
            state.config.seed,
            &[],
            &header,
        )?;
        for (i, row) in e.coords.rows().into_iter().enumerate() {
            let mut fields = vec![
                i.to_string(),
                ds.sample_ids()[i].clone(),
                ds.class_name(ds.labels()[i]).to_string(),
            ];
            fields.extend(row.iter().map(|v| v.to_string()));
            w.row(fields)?;
        }
        written.push(w.finish()?);

        #[derive(Serialize)]
        struct Sidecar<'a> {
            seed: u64,
            #[serde(flatten)]
            embedding: &'a spectra_core::linear_embed::Embedding,
        }
        let path = dir.join(format!("{tag}.json"));
        let text = serde_json::to_string_pretty(&Sidecar {
            seed: state.config.seed,
            embedding: e,
        })? + "\n";
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// One `clusters/<method>[_k<k>]_d<d>_c<n>.csv` per successful DBI cell.
pub(crate) fn write_assignments(
    state: &RunState,
    out: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let rows = state
        .dbi
        .as_ref()
        .ok_or(HarnessError::StageMissing("cluster"))?;
    let dir = out.join("clusters");
    let mut written = Vec::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let name = format!(
            "{}_d{}_c{}.csv",
            source_tag(r.method, r.k),
            r.d,
            r.n_clusters
        );
        let mut w = CsvOut::new(
            dir.join(name),
            state.config.seed,
            &[],
            &strings(&["instance_id", "cluster"]),
        )?;
        for (i, a) in r.assignments.iter().enumerate() {
            w.row([i.to_string(), a.to_string()])?;
        }
        written.push(w.finish()?);
    }
    Ok(written)
}

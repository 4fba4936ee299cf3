use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spectra_core::cluster_eval::{dbi_sweep, DbiRow};
use spectra_core::dataset::Spectrum;
use spectra_core::dataset::{
    load_dataset, validate_dataset, DatasetReport, Format, LoadOptions, SpectralDataset,
};
use spectra_core::linear_embed::{cmds, pca, residual_variance, DistanceMatrix, Embedding, Method};
use spectra_core::manifold_embed::{neighborhood_sweep, Sweep};
use spectra_core::spectral_stats::{
    brass_lines, entropy_density, match_emission_lines, partition_regions, read_reference_lines,
    region_stats, EntropyProfile, LineMatch, PeakOptions, ReferenceLine, RegionStatsEntry,
};
use spectra_core::svm::{
    accuracy_sweep, AccuracySweep, CvConfig, KernelSpec, SmoConfig, SweepSource,
};
use spectra_core::synth;

use crate::report::{self, ReportKind};
use crate::{HarnessError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Regions,
    Entropy,
    Lines,
    Embed,
    Cluster,
    Classify,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Regions,
        Stage::Entropy,
        Stage::Lines,
        Stage::Embed,
        Stage::Cluster,
        Stage::Classify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Regions => "regions",
            Stage::Entropy => "entropy",
            Stage::Lines => "lines",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Classify => "classify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub dataset: String,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn status(&self, stage: Stage) -> Option<StageStatus> {
        self.stages
            .iter()
            .find(|s| s.stage == stage)
            .map(|s| s.status)
    }

    pub fn file(&self, path: &str) -> Option<&FileRecord> {
        self.files.iter().find(|f| f.path == path)
    }
}

/// One row of a scree curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeRow {
    pub method: Method,
    pub k: Option<usize>,
    pub d: usize,
    pub residual_variance: Option<f64>,
    pub explained_variance: Option<f64>,
    pub eigenvalue: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EmbedStage {
    /// One source per linear method and per (manifold method, k), in config
    /// order. Each embedding has the largest dimension any stage needs.
    pub sources: Vec<SweepSource>,
    pub sweeps: Vec<Sweep>,
    pub scree: Vec<ScreeRow>,
}

/// Everything a run produced, held in memory until the reports are written.
#[derive(Debug, Clone)]
pub struct RunState {
    pub config: RunConfig,
    pub dataset: SpectralDataset,
    pub dataset_label: String,
    pub dataset_report: DatasetReport,
    pub region_stats: Option<Vec<RegionStatsEntry>>,
    pub entropy: Option<Vec<EntropyProfile>>,
    pub lines: Option<Vec<(String, Vec<LineMatch>)>>,
    pub embed: Option<EmbedStage>,
    pub dbi: Option<Vec<DbiRow>>,
    pub accuracy: Option<AccuracySweep>,
    pub stages: Vec<StageRecord>,
}

pub fn load_input(cfg: &RunConfig) -> Result<(SpectralDataset, String), HarnessError> {
    match &cfg.dataset.path {
        Some(path) => {
            let format = match cfg.dataset.format.as_deref() {
                None => None,
                Some("wide-csv") => Some(Format::WideCsv),
                Some("manifest") => Some(Format::Manifest),
                Some(other) => {
                    return Err(HarnessError::Config(format!(
                        "unknown dataset format `{other}` (expected wide-csv or manifest)"
                    )))
                }
            };
            let opts = LoadOptions {
                format,
                class_whitelist: cfg.dataset.class_whitelist.clone(),
            };
            Ok((load_dataset(path, &opts)?, path.display().to_string()))
        }
        None => {
            let sc = synth::SynthConfig::new(
                cfg.dataset.synthetic_instances,
                cfg.dataset.synthetic_features,
                cfg.seed,
            );
            let label = format!(
                "synthetic:{}x{}:seed={}",
                sc.n_instances, sc.n_features, cfg.seed
            );
            Ok((synth::libs_like(&sc)?, label))
        }
    }
}

fn reference_lines(cfg: &RunConfig) -> Result<Vec<ReferenceLine>, HarnessError> {
    match &cfg.reference_lines {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| HarnessError::io(p, e))?;
            Ok(read_reference_lines(f)?)
        }
        None => Ok(brass_lines()),
    }
}

fn mean_spectrum(ds: &SpectralDataset, label: usize) -> Result<Spectrum, HarnessError> {
    let idx = ds.indices_of(label);
    let mut mean = vec![0.0; ds.n_features()];
    for &i in &idx {
        for (m, v) in mean.iter_mut().zip(ds.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= idx.len() as f64);
    Ok(Spectrum::new(ds.wavelengths().to_vec(), mean)?)
}

fn linear_source(
    method: Method,
    x: ndarray::ArrayView2<f64>,
    dm: &DistanceMatrix,
    d: usize,
) -> spectra_core::Result<Embedding> {
    let n = x.nrows();
    match method {
        Method::Pca => pca(x, d.min((n - 1).min(x.ncols()))),
        _ => cmds(dm, d.min(n - 1)),
    }
}

fn embed_stage(ds: &SpectralDataset, cfg: &RunConfig) -> Result<EmbedStage, HarnessError> {
    let x = ds.matrix().view();
    let dm = DistanceMatrix::euclidean(x);
    let max_d = cfg.max_dim();
    let all_dims: Vec<usize> = (1..=max_d).collect();
    let mut sources = Vec::new();
    let mut sweeps = Vec::new();
    let mut scree = Vec::new();

    for &method in &cfg.methods {
        if method.is_manifold() {
            let sweep =
                neighborhood_sweep(x, &dm, &cfg.neighborhoods, &all_dims, method, cfg.lle_reg);
            for g in &sweep.groups {
                sources.push(SweepSource {
                    method,
                    k: Some(g.k),
                    embedding: g
                        .embedding
                        .clone()
                        .ok_or_else(|| g.error.clone().unwrap_or_else(|| "no embedding".into())),
                });
            }
            for c in &sweep.cells {
                if c.error.is_none() {
                    scree.push(ScreeRow {
                        method,
                        k: Some(c.k),
                        d: c.d,
                        residual_variance: c.residual_variance,
                        explained_variance: None,
                        eigenvalue: c
                            .eigenvalues
                            .get(if method == Method::Lle { c.d } else { c.d - 1 })
                            .copied(),
                    });
                }
            }
            sweeps.push(sweep);
        } else {
            let res = linear_source(method, x, &dm, max_d);
            if let Ok(e) = &res {
                let dims: Vec<usize> = (1..=e.dims()).collect();
                let resid = match method {
                    Method::Pca => residual_variance(&dm, e.coords.view(), &dims).ok(),
                    _ => e.residual_variance.clone(),
                };
                for d in dims {
                    scree.push(ScreeRow {
                        method,
                        k: None,
                        d,
                        residual_variance: resid.as_ref().map(|r| r[d - 1]),
                        explained_variance: e.explained_variance.as_ref().map(|v| v[d - 1]),
                        eigenvalue: e.eigenvalues.get(d - 1).copied(),
                    });
                }
            }
            sources.push(SweepSource {
                method,
                k: None,
                embedding: res.map_err(|e| e.to_string()),
            });
        }
    }
    Ok(EmbedStage {
        sources,
        sweeps,
        scree,
    })
}

fn cv_config(cfg: &RunConfig) -> CvConfig {
    CvConfig {
        folds: cfg.folds,
        seed: cfg.seed,
        kernel: KernelSpec {
            degree: cfg.degrees[0],
            homogeneous: cfg.homogeneous,
            standardize: cfg.standardize,
        },
        smo: SmoConfig {
            c: cfg.c,
            ..SmoConfig::default()
        },
    }
}

/// Stages needed to produce `wanted`, in execution order.
fn with_dependencies(wanted: &[Stage]) -> Vec<Stage> {
    let mut set: Vec<Stage> = wanted.to_vec();
    if set.contains(&Stage::Cluster) || set.contains(&Stage::Classify) {
        set.push(Stage::Embed);
    }
    set.push(Stage::Ingest);
    set.sort();
    set.dedup();
    set
}

/// Run the selected stages (plus whatever they depend on). A dataset that
/// cannot be loaded is fatal; any later stage failure is recorded and the
/// remaining independent stages still run.
pub fn run_stages(cfg: &RunConfig, wanted: &[Stage]) -> Result<RunState, HarnessError> {
    cfg.validate()?;
    let stages = with_dependencies(wanted);
    let t = Instant::now();
    let (dataset, dataset_label) = load_input(cfg)?;
    let dataset_report = validate_dataset(&dataset);
    let mut state = RunState {
        config: cfg.clone(),
        dataset,
        dataset_label,
        dataset_report,
        region_stats: None,
        entropy: None,
        lines: None,
        embed: None,
        dbi: None,
        accuracy: None,
        stages: vec![StageRecord {
            stage: Stage::Ingest,
            status: StageStatus::Ok,
            error: None,
            seconds: t.elapsed().as_secs_f64(),
        }],
    };

    for stage in stages.into_iter().filter(|s| *s != Stage::Ingest) {
        let t = Instant::now();
        let ds = &state.dataset;
        let outcome: Result<(), HarnessError> = match stage {
            Stage::Regions => partition_regions(ds.wavelengths(), cfg.regions)
                .and_then(|p| region_stats(ds, &p, cfg.bins))
                .map(|r| state.region_stats = Some(r))
                .map_err(Into::into),
            Stage::Entropy => (0..ds.n_classes())
                .map(|c| entropy_density(ds, c))
                .collect::<spectra_core::Result<Vec<_>>>()
                .map(|p| state.entropy = Some(p))
                .map_err(Into::into),
            Stage::Lines => reference_lines(cfg).and_then(|refs| {
                let mut out = Vec::new();
                for c in 0..ds.n_classes() {
                    let s = mean_spectrum(ds, c)?;
                    let m = match_emission_lines(
                        &s,
                        &refs,
                        cfg.line_tolerance_nm,
                        PeakOptions::default(),
                    )?;
                    out.push((ds.class_name(c).to_string(), m));
                }
                state.lines = Some(out);
                Ok(())
            }),
            Stage::Embed => embed_stage(ds, cfg).map(|e| state.embed = Some(e)),
            Stage::Cluster => match &state.embed {
                None => Err(HarnessError::StageMissing("embed")),
                Some(e) => {
                    let ok: Vec<Embedding> = e
                        .sources
                        .iter()
                        .filter_map(|s| s.embedding.as_ref().ok().cloned())
                        .collect();
                    state.dbi = Some(dbi_sweep(
                        &ok,
                        &cfg.clusters,
                        &cfg.dbi_dims,
                        cfg.seed,
                        cfg.restarts,
                    ));
                    Ok(())
                }
            },
            Stage::Classify => match &state.embed {
                None => Err(HarnessError::StageMissing("embed")),
                Some(e) => {
                    let raw = cfg.raw_baseline.then(|| ds.matrix().view());
                    state.accuracy = Some(accuracy_sweep(
                        raw,
                        &e.sources,
                        ds.labels(),
                        ds.classes(),
                        &cfg.dims,
                        &cfg.degrees,
                        &cv_config(cfg),
                    ));
                    Ok(())
                }
            },
            Stage::Ingest => Ok(()),
        };
        let (status, error) = match outcome {
            Ok(()) => (StageStatus::Ok, None),
            Err(e) => {
                log::error!("stage {} failed: {e}", stage.name());
                (StageStatus::Failed, Some(e.to_string()))
            }
        };
        log::info!("stage {} finished in {:.2?}", stage.name(), t.elapsed());
        state.stages.push(StageRecord {
            stage,
            status,
            error,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    for stage in Stage::ALL {
        if !state.stages.iter().any(|r| r.stage == stage) {
            state.stages.push(StageRecord {
                stage,
                status: StageStatus::Skipped,
                error: None,
                seconds: 0.0,
            });
        }
    }
    state.stages.sort_by_key(|r| r.stage);
    Ok(state)
}

fn hash_file(root: &Path, path: &Path) -> Result<FileRecord, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    let rel = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/");
    Ok(FileRecord {
        path: rel,
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Write every report the state supports, the per-cell coordinate and
/// assignment files, and `manifest.json`. Returns the manifest.
pub fn write_outputs(state: &RunState, out: &Path) -> Result<RunManifest, HarnessError> {
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    written.push(report::write_dataset_report(state, out)?);
    for kind in ReportKind::ALL {
        match report::emit_report(state, kind, out) {
            Ok(p) => written.push(p),
            Err(HarnessError::StageMissing(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if state.embed.is_some() {
        written.extend(report::write_embeddings(state, out)?);
    }
    if state.dbi.is_some() {
        written.extend(report::write_assignments(state, out)?);
    }
    let mut files = written
        .iter()
        .map(|p| hash_file(out, p))
        .collect::<Result<Vec<_>, _>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = RunManifest {
        config: state.config.clone(),
        dataset: state.dataset_label.clone(),
        stages: state.stages.clone(),
        files,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(manifest)
}

/// Run every stage and write all outputs under `cfg.out`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest, HarnessError> {
    let state = run_stages(cfg, &Stage::ALL)?;
    write_outputs(&state, &cfg.out)
}

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spectra_core::dataset::write_dataset_file;
use spectra_core::linear_embed::Method;
use spectra_core::synth;
use spectra_harness::{
    emit_report, parse_list, run_stages, write_outputs, ReportKind, RunConfig, Stage, StageStatus,
};

#[derive(Parser)]
#[command(
    name = "spectra",
    version,
    about = "LIBS spectral statistics, embeddings, clustering and SVM sweeps"
)]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (speed only; results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log stage progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Wide CSV or JSON manifest. Without it a synthetic stand-in is used.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// `wide-csv` or `manifest` (default: by extension).
    #[arg(long)]
    format: Option<String>,
    /// Comma-separated class whitelist.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset as wide CSV.
    Synth {
        #[arg(long, default_value_t = 670)]
        instances: usize,
        #[arg(long, default_value_t = 1000)]
        features: usize,
        /// Target file (default: <out>/synthetic.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Load a dataset and write it back in canonical wide-CSV form with its report.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Print the dataset report as JSON.
    Validate {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Expected intensity per compound and spectral region.
    Regions {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        regions: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Per-wavelength entropy density per compound.
    Entropy {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Match reference emission lines on each compound's mean spectrum.
    Lines {
        #[command(flatten)]
        data: DataArgs,
        /// CSV of (species, wavelength_nm); default: built-in Cu I / Zn I lines.
        #[arg(long)]
        lines: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Embed with one method.
    Embed {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        dims: usize,
        /// Neighborhood size for isomap / lle.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lle_reg: Option<f64>,
    },
    /// Neighborhood-size sweep for a manifold method.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        neighborhoods: Option<String>,
        #[arg(long)]
        dims: Option<String>,
    },
    /// k-means + Davies-Bouldin sweep over embeddings.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        neighborhoods: Option<String>,
        #[arg(long)]
        clusters: Option<String>,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Cross-validated SVM accuracy sweep.
    Classify {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        degrees: Option<String>,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        neighborhoods: Option<String>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long = "C")]
        c: Option<f64>,
        /// Skip the unreduced-data baseline.
        #[arg(long)]
        no_raw: bool,
        /// Use (x.y + 1)^K instead of (x.y)^K.
        #[arg(long)]
        inhomogeneous: bool,
        #[arg(long)]
        no_standardize: bool,
    },
    /// Run every stage and write all reports plus manifest.json.
    Run {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run what one report needs and write only that file.
    Report {
        kind: ReportKind,
        #[command(flatten)]
        data: DataArgs,
    },
}

fn list<T>(s: &Option<String>, target: &mut Vec<T>) -> Result<()>
where
    T: std::str::FromStr + Copy + PartialOrd + std::ops::Add<Output = T> + From<u8>,
{
    if let Some(s) = s {
        *target = parse_list(s).map_err(anyhow::Error::msg)?;
    }
    Ok(())
}

fn apply_data(cfg: &mut RunConfig, data: &DataArgs) {
    if data.dataset.is_some() {
        cfg.dataset.path = data.dataset.clone();
    }
    if data.format.is_some() {
        cfg.dataset.format = data.format.clone();
    }
    if data.classes.is_some() {
        cfg.dataset.class_whitelist = data.classes.clone();
    }
}

fn stages_for(kind: ReportKind) -> &'static [Stage] {
    match kind {
        ReportKind::Table1 | ReportKind::Histograms => &[Stage::Regions],
        ReportKind::Table2 | ReportKind::Scree | ReportKind::Sweep => &[Stage::Embed],
        ReportKind::Table3 | ReportKind::Dbi => &[Stage::Cluster],
        ReportKind::Table4 | ReportKind::Errorbar | ReportKind::Cv => &[Stage::Classify],
        ReportKind::Entropy => &[Stage::Entropy],
        ReportKind::Lines => &[Stage::Lines],
    }
}

fn execute(cfg: &RunConfig, stages: &[Stage]) -> Result<()> {
    let state = run_stages(cfg, stages)?;
    let manifest = write_outputs(&state, &cfg.out)?;
    let mut failed = false;
    for s in &manifest.stages {
        if s.status == StageStatus::Failed {
            failed = true;
            eprintln!(
                "stage {} failed: {}",
                s.stage.name(),
                s.error.as_deref().unwrap_or("")
            );
        }
    }
    println!(
        "wrote {} files under {} (manifest.json)",
        manifest.files.len(),
        cfg.out.display()
    );
    if failed {
        bail!("one or more stages failed");
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }

    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }

    match &cli.command {
        Command::Synth {
            instances,
            features,
            output,
        } => {
            let ds = synth::libs_like(&synth::SynthConfig::new(*instances, *features, cfg.seed))?;
            let path = output
                .clone()
                .unwrap_or_else(|| cfg.out.join("synthetic.csv"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            write_dataset_file(&ds, &path)?;
            println!("wrote {}", path.display());
        }
        Command::Ingest { data } => {
            apply_data(&mut cfg, data);
            let state = run_stages(&cfg, &[Stage::Ingest])?;
            std::fs::create_dir_all(&cfg.out)?;
            write_dataset_file(&state.dataset, &cfg.out.join("dataset.csv"))?;
            write_outputs(&state, &cfg.out)?;
            println!("{}", serde_json::to_string_pretty(&state.dataset_report)?);
        }
        Command::Validate { data } => {
            apply_data(&mut cfg, data);
            let (ds, _) = spectra_harness::pipeline::load_input(&cfg)?;
            let report = spectra_core::dataset::validate_dataset(&ds);
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Regions {
            data,
            regions,
            bins,
        } => {
            apply_data(&mut cfg, data);
            cfg.regions = regions.unwrap_or(cfg.regions);
            cfg.bins = bins.unwrap_or(cfg.bins);
            execute(&cfg, &[Stage::Regions])?;
        }
        Command::Entropy { data } => {
            apply_data(&mut cfg, data);
            execute(&cfg, &[Stage::Entropy])?;
        }
        Command::Lines {
            data,
            lines,
            tolerance,
        } => {
            apply_data(&mut cfg, data);
            if lines.is_some() {
                cfg.reference_lines = lines.clone();
            }
            cfg.line_tolerance_nm = tolerance.unwrap_or(cfg.line_tolerance_nm);
            execute(&cfg, &[Stage::Lines])?;
        }
        Command::Embed {
            data,
            method,
            dims,
            k,
            lle_reg,
        } => {
            apply_data(&mut cfg, data);
            cfg.methods = vec![*method];
            cfg.dims = vec![*dims];
            cfg.dbi_dims = vec![*dims];
            if method.is_manifold() {
                let Some(k) = k else {
                    bail!("--k is required for {method}");
                };
                cfg.neighborhoods = vec![*k];
            }
            cfg.lle_reg = lle_reg.unwrap_or(cfg.lle_reg);
            execute(&cfg, &[Stage::Embed])?;
        }
        Command::Sweep {
            data,
            method,
            neighborhoods,
            dims,
        } => {
            apply_data(&mut cfg, data);
            if !method.is_manifold() {
                bail!("sweep needs a manifold method (isomap or lle)");
            }
            cfg.methods = vec![*method];
            list(neighborhoods, &mut cfg.neighborhoods)?;
            list(dims, &mut cfg.dims)?;
            cfg.dbi_dims = cfg.dims.clone();
            execute(&cfg, &[Stage::Embed])?;
        }
        Command::Cluster {
            data,
            methods,
            neighborhoods,
            clusters,
            dims,
            restarts,
        } => {
            apply_data(&mut cfg, data);
            if let Some(m) = methods {
                cfg.methods = m.clone();
            }
            list(neighborhoods, &mut cfg.neighborhoods)?;
            list(clusters, &mut cfg.clusters)?;
            list(dims, &mut cfg.dbi_dims)?;
            cfg.dims = cfg.dbi_dims.clone();
            cfg.restarts = restarts.unwrap_or(cfg.restarts);
            execute(&cfg, &[Stage::Cluster])?;
        }
        Command::Classify {
            data,
            folds,
            degrees,
            dims,
            neighborhoods,
            methods,
            c,
            no_raw,
            inhomogeneous,
            no_standardize,
        } => {
            apply_data(&mut cfg, data);
            cfg.folds = folds.unwrap_or(cfg.folds);
            list(degrees, &mut cfg.degrees)?;
            list(dims, &mut cfg.dims)?;
            cfg.dbi_dims = cfg.dims.clone();
            list(neighborhoods, &mut cfg.neighborhoods)?;
            if let Some(m) = methods {
                cfg.methods = m.clone();
            }
            cfg.c = c.unwrap_or(cfg.c);
            cfg.raw_baseline &= !no_raw;
            cfg.homogeneous &= !inhomogeneous;
            cfg.standardize &= !no_standardize;
            execute(&cfg, &[Stage::Classify])?;
        }
        Command::Run { data } => {
            apply_data(&mut cfg, data);
            execute(&cfg, &Stage::ALL)?;
        }
        Command::Report { kind, data } => {
            apply_data(&mut cfg, data);
            let state = run_stages(&cfg, stages_for(*kind))?;
            std::fs::create_dir_all(&cfg.out)?;
            let path = emit_report(&state, *kind, &cfg.out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

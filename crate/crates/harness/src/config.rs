use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spectra_core::linear_embed::Method;

use crate::HarnessError;

/// Where the spectra come from. Without a path, a seeded synthetic stand-in
/// of the given shape is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    /// `wide-csv` or `manifest`; inferred from the extension when absent.
    pub format: Option<String>,
    pub class_whitelist: Option<Vec<String>>,
    pub synthetic_instances: usize,
    pub synthetic_features: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            format: None,
            class_whitelist: None,
            synthetic_instances: 670,
            synthetic_features: 1000,
        }
    }
}

/// A full pipeline configuration. Every field has a default, so `{}` is a
/// valid config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub regions: usize,
    pub bins: usize,
    pub methods: Vec<Method>,
    pub neighborhoods: Vec<usize>,
    pub dims: Vec<usize>,
    pub degrees: Vec<u32>,
    pub folds: usize,
    pub clusters: Vec<usize>,
    pub dbi_dims: Vec<usize>,
    /// Cluster count for the best-DBI summary; the class count when absent.
    pub table3_clusters: Option<usize>,
    pub restarts: usize,
    pub c: f64,
    pub standardize: bool,
    pub homogeneous: bool,
    pub lle_reg: f64,
    pub line_tolerance_nm: f64,
    /// CSV of (species, wavelength_nm); the built-in Cu I / Zn I table when
    /// absent.
    pub reference_lines: Option<PathBuf>,
    /// Also cross-validate on the unreduced spectra.
    pub raw_baseline: bool,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            regions: 8,
            bins: 10,
            methods: vec![Method::Pca, Method::Cmds, Method::Isomap, Method::Lle],
            neighborhoods: vec![8, 15, 30, 100, 200],
            dims: (1..=10).collect(),
            degrees: (1..=5).collect(),
            folds: 10,
            clusters: (2..=10).collect(),
            dbi_dims: vec![2, 3, 5, 7, 10],
            table3_clusters: None,
            restarts: 10,
            c: 1.0,
            standardize: true,
            homogeneous: true,
            lle_reg: 1e-3,
            line_tolerance_nm: 0.5,
            reference_lines: None,
            raw_baseline: true,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let empty = [
            ("methods", self.methods.is_empty()),
            ("dims", self.dims.is_empty()),
            ("degrees", self.degrees.is_empty()),
            ("clusters", self.clusters.is_empty()),
            ("dbi_dims", self.dbi_dims.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(HarnessError::Config(format!("`{name}` must not be empty")));
        }
        if self.methods.iter().any(|m| m.is_manifold()) && self.neighborhoods.is_empty() {
            return Err(HarnessError::Config(
                "`neighborhoods` must not be empty when a manifold method is selected".into(),
            ));
        }
        if self.regions == 0 || self.bins == 0 {
            return Err(HarnessError::Config(
                "`regions` and `bins` must be positive".into(),
            ));
        }
        if self.folds < 2 {
            return Err(HarnessError::Config("`folds` must be at least 2".into()));
        }
        if self.dims.contains(&0) || self.dbi_dims.contains(&0) || self.degrees.contains(&0) {
            return Err(HarnessError::Config(
                "dimensions and degrees start at 1".into(),
            ));
        }
        Ok(())
    }

    /// Largest embedding dimension any stage needs.
    pub fn max_dim(&self) -> usize {
        self.dims
            .iter()
            .chain(&self.dbi_dims)
            .copied()
            .max()
            .unwrap_or(1)
    }
}

/// Parse `"1,2,5"`, `"1..10"` (inclusive) or a mix such as `"1..3,8"`.
pub fn parse_list<T>(s: &str) -> Result<Vec<T>, String>
where
    T: std::str::FromStr + Copy + PartialOrd + std::ops::Add<Output = T> + From<u8>,
{
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: T = a
                .trim()
                .parse()
                .map_err(|_| format!("bad range start in `{part}`"))?;
            let b: T = b
                .trim()
                .parse()
                .map_err(|_| format!("bad range end in `{part}`"))?;
            let mut v = a;
            while v <= b {
                out.push(v);
                v = v + T::from(1);
            }
        } else {
            out.push(
                part.parse()
                    .map_err(|_| format!("bad list entry `{part}`"))?,
            );
        }
    }
    if out.is_empty() {
        return Err(format!("empty list `{s}`"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.max_dim(), 10);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("1..3,8").unwrap(), vec![1, 2, 3, 8]);
        assert_eq!(parse_list::<u32>("5").unwrap(), vec![5]);
        assert!(parse_list::<usize>("a").is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"nope": 1}"#).is_err());
    }
}

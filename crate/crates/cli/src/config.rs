use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use hadamard_core::{DescentConfig, MapInstance, MapSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Contents of the `--config` JSON file. Each subcommand reads the fields it needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: Option<MapSpec>,
    /// Overrides the registry's bound `M` for the map.
    pub known_inverse_bound: Option<f64>,
    pub y: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub m: Option<usize>,
    pub targets: Option<Vec<Vec<f64>>>,
    /// JSON file with `targets` and optional `anchor_index`/`anchor_point`/`g_values`.
    pub targets_file: Option<PathBuf>,
    pub anchor_index: Option<usize>,
    pub anchor_point: Option<Vec<f64>>,
    pub g_init: Option<Vec<Vec<f64>>>,
    pub tol_lift: Option<f64>,
    pub samples: Option<usize>,
    #[serde(rename = "box")]
    pub sample_box: Option<[f64; 2]>,
    pub corpus: Option<String>,
    #[serde(default)]
    pub descent: DescentConfig,
    pub output_format: Option<OutputFormat>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let (Some(file), Some(dir)) = (&config.targets_file, path.parent()) {
            if file.is_relative() {
                config.targets_file = Some(dir.join(file));
            }
        }
        config.descent.validate()?;
        if let Some(tol) = config.tol_lift {
            if !(tol > 0.0) {
                bail!("tol_lift must be positive");
            }
        }
        Ok(config)
    }

    pub fn map(&self) -> Result<MapInstance> {
        let spec = self.map.clone().context("config is missing `map`")?;
        let map = MapInstance::from_spec(spec)?;
        Ok(match self.known_inverse_bound {
            Some(m) if m > 0.0 => map.with_known_inverse_bound(Some(m)),
            Some(m) => bail!("known_inverse_bound must be positive, got {m}"),
            None => map,
        })
    }

    pub fn vector(&self, field: Option<&Vec<f64>>, name: &str) -> Result<Vec<f64>> {
        field.cloned().with_context(|| format!("config is missing `{name}`"))
    }
}

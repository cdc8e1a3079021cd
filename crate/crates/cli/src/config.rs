//! Run configuration file.
//!
//! Every section is optional; omitted keys take the defaults of the
//! illustrated-example setup (16×16 Cartesian, radius 2, learning rate 0.01,
//! batch 50, 250/50 pairs, 40 epochs).

use std::path::{Path, PathBuf};

use planar_core::datagen::DatasetSpec;
use planar_core::error::{Error, Result};
use planar_core::experiments::RunSpec;
use planar_core::render::{PanelStyle, RenderStyle};
use planar_core::{TopologySpec, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Sets both the dataset and the training seed when present.
    pub seed: Option<u64>,
    pub topology: TopologySpec,
    pub dataset: DatasetSpec,
    pub training: TrainConfig,
    pub network: NetworkInit,
    pub output: OutputConfig,
    pub render: RenderStyle,
    pub panel: PanelStyle,
    pub sweep: Option<SweepConfig>,
    pub transfer: Option<TransferConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkInit {
    pub init_low: f64,
    pub init_high: f64,
}

impl Default for NetworkInit {
    fn default() -> Self {
        Self {
            init_low: -1.0,
            init_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub report: bool,
    pub structure: bool,
    pub panels: bool,
    pub checkpoint: bool,
    /// Test samples shown in the panel image.
    pub panel_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
            report: true,
            structure: true,
            panels: true,
            checkpoint: true,
            panel_samples: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: String,
    /// Numbers, or `"dx,dy"` strings for translations.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub datasets: Vec<TransferEntry>,
}

/// One row/column of a transfer matrix. Transform, topology, counts and
/// seed come from the main dataset section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferEntry {
    pub label: String,
    pub source: planar_core::datagen::SourceKind,
    #[serde(default)]
    pub bw: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            topology: TopologySpec::default(),
            dataset: DatasetSpec::default(),
            training: TrainConfig::default(),
            network: NetworkInit::default(),
            output: OutputConfig::default(),
            render: RenderStyle::default(),
            panel: PanelStyle::default(),
            sweep: None,
            transfer: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|s| key_at(text, s.start))
                .unwrap_or_else(|| "config".into());
            config_error(field, e.message().trim().to_string())
        })?;
        let dataset_topology = config.dataset.topology;
        if dataset_topology != TopologySpec::default() && dataset_topology != config.topology {
            return Err(config_error(
                "dataset.topology",
                "set the network shape in the [topology] section",
            ));
        }
        config.dataset.topology = config.topology;
        if let Some(seed) = config.seed {
            config.set_seed(seed);
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config = Self::parse(&text)?;
        // relative corpus paths are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        resolve_source(&mut config.dataset.source, base);
        if let Some(t) = &mut config.transfer {
            for entry in &mut t.datasets {
                resolve_source(&mut entry.source, base);
            }
        }
        Ok(config)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.dataset.seed = seed;
        self.training.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        self.dataset.validate()?;
        self.render.validate()?;
        let NetworkInit { init_low, init_high } = self.network;
        if !(init_low <= init_high) {
            return Err(config_error(
                "network.init_low",
                format!("must not exceed init_high ({init_low} > {init_high})"),
            ));
        }
        if self.panel.scale == 0 {
            return Err(config_error("panel.scale", "must be at least 1"));
        }
        Ok(())
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            dataset: self.dataset.clone(),
            training: self.training,
            init_low: self.network.init_low,
            init_high: self.network.init_high,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Data(format!("encoding config: {e}")))
    }
}

pub fn config_error(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

/// Dotted key (`section.key`) of the assignment containing byte `offset`.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let before = &text[..offset.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let section = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let key = line.split_once('=').map(|(k, _)| k.trim().to_string());
    match (section, key) {
        (Some(s), Some(k)) => Some(format!("{s}.{k}")),
        (None, Some(k)) => Some(k),
        (Some(s), None) => Some(s),
        (None, None) => None,
    }
}

fn resolve_source(source: &mut planar_core::datagen::SourceKind, base: &Path) {
    use planar_core::datagen::SourceKind::*;
    if let ImageDir { path } | ImageDirBw { path } | FrameSequence { path } = source {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

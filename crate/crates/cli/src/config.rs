//! Run configuration: one TOML or JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use obdf_sqd::obmp2::Obmp2Options;
use obdf_sqd::pipeline::{ActiveSpec, Method, PipelineConfig, SamplerSpec};
use obdf_sqd::rng::derive_seed;
use obdf_sqd::sqd::SqdConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

/// Geometry label of a scan point, usually a bond length in Angstrom.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeometryLabel(pub String);

impl GeometryLabel {
    pub fn numeric(&self) -> Option<f64> {
        self.0.trim().parse().ok()
    }

    /// Same geometry: equal as numbers when both parse, else equal as text.
    pub fn matches(&self, other: &GeometryLabel) -> bool {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a == b,
            _ => self.0.trim() == other.0.trim(),
        }
    }

    /// `h4_chain_sto3g_r1.50.fcidump` gives `1.50`; other names give the file stem.
    pub fn from_path(path: &Path) -> Self {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let tail = stem.rsplit('_').next().unwrap_or(&stem);
        match tail.strip_prefix('r') {
            Some(num) if num.parse::<f64>().is_ok() => GeometryLabel(num.to_string()),
            _ => GeometryLabel(stem),
        }
    }
}

impl fmt::Display for GeometryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum InputEntry {
    Path(PathBuf),
    Spec {
        path: PathBuf,
        label: Option<GeometryLabel>,
    },
}

/// One FCIDUMP of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "InputEntry")]
pub struct InputSpec {
    pub path: PathBuf,
    pub label: GeometryLabel,
}

impl InputSpec {
    pub fn new(path: PathBuf, label: Option<GeometryLabel>) -> Self {
        let label = label.unwrap_or_else(|| GeometryLabel::from_path(&path));
        InputSpec { path, label }
    }
}

impl From<InputEntry> for InputSpec {
    fn from(e: InputEntry) -> Self {
        match e {
            InputEntry::Path(path) => InputSpec::new(path, None),
            InputEntry::Spec { path, label } => InputSpec::new(path, label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub inputs: Vec<InputSpec>,
    pub methods: Vec<Method>,
    pub active: ActiveSpec,
    /// The seed inside is replaced per point, see [`RunConfig::point_config`].
    pub sampler: SamplerSpec,
    /// The seed inside is replaced per point.
    pub sqd: SqdConfig,
    pub obmp2: Obmp2Options,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Write a JSON-lines trace per SQD method and point.
    pub traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RunConfig {
            inputs: Vec::new(),
            methods: p.methods,
            active: p.active,
            sampler: p.sampler,
            sqd: p.sqd,
            obmp2: p.obmp2,
            seed: 0,
            output_dir: PathBuf::from("out"),
            traces: true,
        }
    }
}

impl RunConfig {
    /// Reads `.toml` or `.json`. A `run_meta.json` is accepted too; its
    /// `config` entry is used. Relative input paths resolve against the
    /// directory of the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut cfg: RunConfig = if is_json {
            let mut v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(inner) = v.get_mut("config") {
                v = inner.take();
            }
            serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        for input in &mut cfg.inputs {
            if input.path.is_relative() {
                input.path = base.join(&input.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods requested".into()));
        }
        if self.inputs.is_empty() {
            return Err(CliError::Config("no input FCIDUMP files".into()));
        }
        self.sqd.validate()?;
        let numeric: Option<Vec<f64>> = self.inputs.iter().map(|i| i.label.numeric()).collect();
        if let Some(xs) = numeric {
            if let Some(w) = xs.windows(2).find(|w| w[1] <= w[0]) {
                return Err(CliError::Config(format!(
                    "geometry labels must increase: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for (k, a) in self.inputs.iter().enumerate() {
            if self.inputs[..k].iter().any(|b| b.label.matches(&a.label)) {
                return Err(CliError::Config(format!(
                    "duplicate geometry label {}",
                    a.label
                )));
            }
        }
        Ok(())
    }

    /// Pipeline settings for point `index`: sampler and SQD seeds derived
    /// from the global seed so points are independent and reproducible.
    pub fn point_config(&self, index: usize) -> PipelineConfig {
        let mut sampler = self.sampler.clone();
        sampler.seed = derive_seed(self.seed, 2 * index as u64);
        let sqd = SqdConfig {
            seed: derive_seed(self.seed, 2 * index as u64 + 1),
            ..self.sqd.clone()
        };
        PipelineConfig {
            methods: self.methods.clone(),
            active: self.active.clone(),
            sampler,
            sqd,
            obmp2: self.obmp2.clone(),
        }
    }
}

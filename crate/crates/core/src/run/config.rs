use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{SplitSpec, SynthConfig};
use crate::error::{Error, Result};
use crate::federated::{FederationConfig, FitOptions};
use crate::model::{ModelConfig, TaskKind, Variant};
use crate::nn::AdamConfig;

/// Parameters of the built-in synthetic generator. The window length comes
/// from [`RunConfig::window`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthBlock {
    pub tasks: usize,
    pub windows: usize,
    pub features: usize,
    #[serde(default = "one")]
    pub labels: usize,
    #[serde(default = "classification")]
    pub kind: TaskKind,
    /// Generator seed; the run seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub pulse_width: Option<usize>,
    #[serde(default)]
    pub feature_noise: Option<f64>,
    #[serde(default)]
    pub label_noise: Option<f64>,
}

fn one() -> usize {
    1
}

fn classification() -> TaskKind {
    TaskKind::Classification
}

/// One complete, reproducible run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory of task CSVs plus `schema.json`.
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthBlock>,
    /// Task files with fewer rows are skipped.
    #[serde(default = "d_min_rows")]
    pub min_rows: usize,
    #[serde(default = "d_variant")]
    pub variant: Variant,
    /// Time steps per window (T).
    #[serde(default = "d_window")]
    pub window: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    #[serde(default = "d_hidden")]
    pub head_hidden: usize,
    #[serde(default = "d_mlp_width")]
    pub mlp_width: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default = "d_dropout")]
    pub dropout: f64,
    #[serde(default = "d_dropout")]
    pub recurrent_dropout: f64,
    #[serde(default = "d_l2")]
    pub l2: f64,
    #[serde(default = "d_max_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub split: SplitSpec,
    /// Decision threshold on predicted probabilities.
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    /// Attention weights above `spike_factor / D` are reported as spikes.
    #[serde(default = "d_spike")]
    pub spike_factor: f64,
    /// Test windows per task written by attention export.
    #[serde(default = "d_export")]
    pub export_windows: usize,
    /// Node worker threads; one per task when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn d_min_rows() -> usize {
    1
}
fn d_variant() -> Variant {
    Variant::Fathom
}
fn d_window() -> usize {
    30
}
fn d_hidden() -> usize {
    64
}
fn d_mlp_width() -> usize {
    16
}
fn d_batch() -> usize {
    60
}
fn d_lr() -> f64 {
    0.001
}
fn d_patience() -> usize {
    20
}
fn d_dropout() -> f64 {
    0.25
}
fn d_l2() -> f64 {
    1e-4
}
fn d_max_epochs() -> usize {
    200
}
fn d_output() -> PathBuf {
    PathBuf::from("fathom-out")
}
fn d_threshold() -> f64 {
    0.5
}
fn d_spike() -> f64 {
    3.0
}
fn d_export() -> usize {
    10
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    /// Parses and validates a JSON config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = field_of(&e);
            Error::config(field, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset_dir, &self.synth) {
            (None, None) => {
                return Err(Error::config(
                    "dataset_dir",
                    "set either `dataset_dir` or a `synth` block",
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::config("synth", "`dataset_dir` and `synth` are mutually exclusive"))
            }
            _ => {}
        }
        let counts = [
            ("min_rows", self.min_rows),
            ("window", self.window),
            ("stride", self.stride),
            ("hidden", self.hidden),
            ("head_hidden", self.head_hidden),
            ("mlp_width", self.mlp_width),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("export_windows", self.export_windows),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be positive"));
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("spike_factor", self.spike_factor),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be a positive number"));
            }
        }
        for (field, v) in [("dropout", self.dropout), ("recurrent_dropout", self.recurrent_dropout)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(field, "must lie in [0, 1)"));
            }
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2", "must be a non-negative number"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("threshold", "must lie in (0, 1)"));
        }
        self.split.validate()?;
        if let Some(s) = self.synth_config() {
            s.validate()?;
        }
        Ok(())
    }

    /// Generator settings when the run uses synthetic data.
    pub fn synth_config(&self) -> Option<SynthConfig> {
        self.synth.as_ref().map(|b| {
            let mut c = SynthConfig::new(
                b.tasks,
                b.windows,
                self.window,
                b.features,
                b.labels,
                b.kind,
                b.seed.unwrap_or(self.seed),
            );
            if let Some(v) = b.pulse_width {
                c.pulse_width = v;
            }
            if let Some(v) = b.feature_noise {
                c.feature_noise = v;
            }
            if let Some(v) = b.label_noise {
                c.label_noise = v;
            }
            c
        })
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            window: self.window,
            hidden: self.hidden,
            head_hidden: self.head_hidden,
            dropout: self.dropout,
            recurrent_dropout: self.recurrent_dropout,
            l2: self.l2,
            mlp_width: self.mlp_width,
        }
    }

    pub fn federation_config(&self) -> FederationConfig {
        FederationConfig {
            model: self.model_config(),
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            batch_size: self.batch_size,
            workers: self.workers,
            seed: self.seed,
            capture_uplink: false,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_epochs: self.max_epochs,
            patience: self.patience,
            threshold: self.threshold,
        }
    }
}

/// Dotted path of the field a parse error is about.
fn field_of(e: &serde_path_to_error::Error<serde_json::Error>) -> String {
    let path = e.path().to_string();
    let msg = e.inner().to_string();
    let missing = msg
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next());
    match (path.as_str(), missing) {
        (".", Some(name)) => name.to_string(),
        (_, Some(name)) => format!("{path}.{name}"),
        (".", None) => "<config>".to_string(),
        _ => path,
    }
}

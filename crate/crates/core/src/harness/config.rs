use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{NormalizationSpec, Scenario, SynthConfig};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TrainConfig};
use crate::neuralcore::DEFAULT_LEAKY_SLOPE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// `<root>/session<k>/subject<j>.csv`, optionally with a manifest.
    Dir {
        path: PathBuf,
    },
    Synth(SynthConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    MsMda,
    /// All sources concatenated into one domain, single branch.
    SourceCombine,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MsMda => "ms_mda",
            Method::SourceCombine => "source_combine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    NoMmd,
    NoDisc,
    NoBoth,
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationMode::NoMmd => "no_mmd",
            AblationMode::NoDisc => "no_disc",
            AblationMode::NoBoth => "no_both",
        })
    }
}

/// Architecture widths; input width, class count and branch count come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelTemplate {
    pub cfe_dims: Vec<usize>,
    pub dsfe_dim: usize,
    pub leaky_slope: f64,
}

impl Default for ModelTemplate {
    fn default() -> Self {
        let d = ModelConfig::default();
        Self {
            cfe_dims: d.cfe_dims,
            dsfe_dim: d.dsfe_dim,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl ModelTemplate {
    pub fn instantiate(
        &self,
        input_dim: usize,
        num_classes: usize,
        num_branches: usize,
        rng_seed: u64,
    ) -> ModelConfig {
        ModelConfig {
            input_dim,
            cfe_dims: self.cfe_dims.clone(),
            dsfe_dim: self.dsfe_dim,
            num_classes,
            num_branches,
            leaky_slope: self.leaky_slope,
            rng_seed,
        }
    }
}

/// Everything needed to reproduce a run. Serialized as `config.json` in the
/// output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub scenario: Scenario,
    #[serde(default)]
    pub loso: bool,
    #[serde(default)]
    pub normalization: NormalizationSpec,
    #[serde(default)]
    pub model: ModelTemplate,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub ablation: Option<AblationMode>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub save_checkpoints: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(data: DataSource, scenario: Scenario) -> Self {
        Self {
            data,
            scenario,
            loso: false,
            normalization: NormalizationSpec::default(),
            model: ModelTemplate::default(),
            train: TrainConfig::default(),
            method: Method::MsMda,
            ablation: None,
            seeds: vec![0],
            output_dir: None,
            save_checkpoints: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::validation("at least one seed is required"));
        }
        if let DataSource::Synth(s) = &self.data {
            s.validate()?;
        }
        self.train.validate()?;
        // dimension checks need the data; validate the widths with placeholders
        self.model.instantiate(1, 2, 1, 0).validate()
    }

    /// Applies an ablation's loss switches.
    pub fn with_ablation(mut self, mode: AblationMode) -> Self {
        self.train.ablate_mmd = matches!(mode, AblationMode::NoMmd | AblationMode::NoBoth);
        self.train.ablate_disc = matches!(mode, AblationMode::NoDisc | AblationMode::NoBoth);
        self.ablation = Some(mode);
        self
    }
}

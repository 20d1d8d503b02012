use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svs_core::correction::CorrectionConfig;
use svs_core::pipeline::{AcousticSetup, GenerateOptions, ModelSetup};
use svs_core::score::{LanguageRules, ParseOptions, PhonemeInventory, ScoreFeatureSchema, DEFAULT_FRAME_SHIFT};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scores: PathBuf,
    pub labels: PathBuf,
    pub f0: PathBuf,
    /// Optional spectral targets, one `<name>.mgc` per song.
    pub mgc: Option<PathBuf>,
    pub features: PathBuf,
    pub checkpoints: PathBuf,
    pub generated: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            scores: "scores".into(),
            labels: "labels".into(),
            f0: "f0".into(),
            mgc: None,
            features: "features".into(),
            checkpoints: "checkpoints".into(),
            generated: "generated".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelFormat {
    #[default]
    Frames,
    Htk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub frame_shift_s: f64,
    /// Tempo for scores without a tempo marking, BPM.
    pub default_tempo: Option<f64>,
    /// Feature schema file; every feature when absent.
    pub schema: Option<PathBuf>,
    /// Phoneme inventory file; the built-in Japanese inventory when absent.
    pub inventory: Option<PathBuf>,
    /// Long-vowel rules for lyrics.
    pub language: LanguageRules,
    pub label_format: LabelFormat,
    pub paths: Paths,
    pub timelag: ModelSetup,
    pub duration: ModelSetup,
    pub acoustic: AcousticSetup,
    pub correction: CorrectionConfig,
    pub generate: GenerateOptions,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            frame_shift_s: DEFAULT_FRAME_SHIFT,
            default_tempo: None,
            schema: None,
            inventory: None,
            language: LanguageRules::default(),
            label_format: LabelFormat::Frames,
            paths: Paths::default(),
            timelag: ModelSetup::default(),
            duration: ModelSetup::default(),
            acoustic: AcousticSetup::default(),
            correction: CorrectionConfig::default(),
            generate: GenerateOptions::default(),
        }
    }
}

/// A loaded configuration with every path resolved against the
/// configuration file's directory.
#[derive(Debug, Clone)]
pub struct Project {
    pub config: ProjectConfig,
    pub root: PathBuf,
    pub inventory: PhonemeInventory,
    pub schema: ScoreFeatureSchema,
}

impl Project {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let config: ProjectConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Self::from_config(config, root)
    }

    pub fn from_config(config: ProjectConfig, root: PathBuf) -> CliResult<Self> {
        if !(config.frame_shift_s > 0.0 && config.frame_shift_s.is_finite()) {
            return Err(CliError::config(format!(
                "frame_shift_s must be positive, got {}",
                config.frame_shift_s
            )));
        }
        if let Some(t) = config.default_tempo {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config(format!("default_tempo must be positive, got {t}")));
            }
        }
        if !(config.generate.vibrato_scale.is_finite()) {
            return Err(CliError::config("generate.vibrato_scale must be finite"));
        }
        config
            .correction
            .validate()
            .map_err(|e| CliError::config(format!("correction: {e}")))?;
        let inventory = match &config.inventory {
            None => PhonemeInventory::japanese(),
            Some(p) => {
                let p = root.join(p);
                let text = read_config_file(&p)?;
                PhonemeInventory::parse(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        let schema = match &config.schema {
            None => ScoreFeatureSchema::full(&inventory),
            Some(p) => {
                let p = root.join(p);
                let text = read_config_file(&p)?;
                ScoreFeatureSchema::parse(&text, &inventory)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
        };
        Ok(Self {
            config,
            root,
            inventory,
            schema,
        })
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    pub fn scores_dir(&self) -> PathBuf {
        self.path(&self.config.paths.scores)
    }

    pub fn labels_dir(&self) -> PathBuf {
        self.path(&self.config.paths.labels)
    }

    pub fn f0_dir(&self) -> PathBuf {
        self.path(&self.config.paths.f0)
    }

    pub fn mgc_dir(&self) -> Option<PathBuf> {
        self.config.paths.mgc.as_deref().map(|p| self.path(p))
    }

    pub fn features_dir(&self) -> PathBuf {
        self.path(&self.config.paths.features)
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.path(&self.config.paths.checkpoints)
    }

    pub fn generated_dir(&self) -> PathBuf {
        self.path(&self.config.paths.generated)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.path(&self.config.paths.reports)
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            frame_shift_s: self.config.frame_shift_s,
            default_tempo: self.config.default_tempo,
            inventory: self.inventory.clone(),
        }
    }
}

fn read_config_file(p: &Path) -> CliResult<String> {
    std::fs::read_to_string(p).map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))
}

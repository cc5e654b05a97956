use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slr_core::{SelectionMetric, TrainConfig, TransferScope};

use crate::error::{CliError, CliResult};

/// Model source for weight-initialization transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSource {
    pub checkpoint: PathBuf,
    #[serde(default)]
    pub scope: TransferScope,
}

/// Everything `train` needs, as stored in `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    /// Directory the manifest paths are relative to; the manifest's own
    /// directory when absent.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    pub mlp_hidden: usize,
    pub gru_hidden: usize,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub filter_threshold: Option<f64>,
    #[serde(default)]
    pub transfer: Option<TransferSource>,
    /// Metric recorded as the headline number; picked from class balance when absent.
    #[serde(default)]
    pub metric: Option<SelectionMetric>,
    /// Evaluate on the test split after every epoch.
    #[serde(default = "yes")]
    pub evaluate: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn data_dir(&self) -> PathBuf {
        match &self.data_dir {
            Some(d) => d.clone(),
            None => self.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.mlp_hidden == 0 || self.gru_hidden == 0 {
            return Err(CliError::new("invalid", "hidden sizes must be positive"));
        }
        if let Some(t) = self.filter_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(CliError::new(
                    "invalid",
                    format!("filter threshold {t} outside (0, 1]"),
                ));
            }
        }
        self.train.validate()?;
        let mut paths = vec![self.manifest.clone(), self.data_dir()];
        if let Some(t) = &self.transfer {
            paths.push(t.checkpoint.clone());
        }
        for p in paths {
            if !p.as_os_str().is_empty() && !p.exists() {
                return Err(CliError::new(
                    "io",
                    format!("{}: no such file or directory", p.display()),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig {
            manifest: "data/manifest.csv".into(),
            data_dir: None,
            mlp_hidden: 256,
            gru_hidden: 512,
            train: TrainConfig {
                max_epochs: Some(30),
                ..TrainConfig::default()
            },
            filter_threshold: Some(0.6),
            transfer: Some(TransferSource {
                checkpoint: "src.slrm".into(),
                scope: TransferScope::MlpOnly,
            }),
            metric: Some(SelectionMetric::MacroF1),
            evaluate: true,
        };
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.data_dir(), PathBuf::from("data"));
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"manifest": "m.csv", "mlp_hidden": 4, "gru_hidden": 3}"#).unwrap();
        assert_eq!(cfg.train, TrainConfig::default());
        assert!(cfg.evaluate);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"manifest": "m.csv", "mlp": 4}"#).is_err());
    }
}

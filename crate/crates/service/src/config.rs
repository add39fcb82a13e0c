use std::path::{Path, PathBuf};

use antisexism_core::alerting::AlertThresholds;
use antisexism_core::annotation::DEFAULT_PANEL_SIZE;
use antisexism_core::classifier::ClassifierConfig;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorToken {
    pub annotator_id: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Model artifact directory. Relative ids are looked up under
    /// `<data_dir>/models` when they do not exist as given.
    pub model: Option<String>,
    pub thresholds: AlertThresholds,
    pub annotators: Vec<AnnotatorToken>,
    pub panel_size: usize,
    /// Include source metadata in the annotation queue.
    pub show_source_metadata: bool,
    /// Train the linear baseline instead of the transformer.
    pub baseline: bool,
    pub classifier: ClassifierConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            model: None,
            thresholds: AlertThresholds::default(),
            annotators: Vec::new(),
            panel_size: DEFAULT_PANEL_SIZE,
            show_source_metadata: false,
            baseline: false,
            classifier: ClassifierConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let config: ServiceConfig =
            serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.thresholds.validate()?;
        self.classifier.validate()?;
        if self.panel_size == 0 {
            return Err(ServiceError::Config("panel_size must be at least 1".into()));
        }
        let mut tokens: Vec<&str> = self.annotators.iter().map(|a| a.token.as_str()).collect();
        tokens.sort();
        if tokens.windows(2).any(|w| w[0] == w[1]) || tokens.iter().any(|t| t.is_empty()) {
            return Err(ServiceError::Config("annotator tokens must be unique and non-empty".into()));
        }
        Ok(())
    }

    pub fn annotator_for(&self, token: &str) -> Option<&str> {
        self.annotators.iter().find(|a| a.token == token).map(|a| a.annotator_id.as_str())
    }

    pub fn model_path(&self) -> Option<PathBuf> {
        let id = self.model.as_deref()?;
        let direct = PathBuf::from(id);
        if direct.exists() {
            return Some(direct);
        }
        Some(self.data_dir.join("models").join(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config() {
        let c: ServiceConfig = serde_json::from_str(
            r#"{"data_dir": "/tmp/x", "annotators": [{"annotator_id": "ana", "token": "t1"}],
                "thresholds": {"red_min": 0.1, "yellow_min": 0.05, "min_comments": 50}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.panel_size, 4);
        assert_eq!(c.annotator_for("t1"), Some("ana"));
        assert_eq!(c.annotator_for("t2"), None);
        assert_eq!(c.thresholds.red_min, 0.1);
    }

    #[test]
    fn invalid_configs() {
        let dup = ServiceConfig {
            annotators: vec![
                AnnotatorToken { annotator_id: "a".into(), token: "t".into() },
                AnnotatorToken { annotator_id: "b".into(), token: "t".into() },
            ],
            ..Default::default()
        };
        assert!(dup.validate().is_err());
        let mut bad = ServiceConfig::default();
        bad.thresholds.yellow_min = 0.5;
        assert!(bad.validate().is_err());
    }
}

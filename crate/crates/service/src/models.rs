use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use antisexism_core::annotation::TrainingExample;
use antisexism_core::classifier::artifact::{self, CONFIG_FILE, SUMMARY_FILE};
use antisexism_core::classifier::{
    fine_tune_baseline, stratified_split, Backend, BaselineModel, ClassifierConfig, ClassifierError, TextClassifier,
};
use antisexism_transformer::{fine_tune_transformer, TransformerModel};
use sha2::{Digest, Sha256};

use crate::ServiceError;

/// A model ready to serve, tagged with the fingerprint of its artifact.
pub struct LoadedModel {
    pub id: String,
    pub dir: PathBuf,
    pub model: Box<dyn TextClassifier>,
}

impl std::fmt::Debug for LoadedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoadedModel").field("id", &self.id).field("dir", &self.dir).finish()
    }
}

/// First 16 hex digits of the SHA-256 over the config snapshot, the training
/// summary and the weights blob.
pub fn fingerprint(dir: &Path) -> Result<String, ServiceError> {
    let (meta, _) = artifact::read_meta(dir)?;
    let mut hasher = Sha256::new();
    for name in [CONFIG_FILE, SUMMARY_FILE, meta.weights.as_str()] {
        let mut file = fs::File::open(dir.join(name))?;
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
    }
    let digest = hasher.finalize();
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

pub fn load_model(dir: &Path) -> Result<Arc<LoadedModel>, ServiceError> {
    if !dir.join(CONFIG_FILE).exists() {
        return Err(ServiceError::NotFound(format!("no model artifact at {}", dir.display())));
    }
    let (meta, _) = artifact::read_meta(dir)?;
    let model: Box<dyn TextClassifier> = match meta.backend {
        Backend::Baseline => Box::new(BaselineModel::load(dir)?),
        Backend::Transformer => Box::new(TransformerModel::load(dir)?),
    };
    Ok(Arc::new(LoadedModel { id: fingerprint(dir)?, dir: dir.to_path_buf(), model }))
}

pub fn train(
    examples: &[TrainingExample],
    ratio: f64,
    config: &ClassifierConfig,
    baseline: bool,
) -> Result<Box<dyn TextClassifier>, ClassifierError> {
    config.validate()?;
    let split = stratified_split(examples, ratio, config.seed)?;
    Ok(if baseline {
        Box::new(fine_tune_baseline(&split, config)?)
    } else {
        Box::new(fine_tune_transformer(&split, config)?)
    })
}

/// Saves `model` under `models_dir/<fingerprint>` and returns the loaded
/// artifact. Saving an identical model twice reuses the existing directory.
pub fn store_model(models_dir: &Path, model: &dyn TextClassifier) -> Result<Arc<LoadedModel>, ServiceError> {
    fs::create_dir_all(models_dir)?;
    let staging = models_dir.join(format!(".staging-{}-{}", std::process::id(), unique()));
    model.save(&staging)?;
    let id = fingerprint(&staging)?;
    let dir = models_dir.join(&id);
    if dir.exists() {
        fs::remove_dir_all(&staging)?;
    } else {
        fs::rename(&staging, &dir)?;
    }
    load_model(&dir)
}

fn unique() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static NEXT: AtomicU64 = AtomicU64::new(0);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

#[cfg(test)]
mod tests {
    use antisexism_core::Label;

    use super::*;

    fn examples() -> Vec<TrainingExample> {
        (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    TrainingExample::new(format!("vuelve a la cocina {i}"), Label::Sexist)
                } else {
                    TrainingExample::new(format!("gran partido hoy {i}"), Label::NotSexist)
                }
            })
            .collect()
    }

    #[test]
    fn identical_training_gives_identical_id() {
        let dir = tempfile::tempdir().unwrap();
        let config = ClassifierConfig { epochs: 2, ..Default::default() };
        let a = store_model(dir.path(), train(&examples(), 0.8, &config, true).unwrap().as_ref()).unwrap();
        let b = store_model(dir.path(), train(&examples(), 0.8, &config, true).unwrap().as_ref()).unwrap();
        assert_eq!(a.id, b.id);
        assert_eq!(a.id.len(), 16);
        let other = ClassifierConfig { seed: 7, ..config };
        let c = store_model(dir.path(), train(&examples(), 0.8, &other, true).unwrap().as_ref()).unwrap();
        assert_ne!(a.id, c.id);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
        assert!(load_model(&dir.path().join("missing")).is_err());
    }
}

//! Locating base-model files: a local directory or a model-repository id
//! resolved through the local cache, downloading only when allowed.

use std::path::{Path, PathBuf};

use antisexism_core::classifier::ClassifierError;
use hf_hub::api::sync::ApiBuilder;
use hf_hub::Cache;

/// Overrides the model cache directory.
pub const CACHE_ENV: &str = "ANTISEXISM_MODEL_CACHE";
/// When set to anything but `0` or empty, nothing is downloaded.
pub const OFFLINE_ENV: &str = "ANTISEXISM_OFFLINE";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenizerFile {
    /// A serialized `tokenizer.json`.
    Json(PathBuf),
    /// A WordPiece `vocab.txt`.
    Vocab { path: PathBuf, lowercase: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseModelFiles {
    pub config: PathBuf,
    pub tokenizer: TokenizerFile,
    /// `model.safetensors` or `pytorch_model.bin`.
    pub weights: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelSource {
    pub cache_dir: Option<PathBuf>,
    pub offline: bool,
}

impl ModelSource {
    pub fn from_env() -> Self {
        let cache_dir = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let offline = std::env::var(OFFLINE_ENV).is_ok_and(|v| !v.is_empty() && v != "0");
        ModelSource { cache_dir, offline }
    }

    /// Finds the files of `model_id`. A path to an existing directory is used
    /// as is; anything else is treated as a repository id.
    pub fn resolve(&self, model_id: &str) -> Result<BaseModelFiles, ClassifierError> {
        let local = Path::new(model_id);
        if local.is_dir() {
            return resolve_with(model_id, |name| {
                let p = local.join(name);
                if p.is_file() { Ok(p) } else { Err(format!("{} not found", p.display())) }
            });
        }
        let cache = match &self.cache_dir {
            Some(dir) => Cache::new(dir.clone()),
            None => Cache::from_env(),
        };
        let cached = cache.model(model_id.to_string());
        let api = if self.offline {
            None
        } else {
            let api = ApiBuilder::from_cache(cache.clone()).with_progress(false).build().map_err(|e| {
                ClassifierError::ModelFetch { model: model_id.to_string(), reason: e.to_string() }
            })?;
            Some(api.model(model_id.to_string()))
        };
        resolve_with(model_id, |name| {
            if let Some(p) = cached.get(name) {
                return Ok(p);
            }
            match &api {
                None => Err(format!("{name} is not in the cache and downloads are disabled")),
                Some(repo) => repo.get(name).map_err(|e| format!("{name}: {e}")),
            }
        })
    }
}

fn resolve_with(
    model_id: &str,
    mut get: impl FnMut(&str) -> Result<PathBuf, String>,
) -> Result<BaseModelFiles, ClassifierError> {
    let fail = |reason: String| ClassifierError::ModelFetch { model: model_id.to_string(), reason };
    let config = get("config.json").map_err(fail)?;
    let tokenizer = match get("tokenizer.json") {
        Ok(p) => TokenizerFile::Json(p),
        Err(first) => {
            let path = get("vocab.txt").map_err(|e| fail(format!("{first}; {e}")))?;
            let lowercase = get("tokenizer_config.json")
                .ok()
                .and_then(|p| std::fs::read_to_string(p).ok())
                .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
                .and_then(|v| v.get("do_lower_case").and_then(|b| b.as_bool()))
                .unwrap_or(true);
            TokenizerFile::Vocab { path, lowercase }
        }
    };
    let weights = match get("model.safetensors") {
        Ok(p) => p,
        Err(first) => get("pytorch_model.bin").map_err(|e| fail(format!("{first}; {e}")))?,
    };
    Ok(BaseModelFiles { config, tokenizer, weights })
}

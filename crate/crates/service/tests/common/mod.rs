#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use antisexism_core::annotation::TrainingExample;
use antisexism_core::classifier::ClassifierConfig;
use antisexism_core::corpus::{ContentSource, Gender, MediaKind, ProtagonistCount, SourceContext};
use antisexism_core::Label;
use antisexism_service::app::{App, BulkComment, BulkRequest};
use antisexism_service::{models, AnnotatorToken, ServiceConfig};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub const TOKENS: [(&str, &str); 4] = [("ana", "tok-ana"), ("luis", "tok-luis"), ("eva", "tok-eva"), ("pau", "tok-pau")];

pub fn source(id: &str, gender: Gender) -> ContentSource {
    ContentSource {
        id: id.into(),
        url: format!("https://example.org/{id}"),
        media_kind: MediaKind::from_id_prefix(id).unwrap(),
        protagonist_gender: gender,
        protagonist_count: ProtagonistCount::Individual,
        context: SourceContext::Professional,
    }
}

pub fn sexist_text(i: usize) -> String {
    format!("vuelve a la cocina a fregar {i}")
}

pub fn neutral_text(i: usize) -> String {
    format!("gran partido del equipo hoy {i}")
}

pub fn training_examples() -> Vec<TrainingExample> {
    (0..40)
        .map(|i| {
            if i % 2 == 0 {
                TrainingExample::new(sexist_text(1000 + i), Label::Sexist)
            } else {
                TrainingExample::new(neutral_text(1000 + i), Label::NotSexist)
            }
        })
        .collect()
}

pub fn base_config(data_dir: &Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        annotators: TOKENS
            .iter()
            .map(|(a, t)| AnnotatorToken { annotator_id: a.to_string(), token: t.to_string() })
            .collect(),
        baseline: true,
        classifier: ClassifierConfig { epochs: 5, ..Default::default() },
        ..Default::default()
    }
}

/// Data directory with sources E5 (150 comments, every fifth sexist) and
/// T10 (10 comments), plus a trained baseline model set as active.
pub fn fixture(data_dir: &Path) -> ServiceConfig {
    let mut config = base_config(data_dir);
    let app = App::open(config.clone()).unwrap();
    app.add_sources(vec![source("E5", Gender::Female), source("T10", Gender::Male)]).unwrap();
    let comments = |prefix: &str, n: usize| {
        (0..n)
            .map(|i| BulkComment {
                id: format!("{prefix}-{i:03}"),
                text: if i % 5 == 0 { sexist_text(i) } else { neutral_text(i) },
                fetched_at: Some(chrono::DateTime::UNIX_EPOCH),
            })
            .collect()
    };
    app.bulk_ingest(BulkRequest { source_id: "E5".into(), comments: comments("e5", 150) }).unwrap();
    app.bulk_ingest(BulkRequest { source_id: "T10".into(), comments: comments("t10", 10) }).unwrap();
    let trained = models::train(&training_examples(), 0.8, &config.classifier, true).unwrap();
    let loaded = models::store_model(&data_dir.join("models"), trained.as_ref()).unwrap();
    config.model = Some(loaded.id.clone());
    config
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

pub async fn call(app: &Arc<App>, method: &str, uri: &str, body: Option<&str>, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(Body::from(body.unwrap_or("").to_string())).unwrap();
    let resp = antisexism_service::http::router(Arc::clone(app)).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

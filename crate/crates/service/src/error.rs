use antisexism_core::alerting::AlertError;
use antisexism_core::annotation::AnnotationError;
use antisexism_core::classifier::ClassifierError;
use antisexism_core::corpus::CorpusError;
use antisexism_core::evaluation::EvalError;
use antisexism_core::jsonl::JsonlError;
use axum::http::StatusCode;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("no model loaded")]
    NoModel,
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Machine-readable error body shared by the HTTP API and the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::NoModel => "no_model",
            ServiceError::Config(_) => "config",
            ServiceError::Corpus(CorpusError::UnknownSource(_)) => "not_found",
            ServiceError::Corpus(_) => "corpus",
            ServiceError::Annotation(AnnotationError::UnknownComment(_)) => "not_found",
            ServiceError::Annotation(AnnotationError::Frozen(_) | AnnotationError::PanelFull { .. }) => "conflict",
            ServiceError::Annotation(_) => "annotation",
            ServiceError::Classifier(ClassifierError::EmptyText) => "bad_request",
            ServiceError::Classifier(ClassifierError::ModelFetch { .. }) => "model_fetch",
            ServiceError::Classifier(_) => "classifier",
            ServiceError::Alert(_) => "bad_request",
            ServiceError::Eval(_) => "evaluation",
            ServiceError::Jsonl(_) => "input",
            ServiceError::Io(_) => "io",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self.kind() {
            "bad_request" | "corpus" | "classifier" | "evaluation" | "input" | "annotation" => StatusCode::BAD_REQUEST,
            "unauthorized" => StatusCode::UNAUTHORIZED,
            "not_found" => StatusCode::NOT_FOUND,
            "conflict" => StatusCode::CONFLICT,
            "no_model" => StatusCode::SERVICE_UNAVAILABLE,
            "model_fetch" => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { error: self.kind().to_string(), message: self.to_string() }
    }
}

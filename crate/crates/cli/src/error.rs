use serde::Serialize;
use std::path::Path;

/// Failure categories, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    ConfigError,
    SolverError,
    CrossCheckMismatch,
    IoError,
    SweepPartial,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::ConfigError => 2,
            Category::SolverError => 3,
            Category::CrossCheckMismatch => 4,
            Category::IoError => 5,
            Category::SweepPartial => 6,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ConfigError => "config-error",
            Category::SolverError => "solver-error",
            Category::CrossCheckMismatch => "cross-check-mismatch",
            Category::IoError => "io-error",
            Category::SweepPartial => "sweep-partial",
        }
    }
}

/// Printed to stderr as one JSON object on failure.
#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{}: {kind}: {message}", category.as_str())]
pub struct CliError {
    pub category: Category,
    /// Name of the underlying error, e.g. `DimensionError`.
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self { category, kind: kind.into(), message: message.into() }
    }

    pub fn config(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(Category::ConfigError, kind, message)
    }

    pub fn solver(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(Category::SolverError, kind, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(Category::IoError, "IoError", format!("{}: {e}", path.display()))
    }

    pub fn status(&self) -> &'static str {
        self.category.as_str()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "status": self.status(), "kind": self.kind, "message": self.message })
    }
}

/// Leading `XxxError` token of a library error message.
pub fn kind_of(message: &str) -> String {
    message.split(':').next().unwrap_or("Error").trim().to_string()
}

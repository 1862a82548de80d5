use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },
    #[error("{failed} of {total} grid points failed, over the budget of {budget}")]
    Budget { failed: usize, total: usize, budget: f64 },
    #[error("interrupted after {done} of {total} points; rerun with --resume")]
    Interrupted { done: usize, total: usize },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Budget { .. } => 3,
            CliError::Interrupted { .. } => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "exit_code": self.exit_code(), "message": self.to_string() });
        match self {
            CliError::Config { field, .. } => {
                v["error"] = "config".into();
                v["field"] = field.as_str().into();
            }
            CliError::Budget { failed, total, budget } => {
                v["error"] = "failure_budget".into();
                v["failed"] = (*failed).into();
                v["total"] = (*total).into();
                v["budget"] = (*budget).into();
            }
            CliError::Interrupted { done, total } => {
                v["error"] = "interrupted".into();
                v["done"] = (*done).into();
                v["total"] = (*total).into();
            }
            CliError::Io(_) => v["error"] = "io".into(),
        }
        v
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

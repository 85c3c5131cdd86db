use reachcare::assignment::AssignmentError;
use reachcare::metrics::MetricsError;
use reachcare::model::ModelError;
use reachcare::policy::PolicyError;
use reachcare::svcm::SvcmError;
use thiserror::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid inputs, unwritable outputs.
    #[error("{0}")]
    Input(String),
    /// The model has no solution under the given parameters.
    #[error("{0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<AssignmentError> for CliError {
    fn from(e: AssignmentError) -> Self {
        match e {
            AssignmentError::Model(m) => m.into(),
            AssignmentError::InfeasibleCoverage { .. } | AssignmentError::Infeasible(_) => {
                CliError::Infeasible(e.to_string())
            }
            AssignmentError::Solver(_) | AssignmentError::Audit(_) => CliError::Numerical(e.to_string()),
            AssignmentError::ScenarioMismatch => CliError::Input(e.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        let text = e.to_string();
        match e {
            PolicyError::LambdaOutOfRange { .. } | PolicyError::Grid(_) | PolicyError::Model(_) => {
                CliError::Input(text)
            }
            PolicyError::Metrics(_) => CliError::Numerical(text),
            PolicyError::Solve { source, .. } | PolicyError::Draw { source, .. } => match CliError::from(source) {
                CliError::Input(_) => CliError::Input(text),
                CliError::Infeasible(_) => CliError::Infeasible(text),
                CliError::Numerical(_) => CliError::Numerical(text),
            },
        }
    }
}

impl From<SvcmError> for CliError {
    fn from(e: SvcmError) -> Self {
        match e {
            SvcmError::RankDeficient { .. } | SvcmError::NonFinite(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

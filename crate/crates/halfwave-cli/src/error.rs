use halfwave::HwError;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    GroundState,
    Profile,
    Modulation,
    Evolve,
    Diagnostics,
    Report,
}

impl Stage {
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::GroundState => "ground-state",
            Stage::Profile => "profile",
            Stage::Modulation => "modulation",
            Stage::Evolve => "evolve",
            Stage::Diagnostics => "diagnostics",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("missing artifact {0} (run the producing stage first)")]
    MissingArtifact(String),
    #[error("{stage:?} stage failed: {source}")]
    Library {
        stage: Stage,
        #[source]
        source: HwError,
    },
    #[error("{} check(s) failed: {}", .0.len(), .0.join(", "))]
    ChecksFailed(Vec<String>),
}

impl CliError {
    pub fn lib(stage: Stage) -> impl Fn(HwError) -> CliError {
        move |source| CliError::Library { stage, source }
    }

    /// 1 config/domain, 2 diverged solver, 3 I/O, 4 missing artifact, 5 evolution,
    /// 6 modulation, 7 diagnostics, 8 a requested check failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 3,
            CliError::MissingArtifact(_) => 4,
            CliError::ChecksFailed(_) => 8,
            CliError::Library { stage, source } => match source {
                HwError::Config(_) | HwError::Domain(_) => 1,
                HwError::Io(_) => 3,
                _ => match stage {
                    Stage::Evolve => 5,
                    Stage::Modulation => 6,
                    Stage::Diagnostics => 7,
                    _ => 2,
                },
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::MissingArtifact(_) => "missing_artifact",
            CliError::ChecksFailed(_) => "checks_failed",
            CliError::Library { source, .. } => match source {
                HwError::Config(_) => "config",
                HwError::Domain(_) => "domain",
                HwError::IterationDiverged { .. } => "iteration_diverged",
                HwError::Io(_) => "io",
                HwError::Basin(_) | HwError::Conditioning(_) => "decomposition",
                HwError::Fit(_) => "fit",
                HwError::Tolerance(_) => "tolerance",
                _ => "numerical",
            },
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let stage = match self {
            CliError::Library { stage, .. } => Some(stage.dir_name()),
            _ => None,
        };
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "stage": stage,
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

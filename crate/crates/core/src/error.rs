use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("mode label must not be empty")]
    EmptyLabel,
    #[error("mode `{label}` aliases unknown mode `{target}`")]
    UnknownAliasTarget { label: String, target: String },
    #[error("mode `{label}` already registered with alias {existing:?}, requested {requested:?}")]
    ConflictingAlias {
        label: String,
        existing: Option<String>,
        requested: Option<String>,
    },
    #[error("unknown mode `{0}`")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("element {index} references unregistered mode {mode}")]
    UnregisteredMode { index: usize, mode: String },
    #[error("duplicate detector label `{0}`")]
    DuplicateDetector(String),
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("duplicate crystal name `{0}`")]
    DuplicateCrystal(String),
    #[error("unknown crystal `{0}`")]
    UnknownCrystal(String),
    #[error("element {index}: {reason}")]
    InvalidElement { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("scan table is empty")]
    EmptyTable,
    #[error("no signal: every rate in the scan is zero, visibility undefined")]
    NoSignal,
    #[error("contrast undefined: both path amplitudes are zero")]
    ContrastUndefined,
    #[error("invalid scan configuration: {0}")]
    InvalidScan(String),
    #[error("invalid coherence matrix: {0}")]
    InvalidCoherence(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("occupation of mode {mode} would exceed n_max = {n_max}")]
    OccupationOverflow { mode: usize, n_max: u8 },
    #[error("perturbation order {order} unsupported (expected 1 or 2, with n_max >= order)")]
    UnsupportedOrder { order: u32 },
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("coincidence needs two distinct detector modes, `{0}` and `{1}` share one")]
    SharedDetectorMode(String, String),
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode of the library, grouped so the CLI can map them onto
/// stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("surface-plasmon pole: eps_m + eps_d = {0:.3e} (resonance singularity)")]
    Pole(f64),
    #[error("design error: {0}")]
    Design(String),
    #[error("loss factor {xi} exceeds residual-resistivity limit {rrr}")]
    Saturation { xi: f64, rrr: f64 },
    #[error("construction error: {0}")]
    Construction(String),
    #[error("resolution error: dx = {dx} nm exceeds groove width {groove_width} nm")]
    Resolution { dx: f64, groove_width: f64 },
    #[error("placement error: {0}")]
    Placement(String),
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical instability at step {step}: non-finite field")]
    Instability { step: usize },
    #[error("extraction error: {0}")]
    Extraction(String),
    #[error("fit quality error: R^2 = {r_squared:.4}")]
    FitQuality { r_squared: f64 },
    #[error("integration-domain error: {0}")]
    IntegrationDomain(String),
    #[error("dependency error: {0}")]
    Dependency(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 1 runtime instability, 2 configuration, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Instability { .. } => 1,
            Error::Io { .. } => 3,
            _ => 2,
        }
    }

    /// Short machine-readable tag for error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Pole(_) => "pole",
            Error::Design(_) => "design",
            Error::Saturation { .. } => "saturation",
            Error::Construction(_) => "construction",
            Error::Resolution { .. } => "resolution",
            Error::Placement(_) => "placement",
            Error::Config { .. } => "config",
            Error::Instability { .. } => "instability",
            Error::Extraction(_) => "extraction",
            Error::FitQuality { .. } => "fit_quality",
            Error::IntegrationDomain(_) => "integration_domain",
            Error::Dependency(_) => "dependency",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serde",
        }
    }
}

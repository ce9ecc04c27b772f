use thiserror::Error;

/// Errors raised anywhere in the simulator and controller stack.
#[derive(Debug, Error)]
pub enum FarmError {
    #[error("aerodynamic torque is singular at zero rotor speed (power {power} W)")]
    ZeroRotorSpeed { power: f64 },

    #[error("integration diverged: state `{dof}` became non-finite")]
    Diverged { dof: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("CFL condition violated: courant number {courant:.4} (dt = {dt} s, dx = {dx} m)")]
    Cfl { courant: f64, dt: f64, dx: f64 },

    #[error("trim solver did not converge: residual norm {residual:.3e} after {iterations} iterations")]
    TrimNotConverged { residual: f64, iterations: usize },

    #[error("Riccati synthesis failed: {0}")]
    Synthesis(String),

    #[error("correlation undefined: zero variance in `{series}`")]
    ZeroVariance { series: &'static str },

    #[error("input data error: {0}")]
    Data(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<FarmError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, FarmError>;

impl FarmError {
    pub fn context(self, context: impl Into<String>) -> Self {
        FarmError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        FarmError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &FarmError {
        match self {
            FarmError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

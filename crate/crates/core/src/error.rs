use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid parameter `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("cable {cable} is degenerate (length {length:.3e} m)")]
    DegenerateGeometry { cable: usize, length: f64 },

    #[error("pose outside workspace: {0}")]
    Workspace(String),

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("tension constraint reduction is degenerate: {0}")]
    ConstraintDegeneracy(String),

    /// The per-cable feasible intervals for the free distribution parameter
    /// do not intersect. `intervals` holds one `(lo, hi)` per cable.
    #[error("no feasible tension distribution (violating cables {violating:?})")]
    InfeasibleTension {
        violating: Vec<usize>,
        intervals: Vec<(f64, f64)>,
    },

    #[error("inertia matrix factorization failed")]
    SingularInertia,

    #[error("state diverged at t = {t} s (channel {channel}, value {value:.3e})")]
    Divergence { t: f64, channel: usize, value: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation { .. } | Error::Contract(_) | Error::Io(_) => 2,
            Error::Divergence { .. } => 3,
            Error::DegenerateGeometry { .. }
            | Error::Workspace(_)
            | Error::SingularConfiguration(_)
            | Error::ConstraintDegeneracy(_)
            | Error::InfeasibleTension { .. }
            | Error::SingularInertia => 4,
        }
    }
}

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SheetError {
    /// An argument lies outside the operation's domain.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A series or integral did not reach the requested tolerance.
    #[error("range error in {op}: attained error bound {attained:e} exceeds tolerance {requested:e}")]
    Range {
        op: &'static str,
        attained: f64,
        requested: f64,
    },

    /// A grid or lattice does not satisfy the operation's shape requirements.
    #[error("grid error in {op}: {msg}")]
    Grid { op: &'static str, msg: String },

    /// Quadrature did not converge.
    #[error("quadrature in {op} did not converge: estimated error {estimate:e}")]
    Quadrature { op: &'static str, estimate: f64 },
}

impl SheetError {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        SheetError::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn grid(op: &'static str, msg: impl Into<String>) -> Self {
        SheetError::Grid {
            op,
            msg: msg.into(),
        }
    }

    /// Name of the operation that failed.
    pub fn operation(&self) -> &'static str {
        match self {
            SheetError::Domain { op, .. }
            | SheetError::Range { op, .. }
            | SheetError::Grid { op, .. }
            | SheetError::Quadrature { op, .. } => op,
        }
    }
}

pub type Result<T> = std::result::Result<T, SheetError>;

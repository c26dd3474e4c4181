use alloc::string::String;

/// Errors reported by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Damped Newton could not solve the best-response equation for one atom.
    /// This happens when `I + T D_x grad_x g` is not invertible along the path,
    /// typically because `g` is not convex in `x`.
    #[error("best response for atom {atom} did not converge (residual {residual:e})")]
    NewtonFailure { atom: usize, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;

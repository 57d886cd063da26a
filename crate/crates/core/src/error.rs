use thiserror::Error;

/// Errors reported by the generators and their supporting structures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("target average degree {target} is unreachable for n = {n} (must be in (0, n-1))")]
    UnreachableTarget { target: f64, n: usize },

    #[error("cells are on different levels ({0} vs {1})")]
    LevelMismatch(u32, u32),

    #[error("level {level} exceeds the limit {limit}")]
    LevelTooDeep { level: u32, limit: u32 },

    #[error("numeric range exceeded: {0}")]
    NumericRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

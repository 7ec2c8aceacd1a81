//! Crate-wide error type.

/// Errors reported by the library.
///
/// Variants mirror the failure modes of the public operations: bad scalar
/// parameters, structurally inconsistent inputs, inputs a method cannot
/// handle, sizes past hard caps, and numerical breakdown.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A scalar parameter is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input exceeds a documented size cap.
    #[error("size error: {0}")]
    Size(String),

    /// The input is well formed but the requested method does not apply.
    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// Component parts of a structured input contradict each other.
    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    /// A numerical procedure broke down (singular system, non-finite value).
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

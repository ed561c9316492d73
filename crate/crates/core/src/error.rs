use thiserror::Error;

/// Errors raised by the chainshell computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input value is outside the domain of the operation.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A requested target cannot be reached for the given inputs.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An (amplitude, frequency) pair lies outside the deformation envelope.
    #[error("envelope violation: amplitude {amplitude_mm} mm at f = {frequency} exceeds the {shape} limit of {limit_mm} mm")]
    Envelope {
        shape: String,
        amplitude_mm: f64,
        frequency: u32,
        limit_mm: f64,
    },

    /// A mesh or surface does not satisfy the height-field requirements.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The assembled stiffness matrix is singular or indefinite.
    #[error("mechanism: unconstrained degrees of freedom {dofs:?}")]
    Mechanism { dofs: Vec<String> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}

use alloc::string::String;

/// Index parity of one of the two tridiagonal subsystems of a gap system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Unknowns 1, 3, 5, ... (zero-based 0, 2, 4, ...).
    Odd,
    /// Unknowns 2, 4, 6, ... (zero-based 1, 3, 5, ...).
    Even,
}

impl core::fmt::Display for Parity {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Parity::Odd => f.write_str("odd"),
            Parity::Even => f.write_str("even"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("point {x} lies outside [0, {length}]")]
    Domain { x: f64, length: f64 },

    #[error("degree {0} exceeds the supported maximum")]
    DegreeTooLarge(usize),

    #[error("quadrature did not converge (best estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("compatibility violated: function value {value:e} at x = {x}")]
    Compatibility { x: f64, value: f64 },

    #[error("non-positive pivot {pivot:e} at position {index} of the {parity} subsystem")]
    Pivot {
        parity: Parity,
        index: usize,
        pivot: f64,
    },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn at_layer(self, layer: usize) -> Self {
        Error::Layer {
            layer,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

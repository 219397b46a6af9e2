use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-conforming input mesh: {0}")]
    NonConformingMesh(String),

    #[error("incompatible newest-vertex labeling: {0}")]
    IncompatibleLabeling(String),

    #[error("degenerate or negatively oriented triangle {index} (signed area {area})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("element {0} is not active")]
    InactiveElement(usize),

    #[error("element id {0} does not exist in this forest")]
    UnknownElement(usize),

    #[error("partition does not belong to this forest")]
    ForeignPartition,

    #[error("partition is not conforming: hanging node at vertex {vertex} on edge ({v0}, {v1})")]
    NonConformingPartition { vertex: usize, v0: usize, v1: usize },

    #[error("piecewise polynomial is not defined on an ancestor of element {0}")]
    PartitionMismatch(usize),

    #[error("diffusion approximant carries no certified spectral bounds")]
    UncertifiedCoefficient,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "conjugate gradients stalled after {iterations} iterations \
         (relative residual {residual:.3e}, target {target:.3e})"
    )]
    SolverStalled {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error(
        "data approximation did not reach tolerance {tolerance:.6e}: error stalled at \
         {achieved:.6e} after {elements} elements"
    )]
    DataApproxStalled {
        tolerance: f64,
        achieved: f64,
        elements: usize,
    },

    #[error("outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed mesh file: {0}")]
    MeshFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_iteration(self, iteration: usize) -> Error {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

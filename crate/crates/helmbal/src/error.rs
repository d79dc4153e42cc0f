//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cylinder-function order this crate does not implement.
    #[error("unsupported Bessel order {0}; supported orders are 0, 1/2, 1, 3/2")]
    UnsupportedOrder(f64),

    /// Inconsistent grids, out-of-range indices, cell-count caps.
    #[error("grid error: {0}")]
    Grid(String),

    /// Malformed measure, scenario, or solver configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Iterative solver failed to reach its tolerance.
    #[error("solver error: {0}")]
    Solver(String),

    /// Dirichlet solve refused: the operator -Delta - k^2 is not positive
    /// definite on the requested region.
    #[error("smallest Laplace eigenvalue {lambda1:.6e} does not exceed k^2 = {k2:.6e}; the Dirichlet problem is not coercive")]
    NotCoercive { lambda1: f64, k2: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

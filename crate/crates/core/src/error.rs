use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnsError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    #[error("singular flattening map: J = {jmin:.6e} at node {node}")]
    SingularMap { jmin: f64, node: usize },
    #[error("Jacobian window violated at step {step}: J in [{jmin:.6}, {jmax:.6}]")]
    JacobianWindow { step: usize, jmin: f64, jmax: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular mode system at |k| = {kabs}")]
    SingularMode { kabs: f64 },
    #[error("parabolic inner iteration stalled after {sweeps} sweeps (contraction estimate {contraction:.3})")]
    InnerIteration { sweeps: usize, contraction: f64 },
    #[error("Picard iteration did not converge in {sweeps} sweeps; diff norms {history:?}")]
    NoConvergence { sweeps: usize, history: Vec<f64> },
    #[error("initial data norm {norm:.4e} exceeds smallness threshold {eps0:.4e}")]
    Smallness { norm: f64, eps0: f64 },
    #[error("incompatible initial data: {0}")]
    Compatibility(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CnsError>;

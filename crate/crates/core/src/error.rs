use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("root finding did not converge: {0}")]
    Convergence(String),
    #[error("frequency {omega} is within 1e-9 of the mass threshold")]
    Threshold { omega: f64 },
    #[error("seed residual {residual:e} exceeds tolerance {tol:e}")]
    SeedAccuracy { residual: f64, tol: f64 },
    #[error("step size underflow at coordinate {at}")]
    StepSizeUnderflow { at: f64 },
    #[error("a-posteriori ODE residual {residual:e} exceeds {limit:e}")]
    Residual { residual: f64, limit: f64 },
    #[error("modes are degenerate: |W| = {w:e}, scale {scale:e}")]
    DegenerateModes { w: f64, scale: f64 },
    #[error("fit window holds {got} samples, need at least {need}")]
    WindowTooSmall { got: usize, need: usize },
    #[error("radius {r} lies outside the solved grid [{lo}, {hi}]")]
    Interpolation { r: f64, lo: f64, hi: f64 },
    #[error("angular sum not converged at l_max = {l_max}")]
    Truncation { l_max: usize },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("cannot classify branch for t = {re} + {im}i")]
    Branch { re: f64, im: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

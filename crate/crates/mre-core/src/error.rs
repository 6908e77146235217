//! Error types, one enum per pipeline stage, plus the umbrella
//! [`EngineError`] used by orchestration code.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum MeasureError {
    #[error("measure: atom location {0} is negative")]
    NegativeLocation(f64),
    #[error("measure: atom weight {0} is negative")]
    NegativeWeight(f64),
    #[error("measure: density coefficient {0} is negative")]
    NegativeCoefficient(f64),
    #[error("measure: non-finite field value {0}")]
    NonFinite(f64),
    #[error("measure: matrix must be square, got {rows} rows of inconsistent width")]
    NotSquare { rows: usize },
    #[error("measure: lattice span {0} must be positive")]
    BadSpan(f64),
    #[error("measure: lattice weight {0} is negative")]
    NegativeLatticeWeight(f64),
    #[error("measure: lattice support has gcd {gcd} > 1, declared span is not maximal")]
    SpanNotMaximal { gcd: u64 },
    #[error("measure: dimension mismatch, expected {expected} components, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Error)]
pub enum TransformError {
    #[error("transform: Re(z) = {re} is not inside the domain (abscissa {abscissa})")]
    Domain { re: f64, abscissa: f64 },
    #[error("transform: z + beta = 0 for density rate beta = {beta}")]
    Pole { beta: f64 },
}

#[derive(Debug, Clone, Error)]
pub enum SpectralError {
    #[error("spectral: eigen-solver failed to converge within {iters} iterations")]
    Convergence { iters: usize },
    #[error("spectral: matrix is not primitive")]
    NotPrimitive,
    #[error("spectral: matrix has negative or non-finite entries")]
    NotNonnegative,
    #[error(
        "spectral: no Malthusian parameter, varrho < 1 on the entire sampled domain (A3 fails)"
    )]
    NoMalthusian,
    #[error("spectral: rho(mu(0)) = {rho} >= 1 violates (A2)")]
    Assumption { rho: f64 },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Error)]
pub enum RootError {
    #[error("roots: determinant zero on integration boundary (|det| = {value:.3e} at {z})")]
    BoundaryRoot { z: Complex64, value: f64 },
    #[error(
        "roots: phase tracking exceeded pi/2 between samples after maximum refinement ({samples} per edge)"
    )]
    Quadrature { samples: usize },
    #[error("roots: subdivision exceeded depth {depth}, root cluster below resolution")]
    MaxDepth { depth: usize },
    #[error("roots: lattice characteristic polynomial is constant, no roots exist")]
    Degenerate,
    #[error("roots: region is invalid ({0})")]
    BadRegion(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Error)]
pub enum LaurentError {
    #[error("laurent: no admissible contour radius around {lambda}")]
    Radius { lambda: Complex64 },
    #[error("laurent: contour quadrature did not converge below {target:.1e} at {nodes} nodes")]
    Quadrature { target: f64, nodes: usize },
    #[error("laurent: I - L mu(z) numerically singular at contour node {z}")]
    SingularContour { z: Complex64 },
    #[error("laurent: coefficient formula requires Re(lambda) > 0, got {re}")]
    UnsupportedRoot { re: f64 },
    #[error("laurent: moment integral diverges at lambda = {lambda} (exponential order {order})")]
    DivergentMoment { lambda: Complex64, order: f64 },
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Error)]
pub enum ExpansionError {
    #[error("expansion: root {lambda} lies in the remainder strip ({lo}, {hi}]")]
    StripRoot { lambda: Complex64, lo: f64, hi: f64 },
    #[error("expansion: (Re lambda) * t = {exponent} overflows evaluation; scaled value carried")]
    OverflowGuard { exponent: f64 },
    #[error("expansion: {0}")]
    Assumption(String),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("oracle: rho(mu({{0}})) = {rho} >= 1, lattice recursion insolvable (A2)")]
    Assumption { rho: f64 },
    #[error("oracle: expected population {expected:.3e} exceeds cap {cap:.3e}")]
    PopulationCap { expected: f64, cap: f64 },
    #[error("oracle: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Error)]
pub enum ConditionError {
    #[error("conditions: a characteristic root lies on the line Re(z) = {theta}")]
    RootOnLine { theta: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Umbrella error with module-qualified messages, for CLI surfaces.
#[derive(Debug, Clone, Error)]
pub enum EngineError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

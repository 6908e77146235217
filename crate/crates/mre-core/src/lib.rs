//! Numerical engine for asymptotic expansions of solutions to matrix
//! renewal equations `F = f + mu * F`.
//!
//! The pipeline goes measure family -> matrix Laplace transform ->
//! Malthusian parameter and characteristic roots -> Laurent data of
//! `(I - L mu(z))^-1` -> expansion coefficients, and is validated against
//! exact lattice recursions, grid convolutions, and a multi-type
//! Crump-Mode-Jagers Monte Carlo simulator.
//!
//! Heavy inner loops (Monte Carlo replications, boundary sampling for
//! winding numbers, contour quadrature, vertical-line norm scans) run on
//! rayon when the default `parallel` feature is enabled and fall back to
//! plain iterators without it. Results are identical either way.

pub mod conditions;
pub mod error;
pub mod expansion;
pub mod laurent;
pub mod linalg;
pub mod measure;
pub mod oracle;
pub mod poly;
pub mod roots;
pub mod spectral;
pub mod transform;

mod par;

pub use error::EngineError;
pub use linalg::{CMatrix, RMatrix};
pub use measure::{
    AtomTerm, CharComponent, Characteristic, ExpPolyTerm, LatticeCharacteristic,
    LatticeMeasureMatrix, MeasureMatrix, ScalarMeasure, StepTerm,
};

/// Numeric knobs shared across the pipeline. All defaults follow the
/// operation contracts; configs may override any of them.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Residual bound `|det(I - L mu(lambda))|` accepted for a root.
    pub tol_det: f64,
    /// Relative threshold (against `||A_{lambda,1}||`) below which a
    /// Laurent matrix counts as zero when detecting the pole order.
    pub tol_laurent: f64,
    /// Bisection target `|varrho(alpha) - 1|` for the Malthusian parameter.
    pub tol_rho: f64,
    /// Node-doubling stop for contour quadrature: successive coefficient
    /// values must differ by less than this.
    pub tol_quad: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_det: 1e-10,
            tol_laurent: 1e-9,
            tol_rho: 1e-12,
            tol_quad: 1e-11,
        }
    }
}

/// Cap the rayon pool from the `MRE_THREADS` environment variable.
///
/// Call once at process start; later calls are no-ops. Without the
/// `parallel` feature this does nothing.
pub fn configure_threads_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("MRE_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
            }
        }
    }
}

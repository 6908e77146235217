//! Exact matrix Laplace transform `L mu(z)`, its domain abscissa, and the
//! lattice generating function `G mu(z)`. Closed form only: no quadrature
//! happens on the transform side, so downstream contour integrals carry
//! only their own sampling error.

use num_complex::Complex64;

use crate::error::TransformError;
use crate::linalg::CMatrix;
use crate::measure::{LatticeMeasureMatrix, MeasureMatrix};

/// A transform evaluation: the matrix and the point it was taken at.
#[derive(Debug, Clone)]
pub struct TransformValue {
    pub point: Complex64,
    pub matrix: CMatrix,
}

/// Infimum of the half-plane of convergence of `L mu`; `-inf` when every
/// entry is purely atomic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainAbscissa(pub f64);

pub fn domain_abscissa(m: &MeasureMatrix) -> DomainAbscissa {
    DomainAbscissa(m.abscissa())
}

fn check_domain(m: &MeasureMatrix, z: Complex64) -> Result<(), TransformError> {
    let abscissa = m.abscissa();
    if z.re <= abscissa {
        return Err(TransformError::Domain { re: z.re, abscissa });
    }
    for e in m.entries() {
        for d in &e.densities {
            if (z + d.rate).norm() == 0.0 {
                return Err(TransformError::Pole { beta: d.rate });
            }
        }
    }
    Ok(())
}

/// Entrywise exact Laplace transform at `z`, `Re z` above the abscissa.
pub fn laplace_matrix(m: &MeasureMatrix, z: Complex64) -> Result<TransformValue, TransformError> {
    check_domain(m, z)?;
    Ok(TransformValue {
        point: z,
        matrix: laplace_raw(m, z),
    })
}

/// Transform matrix without the domain check, for inner loops that have
/// already validated their contour.
pub(crate) fn laplace_raw(m: &MeasureMatrix, z: Complex64) -> CMatrix {
    let p = m.dim();
    let mut out = CMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            out.set(i, j, m.entry(i, j).transform_at(z));
        }
    }
    out
}

/// Entrywise derivative `d/dz L mu(z)`.
pub fn laplace_derivative(m: &MeasureMatrix, z: Complex64) -> Result<CMatrix, TransformError> {
    check_domain(m, z)?;
    let p = m.dim();
    let mut out = CMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            out.set(i, j, m.entry(i, j).transform_derivative_at(z));
        }
    }
    Ok(out)
}

/// Generating function `G mu(z)`, an entire (polynomial) matrix function.
pub fn generating_matrix(l: &LatticeMeasureMatrix, z: Complex64) -> TransformValue {
    let p = l.dim();
    let mut out = CMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            let mut acc = Complex64::new(0.0, 0.0);
            for &w in l.weights(i, j).iter().rev() {
                acc = acc * z + w;
            }
            out.set(i, j, acc);
        }
    }
    TransformValue {
        point: z,
        matrix: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ScalarMeasure;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Two-type model with Poisson(a) self-reproduction and Poisson(b)
    /// cross-feeding, transform `[[a, b], [0, a]] / z`.
    fn upper_poisson(a: f64, b: f64) -> MeasureMatrix {
        MeasureMatrix::from_grid(vec![
            vec![
                ScalarMeasure::poisson_intensity(a),
                ScalarMeasure::poisson_intensity(b),
            ],
            vec![ScalarMeasure::zero(), ScalarMeasure::poisson_intensity(a)],
        ])
        .unwrap()
    }

    #[test]
    fn poisson_pair_transform() {
        let m = upper_poisson(1.0, 1.0);
        let z = c(2.0, 0.5);
        let t = laplace_matrix(&m, z).unwrap().matrix;
        assert!((t.get(0, 0) - 1.0 / z).norm() < 1e-14);
        assert!((t.get(0, 1) - 1.0 / z).norm() < 1e-14);
        assert!(t.get(1, 0).norm() < 1e-14);
        assert!((t.get(1, 1) - 1.0 / z).norm() < 1e-14);
    }

    #[test]
    fn zero_measure_transforms_to_zero() {
        let m = MeasureMatrix::from_grid(vec![vec![ScalarMeasure::zero()]]).unwrap();
        let t = laplace_matrix(&m, c(0.3, -4.0)).unwrap().matrix;
        assert_eq!(t.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn single_atom_transform() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::from_atoms(&[(2.0, 3.0)])]]).unwrap();
        let t = laplace_matrix(&m, c(1.0, 0.0)).unwrap().matrix;
        assert!((t.get(0, 0).re - 3.0 * (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn domain_abscissa_cases() {
        let atoms =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::from_atoms(&[(1.0, 1.0)])]]).unwrap();
        assert_eq!(domain_abscissa(&atoms).0, f64::NEG_INFINITY);

        let exp1 = MeasureMatrix::from_grid(vec![vec![ScalarMeasure {
            atoms: vec![],
            densities: vec![crate::measure::ExpPolyTerm {
                coefficient: 1.0,
                power: 0,
                rate: 1.0,
            }],
        }]])
        .unwrap();
        assert_eq!(domain_abscissa(&exp1).0, -1.0);

        let poisson =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::poisson_intensity(2.0)]]).unwrap();
        assert_eq!(domain_abscissa(&poisson).0, 0.0);
    }

    #[test]
    fn domain_error_below_abscissa() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::poisson_intensity(1.0)]]).unwrap();
        assert!(matches!(
            laplace_matrix(&m, c(0.0, 1.0)),
            Err(TransformError::Domain { .. })
        ));
    }

    #[test]
    fn conjugate_symmetry() {
        let m = upper_poisson(1.0, 2.0);
        for k in 0..100 {
            let z = c(0.5 + 0.07 * k as f64, -3.0 + 0.06 * k as f64);
            let a = laplace_matrix(&m, z.conj()).unwrap().matrix;
            let b = laplace_matrix(&m, z).unwrap().matrix.conj();
            assert!(a.sub(&b).max_abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_domination_on_reals() {
        let m = upper_poisson(1.5, 0.3);
        let lo = laplace_matrix(&m, c(1.0, 0.0)).unwrap().matrix;
        let hi = laplace_matrix(&m, c(2.0, 0.0)).unwrap().matrix;
        for i in 0..2 {
            for j in 0..2 {
                assert!(hi.get(i, j).re <= lo.get(i, j).re + 1e-14);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let m = upper_poisson(1.0, 1.0);
        let z = c(1.7, 0.9);
        let d = laplace_derivative(&m, z).unwrap();
        let h = 1e-5;
        let plus = laplace_matrix(&m, z + h).unwrap().matrix;
        let minus = laplace_matrix(&m, z - h).unwrap().matrix;
        for i in 0..2 {
            for j in 0..2 {
                let fd = (plus.get(i, j) - minus.get(i, j)) / (2.0 * h);
                let exact = d.get(i, j);
                if exact.norm() > 0.0 {
                    assert!((fd - exact).norm() / exact.norm() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn generating_function_basics() {
        // Single type, weight 1/2 at n = 1: G(z) = z / 2.
        let l = LatticeMeasureMatrix::new(1, 1.0, vec![vec![0.0, 0.5]]).unwrap();
        let z = c(0.4, 0.2);
        let g = generating_matrix(&l, z).matrix;
        assert!((g.get(0, 0) - z / 2.0).norm() < 1e-15);
        // At z = 0 the constant term is the instant mass.
        let g0 = generating_matrix(&l, c(0.0, 0.0)).matrix;
        assert_eq!(g0.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn lattice_bridge_g_at_exp_minus_z() {
        let l = LatticeMeasureMatrix::new(
            2,
            1.0,
            vec![
                vec![0.1, 0.4],
                vec![0.0, 0.3, 0.2],
                vec![0.2, 0.1],
                vec![0.0, 0.5],
            ],
        )
        .unwrap();
        let m = l.to_measure_matrix();
        for k in 0..10 {
            let z = c(0.2 + 0.1 * k as f64, -1.0 + 0.23 * k as f64);
            let lhs = generating_matrix(&l, (-z).exp()).matrix;
            let rhs = laplace_matrix(&m, z).unwrap().matrix;
            assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        }
    }
}

//! Spectral radius of the transform matrix, Perron vectors, primitivity,
//! assumption checks, and the Malthusian parameter by bracketed bisection
//! on the decreasing map `theta -> rho(L mu(theta))`.

use num_complex::Complex64;

use crate::error::SpectralError;
use crate::linalg::CMatrix;
use crate::measure::MeasureMatrix;
use crate::transform;

/// Modulus of the largest eigenvalue. Agrees with the Perron-Frobenius
/// eigenvalue for nonnegative matrices.
pub fn spectral_radius(a: &CMatrix) -> Result<f64, SpectralError> {
    if !a.is_finite() {
        return Err(SpectralError::NotNonnegative);
    }
    Ok(a.eigenvalues()?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Boolean incidence-matrix primitivity test via Wielandt's exponent
/// bound: a nonnegative `p x p` matrix is primitive iff its incidence
/// matrix to the power `p^2 - 2p + 2` is entrywise positive.
pub fn is_primitive(incidence: &[bool], p: usize) -> bool {
    if p == 0 {
        return false;
    }
    if p == 1 {
        return incidence[0];
    }
    let target = p * p - 2 * p + 2;
    let mut acc: Vec<bool> = incidence.to_vec();
    let mut base: Vec<bool> = incidence.to_vec();
    let mut remaining = target - 1;
    // acc = incidence^target by binary exponentiation.
    while remaining > 0 {
        if remaining & 1 == 1 {
            acc = bool_matmul(&acc, &base, p);
        }
        base = bool_matmul(&base, &base, p);
        remaining >>= 1;
    }
    acc.iter().all(|&x| x)
}

fn bool_matmul(a: &[bool], b: &[bool], p: usize) -> Vec<bool> {
    let mut out = vec![false; p * p];
    for i in 0..p {
        for k in 0..p {
            if a[i * p + k] {
                for j in 0..p {
                    if b[k * p + j] {
                        out[i * p + j] = true;
                    }
                }
            }
        }
    }
    out
}

/// Perron vector of a primitive nonnegative real matrix: the unique
/// positive unit eigenvector of the dominant eigenvalue, by power
/// iteration.
pub fn perron_vector(a: &CMatrix) -> Result<Vec<f64>, SpectralError> {
    let p = a.dim();
    for i in 0..p {
        for j in 0..p {
            let z = a.get(i, j);
            if z.im != 0.0 || z.re < 0.0 || !z.re.is_finite() {
                return Err(SpectralError::NotNonnegative);
            }
        }
    }
    let incidence: Vec<bool> = (0..p * p).map(|k| a.get(k / p, k % p).re > 0.0).collect();
    if !is_primitive(&incidence, p) {
        return Err(SpectralError::NotPrimitive);
    }
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let max_iters = 100_000;
    for iter in 0..max_iters {
        let mut w = vec![0.0; p];
        for i in 0..p {
            for j in 0..p {
                w[i] += a.get(i, j).re * v[j];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SpectralError::Convergence { iters: iter });
        }
        for x in &mut w {
            *x /= norm;
        }
        let moved = w
            .iter()
            .zip(&v)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        v = w;
        if moved < 1e-14 {
            return Ok(v);
        }
    }
    Err(SpectralError::Convergence { iters: max_iters })
}

/// Spectral summary of a measure matrix.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    pub rho_at_zero: f64,
    pub primitive: bool,
}

pub fn spectral_profile(m: &MeasureMatrix) -> Result<SpectralProfile, SpectralError> {
    let rho_at_zero = spectral_radius(&m.instant_mass_matrix().to_complex())?;
    let primitive = is_primitive(&m.incidence(), m.dim());
    Ok(SpectralProfile {
        rho_at_zero,
        primitive,
    })
}

/// `varrho(theta) = rho(L mu(theta))` on the real domain.
pub fn varrho(m: &MeasureMatrix, theta: f64) -> Result<f64, SpectralError> {
    let t = transform::laplace_matrix(m, Complex64::new(theta, 0.0))?;
    spectral_radius(&t.matrix)
}

/// Result of the Malthusian bisection.
#[derive(Debug, Clone)]
pub struct MalthusianResult {
    pub alpha: f64,
    pub bracket: (f64, f64),
    pub varrho_at_alpha: f64,
}

/// Locate the Malthusian parameter: the unique real `alpha` with
/// `varrho(alpha) = 1`.
///
/// The bracket expands rightward from just above the domain abscissa by
/// doubling steps (leftward from zero when the abscissa is `-inf`), then
/// bisects; `varrho` is continuous and nonincreasing with limit
/// `rho(mu(0)) < 1`, so a sign change exists iff (A3) holds on the
/// sampled domain.
pub fn find_malthusian(m: &MeasureMatrix, tol_rho: f64) -> Result<MalthusianResult, SpectralError> {
    let rho0 = spectral_radius(&m.instant_mass_matrix().to_complex())?;
    if rho0 >= 1.0 {
        return Err(SpectralError::Assumption { rho: rho0 });
    }
    let abscissa = m.abscissa();

    // Find theta_lo with varrho >= 1.
    let mut lo = None;
    if abscissa.is_finite() {
        let mut step = 1e-6;
        for _ in 0..60 {
            let theta = abscissa + step;
            if varrho(m, theta)? >= 1.0 {
                lo = Some(theta);
                break;
            }
            step *= 2.0;
        }
        // Only the leftmost sample can certify (A3): varrho decreases.
        if lo.is_none() {
            return Err(SpectralError::NoMalthusian);
        }
    } else {
        // Purely atomic: expand leftward from 0 by doubling.
        if varrho(m, 0.0)? >= 1.0 {
            lo = Some(0.0);
        } else {
            let mut step = 1e-6;
            for _ in 0..60 {
                let theta = -step;
                if varrho(m, theta)? >= 1.0 {
                    lo = Some(theta);
                    break;
                }
                step *= 2.0;
            }
        }
        if lo.is_none() {
            return Err(SpectralError::NoMalthusian);
        }
    }
    let mut lo = lo.unwrap();

    // Find theta_hi with varrho < 1 by doubling rightward.
    let mut hi = None;
    let mut step = 1.0;
    let mut probe = lo;
    for _ in 0..60 {
        probe += step;
        if varrho(m, probe)? < 1.0 {
            hi = Some(probe);
            break;
        }
        step *= 2.0;
    }
    let mut hi = hi.ok_or(SpectralError::NoMalthusian)?;

    let mut mid = 0.5 * (lo + hi);
    let mut rho_mid = varrho(m, mid)?;
    for _ in 0..200 {
        if (rho_mid - 1.0).abs() <= tol_rho {
            break;
        }
        if rho_mid >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
        mid = 0.5 * (lo + hi);
        rho_mid = varrho(m, mid)?;
    }
    Ok(MalthusianResult {
        alpha: mid,
        bracket: (lo, hi),
        varrho_at_alpha: rho_mid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ScalarMeasure;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spectral_radius_identity_and_triangular() {
        assert!((spectral_radius(&CMatrix::identity(2)).unwrap() - 1.0).abs() < 1e-12);
        // [[a, b], [0, a]] / theta has double eigenvalue a / theta.
        let a = 1.0;
        let b = 1.0;
        let theta = 2.5;
        let m = CMatrix::from_real_rows(&[vec![a / theta, b / theta], vec![0.0, a / theta]]);
        assert!((spectral_radius(&m).unwrap() - a / theta).abs() < 1e-8);
    }

    #[test]
    fn primitivity_detects_period_two() {
        // [[0,1],[1,0]] is irreducible but not primitive.
        assert!(!is_primitive(&[false, true, true, false], 2));
        assert!(is_primitive(&[true, true, true, true], 2));
        // One-cycle plus feed-through is primitive for p = 2 only with
        // both diagonal paths present.
        assert!(is_primitive(&[true, true, true, false], 2));
    }

    #[test]
    fn perron_vector_errors_and_symmetry() {
        let flip = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(
            perron_vector(&flip),
            Err(SpectralError::NotPrimitive)
        ));
        let ones = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let v = perron_vector(&ones).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert!((v[0] - s).abs() < 1e-12 && (v[1] - s).abs() < 1e-12);
    }

    #[test]
    fn perron_residual_small_on_random_primitive() {
        // Deterministic pseudo-random positive matrix.
        let mut x: f64 = 0.37;
        let mut next = || {
            x = (x * 997.0 + 0.123).fract();
            0.1 + x
        };
        let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| next()).collect()).collect();
        let a = CMatrix::from_real_rows(&rows);
        let v = perron_vector(&a).unwrap();
        let rho = spectral_radius(&a).unwrap();
        let av = a.mul_vec(&v.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
        let resid = av
            .iter()
            .zip(&v)
            .map(|(w, &vi)| (w - rho * vi).norm())
            .fold(0.0, f64::max);
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn malthusian_of_poisson_pair() {
        // [[a, b], [0, a]] / z model: alpha = a.
        let m = MeasureMatrix::from_grid(vec![
            vec![
                ScalarMeasure::poisson_intensity(1.0),
                ScalarMeasure::poisson_intensity(1.0),
            ],
            vec![ScalarMeasure::zero(), ScalarMeasure::poisson_intensity(1.0)],
        ])
        .unwrap();
        let r = find_malthusian(&m, 1e-12).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-9, "alpha = {}", r.alpha);
        assert!((r.varrho_at_alpha - 1.0).abs() <= 1e-12);
        // The triangular feed keeps the incidence matrix imprimitive.
        let profile = spectral_profile(&m).unwrap();
        assert_eq!(profile.rho_at_zero, 0.0);
        assert!(!profile.primitive);
    }

    #[test]
    fn malthusian_single_type_rate_two() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::poisson_intensity(2.0)]]).unwrap();
        let r = find_malthusian(&m, 1e-12).unwrap();
        assert!((r.alpha - 2.0).abs() < 1e-9);
    }

    #[test]
    fn no_malthusian_when_varrho_stays_below_one() {
        // Constant varrho = 0.5 (all mass at zero).
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::from_atoms(&[(0.0, 0.5)])]]).unwrap();
        assert!(matches!(
            find_malthusian(&m, 1e-12),
            Err(SpectralError::NoMalthusian)
        ));
        // Nilpotent feed: determinant never vanishes.
        let m = MeasureMatrix::from_grid(vec![
            vec![ScalarMeasure::zero(), ScalarMeasure::poisson_intensity(3.0)],
            vec![ScalarMeasure::zero(), ScalarMeasure::zero()],
        ])
        .unwrap();
        assert!(matches!(
            find_malthusian(&m, 1e-12),
            Err(SpectralError::NoMalthusian)
        ));
    }

    #[test]
    fn subcritical_exponential_has_negative_malthusian() {
        // mu = (1/2) Exp(1): L mu(theta) = 0.5 / (theta + 1) reaches 1 at
        // theta = -1/2 inside the domain, so alpha = -1/2.
        let m = MeasureMatrix::from_grid(vec![vec![ScalarMeasure {
            atoms: vec![],
            densities: vec![crate::measure::ExpPolyTerm {
                coefficient: 0.5,
                power: 0,
                rate: 1.0,
            }],
        }]])
        .unwrap();
        let r = find_malthusian(&m, 1e-12).unwrap();
        assert!((r.alpha + 0.5).abs() < 1e-9, "alpha = {}", r.alpha);
    }

    #[test]
    fn assumption_error_when_instant_mass_supercritical() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::from_atoms(&[(0.0, 1.5)])]]).unwrap();
        assert!(matches!(
            find_malthusian(&m, 1e-12),
            Err(SpectralError::Assumption { .. })
        ));
    }

    #[test]
    fn varrho_monotone_and_limit() {
        let m = MeasureMatrix::from_grid(vec![
            vec![
                ScalarMeasure::poisson_intensity(1.0),
                ScalarMeasure::from_atoms(&[(0.0, 0.3)]),
            ],
            vec![
                ScalarMeasure::from_atoms(&[(1.0, 0.4)]),
                ScalarMeasure::poisson_intensity(0.5),
            ],
        ])
        .unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let theta = 0.1 * k as f64;
            let v = varrho(&m, theta).unwrap();
            assert!(v <= prev + 1e-12, "varrho increased at {theta}");
            prev = v;
        }
        // Density transforms decay like 1/theta, so the limit needs a
        // far-out probe.
        let rho0 = spectral_radius(&m.instant_mass_matrix().to_complex()).unwrap();
        let far = varrho(&m, 1e7).unwrap();
        assert!((far - rho0).abs() < 1e-6, "far {far} vs rho0 {rho0}");
    }

    #[test]
    fn domination_by_real_part() {
        let m = MeasureMatrix::from_grid(vec![
            vec![
                ScalarMeasure::poisson_intensity(1.0),
                ScalarMeasure::from_atoms(&[(0.5, 0.7)]),
            ],
            vec![
                ScalarMeasure::poisson_intensity(0.2),
                ScalarMeasure::poisson_intensity(0.9),
            ],
        ])
        .unwrap();
        for k in 0..25 {
            let z = c(0.4 + 0.11 * k as f64, -2.0 + 0.37 * k as f64);
            let whole = spectral_radius(&transform::laplace_matrix(&m, z).unwrap().matrix).unwrap();
            let real =
                spectral_radius(&transform::laplace_matrix(&m, c(z.re, 0.0)).unwrap().matrix)
                    .unwrap();
            assert!(whole <= real + 1e-10);
        }
    }

    #[test]
    fn bisection_self_consistency() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::poisson_intensity(1.7)]]).unwrap();
        let coarse = find_malthusian(&m, 1e-10).unwrap();
        let fine = find_malthusian(&m, 1e-11).unwrap();
        assert!((coarse.alpha - fine.alpha).abs() < 10.0 * 1e-10);
    }
}

//! Laurent data of `(I - L mu(z))^-1` at each characteristic root by
//! trapezoidal contour quadrature (spectrally accurate for an integrand
//! analytic in an annulus), pole-order detection, and assembly of the
//! expansion coefficients `C_{lambda,k}`, `B_{lambda,k}` and the
//! characteristic-dependent vectors `b_{lambda,k,f}`.

use num_complex::Complex64;

use crate::error::LaurentError;
use crate::linalg::{pairwise_sum_matrices, CMatrix};
use crate::measure::{
    binomial, factorial, upper_poly_exp_integral, Characteristic, LatticeCharacteristic,
    LatticeMeasureMatrix, MeasureMatrix,
};
use crate::par;
use crate::roots::{self, RootRecord};
use crate::transform;
use crate::Tolerances;

/// Laurent matrices `A_{lambda,1..m}` of the resolvent at a root, with the
/// detected pole order.
#[derive(Debug, Clone)]
pub struct LaurentData {
    pub lambda: Complex64,
    pub radius: f64,
    /// `matrices[k-1]` is the coefficient of `(z - lambda)^{-k}`.
    pub matrices: Vec<CMatrix>,
    pub pole_order: usize,
}

const START_NODES: usize = 64;
const MAX_NODES: usize = 1 << 14;

fn contour_radius(
    lambda: Complex64,
    other_singularities: &[Complex64],
    abscissa: f64,
) -> Result<f64, LaurentError> {
    let nearest = other_singularities
        .iter()
        .map(|&w| (w - lambda).norm())
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let wall = if abscissa.is_finite() {
        lambda.re - abscissa
    } else {
        f64::INFINITY
    };
    let r = 0.25 * nearest.min(wall).min(1.0);
    if r.is_finite() && r > 0.0 {
        Ok(r)
    } else {
        Err(LaurentError::Radius { lambda })
    }
}

/// Shared contour engine: extracts the coefficients of
/// `(z - center)^{-k}`, `k = 1..=count`, of a matrix-valued function
/// analytic in an annulus around the circle `|z - center| = radius`.
fn contour_coefficients<F>(
    resolvent: &F,
    center: Complex64,
    radius: f64,
    count: usize,
    tol_quad: f64,
) -> Result<Vec<CMatrix>, LaurentError>
where
    F: Fn(Complex64) -> Result<CMatrix, LaurentError> + Sync,
{
    // Node values are cached across doublings: the 2N-point rule reuses
    // all N previous nodes and adds the midpoints.
    let mut offsets: Vec<Complex64> = Vec::new();
    let mut values: Vec<CMatrix> = Vec::new();
    let eval_batch = |angles: &[f64]| -> Result<(Vec<Complex64>, Vec<CMatrix>), LaurentError> {
        let ws: Vec<Complex64> = angles
            .iter()
            .map(|&a| Complex64::from_polar(radius, a))
            .collect();
        let vals = par::map_slice(&ws, |&w| resolvent(center + w));
        let mut out = Vec::with_capacity(vals.len());
        for v in vals {
            out.push(v?);
        }
        Ok((ws, out))
    };

    let two_pi = 2.0 * std::f64::consts::PI;
    let initial: Vec<f64> = (0..START_NODES)
        .map(|j| two_pi * j as f64 / START_NODES as f64)
        .collect();
    let (ws, vals) = eval_batch(&initial)?;
    offsets.extend(ws);
    values.extend(vals);

    let coeff_at = |offsets: &[Complex64], values: &[CMatrix], k: usize| -> CMatrix {
        let terms: Vec<CMatrix> = offsets
            .iter()
            .zip(values)
            .map(|(&w, v)| v.scale(w.powu(k as u32)))
            .collect();
        pairwise_sum_matrices(&terms).scale(Complex64::new(1.0 / offsets.len() as f64, 0.0))
    };

    let mut prev: Vec<CMatrix> = (1..=count)
        .map(|k| coeff_at(&offsets, &values, k))
        .collect();
    let mut n = START_NODES;
    while n < MAX_NODES {
        // Midpoint angles interleave the existing grid.
        let mids: Vec<f64> = (0..n)
            .map(|j| two_pi * (j as f64 + 0.5) / n as f64)
            .collect();
        let (ws, vals) = eval_batch(&mids)?;
        offsets.extend(ws);
        values.extend(vals);
        n *= 2;
        let next: Vec<CMatrix> = (1..=count)
            .map(|k| coeff_at(&offsets, &values, k))
            .collect();
        let worst = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| a.sub(b).inf_norm() / (1.0 + b.inf_norm()))
            .fold(0.0, f64::max);
        prev = next;
        if worst < tol_quad {
            return Ok(prev);
        }
    }
    Err(LaurentError::Quadrature {
        target: tol_quad,
        nodes: n,
    })
}

fn detect_pole_order(matrices: &[CMatrix], tol_laurent: f64) -> usize {
    let scale = {
        let a1 = matrices[0].inf_norm();
        if a1 > 0.0 {
            a1
        } else {
            matrices.iter().map(|m| m.inf_norm()).fold(0.0, f64::max)
        }
    };
    let threshold = tol_laurent * scale;
    let mut order = 1;
    for (k, m) in matrices.iter().enumerate() {
        if m.inf_norm() > threshold {
            order = k + 1;
        }
    }
    order
}

/// Extract `A_{lambda,k}`, `k = 1..det_multiplicity`, around a validated
/// root. `other_roots` informs the contour radius: a quarter of the
/// distance to the nearest other singularity, the domain wall, or 1.
pub fn laurent_coeffs(
    m: &MeasureMatrix,
    root: &RootRecord,
    other_roots: &[Complex64],
    tol: &Tolerances,
) -> Result<LaurentData, LaurentError> {
    let lambda = root.lambda;
    let radius = contour_radius(lambda, other_roots, m.abscissa())?;
    let resolvent = |z: Complex64| -> Result<CMatrix, LaurentError> {
        transform::laplace_raw(m, z)
            .sub_from_identity()
            .inverse()
            .ok_or(LaurentError::SingularContour { z })
    };
    let matrices = contour_coefficients(
        &resolvent,
        lambda,
        radius,
        root.det_multiplicity,
        tol.tol_quad,
    )?;
    let pole_order = detect_pole_order(&matrices, tol.tol_laurent);
    Ok(LaurentData {
        lambda,
        radius,
        matrices,
        pole_order,
    })
}

/// `C_{lambda,k} = (1/k!) sum_n (-1)^n / (n! lambda^{n+1}) A_{lambda,n+k+1}`
/// for `k = 0..pole_order-1`. Requires `Re(lambda) > 0`.
pub fn c_coeffs(ld: &LaurentData) -> Result<Vec<CMatrix>, LaurentError> {
    if ld.lambda.re <= 0.0 {
        return Err(LaurentError::UnsupportedRoot { re: ld.lambda.re });
    }
    let kmax = ld.pole_order;
    let p = ld.matrices[0].dim();
    let mut out = Vec::with_capacity(kmax);
    for k in 0..kmax {
        let mut acc = CMatrix::zeros(p);
        let mut k_fact = 1.0;
        for i in 2..=k as u64 {
            k_fact *= i as f64;
        }
        for n in 0..=(kmax - 1 - k) {
            let mut n_fact = 1.0;
            for i in 2..=n as u64 {
                n_fact *= i as f64;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let scalar = sign / (n_fact * k_fact) / ld.lambda.powu(n as u32 + 1);
            acc = acc.add(&ld.matrices[n + k].scale(scalar));
        }
        out.push(acc);
    }
    Ok(out)
}

/// `B_{lambda,k} = (k+1) C_{lambda,k+1} + lambda C_{lambda,k}` with the
/// convention `C_{lambda,pole_order} = 0`.
pub fn b_coeffs(c: &[CMatrix], lambda: Complex64) -> Vec<CMatrix> {
    let kmax = c.len();
    (0..kmax)
        .map(|k| {
            let mut b = c[k].scale(lambda);
            if k + 1 < kmax {
                b = b.add(&c[k + 1].scale(Complex64::new(k as f64 + 1.0, 0.0)));
            }
            b
        })
        .collect()
}

/// Lattice Laurent matrices of `(I - G mu(z))^-1` around `zeta = e^{-lambda}`.
pub fn lattice_laurent(
    l: &LatticeMeasureMatrix,
    root: &RootRecord,
    tol: &Tolerances,
) -> Result<LaurentData, LaurentError> {
    let zeta = (-root.lambda).exp();
    let (_, clusters) = roots::lattice_zeta_roots(l).map_err(|_| LaurentError::Radius {
        lambda: root.lambda,
    })?;
    let others: Vec<Complex64> = clusters
        .iter()
        .map(|c| c.value)
        .filter(|&w| (w - zeta).norm() > 1e-9 * (1.0 + zeta.norm()))
        .collect();
    let radius = contour_radius(zeta, &others, f64::NEG_INFINITY)?;
    let resolvent = |z: Complex64| -> Result<CMatrix, LaurentError> {
        transform::generating_matrix(l, z)
            .matrix
            .sub_from_identity()
            .inverse()
            .ok_or(LaurentError::SingularContour { z })
    };
    let matrices = contour_coefficients(
        &resolvent,
        zeta,
        radius,
        root.det_multiplicity,
        tol.tol_quad,
    )?;
    let pole_order = detect_pole_order(&matrices, tol.tol_laurent);
    Ok(LaurentData {
        lambda: root.lambda,
        radius,
        matrices,
        pole_order,
    })
}

/// Exact moment vectors `m_j(lambda) = int_0^inf f(x) x^j e^{-lambda x} dx`
/// for `j = 0..=jmax`, componentwise.
pub fn char_moments(
    f: &Characteristic,
    lambda: Complex64,
    jmax: usize,
) -> Result<Vec<Vec<Complex64>>, LaurentError> {
    let order = f.moment_order();
    if lambda.re <= order {
        return Err(LaurentError::DivergentMoment { lambda, order });
    }
    let mut out = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let mut per_component = Vec::with_capacity(f.components.len());
        for comp in &f.components {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in &comp.steps {
                if s.height != 0.0 {
                    acc += s.height * upper_poly_exp_integral(j as u32, lambda, s.location);
                }
            }
            for s in &comp.smooth {
                if s.coefficient != 0.0 {
                    let total_power = s.power + j as u32;
                    acc += s.coefficient * factorial(total_power)
                        / (lambda + s.rate).powu(total_power + 1);
                }
            }
            per_component.push(acc);
        }
        out.push(per_component);
    }
    Ok(out)
}

/// Collect powers of `t` in
/// `sum_k B_{lambda,k} int_0^inf f(x) (t-x)^k e^{-lambda x} dx`:
/// `b_{lambda,j,f} = sum_{k>=j} binom(k,j) (-1)^{k-j} B_{lambda,k} m_{k-j}(lambda)`.
pub fn b_vector_coeffs(
    b: &[CMatrix],
    f: &Characteristic,
    lambda: Complex64,
) -> Result<Vec<Vec<Complex64>>, LaurentError> {
    let kmax = b.len();
    if kmax == 0 {
        return Ok(Vec::new());
    }
    let moments = char_moments(f, lambda, kmax - 1)?;
    let p = f.components.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); p]; kmax];
    for j in 0..kmax {
        for k in j..kmax {
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            let scalar = binomial(k as u32, j as u32) * sign;
            let bv = b[k].mul_vec(&moments[k - j]);
            for i in 0..p {
                out[j][i] += scalar * bv[i];
            }
        }
    }
    Ok(out)
}

/// Coefficients of the polynomial `binom(n + d - 1, d - 1)` in `n`,
/// ascending, length `d`.
fn lattice_residue_poly(d: usize) -> Vec<f64> {
    // prod_{i=1}^{d-1} (n + i) / (d-1)!
    let mut coeffs = vec![1.0];
    for i in 1..d {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += c * i as f64;
            next[k + 1] += c;
        }
        coeffs = next;
    }
    let mut fact = 1.0;
    for i in 2..d as u64 {
        fact *= i as f64;
    }
    coeffs.iter().map(|c| c / fact).collect()
}

/// Lattice analogue of [`b_vector_coeffs`]: vectors `b_{lambda,j,f}` with
/// `F(n) ~ e^{lambda n} sum_j n^j b_{lambda,j,f}`, assembled from the
/// lattice Laurent matrices and the Taylor coefficients of the generating
/// vector of `f` at `zeta = e^{-lambda}`.
pub fn lattice_b_vector_coeffs(
    lattice_matrices: &[CMatrix],
    f: &LatticeCharacteristic,
    lambda: Complex64,
) -> Vec<Vec<Complex64>> {
    let kmax = lattice_matrices.len();
    let p = f.dim();
    let zeta = (-lambda).exp();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); p]; kmax];
    for k in 1..=kmax {
        for l in 0..k {
            let d = k - l;
            let taylor = f.generating_taylor(zeta, l as u32);
            if taylor.iter().all(|t| t.norm() == 0.0) {
                continue;
            }
            let bv = lattice_matrices[k - 1].mul_vec(&taylor);
            let factor = (-lambda.exp()).powu(d as u32);
            let poly_n = lattice_residue_poly(d);
            for (j, &pc) in poly_n.iter().enumerate() {
                if j >= kmax {
                    continue;
                }
                for i in 0..p {
                    out[j][i] += bv[i] * factor * pc;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{CharComponent, ExpPolyTerm, ScalarMeasure, StepTerm};
    use crate::roots::{locate_roots, SearchRegion};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn golden(alpha: f64) -> MeasureMatrix {
        MeasureMatrix::from_grid(vec![
            vec![
                ScalarMeasure::poisson_intensity(alpha),
                ScalarMeasure::from_atoms(&[(0.0, 1.0)]),
            ],
            vec![
                ScalarMeasure::zero(),
                ScalarMeasure::poisson_intensity(alpha),
            ],
        ])
        .unwrap()
    }

    fn tilted(alpha: f64) -> MeasureMatrix {
        MeasureMatrix::from_grid(vec![
            vec![
                ScalarMeasure::poisson_intensity(alpha),
                ScalarMeasure::poisson_intensity(alpha),
            ],
            vec![
                ScalarMeasure::zero(),
                ScalarMeasure::poisson_intensity(alpha),
            ],
        ])
        .unwrap()
    }

    fn root_of(m: &MeasureMatrix) -> RootRecord {
        let region = SearchRegion {
            re_min: 0.1,
            re_max: 3.0,
            im_max: 4.0,
        };
        locate_roots(m, &region, &Tolerances::default())
            .unwrap()
            .into_iter()
            .next()
            .unwrap()
    }

    #[test]
    fn golden_laurent_matrices() {
        let alpha = 1.0;
        let m = golden(alpha);
        let root = root_of(&m);
        let ld = laurent_coeffs(&m, &root, &[], &Tolerances::default()).unwrap();
        assert_eq!(ld.pole_order, 2);
        let a2 = &ld.matrices[1];
        let a1 = &ld.matrices[0];
        let want_a2 = CMatrix::from_real_rows(&[vec![0.0, alpha * alpha], vec![0.0, 0.0]]);
        let want_a1 = CMatrix::from_real_rows(&[vec![alpha, 2.0 * alpha], vec![0.0, alpha]]);
        assert!(
            a2.sub(&want_a2).max_abs() < 1e-8,
            "A2 err {}",
            a2.sub(&want_a2).max_abs()
        );
        assert!(
            a1.sub(&want_a1).max_abs() < 1e-8,
            "A1 err {}",
            a1.sub(&want_a1).max_abs()
        );
    }

    #[test]
    fn tilted_laurent_matrices() {
        let alpha = 1.0;
        let m = tilted(alpha);
        let root = root_of(&m);
        let ld = laurent_coeffs(&m, &root, &[], &Tolerances::default()).unwrap();
        let want_a2 = CMatrix::from_real_rows(&[vec![0.0, alpha * alpha], vec![0.0, 0.0]]);
        let want_a1 = CMatrix::from_real_rows(&[vec![alpha, alpha], vec![0.0, alpha]]);
        assert!(ld.matrices[1].sub(&want_a2).max_abs() < 1e-8);
        assert!(ld.matrices[0].sub(&want_a1).max_abs() < 1e-8);
    }

    #[test]
    fn pole_order_below_det_multiplicity() {
        // Diagonal m(z) = 1/z twice: det multiplicity 2, simple pole.
        let m = MeasureMatrix::from_grid(vec![
            vec![ScalarMeasure::poisson_intensity(1.0), ScalarMeasure::zero()],
            vec![ScalarMeasure::zero(), ScalarMeasure::poisson_intensity(1.0)],
        ])
        .unwrap();
        let root = root_of(&m);
        assert_eq!(root.det_multiplicity, 2);
        let ld = laurent_coeffs(&m, &root, &[], &Tolerances::default()).unwrap();
        assert_eq!(ld.pole_order, 1);
        // A_1 = I / (-m'(alpha)) = I at alpha = 1.
        assert!(ld.matrices[0].sub(&CMatrix::identity(2)).max_abs() < 1e-8);
    }

    #[test]
    fn c_coefficients_golden_and_tilted() {
        let m = golden(1.0);
        let root = root_of(&m);
        let ld = laurent_coeffs(&m, &root, &[], &Tolerances::default()).unwrap();
        let cs = c_coeffs(&ld).unwrap();
        let want_c0 = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let want_c1 = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(cs[0].sub(&want_c0).max_abs() < 1e-8);
        assert!(cs[1].sub(&want_c1).max_abs() < 1e-8);

        let m = tilted(1.0);
        let root = root_of(&m);
        let ld = laurent_coeffs(&m, &root, &[], &Tolerances::default()).unwrap();
        let cs = c_coeffs(&ld).unwrap();
        assert!(cs[0].sub(&CMatrix::identity(2)).max_abs() < 1e-8);
        assert!(cs[1].sub(&want_c1).max_abs() < 1e-8);
    }

    #[test]
    fn simple_pole_c0_is_a1_over_lambda() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::poisson_intensity(2.0)]]).unwrap();
        let root = root_of(&m);
        let ld = laurent_coeffs(&m, &root, &[], &Tolerances::default()).unwrap();
        assert_eq!(ld.pole_order, 1);
        let cs = c_coeffs(&ld).unwrap();
        let want = ld.matrices[0].scale(1.0 / ld.lambda);
        assert!(cs[0].sub(&want).max_abs() < 1e-12);
    }

    #[test]
    fn unsupported_root_left_halfplane() {
        let ld = LaurentData {
            lambda: c(-0.5, 0.0),
            radius: 0.1,
            matrices: vec![CMatrix::identity(1)],
            pole_order: 1,
        };
        assert!(matches!(
            c_coeffs(&ld),
            Err(LaurentError::UnsupportedRoot { .. })
        ));
    }

    #[test]
    fn b_coefficients_golden() {
        let alpha = 1.0;
        let m = golden(alpha);
        let root = root_of(&m);
        let ld = laurent_coeffs(&m, &root, &[], &Tolerances::default()).unwrap();
        let cs = c_coeffs(&ld).unwrap();
        let bs = b_coeffs(&cs, ld.lambda);
        let want_b0 = CMatrix::from_real_rows(&[vec![alpha, 2.0 * alpha], vec![0.0, alpha]]);
        let want_b1 = CMatrix::from_real_rows(&[vec![0.0, alpha * alpha], vec![0.0, 0.0]]);
        assert!(bs[0].sub(&want_b0).max_abs() < 1e-8);
        assert!(bs[1].sub(&want_b1).max_abs() < 1e-8);
    }

    #[test]
    fn residue_oracle_simple_pole() {
        // A_1 as the limit (z - lambda)(I - L)^-1 along rays.
        let m = MeasureMatrix::from_grid(vec![
            vec![ScalarMeasure::poisson_intensity(1.0), ScalarMeasure::zero()],
            vec![ScalarMeasure::zero(), ScalarMeasure::poisson_intensity(2.0)],
        ])
        .unwrap();
        let region = SearchRegion {
            re_min: 0.3,
            re_max: 3.0,
            im_max: 4.0,
        };
        let all = locate_roots(&m, &region, &Tolerances::default()).unwrap();
        let lambdas: Vec<Complex64> = all.iter().map(|r| r.lambda).collect();
        for root in &all {
            let others: Vec<Complex64> = lambdas
                .iter()
                .copied()
                .filter(|&w| (w - root.lambda).norm() > 1e-9)
                .collect();
            let ld = laurent_coeffs(&m, root, &others, &Tolerances::default()).unwrap();
            assert_eq!(ld.pole_order, 1);
            // Richardson-extrapolated limit along 8 rays.
            let mut acc = CMatrix::zeros(2);
            for ray in 0..8 {
                let dir =
                    Complex64::from_polar(1.0, 0.25 * std::f64::consts::PI * ray as f64 + 0.1);
                let h1 = 1e-4;
                let f = |h: f64| {
                    let z = root.lambda + dir * h;
                    transform::laplace_raw(&m, z)
                        .sub_from_identity()
                        .inverse()
                        .unwrap()
                        .scale(dir * h)
                };
                // limit = 2 f(h/2) - f(h) cancels the linear error term.
                let extr = f(h1 / 2.0).scale(2.0.into()).sub(&f(h1));
                acc = acc.add(&extr);
            }
            let oracle = acc.scale(Complex64::new(1.0 / 8.0, 0.0));
            assert!(
                ld.matrices[0].sub(&oracle).max_abs() < 1e-7,
                "residue mismatch {}",
                ld.matrices[0].sub(&oracle).max_abs()
            );
        }
    }

    #[test]
    fn conjugate_roots_have_conjugate_laurent_data() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::from_atoms(&[(1.0, 2.0)])]]).unwrap();
        let region = SearchRegion {
            re_min: 0.1,
            re_max: 2.0,
            im_max: 7.0,
        };
        let all = locate_roots(&m, &region, &Tolerances::default()).unwrap();
        let lambdas: Vec<Complex64> = all.iter().map(|r| r.lambda).collect();
        let plus = all.iter().find(|r| r.lambda.im > 1.0).unwrap();
        let minus = all.iter().find(|r| r.lambda.im < -1.0).unwrap();
        let others = |me: Complex64| -> Vec<Complex64> {
            lambdas
                .iter()
                .copied()
                .filter(|&w| (w - me).norm() > 1e-9)
                .collect()
        };
        let ld_plus =
            laurent_coeffs(&m, plus, &others(plus.lambda), &Tolerances::default()).unwrap();
        let ld_minus =
            laurent_coeffs(&m, minus, &others(minus.lambda), &Tolerances::default()).unwrap();
        for (a, b) in ld_plus.matrices.iter().zip(&ld_minus.matrices) {
            assert!(a.conj().sub(b).max_abs() < 1e-9);
        }
    }

    #[test]
    fn lattice_laurent_geometric() {
        // mu({1}) = 2: (1 - 2z)^-1 = -(1/2)/(z - 1/2).
        let l = LatticeMeasureMatrix::new(1, 1.0, vec![vec![0.0, 2.0]]).unwrap();
        let root = crate::roots::locate_lattice_roots(&l, 0.0).unwrap()[0].clone();
        let ld = lattice_laurent(&l, &root, &Tolerances::default()).unwrap();
        assert_eq!(ld.pole_order, 1);
        assert!((ld.matrices[0].get(0, 0) - c(-0.5, 0.0)).norm() < 1e-10);

        // mu({1}) = 1/2: (1 - z/2)^-1 = -2/(z - 2).
        let l = LatticeMeasureMatrix::new(1, 1.0, vec![vec![0.0, 0.5]]).unwrap();
        let root = crate::roots::locate_lattice_roots(&l, -1.0).unwrap()[0].clone();
        let ld = lattice_laurent(&l, &root, &Tolerances::default()).unwrap();
        assert!((ld.matrices[0].get(0, 0) - c(-2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn lattice_nonlattice_bridge() {
        // Embedded 2 delta_1: lim (I - G)^-1 (z - e^{-lambda})^k
        // = A_{lambda,k} (-e^{-lambda})^k.
        let l = LatticeMeasureMatrix::new(1, 1.0, vec![vec![0.0, 2.0]]).unwrap();
        let m = l.to_measure_matrix();
        let lambda = c(2.0f64.ln(), 0.0);
        let root = RootRecord {
            lambda,
            det_multiplicity: 1,
        };
        let others: Vec<Complex64> = vec![];
        let ld = laurent_coeffs(&m, &root, &others, &Tolerances::default()).unwrap();
        let lat = lattice_laurent(&l, &root, &Tolerances::default()).unwrap();
        let bridge = ld.matrices[0].scale(-((-lambda).exp()));
        assert!(lat.matrices[0].sub(&bridge).max_abs() < 1e-9);
    }

    #[test]
    fn char_moments_closed_forms() {
        // f = 1_{[0,inf)}: m_0 = 1/lambda.
        let f = Characteristic::indicator(1);
        let lambda = c(1.7, 0.3);
        let m = char_moments(&f, lambda, 0).unwrap();
        assert!((m[0][0] - 1.0 / lambda).norm() < 1e-13);

        // f = x e^{-x}, j = 1, lambda = 1: int x^2 e^{-2x} = 1/4.
        let f = Characteristic::new(vec![CharComponent {
            steps: vec![],
            smooth: vec![ExpPolyTerm {
                coefficient: 1.0,
                power: 1,
                rate: 1.0,
            }],
        }]);
        let m = char_moments(&f, c(1.0, 0.0), 1).unwrap();
        assert!((m[1][0] - c(0.25, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn char_moments_divergence() {
        let f = Characteristic::indicator(1);
        assert!(matches!(
            char_moments(&f, c(0.0, 1.0), 0),
            Err(LaurentError::DivergentMoment { .. })
        ));
    }

    #[test]
    fn b_vectors_simple_pole_indicator() {
        // k(lambda) = 1, f = 1: b_0 = B_0 / lambda.
        let lambda = c(2.0, 0.0);
        let b0 = CMatrix::from_real_rows(&[vec![3.0]]);
        let f = Characteristic::indicator(1);
        let b = b_vector_coeffs(std::slice::from_ref(&b0), &f, lambda).unwrap();
        assert!((b[0][0] - c(1.5, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn b_vectors_step_shift() {
        // A step at a > 0 scales moments by e^{-lambda a}.
        let lambda = c(1.0, 0.0);
        let b0 = CMatrix::identity(1);
        let shifted = Characteristic::new(vec![CharComponent {
            steps: vec![StepTerm {
                location: 0.7,
                height: 1.0,
            }],
            smooth: vec![],
        }]);
        let b = b_vector_coeffs(&[b0], &shifted, lambda).unwrap();
        let want = (-lambda * 0.7).exp() / lambda;
        assert!((b[0][0] - want).norm() < 1e-13);
    }

    #[test]
    fn lattice_b_vector_geometric() {
        // mu({1}) = 2, f = indicator at n = 0: F(n) = 2^n exactly.
        let lambda = c(2.0f64.ln(), 0.0);
        let bmat = CMatrix::from_real_rows(&[vec![-0.5]]);
        let f = LatticeCharacteristic::unit_at_zero(1, 0);
        let b = lattice_b_vector_coeffs(&[bmat], &f, lambda);
        assert!((b[0][0] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn residue_poly_values() {
        assert_eq!(lattice_residue_poly(1), vec![1.0]);
        assert_eq!(lattice_residue_poly(2), vec![1.0, 1.0]);
        // binom(n+2, 2) = (n+1)(n+2)/2 = 1 + 1.5 n + 0.5 n^2
        let p3 = lattice_residue_poly(3);
        assert!((p3[0] - 1.0).abs() < 1e-14);
        assert!((p3[1] - 1.5).abs() < 1e-14);
        assert!((p3[2] - 0.5).abs() < 1e-14);
    }
}

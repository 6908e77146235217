//! Assembly and evaluation of the asymptotic expansions: the renewal
//! function `U(t)`, general solutions `F(t)`, and their lattice analogues
//! `U({n})`, `F(n)`. Terms are `(lambda, k, coefficient)` triples with a
//! recorded remainder exponent; conjugate root pairs carry conjugate
//! coefficients so real-argument evaluation is real.

use num_complex::Complex64;

use crate::error::ExpansionError;
use crate::laurent::{self, LaurentData};
use crate::linalg::CMatrix;
use crate::measure::{Characteristic, LatticeCharacteristic, LatticeMeasureMatrix, MeasureMatrix};
use crate::roots::{self, RootRecord, SearchRegion};
use crate::spectral;
use crate::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionKind {
    UNonLattice,
    FNonLattice,
    ULattice,
    FLattice,
}

#[derive(Debug, Clone)]
pub enum Coeff {
    Matrix(CMatrix),
    Vector(Vec<Complex64>),
}

impl Coeff {
    pub fn max_abs(&self) -> f64 {
        match self {
            Coeff::Matrix(m) => m.max_abs(),
            Coeff::Vector(v) => v.iter().map(|z| z.norm()).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Term {
    pub lambda: Complex64,
    pub power: usize,
    pub coeff: Coeff,
}

/// A finite expansion plus remainder-order bookkeeping. The error term is
/// `O(t e^{theta t})` when `remainder_polynomial` is set, `O(e^{theta t})`
/// otherwise, with `theta = remainder_exponent`.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub kind: ExpansionKind,
    pub dim: usize,
    pub terms: Vec<Term>,
    pub remainder_exponent: f64,
    pub remainder_polynomial: bool,
}

/// Real evaluation output: matrix-valued for U-expansions, vector-valued
/// for F-expansions.
#[derive(Debug, Clone)]
pub enum Evaluated {
    Matrix(Vec<Vec<f64>>),
    Vector(Vec<f64>),
}

impl Evaluated {
    pub fn as_matrix(&self) -> Option<&Vec<Vec<f64>>> {
        match self {
            Evaluated::Matrix(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&Vec<f64>> {
        match self {
            Evaluated::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn scale(&self, s: f64) -> Evaluated {
        match self {
            Evaluated::Matrix(m) => Evaluated::Matrix(
                m.iter()
                    .map(|r| r.iter().map(|x| x * s).collect())
                    .collect(),
            ),
            Evaluated::Vector(v) => Evaluated::Vector(v.iter().map(|x| x * s).collect()),
        }
    }
}

/// Enriched root: location data plus its Laurent matrices.
#[derive(Debug, Clone)]
pub struct AnalyzedRoot {
    pub record: RootRecord,
    pub laurent: LaurentData,
}

/// Run root location plus Laurent extraction over a region. Quadrature is
/// done once per conjugate class (for `Im >= 0`); lower-half roots take
/// the conjugated data, which keeps coefficients exactly paired.
pub fn analyze_roots(
    m: &MeasureMatrix,
    region: &SearchRegion,
    tol: &Tolerances,
) -> Result<Vec<AnalyzedRoot>, ExpansionError> {
    let records = roots::locate_roots(m, region, tol)?;
    let lambdas: Vec<Complex64> = records.iter().map(|r| r.lambda).collect();
    let mut out: Vec<AnalyzedRoot> = Vec::with_capacity(records.len());
    for rec in &records {
        if rec.lambda.im >= 0.0 {
            let others: Vec<Complex64> = lambdas
                .iter()
                .copied()
                .filter(|&w| (w - rec.lambda).norm() > 1e-12)
                .collect();
            let ld = laurent::laurent_coeffs(m, rec, &others, tol)?;
            out.push(AnalyzedRoot {
                record: rec.clone(),
                laurent: ld,
            });
        }
    }
    // Mirror the lower-half roots from their partners.
    for rec in &records {
        if rec.lambda.im < 0.0 {
            let partner = out
                .iter()
                .find(|a| (a.record.lambda.conj() - rec.lambda).norm() < 1e-9)
                .cloned();
            if let Some(p) = partner {
                out.push(AnalyzedRoot {
                    record: rec.clone(),
                    laurent: LaurentData {
                        lambda: rec.lambda,
                        radius: p.laurent.radius,
                        matrices: p.laurent.matrices.iter().map(|m| m.conj()).collect(),
                        pole_order: p.laurent.pole_order,
                    },
                });
            } else {
                let others: Vec<Complex64> = lambdas
                    .iter()
                    .copied()
                    .filter(|&w| (w - rec.lambda).norm() > 1e-12)
                    .collect();
                let ld = laurent::laurent_coeffs(m, rec, &others, tol)?;
                out.push(AnalyzedRoot {
                    record: rec.clone(),
                    laurent: ld,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        b.record
            .lambda
            .re
            .total_cmp(&a.record.lambda.re)
            .then(b.record.lambda.im.total_cmp(&a.record.lambda.im))
    });
    Ok(out)
}

fn check_assumptions(m: &MeasureMatrix) -> Result<(), ExpansionError> {
    let rho0 = spectral::spectral_radius(&m.instant_mass_matrix().to_complex())
        .map_err(ExpansionError::Spectral)?;
    if rho0 >= 1.0 {
        return Err(ExpansionError::Assumption(format!(
            "rho(mu(0)) = {rho0} >= 1 violates (A2)"
        )));
    }
    Ok(())
}

/// Expansion of the renewal function `U(t)` over the region's roots:
/// terms `(lambda, k, C_{lambda,k})`, remainder `O(t e^{re_min t})`.
pub fn build_u_expansion(
    m: &MeasureMatrix,
    region: &SearchRegion,
    tol: &Tolerances,
) -> Result<Expansion, ExpansionError> {
    check_assumptions(m)?;
    if region.re_min <= 0.0 {
        return Err(ExpansionError::Assumption(format!(
            "region.re_min = {} must be positive: coefficient formulas need Re(lambda) > 0",
            region.re_min
        )));
    }
    spectral::find_malthusian(m, tol.tol_rho).map_err(ExpansionError::Spectral)?;
    let mut analyzed = analyze_roots(m, region, tol)?;
    // Boundary nudging can admit roots a hair left of re_min; those belong
    // to the remainder term.
    analyzed.retain(|a| a.record.lambda.re > region.re_min);
    let mut terms = Vec::new();
    for a in &analyzed {
        if a.record.lambda.im >= 0.0 {
            let cs = laurent::c_coeffs(&a.laurent)?;
            for (k, c) in cs.iter().enumerate() {
                terms.push(Term {
                    lambda: a.record.lambda,
                    power: k,
                    coeff: Coeff::Matrix(c.clone()),
                });
                if a.record.lambda.im > 0.0 {
                    terms.push(Term {
                        lambda: a.record.lambda.conj(),
                        power: k,
                        coeff: Coeff::Matrix(c.conj()),
                    });
                }
            }
        }
    }
    Ok(Expansion {
        kind: ExpansionKind::UNonLattice,
        dim: m.dim(),
        terms,
        remainder_exponent: region.re_min,
        remainder_polynomial: true,
    })
}

/// Expansion of `F = U * f` for a characteristic `f`: terms
/// `(lambda, k, b_{lambda,k,f})`, remainder `O(e^{(theta+eps) t})`.
pub fn build_f_expansion(
    m: &MeasureMatrix,
    f: &Characteristic,
    region: &SearchRegion,
    tol: &Tolerances,
) -> Result<Expansion, ExpansionError> {
    check_assumptions(m)?;
    if region.re_min <= 0.0 {
        return Err(ExpansionError::Assumption(format!(
            "region.re_min = {} must be positive: coefficient formulas need Re(lambda) > 0",
            region.re_min
        )));
    }
    f.validate(m.dim())
        .map_err(|e| ExpansionError::Assumption(e.to_string()))?;
    let mut analyzed = analyze_roots(m, region, tol)?;
    analyzed.retain(|a| a.record.lambda.re > region.re_min);

    // theta must make the variation moment of f finite while keeping the
    // root set unchanged on (re_min, theta]; a root inside that strip
    // defeats the hypothesis.
    let vartheta = region.re_min;
    let f_order = f.variation_order();
    let theta = if f_order < vartheta {
        vartheta
    } else {
        let above = analyzed
            .iter()
            .map(|a| a.record.lambda.re)
            .filter(|&re| re > f_order)
            .fold(f64::INFINITY, f64::min);
        let margin = if above.is_finite() {
            ((above - f_order) * 0.5).min(1e-3)
        } else {
            1e-3
        };
        f_order + margin
    };
    for a in &analyzed {
        if a.record.lambda.re > vartheta && a.record.lambda.re <= theta {
            return Err(ExpansionError::StripRoot {
                lambda: a.record.lambda,
                lo: vartheta,
                hi: theta,
            });
        }
    }
    let min_root_re = analyzed
        .iter()
        .map(|a| a.record.lambda.re)
        .fold(f64::INFINITY, f64::min);

    let mut terms = Vec::new();
    for a in &analyzed {
        if a.record.lambda.im >= 0.0 {
            let cs = laurent::c_coeffs(&a.laurent)?;
            let bs = laurent::b_coeffs(&cs, a.record.lambda);
            let bvecs = laurent::b_vector_coeffs(&bs, f, a.record.lambda)?;
            for (k, v) in bvecs.iter().enumerate() {
                terms.push(Term {
                    lambda: a.record.lambda,
                    power: k,
                    coeff: Coeff::Vector(v.clone()),
                });
                if a.record.lambda.im > 0.0 {
                    terms.push(Term {
                        lambda: a.record.lambda.conj(),
                        power: k,
                        coeff: Coeff::Vector(v.iter().map(|z| z.conj()).collect()),
                    });
                }
            }
        }
    }
    let eps = if min_root_re.is_finite() {
        ((min_root_re - theta) * 0.5).min(1e-3)
    } else {
        1e-3
    };
    Ok(Expansion {
        kind: ExpansionKind::FNonLattice,
        dim: m.dim(),
        terms,
        remainder_exponent: theta + eps,
        remainder_polynomial: false,
    })
}

fn lattice_assumptions(l: &LatticeMeasureMatrix, tol_det: f64) -> Result<(), ExpansionError> {
    let _ = tol_det;
    let rho0 =
        spectral::spectral_radius(&l.mass_at(0).to_complex()).map_err(ExpansionError::Spectral)?;
    if rho0 >= 1.0 {
        return Err(ExpansionError::Assumption(format!(
            "rho(mu({{0}})) = {rho0} >= 1 violates (A2)"
        )));
    }
    Ok(())
}

/// Lattice expansion of `F(n)` for a finitely supported characteristic:
/// terms `(lambda, k, b_{lambda,k,f})`, remainder `O(e^{theta n})`.
pub fn build_lattice_f_expansion(
    l: &LatticeMeasureMatrix,
    f: &LatticeCharacteristic,
    theta: f64,
    tol: &Tolerances,
) -> Result<Expansion, ExpansionError> {
    lattice_assumptions(l, tol.tol_det)?;
    if f.dim() != l.dim() {
        return Err(ExpansionError::Assumption(format!(
            "characteristic has {} components, lattice model has {}",
            f.dim(),
            l.dim()
        )));
    }
    let records = roots::locate_lattice_roots(l, theta)?;
    let mut terms = Vec::new();
    for rec in &records {
        if rec.lambda.im >= 0.0 {
            let ld = laurent::lattice_laurent(l, rec, tol)?;
            let bvecs = laurent::lattice_b_vector_coeffs(&ld.matrices, f, rec.lambda);
            for (k, v) in bvecs.iter().enumerate().take(ld.pole_order) {
                terms.push(Term {
                    lambda: rec.lambda,
                    power: k,
                    coeff: Coeff::Vector(v.clone()),
                });
                if rec.lambda.im > 0.0 && rec.lambda.im < std::f64::consts::PI {
                    terms.push(Term {
                        lambda: rec.lambda.conj(),
                        power: k,
                        coeff: Coeff::Vector(v.iter().map(|z| z.conj()).collect()),
                    });
                }
            }
        }
    }
    Ok(Expansion {
        kind: ExpansionKind::FLattice,
        dim: l.dim(),
        terms,
        remainder_exponent: theta,
        remainder_polynomial: false,
    })
}

/// Lattice renewal-density expansion `U({n})`: matrix terms whose column
/// `j` comes from the unit characteristic at zero in component `j`.
pub fn build_lattice_u_expansion(
    l: &LatticeMeasureMatrix,
    theta: f64,
    tol: &Tolerances,
) -> Result<Expansion, ExpansionError> {
    lattice_assumptions(l, tol.tol_det)?;
    let p = l.dim();
    let records = roots::locate_lattice_roots(l, theta)?;
    let mut terms = Vec::new();
    for rec in &records {
        if rec.lambda.im >= 0.0 {
            let ld = laurent::lattice_laurent(l, rec, tol)?;
            let per_column: Vec<Vec<Vec<Complex64>>> = (0..p)
                .map(|j| {
                    let f = LatticeCharacteristic::unit_at_zero(p, j);
                    laurent::lattice_b_vector_coeffs(&ld.matrices, &f, rec.lambda)
                })
                .collect();
            for k in 0..ld.pole_order {
                let mut c = CMatrix::zeros(p);
                for (j, cols) in per_column.iter().enumerate() {
                    for i in 0..p {
                        c.set(i, j, cols[k][i]);
                    }
                }
                terms.push(Term {
                    lambda: rec.lambda,
                    power: k,
                    coeff: Coeff::Matrix(c.clone()),
                });
                if rec.lambda.im > 0.0 && rec.lambda.im < std::f64::consts::PI {
                    terms.push(Term {
                        lambda: rec.lambda.conj(),
                        power: k,
                        coeff: Coeff::Matrix(c.conj()),
                    });
                }
            }
        }
    }
    Ok(Expansion {
        kind: ExpansionKind::ULattice,
        dim: p,
        terms,
        remainder_exponent: theta,
        remainder_polynomial: false,
    })
}

const OVERFLOW_EXPONENT: f64 = 700.0;

/// Evaluate at real `t >= 0`. Errors with `OverflowGuard` when the leading
/// exponent exceeds the f64 range; use [`eval_scaled`] to retrieve the
/// mantissa representation in that case.
pub fn eval(exp: &Expansion, t: f64) -> Result<Evaluated, ExpansionError> {
    let (mantissa, exponent) = eval_scaled(exp, t)?;
    if exponent > OVERFLOW_EXPONENT {
        return Err(ExpansionError::OverflowGuard { exponent });
    }
    Ok(mantissa.scale(exponent.exp()))
}

/// Evaluate as `(mantissa, exponent)` with value `mantissa * e^exponent`.
/// The leading real part is factored out so the mantissa stays in range.
pub fn eval_scaled(exp: &Expansion, t: f64) -> Result<(Evaluated, f64), ExpansionError> {
    assert!(t >= 0.0, "expansions are asymptotic in t >= 0");
    let lead = exp
        .terms
        .iter()
        .map(|term| term.lambda.re)
        .fold(0.0, f64::max);
    let exponent = lead * t;
    let is_matrix = exp
        .terms
        .first()
        .map(|term| matches!(term.coeff, Coeff::Matrix(_)))
        .unwrap_or(matches!(
            exp.kind,
            ExpansionKind::UNonLattice | ExpansionKind::ULattice
        ));
    let p = exp.dim;
    let mut acc_matrix = vec![vec![Complex64::new(0.0, 0.0); p]; p];
    let mut acc_vector = vec![Complex64::new(0.0, 0.0); p];
    let mut scale_ref: f64 = 0.0;
    for term in &exp.terms {
        let weight = ((term.lambda - lead) * t).exp() * t.powi(term.power as i32);
        scale_ref = scale_ref.max(weight.norm() * term.coeff.max_abs());
        match &term.coeff {
            Coeff::Matrix(m) => {
                for i in 0..p {
                    for j in 0..p {
                        acc_matrix[i][j] += weight * m.get(i, j);
                    }
                }
            }
            Coeff::Vector(v) => {
                for i in 0..p {
                    acc_vector[i] += weight * v[i];
                }
            }
        }
    }
    // Conjugate pairing makes the sum real; anything beyond rounding noise
    // indicates a broken pipeline.
    let imag_resid = if is_matrix {
        acc_matrix
            .iter()
            .flatten()
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    } else {
        acc_vector.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    };
    if imag_resid > 1e-10 * (1.0 + scale_ref) {
        return Err(ExpansionError::Assumption(format!(
            "evaluation produced imaginary residue {imag_resid}, terms are not conjugate-paired"
        )));
    }
    let mantissa = if is_matrix {
        Evaluated::Matrix(
            acc_matrix
                .into_iter()
                .map(|row| row.into_iter().map(|z| z.re).collect())
                .collect(),
        )
    } else {
        Evaluated::Vector(acc_vector.into_iter().map(|z| z.re).collect())
    };
    Ok((mantissa, exponent))
}

/// Least-squares slope of `ln(residual)` against `n`, ignoring points at
/// or below `floor`. `None` when fewer than three points survive (the
/// expansion is exact to rounding there, so no decay rate is measurable).
pub fn log_residual_slope(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, r)| *r > floor)
        .map(|&(n, r)| (n, r.ln()))
        .collect();
    if usable.len() < 3 {
        return None;
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|(x, _)| x).sum();
    let sy: f64 = usable.iter().map(|(_, y)| y).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = usable.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ScalarMeasure;

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

    fn region() -> SearchRegion {
        SearchRegion {
            re_min: 0.1,
            re_max: 3.0,
            im_max: 5.0,
        }
    }

    #[test]
    fn u_expansion_golden_formula() {
        // U(t) = e^t [[1, 1 + t], [0, 1]].
        let m = golden(1.0);
        let exp = build_u_expansion(&m, &region(), &Tolerances::default()).unwrap();
        for &t in &[0.0, 0.5, 2.0] {
            let v = eval(&exp, t).unwrap();
            let u = v.as_matrix().unwrap();
            let e = t.exp();
            assert!((u[0][0] - e).abs() < 1e-8 * e.max(1.0));
            assert!((u[0][1] - e * (1.0 + t)).abs() < 1e-8 * e.max(1.0));
            assert!(u[1][0].abs() < 1e-8);
            assert!((u[1][1] - e).abs() < 1e-8 * e.max(1.0));
        }
        // Entry (1,2) at t = 2 is 3 e^2.
        let v = eval(&exp, 2.0).unwrap();
        let u = v.as_matrix().unwrap();
        assert!((u[0][1] - 3.0 * 2.0f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn u_expansion_single_type_poisson() {
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::poisson_intensity(1.0)]]).unwrap();
        let exp = build_u_expansion(&m, &region(), &Tolerances::default()).unwrap();
        let v = eval(&exp, 3.0).unwrap();
        assert!((v.as_matrix().unwrap()[0][0] - 3.0f64.exp()).abs() < 1e-8 * 3.0f64.exp());
    }

    #[test]
    fn tilted_cross_description_identity() {
        // (1,0) E[N_t] = (1,1) E[tilde N_t] at expansion level.
        let m = golden(1.0);
        let tilted = MeasureMatrix::from_grid(vec![
            vec![
                ScalarMeasure::poisson_intensity(1.0),
                ScalarMeasure::poisson_intensity(1.0),
            ],
            vec![ScalarMeasure::zero(), ScalarMeasure::poisson_intensity(1.0)],
        ])
        .unwrap();
        let e1 = build_u_expansion(&m, &region(), &Tolerances::default()).unwrap();
        let e2 = build_u_expansion(&tilted, &region(), &Tolerances::default()).unwrap();
        for &t in &[1.0, 2.0, 5.0] {
            let u = eval(&e1, t).unwrap();
            let ut = eval(&e2, t).unwrap();
            let u = u.as_matrix().unwrap();
            let ut = ut.as_matrix().unwrap();
            for j in 0..2 {
                let lhs = u[0][j];
                let rhs = ut[0][j] + ut[1][j];
                assert!(
                    (lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()),
                    "identity off at t = {t}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn f_expansion_indicator_reproduces_u_columns() {
        let m = golden(1.0);
        let u = build_u_expansion(&m, &region(), &Tolerances::default()).unwrap();
        for j in 0..2 {
            let f = Characteristic::unit(2, j);
            let fe = build_f_expansion(&m, &f, &region(), &Tolerances::default()).unwrap();
            for &t in &[0.7, 1.9] {
                let uv = eval(&u, t).unwrap();
                let fv = eval(&fe, t).unwrap();
                let um = uv.as_matrix().unwrap();
                let fvec = fv.as_vector().unwrap();
                for i in 0..2 {
                    assert!(
                        (um[i][j] - fvec[i]).abs() < 1e-8 * (1.0 + um[i][j].abs()),
                        "column {j} mismatch at t = {t}"
                    );
                }
            }
        }
    }

    #[test]
    fn f_expansion_window_lifetime() {
        // Single type Poisson(2), f = 1_{[0, zeta)}:
        // b_{alpha,0,f} = B_{alpha,0} (1 - e^{-alpha zeta}) / alpha.
        let m =
            MeasureMatrix::from_grid(vec![vec![ScalarMeasure::poisson_intensity(2.0)]]).unwrap();
        let zeta = 0.9;
        let f = Characteristic::new(vec![crate::measure::CharComponent::window(zeta)]);
        let exp = build_f_expansion(&m, &f, &region(), &Tolerances::default()).unwrap();
        assert_eq!(exp.terms.len(), 1);
        match &exp.terms[0].coeff {
            Coeff::Vector(v) => {
                // A_1 = alpha = 2 (residue of z/(z-2)); B_0 = A_1.
                let alpha = 2.0;
                let want = alpha * (1.0 - (-alpha * zeta).exp()) / alpha;
                assert!((v[0] - c(want, 0.0)).norm() < 1e-9);
            }
            _ => panic!("vector expansion expected"),
        }
    }

    #[test]
    fn lattice_f_geometric_exact() {
        let l = LatticeMeasureMatrix::new(1, 1.0, vec![vec![0.0, 2.0]]).unwrap();
        let f = LatticeCharacteristic::unit_at_zero(1, 0);
        let exp = build_lattice_f_expansion(&l, &f, 0.0, &Tolerances::default()).unwrap();
        for n in 0..12u32 {
            let v = eval(&exp, n as f64).unwrap();
            let got = v.as_vector().unwrap()[0];
            let want = 2.0f64.powi(n as i32);
            assert!(
                (got - want).abs() < 1e-9 * want,
                "F({n}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn lattice_u_expansion_matches_f_with_units() {
        let l = LatticeMeasureMatrix::new(
            2,
            1.0,
            vec![
                vec![0.0, 0.6],
                vec![0.3],
                vec![0.0, 0.2],
                vec![0.0, 0.0, 0.7],
            ],
        )
        .unwrap();
        let u = build_lattice_u_expansion(&l, -2.0, &Tolerances::default()).unwrap();
        let n = 7.0;
        let uv = eval(&u, n).unwrap();
        let um = uv.as_matrix().unwrap();
        for j in 0..2 {
            let f = LatticeCharacteristic::unit_at_zero(2, j);
            let fe = build_lattice_f_expansion(&l, &f, -2.0, &Tolerances::default()).unwrap();
            let fv = eval(&fe, n).unwrap();
            let fvec = fv.as_vector().unwrap();
            for i in 0..2 {
                assert!((um[i][j] - fvec[i]).abs() < 1e-9 * (1.0 + um[i][j].abs()));
            }
        }
    }

    #[test]
    fn eval_edge_cases() {
        let empty = Expansion {
            kind: ExpansionKind::UNonLattice,
            dim: 2,
            terms: vec![],
            remainder_exponent: 0.0,
            remainder_polynomial: true,
        };
        let v = eval(&empty, 3.0).unwrap();
        assert!(v.as_matrix().unwrap().iter().flatten().all(|&x| x == 0.0));

        let m = golden(1.0);
        let exp = build_u_expansion(&m, &region(), &Tolerances::default()).unwrap();
        // t = 0 sums the k = 0 coefficients.
        let v0 = eval(&exp, 0.0).unwrap();
        let u0 = v0.as_matrix().unwrap();
        assert!((u0[0][0] - 1.0).abs() < 1e-8);
        // Overflow guard far out.
        match eval(&exp, 1e4) {
            Err(ExpansionError::OverflowGuard { exponent }) => assert!(exponent > 700.0),
            other => panic!("expected overflow guard, got {other:?}"),
        }
        let (mantissa, exponent) = eval_scaled(&exp, 1e4).unwrap();
        assert!(exponent > 700.0);
        assert!(mantissa.as_matrix().unwrap()[0][0].is_finite());
    }

    #[test]
    fn strip_root_detection() {
        // Roots at 1 and 2; a characteristic with variation order between
        // re_min and the root at 1 triggers the strip check.
        let m = MeasureMatrix::from_grid(vec![
            vec![ScalarMeasure::poisson_intensity(1.0), ScalarMeasure::zero()],
            vec![ScalarMeasure::zero(), ScalarMeasure::poisson_intensity(2.0)],
        ])
        .unwrap();
        let f = Characteristic::new(vec![
            crate::measure::CharComponent {
                steps: vec![],
                smooth: vec![crate::measure::ExpPolyTerm {
                    coefficient: 1.0,
                    power: 0,
                    rate: -1.5, // grows like e^{1.5 t}: variation order 1.5
                }],
            },
            crate::measure::CharComponent::zero(),
        ]);
        let r = SearchRegion {
            re_min: 0.5,
            re_max: 3.0,
            im_max: 4.0,
        };
        match build_f_expansion(&m, &f, &r, &Tolerances::default()) {
            Err(ExpansionError::StripRoot { lambda, .. }) => {
                assert!((lambda - c(1.0, 0.0)).norm() < 1e-8);
            }
            other => panic!("expected StripRoot, got {other:?}"),
        }
    }

    #[test]
    fn slope_helper_recovers_decay() {
        let pts: Vec<(f64, f64)> = (10..40)
            .map(|n| {
                let n = n as f64;
                (n, (0.3 * n).exp() * 2.5)
            })
            .collect();
        let s = log_residual_slope(&pts, 0.0).unwrap();
        assert!((s - 0.3).abs() < 1e-9);
        assert!(log_residual_slope(&pts[..2], 0.0).is_none());
    }
}

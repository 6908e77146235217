//! Characteristic roots: `det(I - L mu(z)) = 0` inside a search region,
//! counted with multiplicity by the argument principle and localized by
//! recursive subdivision with Newton polish; the lattice analogue reduces
//! to the roots of the polynomial `det(I - G mu(z))`.

use num_complex::Complex64;

use crate::error::{RootError, TransformError};
use crate::linalg::CMatrix;
use crate::measure::{LatticeMeasureMatrix, MeasureMatrix};
use crate::par;
use crate::poly::{self, CPoly};
use crate::transform;
use crate::Tolerances;

/// Search window for non-lattice roots; the imaginary band is symmetric.
#[derive(Debug, Clone, Copy)]
pub struct SearchRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_max: f64,
}

impl SearchRegion {
    pub fn validate(&self, abscissa: f64) -> Result<(), RootError> {
        if !(self.re_min < self.re_max) {
            return Err(RootError::BadRegion(format!(
                "re_min {} must be below re_max {}",
                self.re_min, self.re_max
            )));
        }
        if !(self.im_max > 0.0) {
            return Err(RootError::BadRegion(format!(
                "im_max {} must be positive",
                self.im_max
            )));
        }
        if self.re_min <= abscissa {
            return Err(RootError::BadRegion(format!(
                "re_min {} must lie strictly above the domain abscissa {}",
                self.re_min, abscissa
            )));
        }
        Ok(())
    }

    fn rect(&self) -> Rect {
        Rect {
            x0: self.re_min,
            x1: self.re_max,
            y0: -self.im_max,
            y1: self.im_max,
        }
    }
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn diameter(&self) -> f64 {
        self.width().max(self.height())
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn contains_with_margin(&self, z: Complex64, margin: f64) -> bool {
        z.re >= self.x0 - margin
            && z.re <= self.x1 + margin
            && z.im >= self.y0 - margin
            && z.im <= self.y1 + margin
    }
}

/// A located root of the characteristic equation.
#[derive(Debug, Clone)]
pub struct RootRecord {
    pub lambda: Complex64,
    pub det_multiplicity: usize,
}

/// `det(I - L mu(z))` by exact cofactor expansion.
pub fn det_char(m: &MeasureMatrix, z: Complex64) -> Result<Complex64, TransformError> {
    let t = transform::laplace_matrix(m, z)?;
    Ok(t.matrix.sub_from_identity().det())
}

pub(crate) fn det_char_raw(m: &MeasureMatrix, z: Complex64) -> Complex64 {
    transform::laplace_raw(m, z).sub_from_identity().det()
}

/// Derivative of the characteristic determinant via Jacobi's formula
/// `d det(B) = tr(adj(B) B')` with `B = I - L mu(z)`.
pub(crate) fn det_char_derivative_raw(m: &MeasureMatrix, z: Complex64) -> Complex64 {
    let b = transform::laplace_raw(m, z).sub_from_identity();
    let p = m.dim();
    let mut bp = CMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            bp.set(i, j, -m.entry(i, j).transform_derivative_at(z));
        }
    }
    b.adjugate().matmul(&bp).trace()
}

const START_SAMPLES: usize = 64;
const MAX_SAMPLES: usize = 1 << 14;

/// Winding number of `f` around the rectangle boundary, which equals the
/// number of zeros inside counted with multiplicity.
///
/// The boundary is sampled adaptively: sampling doubles until consecutive
/// phases differ by less than pi/2 and the total winding is close to an
/// integer. A sample with `|f|` under the boundary floor reports
/// `BoundaryRoot` so the caller can nudge the rectangle.
fn winding_count<F>(f: &F, rect: &Rect) -> Result<usize, RootError>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let corners = [
        Complex64::new(rect.x0, rect.y0),
        Complex64::new(rect.x1, rect.y0),
        Complex64::new(rect.x1, rect.y1),
        Complex64::new(rect.x0, rect.y1),
    ];
    let mut n = START_SAMPLES;
    loop {
        let mut points = Vec::with_capacity(4 * n);
        for e in 0..4 {
            let a = corners[e];
            let b = corners[(e + 1) % 4];
            for j in 0..n {
                let s = j as f64 / n as f64;
                points.push(a + (b - a) * s);
            }
        }
        let values = par::map_slice(&points, |&z| f(z));
        let max_mag = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let floor = 1e-13 * (1.0 + max_mag);
        if let Some((idx, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.norm() < floor || !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(RootError::BoundaryRoot {
                z: points[idx],
                value: v.norm(),
            });
        }
        let mut total = 0.0;
        let mut sharp = false;
        for j in 0..values.len() {
            let next = values[(j + 1) % values.len()];
            let dphi = (next / values[j]).arg();
            if dphi.abs() >= std::f64::consts::FRAC_PI_2 {
                sharp = true;
                break;
            }
            total += dphi;
        }
        if !sharp {
            let w = total / (2.0 * std::f64::consts::PI);
            let rounded = w.round();
            if (w - rounded).abs() < 0.25 && rounded >= 0.0 {
                return Ok(rounded as usize);
            }
        }
        if n >= MAX_SAMPLES {
            return Err(RootError::Quadrature { samples: n });
        }
        n *= 2;
    }
}

/// Zero count of the characteristic determinant inside the rectangle.
pub fn count_zeros(m: &MeasureMatrix, rect: &Rect) -> Result<usize, RootError> {
    let abscissa = m.abscissa();
    if rect.x0 <= abscissa {
        return Err(RootError::Transform(TransformError::Domain {
            re: rect.x0,
            abscissa,
        }));
    }
    winding_count(&|z| det_char_raw(m, z), rect)
}

/// Deterministic stand-ins for the "random" boundary perturbations:
/// relative pad sizes for up to eight retries when a boundary sample sits
/// on (or too close to) a root, starting at 1e-6 and escalating.
const NUDGE_PADS: [f64; 8] = [0.0, 1e-6, 4e-6, 1.6e-5, 6.4e-5, 2.6e-4, 1e-3, 4.1e-3];

/// Count zeros, expanding the rectangle slightly when a root sits on the
/// boundary or defeats phase tracking there. Returns the count together
/// with the rectangle actually used.
pub fn count_zeros_nudged(m: &MeasureMatrix, rect: &Rect) -> Result<(usize, Rect), RootError> {
    let abscissa = m.abscissa();
    let mut last_err = None;
    for pad in NUDGE_PADS.iter() {
        let pad_x = rect.width() * pad;
        let pad_y = rect.height() * pad;
        let mut r = Rect {
            x0: rect.x0 - pad_x,
            x1: rect.x1 + pad_x * 1.37,
            y0: rect.y0 - pad_y * 0.89,
            y1: rect.y1 + pad_y * 1.11,
        };
        // Never cross the transform domain boundary.
        if r.x0 <= abscissa {
            r.x0 = rect.x0;
        }
        match count_zeros(m, &r) {
            Ok(c) => return Ok((c, r)),
            Err(e @ (RootError::BoundaryRoot { .. } | RootError::Quadrature { .. })) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

const MAX_DEPTH: usize = 40;
const MERGE_TOL: f64 = 1e-8;
const COARSE_POLISH: f64 = 1e-3;

/// Locate all roots in the region with determinant multiplicities.
///
/// Recursive subdivision of the region keeps boxes that hold zeros,
/// polishes root candidates by multiplicity-corrected damped Newton on the
/// determinant, merges clusters below resolution, and restores exact
/// conjugate pairing. Output is sorted by decreasing real part, ties by
/// decreasing imaginary part.
pub fn locate_roots(
    m: &MeasureMatrix,
    region: &SearchRegion,
    tol: &Tolerances,
) -> Result<Vec<RootRecord>, RootError> {
    region.validate(m.abscissa())?;
    let (count, rect) = count_zeros_nudged(m, &region.rect())?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut found: Vec<(Complex64, usize)> = Vec::new();
    subdivide(m, &rect, count, 0, tol, &mut found)?;

    // Merge clusters below resolution.
    let mut merged: Vec<(Complex64, usize)> = Vec::new();
    'outer: for (z, mult) in found {
        for (w, wm) in merged.iter_mut() {
            if (*w - z).norm() < MERGE_TOL {
                let total = *wm + mult;
                *w = (*w * (*wm as f64) + z * (mult as f64)) / (total as f64);
                *wm = total;
                continue 'outer;
            }
        }
        merged.push((z, mult));
    }

    // Snap near-real roots, then mirror lower-half roots onto the
    // conjugates of their upper-half partners.
    for (z, _) in merged.iter_mut() {
        if z.im.abs() < MERGE_TOL {
            *z = Complex64::new(z.re, 0.0);
        }
    }
    let mut records: Vec<(Complex64, usize)> = Vec::new();
    let mut lower: Vec<(Complex64, usize)> = Vec::new();
    for (z, mult) in merged {
        if z.im >= 0.0 {
            records.push((z, mult));
        } else {
            lower.push((z, mult));
        }
    }
    for (z, mult) in lower {
        let partner = records
            .iter()
            .filter(|(w, _)| w.im > 0.0)
            .min_by(|(a, _), (b, _)| (a.conj() - z).norm().total_cmp(&(b.conj() - z).norm()))
            .map(|(w, _)| *w);
        match partner {
            Some(w) if (w.conj() - z).norm() < 1e-6 * (1.0 + z.norm()) => {
                records.push((w.conj(), mult));
            }
            _ => records.push((z, mult)),
        }
    }
    records.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
    Ok(records
        .into_iter()
        .map(|(lambda, det_multiplicity)| RootRecord {
            lambda,
            det_multiplicity,
        })
        .collect())
}

fn subdivide(
    m: &MeasureMatrix,
    rect: &Rect,
    count: usize,
    depth: usize,
    tol: &Tolerances,
    out: &mut Vec<(Complex64, usize)>,
) -> Result<(), RootError> {
    if count == 0 {
        return Ok(());
    }
    let diam = rect.diameter();
    if diam < COARSE_POLISH {
        // Small enough to try Newton directly; a cluster of distinct
        // roots rejects the polish (the increment stalls) and falls back
        // to further subdivision.
        let (z, increment) = polish_root(m, rect.center(), count);
        let residual = det_char_raw(m, z).norm();
        let margin = (2.0 * diam).max(1e-7);
        if residual <= tol.tol_det
            && increment < 1e-12 * (1.0 + z.norm())
            && rect.contains_with_margin(z, margin)
        {
            out.push((z, count));
            return Ok(());
        }
        if diam < 3.0 * MERGE_TOL {
            // Below resolution and still not polishable: accept the box
            // center as a cluster if the determinant is consistent with a
            // count-fold zero, otherwise give up.
            if residual <= tol.tol_det.max(diam.powi(count as i32)) {
                out.push((z, count));
                return Ok(());
            }
            return Err(RootError::MaxDepth { depth });
        }
    }
    if depth >= MAX_DEPTH {
        return Err(RootError::MaxDepth { depth });
    }

    // Split into four children whose cut lines still tile the parent
    // exactly. Cut positions walk away from the midpoint so a root lying
    // on (or near) one cut is missed by the next attempt.
    const CUT_FRACTIONS: [(f64, f64); 8] = [
        (0.5, 0.5),
        (0.44, 0.56),
        (0.56, 0.44),
        (0.37, 0.645),
        (0.63, 0.355),
        (0.29, 0.715),
        (0.71, 0.285),
        (0.475, 0.525),
    ];
    let mut last_err: Option<RootError> = None;
    'attempts: for (fx, fy) in CUT_FRACTIONS.iter() {
        let sx = rect.x0 + rect.width() * fx;
        let sy = rect.y0 + rect.height() * fy;
        let children = [
            Rect::new(rect.x0, sx, rect.y0, sy),
            Rect::new(sx, rect.x1, rect.y0, sy),
            Rect::new(rect.x0, sx, sy, rect.y1),
            Rect::new(sx, rect.x1, sy, rect.y1),
        ];
        let counts = par::map_slice(&children, |child| count_zeros(m, child));
        let mut resolved = Vec::with_capacity(4);
        for c in counts {
            match c {
                Ok(v) => resolved.push(v),
                Err(e @ (RootError::BoundaryRoot { .. } | RootError::Quadrature { .. })) => {
                    last_err = Some(e);
                    continue 'attempts;
                }
                Err(e) => return Err(e),
            }
        }
        let total: usize = resolved.iter().sum();
        if total != count {
            // A root sits too close to a cut for clean phase tracking.
            last_err = Some(RootError::Quadrature {
                samples: MAX_SAMPLES,
            });
            continue 'attempts;
        }
        for (child, child_count) in children.iter().zip(resolved) {
            subdivide(m, child, child_count, depth + 1, tol, out)?;
        }
        return Ok(());
    }
    Err(last_err.unwrap_or(RootError::MaxDepth { depth }))
}

/// Multiplicity-corrected damped Newton on the determinant. Returns the
/// final iterate and the last step size.
fn polish_root(m: &MeasureMatrix, start: Complex64, multiplicity: usize) -> (Complex64, f64) {
    let mult = multiplicity.max(1) as f64;
    let abscissa = m.abscissa();
    let mut z = start;
    // No movement means no increment; acceptance still requires the
    // residual check.
    let mut last_step = 0.0;
    for _ in 0..100 {
        let f = det_char_raw(m, z);
        if !f.re.is_finite() || !f.im.is_finite() {
            break;
        }
        let d = det_char_derivative_raw(m, z);
        if d.norm() == 0.0 {
            break;
        }
        let mut step = f / d * mult;
        // Damp: halve until the residual does not grow.
        let mut tries = 0;
        while tries < 25 {
            let cand = z - step;
            if cand.re > abscissa && det_char_raw(m, cand).norm() <= f.norm() * 1.5 {
                break;
            }
            step *= 0.5;
            tries += 1;
        }
        z -= step;
        last_step = step.norm();
        if last_step < 1e-13 * (1.0 + z.norm()) {
            break;
        }
    }
    (z, last_step)
}

/// The polynomial `det(I - G mu(z))` of a lattice matrix, exact in its
/// coefficients.
pub fn lattice_char_poly(l: &LatticeMeasureMatrix) -> CPoly {
    let p = l.dim();
    let mut entries: Vec<CPoly> = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let mut g = CPoly::from_real(l.weights(i, j)).scale(Complex64::new(-1.0, 0.0));
            if i == j {
                g = g.add(&CPoly::constant(Complex64::new(1.0, 0.0)));
            }
            entries.push(g);
        }
    }
    poly_matrix_det(&entries, p)
}

fn poly_matrix_det(entries: &[CPoly], n: usize) -> CPoly {
    match n {
        0 => CPoly::constant(Complex64::new(1.0, 0.0)),
        1 => entries[0].clone(),
        _ => {
            let mut acc = CPoly::zero();
            let mut sign = 1.0;
            for j in 0..n {
                let a = &entries[j];
                if a.degree().is_some() {
                    let minor: Vec<CPoly> = (1..n)
                        .flat_map(|r| (0..n).filter(|&c| c != j).map(move |c| (r, c)))
                        .map(|(r, c)| entries[r * n + c].clone())
                        .collect();
                    let term = a.mul(&poly_matrix_det(&minor, n - 1));
                    acc = acc.add(&term.scale(Complex64::new(sign, 0.0)));
                }
                sign = -sign;
            }
            acc
        }
    }
}

/// All clustered roots of `det(I - G mu(z))`, for internal reuse.
pub(crate) fn lattice_zeta_roots(
    l: &LatticeMeasureMatrix,
) -> Result<(CPoly, Vec<poly::RootCluster>), RootError> {
    let q = lattice_char_poly(l);
    match q.degree() {
        None | Some(0) => return Err(RootError::Degenerate),
        _ => {}
    }
    let raw = poly::roots(&q.coeffs)
        .map_err(|iters| RootError::Spectral(crate::error::SpectralError::Convergence { iters }))?;
    let scale = 1.0 + raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let clusters = poly::cluster_roots(&q, &raw, 1e-6 * scale);
    Ok((q, clusters))
}

/// Lattice roots: zeros `zeta` of `det(I - G mu(z))` with
/// `0 < |zeta| < e^{-theta}` mapped to `lambda = -log zeta` in the band
/// `Im lambda in (-pi, pi]`, with multiplicities from clustering.
pub fn locate_lattice_roots(
    l: &LatticeMeasureMatrix,
    theta: f64,
) -> Result<Vec<RootRecord>, RootError> {
    let (_, clusters) = lattice_zeta_roots(l)?;
    let cutoff = (-theta).exp();
    let mut records: Vec<RootRecord> = clusters
        .into_iter()
        .filter(|cl| cl.value.norm() > 1e-12 && cl.value.norm() < cutoff)
        .map(|cl| {
            let zeta = cl.value;
            let mut im = -zeta.arg();
            if im <= -std::f64::consts::PI {
                im = std::f64::consts::PI;
            }
            // Snap numerically-real roots onto the axis and half-turn
            // roots onto +pi, so conjugate pairing sees them as
            // self-paired.
            if im.abs() < 1e-9 {
                im = 0.0;
            } else if (std::f64::consts::PI - im.abs()) < 1e-9 {
                im = std::f64::consts::PI;
            }
            RootRecord {
                lambda: Complex64::new(-zeta.norm().ln(), im),
                det_multiplicity: cl.multiplicity,
            }
        })
        .collect();
    records.sort_by(|a, b| {
        b.lambda
            .re
            .total_cmp(&a.lambda.re)
            .then(b.lambda.im.total_cmp(&a.lambda.im))
    });
    Ok(records)
}

//! Complex polynomial arithmetic and root finding.
//!
//! Roots are found by Durand-Kerner (Weierstrass) iteration, then sharpened
//! with multiplicity-corrected Newton steps on cluster centroids. Degrees
//! stay small here (characteristic polynomials of `p x p` matrices and
//! lattice determinants), so simultaneous iteration is robust and needs no
//! balancing machinery.

use num_complex::Complex64;

/// Coefficients ascending: `p(z) = coeffs[0] + coeffs[1] z + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct CPoly {
    pub coeffs: Vec<Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl CPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = CPoly { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        CPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        CPoly::new(vec![c])
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        CPoly::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    fn trim(&mut self) {
        while let Some(last) = self.coeffs.last() {
            if last.norm() == 0.0 && self.coeffs.len() > 0 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> CPoly {
        if self.coeffs.len() <= 1 {
            return CPoly::zero();
        }
        CPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * (k as f64))
                .collect(),
        )
    }

    pub fn derivative_n(&self, n: usize) -> CPoly {
        let mut d = self.clone();
        for _ in 0..n {
            d = d.derivative();
        }
        d
    }

    pub fn add(&self, other: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![ZERO; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k] += c;
        }
        for (k, &c) in other.coeffs.iter().enumerate() {
            out[k] += c;
        }
        CPoly::new(out)
    }

    pub fn sub(&self, other: &CPoly) -> CPoly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> CPoly {
        CPoly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &CPoly) -> CPoly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return CPoly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly::new(out)
    }
}

/// All roots of the polynomial with the given ascending coefficients,
/// unordered, with multiple roots repeated. `Err(iterations)` when the
/// simultaneous iteration fails to settle.
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, usize> {
    let p = CPoly::new(coeffs.to_vec());
    let deg = match p.degree() {
        None | Some(0) => return Ok(Vec::new()),
        Some(d) => d,
    };
    let lead = p.coeffs[deg];
    let monic: Vec<Complex64> = p.coeffs.iter().map(|&c| c / lead).collect();

    // Cauchy-style inclusion radius.
    let radius = 1.0 + monic[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);

    // Spread initial guesses on a circle, angle-offset so no guess starts
    // on an axis of symmetry.
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64) / (deg as f64) + 0.41;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    let pm = CPoly::new(monic);
    let max_iters = 600;
    for iter in 0..max_iters {
        let mut max_move: f64 = 0.0;
        for i in 0..deg {
            let zi = z[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= zi - z[j];
                }
            }
            if denom == ZERO {
                // Two iterates collided; nudge apart deterministically.
                z[i] += Complex64::new(1e-8 * radius, 1e-8 * radius * (i as f64 + 1.0));
                max_move = f64::MAX;
                continue;
            }
            let delta = pm.eval(zi) / denom;
            z[i] = zi - delta;
            max_move = max_move.max(delta.norm());
        }
        if max_move < 1e-14 * radius.max(1.0) {
            return Ok(z);
        }
        // Iterates orbiting a multiple root stall the max-move criterion;
        // accept once every residual is at rounding level.
        if iter % 32 == 31 {
            let scale = p.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if z.iter()
                .all(|&zi| p.eval(zi).norm() <= 1e-10 * scale * (1.0 + zi.norm().powi(deg as i32)))
            {
                return Ok(z);
            }
        }
    }
    Err(max_iters)
}

/// A polished root cluster: centroid and multiplicity.
#[derive(Debug, Clone)]
pub struct RootCluster {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Group raw roots into clusters (within `tol`, absolute), polish each
/// centroid, and return the clusters sorted by decreasing real part then
/// decreasing imaginary part.
///
/// A cluster of size `m > 1` is treated as an `m`-fold root and polished
/// on the `(m-1)`-th derivative, where it is a simple, well-conditioned
/// zero; simultaneous iteration alone only reaches such roots to
/// `eps^(1/m)`.
pub fn cluster_roots(p: &CPoly, raw: &[Complex64], tol: f64) -> Vec<RootCluster> {
    let mut remaining: Vec<Complex64> = raw.to_vec();
    let mut clusters: Vec<RootCluster> = Vec::new();
    while let Some(seed) = remaining.pop() {
        let mut members = vec![seed];
        let mut i = 0;
        while i < remaining.len() {
            let centroid: Complex64 = members.iter().sum::<Complex64>() / (members.len() as f64);
            if (remaining[i] - centroid).norm() < tol {
                members.push(remaining.swap_remove(i));
                i = 0;
            } else {
                i += 1;
            }
        }
        let centroid: Complex64 = members.iter().sum::<Complex64>() / (members.len() as f64);
        let m = members.len();
        let value = if m == 1 {
            newton_polish(p, centroid, 1)
        } else {
            newton_polish(&p.derivative_n(m - 1), centroid, 1)
        };
        clusters.push(RootCluster {
            value,
            multiplicity: m,
        });
    }
    clusters.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    clusters
}

/// Multiplicity-corrected damped Newton: `z <- z - m p(z)/p'(z)`.
pub fn newton_polish(p: &CPoly, start: Complex64, multiplicity: usize) -> Complex64 {
    let dp = p.derivative();
    let m = multiplicity.max(1) as f64;
    let mut z = start;
    let mut best = z;
    let mut best_val = p.eval(z).norm();
    for _ in 0..60 {
        let f = p.eval(z);
        let d = dp.eval(z);
        if d == ZERO {
            break;
        }
        let step = f / d * m;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        let val = p.eval(z).norm();
        if val < best_val {
            best_val = val;
            best = z;
        }
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    best
}

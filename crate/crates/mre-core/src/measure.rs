//! The closed measure family the engine operates on: point masses plus
//! exponential-polynomial densities on `[0, inf)`, a finite-support lattice
//! variant, and right-continuous characteristic functions built from steps
//! and the same exponential-polynomial terms.
//!
//! Restricting to this family keeps every Laplace transform, moment
//! integral, and variation integral in closed form, so the only quadrature
//! error anywhere downstream comes from contour sampling.

use num_complex::Complex64;

use crate::error::MeasureError;
use crate::linalg::RMatrix;

/// Point mass `weight * delta_location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomTerm {
    pub location: f64,
    pub weight: f64,
}

/// Density term `coefficient * x^power * exp(-rate * x)` on `[0, inf)`.
///
/// Negative `rate` is allowed (a growing density is still locally finite);
/// the transform domain tracks it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPolyTerm {
    pub coefficient: f64,
    pub power: u32,
    pub rate: f64,
}

/// A locally finite measure: atoms plus exponential-polynomial densities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalarMeasure {
    pub atoms: Vec<AtomTerm>,
    pub densities: Vec<ExpPolyTerm>,
}

impl ScalarMeasure {
    pub fn zero() -> Self {
        ScalarMeasure::default()
    }

    pub fn from_atoms(atoms: &[(f64, f64)]) -> Self {
        ScalarMeasure {
            atoms: atoms
                .iter()
                .map(|&(location, weight)| AtomTerm { location, weight })
                .collect(),
            densities: Vec::new(),
        }
    }

    /// Homogeneous density `rate * dx` (a Poisson intensity measure).
    pub fn poisson_intensity(rate: f64) -> Self {
        ScalarMeasure {
            atoms: Vec::new(),
            densities: vec![ExpPolyTerm {
                coefficient: rate,
                power: 0,
                rate: 0.0,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.weight == 0.0)
            && self.densities.iter().all(|d| d.coefficient == 0.0)
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        for a in &self.atoms {
            if !a.location.is_finite() {
                return Err(MeasureError::NonFinite(a.location));
            }
            if !a.weight.is_finite() {
                return Err(MeasureError::NonFinite(a.weight));
            }
            if a.location < 0.0 {
                return Err(MeasureError::NegativeLocation(a.location));
            }
            if a.weight < 0.0 {
                return Err(MeasureError::NegativeWeight(a.weight));
            }
        }
        for d in &self.densities {
            if !d.coefficient.is_finite() || !d.rate.is_finite() {
                return Err(MeasureError::NonFinite(d.coefficient));
            }
            if d.coefficient < 0.0 {
                return Err(MeasureError::NegativeCoefficient(d.coefficient));
            }
        }
        Ok(())
    }

    /// `mu([0, t])`, exact.
    pub fn total_mass(&self, t: f64) -> f64 {
        assert!(t >= 0.0, "total_mass needs t >= 0");
        let atom_part: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location <= t)
            .map(|a| a.weight)
            .sum();
        let density_part: f64 = self
            .densities
            .iter()
            .map(|d| d.coefficient * poly_exp_integral(d.power, Complex64::new(-d.rate, 0.0), t).re)
            .sum();
        atom_part + density_part
    }

    /// Mass of the atom at location zero.
    pub fn instant_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.location == 0.0)
            .map(|a| a.weight)
            .sum()
    }

    /// Atomic part; for this family this is exactly the singular part.
    pub fn singular_part(&self) -> ScalarMeasure {
        ScalarMeasure {
            atoms: self.atoms.clone(),
            densities: Vec::new(),
        }
    }

    /// Infimum of `-rate` over density terms, `-inf` when purely atomic.
    pub fn abscissa(&self) -> f64 {
        self.densities
            .iter()
            .filter(|d| d.coefficient != 0.0)
            .map(|d| 0.0 - d.rate + 0.0) // normalizes -0.0
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact Laplace transform at `z`; the caller checks the domain.
    pub fn transform_at(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            acc += a.weight * (-z * a.location).exp();
        }
        for d in &self.densities {
            let denom = z + d.rate;
            acc += d.coefficient * factorial(d.power) / denom.powu(d.power + 1);
        }
        acc
    }

    /// Entrywise derivative of the transform in `z`.
    pub fn transform_derivative_at(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            acc -= a.weight * a.location * (-z * a.location).exp();
        }
        for d in &self.densities {
            let denom = z + d.rate;
            acc -= d.coefficient * factorial(d.power + 1) / denom.powu(d.power + 2);
        }
        acc
    }

    /// Sum of two measures.
    pub fn plus(&self, other: &ScalarMeasure) -> ScalarMeasure {
        let mut out = self.clone();
        out.atoms.extend_from_slice(&other.atoms);
        out.densities.extend_from_slice(&other.densities);
        out
    }
}

/// A `p x p` matrix of scalar measures, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureMatrix {
    dim: usize,
    entries: Vec<ScalarMeasure>,
}

impl MeasureMatrix {
    pub fn new(dim: usize, entries: Vec<ScalarMeasure>) -> Result<Self, MeasureError> {
        if entries.len() != dim * dim {
            return Err(MeasureError::NotSquare {
                rows: entries.len(),
            });
        }
        let m = MeasureMatrix { dim, entries };
        for e in &m.entries {
            e.validate()?;
        }
        Ok(m)
    }

    pub fn from_grid(grid: Vec<Vec<ScalarMeasure>>) -> Result<Self, MeasureError> {
        let dim = grid.len();
        if grid.iter().any(|row| row.len() != dim) {
            return Err(MeasureError::NotSquare { rows: dim });
        }
        MeasureMatrix::new(dim, grid.into_iter().flatten().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarMeasure {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[ScalarMeasure] {
        &self.entries
    }

    /// Matrix of atom masses at location zero, `mu(0)` in (A2).
    pub fn instant_mass_matrix(&self) -> RMatrix {
        let mut m = RMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.entry(i, j).instant_mass());
            }
        }
        m
    }

    /// Entrywise `mu([0, t])`.
    pub fn total_mass_matrix(&self, t: f64) -> RMatrix {
        let mut m = RMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(i, j, self.entry(i, j).total_mass(t));
            }
        }
        m
    }

    /// Entrywise atomic part.
    pub fn singular_part(&self) -> MeasureMatrix {
        MeasureMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e.singular_part()).collect(),
        }
    }

    /// Incidence pattern: `true` where the entry is a nonzero measure.
    pub fn incidence(&self) -> Vec<bool> {
        self.entries.iter().map(|e| !e.is_zero()).collect()
    }

    /// Max of the entrywise abscissas; `Re z` must exceed this for the
    /// transform to be finite.
    pub fn abscissa(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.abscissa())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Finite-support lattice measure matrix: weight index `n` is mass at `n h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMeasureMatrix {
    dim: usize,
    span: f64,
    /// `weights[i * dim + j]` is the weight vector of entry `(i, j)`.
    weights: Vec<Vec<f64>>,
}

impl LatticeMeasureMatrix {
    pub fn new(dim: usize, span: f64, weights: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        if !(span > 0.0) || !span.is_finite() {
            return Err(MeasureError::BadSpan(span));
        }
        if weights.len() != dim * dim {
            return Err(MeasureError::NotSquare {
                rows: weights.len(),
            });
        }
        for w in &weights {
            for &x in w {
                if !x.is_finite() {
                    return Err(MeasureError::NonFinite(x));
                }
                if x < 0.0 {
                    return Err(MeasureError::NegativeLatticeWeight(x));
                }
            }
        }
        let m = LatticeMeasureMatrix { dim, span, weights };
        // Declared span must be maximal: gcd of support indices is 1.
        let mut g: u64 = 0;
        for w in &m.weights {
            for (n, &x) in w.iter().enumerate() {
                if x > 0.0 && n > 0 {
                    g = gcd(g, n as u64);
                }
            }
        }
        if g > 1 {
            return Err(MeasureError::SpanNotMaximal { gcd: g });
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn weights(&self, i: usize, j: usize) -> &[f64] {
        &self.weights[i * self.dim + j]
    }

    pub fn max_support(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.len())
            .max()
            .unwrap_or(0)
            .saturating_sub(1)
    }

    /// `mu({n})` matrix.
    pub fn mass_at(&self, n: usize) -> RMatrix {
        let mut m = RMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let w = self.weights(i, j);
                m.set(i, j, w.get(n).copied().unwrap_or(0.0));
            }
        }
        m
    }

    /// Re-express as an atom matrix on the continuum, bridging the lattice
    /// generating function to the Laplace transform.
    pub fn to_measure_matrix(&self) -> MeasureMatrix {
        let entries = self
            .weights
            .iter()
            .map(|w| ScalarMeasure {
                atoms: w
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(n, &x)| AtomTerm {
                        location: n as f64 * self.span,
                        weight: x,
                    })
                    .collect(),
                densities: Vec::new(),
            })
            .collect();
        MeasureMatrix {
            dim: self.dim,
            entries,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Step term `height * 1_{[location, inf)}(t)` of a characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTerm {
    pub location: f64,
    pub height: f64,
}

/// One component of a characteristic: steps plus smooth terms
/// `c t^k exp(-beta t)` (coefficients of either sign are allowed here,
/// unlike for measure densities).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CharComponent {
    pub steps: Vec<StepTerm>,
    pub smooth: Vec<ExpPolyTerm>,
}

impl CharComponent {
    pub fn zero() -> Self {
        CharComponent::default()
    }

    pub fn indicator() -> Self {
        CharComponent {
            steps: vec![StepTerm {
                location: 0.0,
                height: 1.0,
            }],
            smooth: Vec::new(),
        }
    }

    /// Indicator of `[0, zeta)`.
    pub fn window(zeta: f64) -> Self {
        CharComponent {
            steps: vec![
                StepTerm {
                    location: 0.0,
                    height: 1.0,
                },
                StepTerm {
                    location: zeta,
                    height: -1.0,
                },
            ],
            smooth: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.steps.iter().all(|s| s.height == 0.0)
            && self.smooth.iter().all(|s| s.coefficient == 0.0)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let steps: f64 = self
            .steps
            .iter()
            .filter(|s| s.location <= t)
            .map(|s| s.height)
            .sum();
        let smooth: f64 = self
            .smooth
            .iter()
            .map(|s| s.coefficient * t.powi(s.power as i32) * (-s.rate * t).exp())
            .sum();
        steps + smooth
    }
}

/// Vector-valued characteristic `f`, one component per type. Vanishes on
/// the negative halfline and is right-continuous by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristic {
    pub components: Vec<CharComponent>,
}

impl Characteristic {
    pub fn new(components: Vec<CharComponent>) -> Self {
        Characteristic { components }
    }

    /// All-ones indicator in each component (counts every born individual).
    pub fn indicator(dim: usize) -> Self {
        Characteristic {
            components: (0..dim).map(|_| CharComponent::indicator()).collect(),
        }
    }

    /// Unit-vector characteristic: indicator in component `j`, zero
    /// elsewhere.
    pub fn unit(dim: usize, j: usize) -> Self {
        Characteristic {
            components: (0..dim)
                .map(|i| {
                    if i == j {
                        CharComponent::indicator()
                    } else {
                        CharComponent::zero()
                    }
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self, dim: usize) -> Result<(), MeasureError> {
        if self.components.len() != dim {
            return Err(MeasureError::Dimension {
                expected: dim,
                got: self.components.len(),
            });
        }
        for c in &self.components {
            for s in &c.steps {
                if !s.location.is_finite() || !s.height.is_finite() {
                    return Err(MeasureError::NonFinite(s.location));
                }
                if s.location < 0.0 {
                    return Err(MeasureError::NegativeLocation(s.location));
                }
            }
            for s in &c.smooth {
                if !s.coefficient.is_finite() || !s.rate.is_finite() {
                    return Err(MeasureError::NonFinite(s.coefficient));
                }
            }
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.value_at(t)).collect()
    }

    /// Exponential order of `f` itself: `int_0^inf f(x) x^j e^{-lambda x} dx`
    /// converges for `Re lambda` strictly above this. `-inf` for `f = 0`.
    pub fn moment_order(&self) -> f64 {
        let mut order = f64::NEG_INFINITY;
        for c in &self.components {
            if c.steps.iter().any(|s| s.height != 0.0) {
                order = order.max(0.0);
            }
            for s in &c.smooth {
                if s.coefficient != 0.0 {
                    order = order.max(-s.rate);
                }
            }
        }
        order
    }

    /// Exponential order of the total variation function `Vf`: the moment
    /// integral `int e^{-theta x} Vf(x) dx` is finite for `theta` strictly
    /// above this. Any nonzero part forces at least order zero because the
    /// variation is nondecreasing.
    pub fn variation_order(&self) -> f64 {
        let mut order = f64::NEG_INFINITY;
        for c in &self.components {
            if c.steps.iter().any(|s| s.height != 0.0) {
                order = order.max(0.0);
            }
            for s in &c.smooth {
                if s.coefficient != 0.0 {
                    order = order.max(0.0).max(-s.rate);
                }
            }
        }
        order
    }

    /// Closed form of `int_0^inf e^{-theta x} Vf(x) dx`, componentwise,
    /// with the variation accumulated term by term. For components whose
    /// steps sit at distinct locations and whose smooth part is a single
    /// term this equals the exact variation moment; with several smooth
    /// terms of opposing monotonicity it is an upper envelope, which is
    /// what the finiteness hypothesis needs.
    ///
    /// `None` when `theta` is not strictly above [`variation_order`].
    pub fn variation_moment(&self, theta: f64) -> Option<Vec<f64>> {
        if theta <= self.variation_order() {
            return None;
        }
        Some(
            self.components
                .iter()
                .map(|c| component_variation_moment(c, theta))
                .collect(),
        )
    }
}

fn component_variation_moment(c: &CharComponent, theta: f64) -> f64 {
    let mut acc = 0.0;
    for s in &c.steps {
        // Vf gains |height| at the jump location.
        acc += s.height.abs() * (-theta * s.location).exp() / theta;
    }
    for s in &c.smooth {
        if s.coefficient == 0.0 {
            continue;
        }
        let a = s.coefficient.abs();
        let k = s.power;
        let beta = s.rate;
        if k == 0 {
            // Jump of size |c| at zero, then monotone tail.
            acc += a / theta;
            if beta > 0.0 {
                // V(x) = a (1 - e^{-beta x}) beyond the jump.
                acc += a * (1.0 / theta - 1.0 / (theta + beta));
            } else if beta < 0.0 {
                // V(x) = a (e^{-beta x} - 1), increasing.
                acc += a * (1.0 / (theta + beta) - 1.0 / theta);
            }
        } else if beta <= 0.0 {
            // Monotone increasing from zero: V(x) = a x^k e^{-beta x}.
            acc += a * factorial(k).re / (theta + beta).powi(k as i32 + 1);
        } else {
            // Shape x^k e^{-beta x} rises to u* = k / beta, then falls:
            // V(x) = s(x) below u*, 2 s(u*) - s(x) above.
            let u = k as f64 / beta;
            let s_u = u.powi(k as i32) * (-beta * u).exp();
            let lower = poly_exp_integral(k, Complex64::new(-(theta + beta), 0.0), u).re;
            let total = factorial(k).re / (theta + beta).powi(k as i32 + 1);
            let upper = total - lower;
            acc += a * (lower + 2.0 * s_u * (-theta * u).exp() / theta - upper);
        }
    }
    acc
}

/// Finite-support lattice characteristic: `values[component][n] = f_component(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCharacteristic {
    pub values: Vec<Vec<f64>>,
}

impl LatticeCharacteristic {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        LatticeCharacteristic { values }
    }

    /// `f(n) = e_j` at `n = 0` only.
    pub fn unit_at_zero(dim: usize, j: usize) -> Self {
        LatticeCharacteristic {
            values: (0..dim)
                .map(|i| if i == j { vec![1.0] } else { vec![0.0] })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn value_at(&self, n: usize) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.get(n).copied().unwrap_or(0.0))
            .collect()
    }

    /// Taylor coefficient `(G f)^(l)(zeta) / l!` of the generating vector.
    pub fn generating_taylor(&self, zeta: Complex64, l: u32) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|v| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (n, &fv) in v.iter().enumerate() {
                    if fv == 0.0 || (n as u32) < l {
                        continue;
                    }
                    acc += fv * binomial(n as u32, l) * zeta.powu(n as u32 - l);
                }
                acc
            })
            .collect()
    }
}

/// `k!` as a complex scalar (exact for the small powers used here).
pub fn factorial(k: u32) -> Complex64 {
    let mut acc = 1.0;
    for i in 2..=k as u64 {
        acc *= i as f64;
    }
    Complex64::new(acc, 0.0)
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// `int_0^t x^k e^{lambda x} dx`, exact.
///
/// Uses the power series for small `|lambda t|` (the closed form loses
/// digits to cancellation there) and the closed form otherwise.
pub fn poly_exp_integral(k: u32, lambda: Complex64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let lt = (lambda * t).norm();
    if lt < 1.0 {
        // sum_m lambda^m t^{k+m+1} / (m! (k+m+1))
        let mut term = Complex64::new(t.powi(k as i32 + 1) / (k as f64 + 1.0), 0.0);
        let mut acc = term;
        for m in 0..120u32 {
            let km1 = (k + m + 1) as f64;
            term = term * lambda * t * km1 / ((m as f64 + 1.0) * (km1 + 1.0));
            acc += term;
            if term.norm() < 1e-18 * acc.norm().max(1e-300) {
                break;
            }
        }
        acc
    } else {
        // (-1)^{k+1} k! / lambda^{k+1} (1 - e^{lambda t} sum_j (-1)^j (lambda t)^j / j!)
        let mut partial = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for j in 0..=k {
            if j > 0 {
                pow *= -lambda * t;
                fact *= j as f64;
            }
            partial += pow / fact;
        }
        let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
        sign * factorial(k) / lambda.powu(k + 1)
            * (Complex64::new(1.0, 0.0) - (lambda * t).exp() * partial)
    }
}

/// `int_a^inf x^k e^{-lambda x} dx` for `Re(lambda) > 0`.
pub fn upper_poly_exp_integral(k: u32, lambda: Complex64, a: f64) -> Complex64 {
    // k!/lambda^{k+1} e^{-lambda a} sum_{i=0}^k (lambda a)^i / i!
    let mut partial = Complex64::new(0.0, 0.0);
    let mut pow = Complex64::new(1.0, 0.0);
    let mut fact = 1.0;
    for i in 0..=k {
        if i > 0 {
            pow *= lambda * a;
            fact *= i as f64;
        }
        partial += pow / fact;
    }
    factorial(k) / lambda.powu(k + 1) * (-lambda * a).exp() * partial
}

//! Ground-truth generators the expansions are validated against: the exact
//! lattice renewal recursion, a first-order grid discretization of the
//! non-lattice renewal function, and a seed-deterministic multi-type
//! Crump-Mode-Jagers Monte Carlo simulator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::OracleError;
use crate::linalg::{pairwise_sum_vecs, RMatrix};
use crate::measure::{
    poly_exp_integral, AtomTerm, CharComponent, Characteristic, ExpPolyTerm, LatticeMeasureMatrix,
    MeasureMatrix, ScalarMeasure,
};
use crate::par;
use crate::spectral;

/// Exact lattice renewal sequence `U({0}), ..., U({n_max})`.
///
/// Solves `U({n}) = (I - mu({0}))^-1 (1{n=0} I + sum_{m=1}^n mu({m}) U({n-m}))`;
/// the inverse exists because `rho(mu({0})) < 1` makes the Neumann series
/// summable.
pub fn lattice_renewal(
    l: &LatticeMeasureMatrix,
    n_max: usize,
) -> Result<Vec<RMatrix>, OracleError> {
    let mu0 = l.mass_at(0);
    let rho = spectral::spectral_radius(&mu0.to_complex())?;
    if rho >= 1.0 {
        return Err(OracleError::Assumption { rho });
    }
    let p = l.dim();
    let support = l.max_support();
    let masses: Vec<RMatrix> = (0..=support).map(|n| l.mass_at(n)).collect();
    lattice_recursion(&masses, p, n_max, rho)
}

fn lattice_recursion(
    masses: &[RMatrix],
    p: usize,
    n_max: usize,
    rho0: f64,
) -> Result<Vec<RMatrix>, OracleError> {
    let solver = RMatrix::identity(p).sub(&masses[0]);
    let inverse = solver
        .solve_matrix(&RMatrix::identity(p))
        .ok_or(OracleError::Assumption { rho: rho0 })?;
    let mut u: Vec<RMatrix> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut rhs = if n == 0 {
            RMatrix::identity(p)
        } else {
            RMatrix::zeros(p)
        };
        for m in 1..=n.min(masses.len().saturating_sub(1)) {
            rhs = rhs.add(&masses[m].matmul(&u[n - m]));
        }
        u.push(inverse.matmul(&rhs));
    }
    Ok(u)
}

/// First-order grid approximation of the renewal function, sampled on
/// `t = 0, h, 2h, ..., <= t_max`.
#[derive(Debug, Clone)]
pub struct GridU {
    pub h: f64,
    /// `cumulative[k]` approximates `U(k h)`.
    pub cumulative: Vec<RMatrix>,
}

impl GridU {
    pub fn at(&self, t: f64) -> &RMatrix {
        let idx = ((t / self.h) + 1e-9).floor() as usize;
        &self.cumulative[idx.min(self.cumulative.len() - 1)]
    }
}

/// Discretize densities to cell masses on `((k-1)h, kh]`, snap atoms to
/// the right endpoint of their cell, and run the exact lattice recursion.
/// The bias is one-sided (mass moves later) and of order `O(h)`.
pub fn grid_convolution_u(m: &MeasureMatrix, t_max: f64, h: f64) -> Result<GridU, OracleError> {
    assert!(h > 0.0 && t_max >= 0.0);
    let rho = spectral::spectral_radius(&m.instant_mass_matrix().to_complex())?;
    if rho >= 1.0 {
        return Err(OracleError::Assumption { rho });
    }
    let p = m.dim();
    let cells = (t_max / h).ceil() as usize + 1;
    let mut masses: Vec<RMatrix> = vec![RMatrix::zeros(p); cells];
    for i in 0..p {
        for j in 0..p {
            let entry = m.entry(i, j);
            for a in &entry.atoms {
                if a.weight == 0.0 {
                    continue;
                }
                let idx = (a.location / h).ceil() as usize;
                if idx < cells {
                    let v = masses[idx].get(i, j) + a.weight;
                    masses[idx].set(i, j, v);
                }
            }
            for d in &entry.densities {
                if d.coefficient == 0.0 {
                    continue;
                }
                let lambda = num_complex::Complex64::new(-d.rate, 0.0);
                let mut prev = 0.0;
                for k in 1..cells {
                    let here = poly_exp_integral(d.power, lambda, k as f64 * h).re;
                    let v = masses[k].get(i, j) + d.coefficient * (here - prev);
                    masses[k].set(i, j, v);
                    prev = here;
                }
            }
        }
    }
    let u = lattice_recursion(&masses, p, cells - 1, rho)?;
    let mut cumulative = Vec::with_capacity(u.len());
    let mut acc = RMatrix::zeros(p);
    for step in u {
        acc = acc.add(&step);
        cumulative.push(acc.clone());
    }
    Ok(GridU { h, cumulative })
}

/// Grid approximation of `F = U * f` for a characteristic, built on the
/// same discretization as [`grid_convolution_u`]:
/// `F(kh) ~ sum_{m<=k} U({m}) f((k-m) h)`.
pub fn grid_convolution_f(
    m: &MeasureMatrix,
    f: &Characteristic,
    t_max: f64,
    h: f64,
) -> Result<Vec<Vec<f64>>, OracleError> {
    let grid = grid_convolution_u(m, t_max, h)?;
    let p = m.dim();
    let steps = grid.cumulative.len();
    // Recover the increments U({m}) from the cumulative sums.
    let mut increments: Vec<RMatrix> = Vec::with_capacity(steps);
    for k in 0..steps {
        if k == 0 {
            increments.push(grid.cumulative[0].clone());
        } else {
            increments.push(grid.cumulative[k].sub(&grid.cumulative[k - 1]));
        }
    }
    let f_values: Vec<Vec<f64>> = (0..steps).map(|k| f.value_at(k as f64 * h)).collect();
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut acc = vec![0.0; p];
        for m_idx in 0..=k {
            let u = &increments[m_idx];
            let fv = &f_values[k - m_idx];
            for i in 0..p {
                for j in 0..p {
                    acc[i] += u.get(i, j) * fv[j];
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Reproduction point process for one `(parent type, child type)` pair:
/// a homogeneous Poisson stream superposed with a fixed atom set.
/// Fractional atom weights are realized by an independent Bernoulli child.
#[derive(Debug, Clone, Default)]
pub struct PointProcessSpec {
    pub poisson_rate: f64,
    pub atoms: Vec<AtomTerm>,
}

impl PointProcessSpec {
    pub fn poisson(rate: f64) -> Self {
        PointProcessSpec {
            poisson_rate: rate,
            atoms: Vec::new(),
        }
    }

    pub fn atom(location: f64, weight: f64) -> Self {
        PointProcessSpec {
            poisson_rate: 0.0,
            atoms: vec![AtomTerm { location, weight }],
        }
    }

    /// Intensity measure of the generator.
    pub fn intensity(&self) -> ScalarMeasure {
        let mut m = ScalarMeasure::zero();
        if self.poisson_rate > 0.0 {
            m.densities.push(ExpPolyTerm {
                coefficient: self.poisson_rate,
                power: 0,
                rate: 0.0,
            });
        }
        m.atoms.extend(self.atoms.iter().copied());
        m
    }

    /// Sample birth offsets on `[0, horizon]` into `out`.
    pub fn sample_into(&self, horizon: f64, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        if self.poisson_rate > 0.0 {
            let mut t = 0.0;
            loop {
                let u: f64 = rng.random();
                t -= (1.0 - u).ln() / self.poisson_rate;
                if t > horizon {
                    break;
                }
                out.push(t);
            }
        }
        for a in &self.atoms {
            if a.location > horizon || a.weight == 0.0 {
                continue;
            }
            let whole = a.weight.floor() as usize;
            for _ in 0..whole {
                out.push(a.location);
            }
            let frac = a.weight - a.weight.floor();
            if frac > 0.0 && rng.random_bool(frac) {
                out.push(a.location);
            }
        }
    }
}

/// Lifetime law of a type, used by the alive-count score.
#[derive(Debug, Clone, Copy)]
pub enum LifetimeLaw {
    Immortal,
    Deterministic(f64),
    Exponential(f64),
}

impl LifetimeLaw {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            LifetimeLaw::Immortal => f64::INFINITY,
            LifetimeLaw::Deterministic(z) => *z,
            LifetimeLaw::Exponential(rate) => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
        }
    }

    /// Mean alive-indicator `E[1_{[0, zeta)}(t)]` as a characteristic
    /// component.
    fn mean_component(&self) -> CharComponent {
        match self {
            LifetimeLaw::Immortal => CharComponent::indicator(),
            LifetimeLaw::Deterministic(z) => CharComponent::window(*z),
            LifetimeLaw::Exponential(rate) => CharComponent {
                steps: vec![],
                smooth: vec![ExpPolyTerm {
                    coefficient: 1.0,
                    power: 0,
                    rate: *rate,
                }],
            },
        }
    }
}

/// What each individual contributes to the scored process.
#[derive(Debug, Clone)]
pub enum ScoreKind {
    /// Every individual of type `j` adds `e_j` from its birth on: the
    /// scored vector is the born-count vector `N_t`.
    BornCount,
    /// Like `BornCount` but only while the individual is alive.
    AliveCount,
    /// Deterministic age score `phi^tau(u)(age)` added to component
    /// `tau(u)`.
    Custom(Characteristic),
}

/// Simulation model: reproduction processes, lifetimes, and the score.
#[derive(Debug, Clone)]
pub struct BranchingModel {
    pub dim: usize,
    /// Row-major `(parent, child)` reproduction specs.
    pub reproduction: Vec<PointProcessSpec>,
    pub lifetimes: Vec<LifetimeLaw>,
    pub score: ScoreKind,
}

impl BranchingModel {
    pub fn spec(&self, i: usize, j: usize) -> &PointProcessSpec {
        &self.reproduction[i * self.dim + j]
    }

    /// The matrix of reproduction intensity measures.
    pub fn intensity_matrix(&self) -> MeasureMatrix {
        MeasureMatrix::new(
            self.dim,
            self.reproduction.iter().map(|s| s.intensity()).collect(),
        )
        .expect("intensities of valid specs form a valid measure matrix")
    }

    /// Mean of the score, `f(t) = E[phi(t)]` per type.
    pub fn mean_characteristic(&self) -> Characteristic {
        match &self.score {
            ScoreKind::BornCount => Characteristic::indicator(self.dim),
            ScoreKind::AliveCount => {
                Characteristic::new(self.lifetimes.iter().map(|l| l.mean_component()).collect())
            }
            ScoreKind::Custom(f) => f.clone(),
        }
    }

    /// Check that the generators' intensity matches the analyzed matrix.
    pub fn validate_against(&self, analyzed: &MeasureMatrix, tol: f64) -> Result<(), OracleError> {
        if analyzed.dim() != self.dim {
            return Err(OracleError::InvalidModel(format!(
                "model has {} types, analyzed matrix has {}",
                self.dim,
                analyzed.dim()
            )));
        }
        let mine = self.intensity_matrix();
        for i in 0..self.dim {
            for j in 0..self.dim {
                // Compare total mass on a probe grid; closed forms make
                // this exact up to rounding.
                for &t in &[0.25, 0.5, 1.0, 2.0, 4.0] {
                    let a = mine.entry(i, j).total_mass(t);
                    let b = analyzed.entry(i, j).total_mass(t);
                    if (a - b).abs() > tol * (1.0 + b.abs()) {
                        return Err(OracleError::InvalidModel(format!(
                            "intensity of entry ({i},{j}) deviates from analyzed measure: {a} vs {b} on [0,{t}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Monte Carlo estimates per initial type, grid time, and component.
#[derive(Debug, Clone)]
pub struct SimEstimate {
    pub t_grid: Vec<f64>,
    /// `mean[init][g][component]`.
    pub mean: Vec<Vec<Vec<f64>>>,
    pub std_error: Vec<Vec<Vec<f64>>>,
    pub replications: usize,
    pub seed: u64,
}

/// Knobs for the simulator.
#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Cap on the expected number of births per replication.
    pub population_cap: f64,
    /// Caller-provided estimate of expected births per replication; set
    /// from the expansion's leading term when one is available. Without
    /// it, a 100-replication pilot supplies the estimate.
    pub expected_hint: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            population_cap: 1e7,
            expected_hint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    birth: f64,
    kind: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on birth time.
        other
            .birth
            .total_cmp(&self.birth)
            .then(other.kind.cmp(&self.kind))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One replication: event-driven breadth over the branching tree,
/// restricted to births at or before the last grid time. Returns the
/// scores per grid time and component, or `None` if the event cap tripped.
fn run_replication(
    model: &BranchingModel,
    init_type: usize,
    grid: &[f64],
    rng: &mut ChaCha8Rng,
    event_cap: u64,
) -> Option<(Vec<f64>, u64)> {
    let p = model.dim;
    let horizon = grid.last().copied().unwrap_or(0.0);
    let mut scores = vec![0.0; grid.len() * p];
    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    heap.push(Event {
        birth: 0.0,
        kind: init_type,
    });
    let mut births: u64 = 0;
    let mut offsets: Vec<f64> = Vec::new();
    while let Some(ev) = heap.pop() {
        births += 1;
        if births > event_cap {
            return None;
        }
        let i = ev.kind;
        match &model.score {
            ScoreKind::BornCount => {
                for (g, &t) in grid.iter().enumerate() {
                    if t >= ev.birth {
                        scores[g * p + i] += 1.0;
                    }
                }
            }
            ScoreKind::AliveCount => {
                let zeta = model.lifetimes[i].sample(rng);
                for (g, &t) in grid.iter().enumerate() {
                    let age = t - ev.birth;
                    if age >= 0.0 && age < zeta {
                        scores[g * p + i] += 1.0;
                    }
                }
            }
            ScoreKind::Custom(f) => {
                for (g, &t) in grid.iter().enumerate() {
                    let age = t - ev.birth;
                    if age >= 0.0 {
                        scores[g * p + i] += f.components[i].value_at(age);
                    }
                }
            }
        }
        let remaining = horizon - ev.birth;
        if remaining < 0.0 {
            continue;
        }
        for j in 0..p {
            offsets.clear();
            model.spec(i, j).sample_into(remaining, rng, &mut offsets);
            for &dt in &offsets {
                heap.push(Event {
                    birth: ev.birth + dt,
                    kind: j,
                });
            }
        }
    }
    Some((scores, births))
}

/// Seed-deterministic Monte Carlo means of the scored branching process,
/// one batch of `replications` per initial type. Replication `r` draws
/// from stream `r`, so results are independent of thread scheduling.
pub fn cmj_simulate(
    model: &BranchingModel,
    t_grid: &[f64],
    replications: usize,
    seed: u64,
    options: &SimOptions,
) -> Result<SimEstimate, OracleError> {
    if t_grid.is_empty() || replications < 2 {
        return Err(OracleError::InvalidModel(
            "need a nonempty time grid and at least two replications".into(),
        ));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid[0] < 0.0 {
        return Err(OracleError::InvalidModel(
            "time grid must be nonnegative and sorted".into(),
        ));
    }
    let p = model.dim;
    let cap = options.population_cap;
    let event_cap = (cap * 10.0).min(u64::MAX as f64) as u64;

    // Population guard: trust the caller's expectation estimate when one
    // is supplied, otherwise run a capped pilot on reserved streams.
    match options.expected_hint {
        Some(expected) if expected > cap => {
            return Err(OracleError::PopulationCap { expected, cap });
        }
        Some(_) => {}
        None => {
            for init in 0..p {
                let mut total: f64 = 0.0;
                const PILOT: u64 = 100;
                for k in 0..PILOT {
                    let mut rng = replication_rng(seed, u64::MAX - k);
                    match run_replication(model, init, t_grid, &mut rng, event_cap) {
                        Some((_, births)) => total += births as f64,
                        None => {
                            return Err(OracleError::PopulationCap {
                                expected: event_cap as f64,
                                cap,
                            })
                        }
                    }
                }
                let expected = total / PILOT as f64;
                if expected > cap {
                    return Err(OracleError::PopulationCap { expected, cap });
                }
            }
        }
    }

    let mut mean = Vec::with_capacity(p);
    let mut std_error = Vec::with_capacity(p);
    for init in 0..p {
        let per_rep: Vec<Option<Vec<f64>>> = par::map_indexed(replications, |r| {
            let mut rng = replication_rng(seed, r as u64);
            run_replication(model, init, t_grid, &mut rng, event_cap).map(|(s, _)| s)
        });
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(replications);
        for r in per_rep {
            match r {
                Some(v) => rows.push(v),
                None => {
                    return Err(OracleError::PopulationCap {
                        expected: event_cap as f64,
                        cap,
                    })
                }
            }
        }
        let sums = pairwise_sum_vecs(&rows);
        let n = replications as f64;
        let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
        let sq_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&means)
                    .map(|(x, m)| (x - m) * (x - m))
                    .collect()
            })
            .collect();
        let sq = pairwise_sum_vecs(&sq_rows);
        let ses: Vec<f64> = sq
            .iter()
            .map(|s| (s / (n - 1.0)).sqrt() / n.sqrt())
            .collect();
        let reshape = |flat: &[f64]| -> Vec<Vec<f64>> {
            (0..t_grid.len())
                .map(|g| flat[g * p..(g + 1) * p].to_vec())
                .collect()
        };
        mean.push(reshape(&means));
        std_error.push(reshape(&ses));
    }
    Ok(SimEstimate {
        t_grid: t_grid.to_vec(),
        mean,
        std_error,
        replications,
        seed,
    })
}

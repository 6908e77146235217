//! The four subcommands: analyze, expand, validate, simulate. Each builds
//! a [`RunReport`] and, where applicable, a CSV body with the fixed column
//! layout.

use std::time::Instant;

use mre_core::conditions::{self, Verdict};
use mre_core::error::{EngineError, SpectralError};
use mre_core::expansion::{self, Evaluated, Expansion};
use mre_core::laurent;
use mre_core::oracle::{
    self, BranchingModel, LifetimeLaw, PointProcessSpec, ScoreKind, SimOptions,
};
use mre_core::roots::SearchRegion;
use mre_core::spectral;
use mre_core::MeasureMatrix;

use crate::config::{CharSpec, ModelSpec, RunConfig};
use crate::report::*;
use crate::CliError;

pub struct CommandOutput {
    pub report: RunReport,
    pub csv: Option<String>,
}

impl CommandOutput {
    pub fn verdict_pass(&self) -> bool {
        self.report.verdict == "pass"
    }
}

fn engine(e: impl Into<EngineError>) -> CliError {
    CliError::Engine(e.into())
}

/// Assumption verdicts plus the Malthusian result; `None` alpha means (A3)
/// failed, which is a verdict failure but not an execution error.
fn assumption_stage(
    m: &MeasureMatrix,
    tol_rho: f64,
) -> Result<(AssumptionsReport, Option<MalthusianReport>), CliError> {
    let abscissa = m.abscissa();
    let a1 = VerdictEntry {
        pass: true,
        detail: format!("domain abscissa {abscissa}; half-plane nonempty for this family"),
    };
    let rho0 = spectral::spectral_radius(&m.instant_mass_matrix().to_complex()).map_err(engine)?;
    let a2 = VerdictEntry {
        pass: rho0 < 1.0,
        detail: format!("rho(mu(0)) = {rho0}"),
    };
    if rho0 >= 1.0 {
        return Ok((
            AssumptionsReport {
                a1_domain_nonempty: a1,
                a2_instant_mass_subcritical: a2,
                a3_supercritical_window: VerdictEntry {
                    pass: false,
                    detail: "not evaluated: (A2) failed".into(),
                },
            },
            None,
        ));
    }
    match spectral::find_malthusian(m, tol_rho) {
        Ok(res) => Ok((
            AssumptionsReport {
                a1_domain_nonempty: a1,
                a2_instant_mass_subcritical: a2,
                a3_supercritical_window: VerdictEntry {
                    pass: true,
                    detail: format!("varrho({}) = {}", res.alpha, res.varrho_at_alpha),
                },
            },
            Some(MalthusianReport {
                alpha: res.alpha,
                bracket_lo: res.bracket.0,
                bracket_hi: res.bracket.1,
                varrho_at_alpha: res.varrho_at_alpha,
            }),
        )),
        Err(SpectralError::NoMalthusian) => Ok((
            AssumptionsReport {
                a1_domain_nonempty: a1,
                a2_instant_mass_subcritical: a2,
                a3_supercritical_window: VerdictEntry {
                    pass: false,
                    detail: "no Malthusian parameter: varrho < 1 on the sampled domain".into(),
                },
            },
            None,
        )),
        Err(e) => Err(engine(e)),
    }
}

fn region_for(cfg: &RunConfig, alpha: f64) -> SearchRegion {
    SearchRegion {
        re_min: cfg.theta,
        re_max: cfg.re_max.unwrap_or(alpha + 1.0),
        im_max: cfg.im_max,
    }
}

fn condition_json(rep: &conditions::ConditionReport) -> ConditionReportJson {
    ConditionReportJson {
        id: match rep.id {
            conditions::ConditionId::B => "B".into(),
            conditions::ConditionId::E => "E".into(),
            conditions::ConditionId::StripEmptiness => "strip-emptiness".into(),
        },
        verdict: match rep.verdict {
            Verdict::Pass => "pass".into(),
            Verdict::Fail => "fail".into(),
            Verdict::Inconclusive => "inconclusive".into(),
        },
        m_used: rep.witness.m_used,
        norm: rep.witness.norm,
        norms_by_m: rep.witness.norms_by_m.clone(),
        eta_max: rep.witness.eta_max,
        eta_at_max: rep.witness.eta_at_max,
        grid_points: rep.witness.grid_points,
        root_count: rep.witness.root_count,
        error: None,
    }
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let start = Instant::now();
    let mut notes = Vec::new();
    let (embedded, lattice_mode) = match &cfg.model {
        ModelSpec::NonLattice(m) => (m.clone(), false),
        ModelSpec::Lattice(l) => (l.to_measure_matrix(), true),
    };
    let (assumptions, malthusian) = assumption_stage(&embedded, cfg.tolerances.tol_rho)?;
    let assumptions_ok =
        assumptions.a2_instant_mass_subcritical.pass && assumptions.a3_supercritical_window.pass;

    let mut roots_out = Vec::new();
    let mut coefficients = Vec::new();
    let mut conds = Vec::new();
    let mut roots_ms = None;
    let mut laurent_ms = None;

    if assumptions_ok {
        let alpha = malthusian.as_ref().map(|m| m.alpha).unwrap_or(cfg.theta);
        let t_roots = Instant::now();
        if lattice_mode {
            let l = match &cfg.model {
                ModelSpec::Lattice(l) => l,
                _ => unreachable!(),
            };
            let records = mre_core::roots::locate_lattice_roots(l, cfg.theta).map_err(engine)?;
            roots_ms = Some(t_roots.elapsed().as_secs_f64() * 1e3);
            let t_laurent = Instant::now();
            for rec in &records {
                let ld = laurent::lattice_laurent(l, rec, &cfg.tolerances).map_err(engine)?;
                roots_out.push(RootReport {
                    re: rec.lambda.re,
                    im: rec.lambda.im,
                    det_multiplicity: rec.det_multiplicity,
                    pole_order: ld.pole_order,
                });
                if rec.lambda.im >= 0.0 {
                    coefficients.push(CoefficientsReport {
                        root_re: rec.lambda.re,
                        root_im: rec.lambda.im,
                        a: ld.matrices.iter().map(matrix_json).collect(),
                        c: vec![],
                        b: vec![],
                    });
                }
            }
            laurent_ms = Some(t_laurent.elapsed().as_secs_f64() * 1e3);
            notes.push(
                "lattice run: coefficient block `a` holds the Laurent matrices of (I - G mu(z))^-1 at zeta = e^{-lambda}"
                    .into(),
            );
        } else {
            let region = region_for(cfg, alpha);
            let analyzed =
                expansion::analyze_roots(&embedded, &region, &cfg.tolerances).map_err(engine)?;
            roots_ms = Some(t_roots.elapsed().as_secs_f64() * 1e3);
            let t_laurent = Instant::now();
            for a in &analyzed {
                roots_out.push(RootReport {
                    re: a.record.lambda.re,
                    im: a.record.lambda.im,
                    det_multiplicity: a.record.det_multiplicity,
                    pole_order: a.laurent.pole_order,
                });
                if a.record.lambda.im >= 0.0 {
                    let (c_mats, b_mats) = if a.record.lambda.re > 0.0 {
                        let cs = laurent::c_coeffs(&a.laurent).map_err(engine)?;
                        let bs = laurent::b_coeffs(&cs, a.record.lambda);
                        (
                            cs.iter().map(matrix_json).collect(),
                            bs.iter().map(matrix_json).collect(),
                        )
                    } else {
                        notes.push(format!(
                            "root at Re = {} <= 0: C/B coefficients not defined by the implemented formulas",
                            a.record.lambda.re
                        ));
                        (vec![], vec![])
                    };
                    coefficients.push(CoefficientsReport {
                        root_re: a.record.lambda.re,
                        root_im: a.record.lambda.im,
                        a: a.laurent.matrices.iter().map(matrix_json).collect(),
                        c: c_mats,
                        b: b_mats,
                    });
                }
            }
            laurent_ms = Some(t_laurent.elapsed().as_secs_f64() * 1e3);
        }

        conds.push(condition_json(&conditions::check_b(
            &embedded, cfg.theta, 8,
        )));
        match conditions::check_e(&embedded, cfg.theta, cfg.im_max, 128) {
            Ok(rep) => conds.push(condition_json(&rep)),
            Err(e) => conds.push(ConditionReportJson {
                id: "E".into(),
                verdict: "error".into(),
                m_used: None,
                norm: None,
                norms_by_m: vec![],
                eta_max: Some(cfg.im_max),
                eta_at_max: None,
                grid_points: None,
                root_count: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let verdict = if assumptions_ok { "pass" } else { "fail" };
    Ok(CommandOutput {
        report: RunReport {
            command: "analyze".into(),
            verdict: verdict.into(),
            assumptions,
            malthusian,
            roots: roots_out,
            coefficients,
            conditions: conds,
            expansion: None,
            oracle_comparison: vec![],
            notes,
            timings: Timings {
                total_ms: start.elapsed().as_secs_f64() * 1e3,
                roots_ms,
                laurent_ms,
                oracle_ms: None,
            },
        },
        csv: None,
    })
}

/// Build the expansion the config describes: `U` without a characteristic,
/// `F` with one; lattice models use the lattice theorems.
pub fn build_expansion(cfg: &RunConfig) -> Result<Expansion, CliError> {
    match (&cfg.model, &cfg.characteristic) {
        (ModelSpec::NonLattice(m), None) => {
            let alpha = spectral::find_malthusian(m, cfg.tolerances.tol_rho)
                .map_err(engine)?
                .alpha;
            expansion::build_u_expansion(m, &region_for(cfg, alpha), &cfg.tolerances)
                .map_err(engine)
        }
        (ModelSpec::NonLattice(m), Some(CharSpec::NonLattice(f))) => {
            let alpha = spectral::find_malthusian(m, cfg.tolerances.tol_rho)
                .map_err(engine)?
                .alpha;
            expansion::build_f_expansion(m, f, &region_for(cfg, alpha), &cfg.tolerances)
                .map_err(engine)
        }
        (ModelSpec::Lattice(l), None) => {
            expansion::build_lattice_u_expansion(l, cfg.theta, &cfg.tolerances).map_err(engine)
        }
        (ModelSpec::Lattice(l), Some(CharSpec::Lattice(f))) => {
            expansion::build_lattice_f_expansion(l, f, cfg.theta, &cfg.tolerances).map_err(engine)
        }
        _ => Err(CliError::Unsupported(
            "characteristic kind does not match the model kind".into(),
        )),
    }
}

fn eval_rows(exp: &Expansion, t: f64, rows: &mut Vec<String>) -> Result<(), CliError> {
    let v = expansion::eval(exp, t).map_err(engine)?;
    match v {
        Evaluated::Matrix(m) => {
            for (i, row) in m.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    rows.push(csv_row(t, i, j, x, None));
                }
            }
        }
        Evaluated::Vector(v) => {
            for (i, &x) in v.iter().enumerate() {
                rows.push(csv_row(t, i, 0, x, None));
            }
        }
    }
    Ok(())
}

pub fn cmd_expand(cfg: &RunConfig, t_values: &[f64]) -> Result<CommandOutput, CliError> {
    let start = Instant::now();
    let exp = build_expansion(cfg)?;
    let mut rows = vec![CSV_HEADER.to_string()];
    for &t in t_values {
        if t < 0.0 {
            return Err(CliError::Unsupported(format!(
                "expansion evaluation needs t >= 0, got {t}"
            )));
        }
        eval_rows(&exp, t, &mut rows)?;
    }
    let (assumptions, malthusian) = match &cfg.model {
        ModelSpec::NonLattice(m) => assumption_stage(m, cfg.tolerances.tol_rho)?,
        ModelSpec::Lattice(l) => assumption_stage(&l.to_measure_matrix(), cfg.tolerances.tol_rho)?,
    };
    Ok(CommandOutput {
        report: RunReport {
            command: "expand".into(),
            verdict: "pass".into(),
            assumptions,
            malthusian,
            roots: vec![],
            coefficients: vec![],
            conditions: vec![],
            expansion: Some(expansion_report(&exp)),
            oracle_comparison: vec![],
            notes: vec![],
            timings: Timings {
                total_ms: start.elapsed().as_secs_f64() * 1e3,
                ..Default::default()
            },
        },
        csv: Some(rows.join("\n") + "\n"),
    })
}

fn norm_inf(values: &[f64]) -> f64 {
    values.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let start = Instant::now();
    let exp = build_expansion(cfg)?;
    let mut rows = vec![CSV_HEADER.to_string()];
    let mut comparison = Vec::new();
    let mut notes = Vec::new();
    let oracle_start = Instant::now();

    let pass = match &cfg.model {
        ModelSpec::Lattice(l) => {
            let n_max = cfg.oracle.lattice_n;
            let u = oracle::lattice_renewal(l, n_max).map_err(engine)?;
            // Exact F(n) = sum_m U({m}) f(n - m), or U({n}) itself.
            let p = l.dim();
            let exact: Vec<Vec<f64>> = match &cfg.characteristic {
                Some(CharSpec::Lattice(f)) => (0..=n_max)
                    .map(|n| {
                        let mut acc = vec![0.0; p];
                        for m_idx in 0..=n {
                            let fv = f.value_at(n - m_idx);
                            for i in 0..p {
                                for j in 0..p {
                                    acc[i] += u[m_idx].get(i, j) * fv[j];
                                }
                            }
                        }
                        acc
                    })
                    .collect(),
                _ => (0..=n_max)
                    .map(|n| {
                        let mut flat = Vec::with_capacity(p * p);
                        for i in 0..p {
                            for j in 0..p {
                                flat.push(u[n].get(i, j));
                            }
                        }
                        flat
                    })
                    .collect(),
            };
            let mut residual_points = Vec::new();
            let mut scale_max: f64 = 0.0;
            for n in 0..=n_max {
                let t = n as f64;
                let v = expansion::eval(&exp, t).map_err(engine)?;
                let flat_exp: Vec<f64> = match v {
                    Evaluated::Matrix(m) => m.into_iter().flatten().collect(),
                    Evaluated::Vector(v) => v,
                };
                let is_matrix = cfg.characteristic.is_none();
                for (idx, (&e_val, &o_val)) in flat_exp.iter().zip(exact[n].iter()).enumerate() {
                    let (i, j) = if is_matrix {
                        (idx / p, idx % p)
                    } else {
                        (idx, 0)
                    };
                    rows.push(csv_row(t, i, j, e_val, Some(o_val)));
                    comparison.push(ComparisonRow {
                        t,
                        entry_i: i,
                        entry_j: j,
                        expansion: e_val,
                        oracle: o_val,
                        abs_err: (e_val - o_val).abs(),
                        rel_err: if o_val.abs() > 0.0 {
                            (e_val - o_val).abs() / o_val.abs()
                        } else {
                            (e_val - o_val).abs()
                        },
                    });
                }
                let resid: f64 = flat_exp
                    .iter()
                    .zip(exact[n].iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                scale_max = scale_max.max(norm_inf(&exact[n]));
                if n >= n_max / 3 {
                    residual_points.push((t, resid));
                }
            }
            // Slope test: the log-residual decay rate must not beat the
            // remainder exponent by more than the allowance.
            let floor = 1e-12 * scale_max.max(1e-300);
            match expansion::log_residual_slope(&residual_points, floor) {
                Some(slope) => {
                    let bound = exp.remainder_exponent + 0.05;
                    notes.push(format!(
                        "lattice slope test: residual slope {slope:.6} vs bound {bound:.6}"
                    ));
                    slope <= bound
                }
                None => {
                    notes.push(
                        "lattice slope test: residuals at rounding floor, expansion exact".into(),
                    );
                    true
                }
            }
        }
        ModelSpec::NonLattice(m) => {
            let t_max = cfg.oracle.grid_t;
            let h = cfg.oracle.grid_h;
            let probes: Vec<f64> = [0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|frac| t_max * frac)
                .collect();
            let mut worst_coarse = 0.0f64;
            let mut worst_fine = 0.0f64;
            for (pass_idx, step) in [h, h / 2.0].iter().enumerate() {
                let (oracle_vals, is_matrix): (Vec<Vec<f64>>, bool) = match &cfg.characteristic {
                    Some(CharSpec::NonLattice(f)) => {
                        let grid =
                            oracle::grid_convolution_f(m, f, t_max, *step).map_err(engine)?;
                        (
                            probes
                                .iter()
                                .map(|&t| grid[((t / step) + 1e-9).floor() as usize].clone())
                                .collect(),
                            false,
                        )
                    }
                    _ => {
                        let grid = oracle::grid_convolution_u(m, t_max, *step).map_err(engine)?;
                        (
                            probes
                                .iter()
                                .map(|&t| {
                                    let u = grid.at(t);
                                    let p = m.dim();
                                    let mut flat = Vec::with_capacity(p * p);
                                    for i in 0..p {
                                        for j in 0..p {
                                            flat.push(u.get(i, j));
                                        }
                                    }
                                    flat
                                })
                                .collect(),
                            true,
                        )
                    }
                };
                for (t_idx, &t) in probes.iter().enumerate() {
                    let v = expansion::eval(&exp, t).map_err(engine)?;
                    let flat_exp: Vec<f64> = match v {
                        Evaluated::Matrix(mm) => mm.into_iter().flatten().collect(),
                        Evaluated::Vector(v) => v,
                    };
                    let p = m.dim();
                    let scale = norm_inf(&oracle_vals[t_idx]).max(1e-300);
                    for (idx, (&e_val, &o_val)) in
                        flat_exp.iter().zip(oracle_vals[t_idx].iter()).enumerate()
                    {
                        let rel = (e_val - o_val).abs() / scale;
                        if pass_idx == 0 {
                            worst_coarse = worst_coarse.max(rel);
                            let (i, j) = if is_matrix {
                                (idx / p, idx % p)
                            } else {
                                (idx, 0)
                            };
                            rows.push(csv_row(t, i, j, e_val, Some(o_val)));
                            comparison.push(ComparisonRow {
                                t,
                                entry_i: i,
                                entry_j: j,
                                expansion: e_val,
                                oracle: o_val,
                                abs_err: (e_val - o_val).abs(),
                                rel_err: rel,
                            });
                        } else {
                            worst_fine = worst_fine.max(rel);
                        }
                    }
                }
            }
            notes.push(format!(
                "grid oracle: max rel err {worst_coarse:.3e} at h = {h:.3e}, {worst_fine:.3e} at h/2 (first-order O(h) discretization)"
            ));
            // The oracle itself carries the O(h) error, so agreement at
            // the configured tolerance plus error shrink under h-halving
            // is the verdict.
            worst_coarse <= cfg.oracle.validate_rtol
                && worst_fine <= (0.8 * worst_coarse).max(1e-12)
        }
    };
    let oracle_ms = oracle_start.elapsed().as_secs_f64() * 1e3;

    let (assumptions, malthusian) = match &cfg.model {
        ModelSpec::NonLattice(m) => assumption_stage(m, cfg.tolerances.tol_rho)?,
        ModelSpec::Lattice(l) => assumption_stage(&l.to_measure_matrix(), cfg.tolerances.tol_rho)?,
    };
    Ok(CommandOutput {
        report: RunReport {
            command: "validate".into(),
            verdict: if pass { "pass".into() } else { "fail".into() },
            assumptions,
            malthusian,
            roots: vec![],
            coefficients: vec![],
            conditions: vec![],
            expansion: Some(expansion_report(&exp)),
            oracle_comparison: comparison,
            notes,
            timings: Timings {
                total_ms: start.elapsed().as_secs_f64() * 1e3,
                oracle_ms: Some(oracle_ms),
                ..Default::default()
            },
        },
        csv: Some(rows.join("\n") + "\n"),
    })
}

/// Decompose the configured measure matrix into simulable generators:
/// homogeneous Poisson rates plus fixed atoms.
fn branching_model(cfg: &RunConfig) -> Result<BranchingModel, CliError> {
    let matrix = match &cfg.model {
        ModelSpec::NonLattice(m) => m.clone(),
        ModelSpec::Lattice(l) => l.to_measure_matrix(),
    };
    let p = matrix.dim();
    let mut reproduction = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let e = matrix.entry(i, j);
            let mut spec = PointProcessSpec::default();
            for d in &e.densities {
                if d.coefficient == 0.0 {
                    continue;
                }
                if d.power != 0 || d.rate != 0.0 {
                    return Err(CliError::Unsupported(format!(
                        "entry ({i},{j}): the simulator generates homogeneous Poisson streams and fixed atoms; density term x^{} e^{{-{} x}} is not simulable",
                        d.power, d.rate
                    )));
                }
                spec.poisson_rate += d.coefficient;
            }
            spec.atoms = e.atoms.clone();
            reproduction.push(spec);
        }
    }
    let score = match &cfg.characteristic {
        None => ScoreKind::BornCount,
        Some(CharSpec::NonLattice(f)) => ScoreKind::Custom(f.clone()),
        Some(CharSpec::Lattice(_)) => {
            return Err(CliError::Unsupported(
                "simulate scores lattice models with born counts; drop the characteristic".into(),
            ))
        }
    };
    let model = BranchingModel {
        dim: p,
        reproduction,
        lifetimes: vec![LifetimeLaw::Immortal; p],
        score,
    };
    model.validate_against(&matrix, 1e-9).map_err(engine)?;
    Ok(model)
}

pub fn cmd_simulate(
    cfg: &RunConfig,
    t_values: Option<&[f64]>,
    seed_override: Option<u64>,
) -> Result<CommandOutput, CliError> {
    let start = Instant::now();
    let model = branching_model(cfg)?;
    let grid: Vec<f64> = match t_values {
        Some(ts) if !ts.is_empty() => {
            let mut v = ts.to_vec();
            v.sort_by(f64::total_cmp);
            v
        }
        _ => vec![cfg.oracle.grid_t],
    };
    let seed = seed_override.unwrap_or(cfg.oracle.mc_seed);

    // Population guard from the expansion's leading term when available.
    let expected_hint = build_expansion(cfg).ok().and_then(|exp| {
        let t_last = *grid.last().unwrap();
        expansion::eval(&exp, t_last).ok().map(|v| match v {
            Evaluated::Matrix(m) => m
                .iter()
                .map(|row| row.iter().sum::<f64>())
                .fold(0.0, f64::max),
            Evaluated::Vector(v) => v.iter().fold(0.0f64, |a, &b| a.max(b)),
        })
    });
    let options = SimOptions {
        population_cap: cfg.oracle.mc_cap,
        expected_hint,
    };
    let est = oracle::cmj_simulate(&model, &grid, cfg.oracle.mc_replications, seed, &options)
        .map_err(engine)?;

    let mut rows = vec!["t,init_type,component,mean,std_error".to_string()];
    for init in 0..model.dim {
        for (g, &t) in grid.iter().enumerate() {
            for comp in 0..model.dim {
                rows.push(format!(
                    "{},{},{},{},{}",
                    fmt_float(t),
                    init,
                    comp,
                    fmt_float(est.mean[init][g][comp]),
                    fmt_float(est.std_error[init][g][comp]),
                ));
            }
        }
    }
    let (assumptions, malthusian) = match &cfg.model {
        ModelSpec::NonLattice(m) => assumption_stage(m, cfg.tolerances.tol_rho)?,
        ModelSpec::Lattice(l) => assumption_stage(&l.to_measure_matrix(), cfg.tolerances.tol_rho)?,
    };
    let mut notes = vec![format!(
        "monte carlo: {} replications, seed {}",
        est.replications, est.seed
    )];
    if let Some(h) = expected_hint {
        notes.push(format!(
            "population guard from expansion leading term: {h:.3e}"
        ));
    } else {
        notes.push("population guard from 100-replication pilot".into());
    }
    Ok(CommandOutput {
        report: RunReport {
            command: "simulate".into(),
            verdict: "pass".into(),
            assumptions,
            malthusian,
            roots: vec![],
            coefficients: vec![],
            conditions: vec![],
            expansion: None,
            oracle_comparison: vec![],
            notes,
            timings: Timings {
                total_ms: start.elapsed().as_secs_f64() * 1e3,
                ..Default::default()
            },
        },
        csv: Some(rows.join("\n") + "\n"),
    })
}

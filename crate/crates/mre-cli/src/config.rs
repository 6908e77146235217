//! JSON run configuration: parsing, validation with field paths, default
//! echoing, and conversion into core model types.

use serde::{Deserialize, Serialize};

use mre_core::{
    AtomTerm, CharComponent, Characteristic, ExpPolyTerm, LatticeCharacteristic,
    LatticeMeasureMatrix, MeasureMatrix, ScalarMeasure, StepTerm, Tolerances,
};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AtomJson {
    pub loc: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExpPolyJson {
    pub c: f64,
    pub k: u32,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct EntryJson {
    #[serde(default)]
    pub atoms: Vec<AtomJson>,
    #[serde(default)]
    pub exp_poly: Vec<ExpPolyJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Non-lattice model: `p x p` grid of measure entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<EntryJson>>>,
    /// Lattice model: span plus a `p x p` grid of weight vectors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepJson {
    pub loc: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct CharComponentJson {
    #[serde(default)]
    pub steps: Vec<StepJson>,
    #[serde(default)]
    pub exp_poly: Vec<ExpPolyJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CharacteristicJson {
    /// Non-lattice characteristic components.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<CharComponentJson>>,
    /// Lattice characteristic values per component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionJson {
    pub theta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub re_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct TolerancesJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_det: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_laurent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_rho: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct OracleJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate_rtol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct OutputsJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

/// Raw configuration document, one-to-one with the JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigDocument {
    pub model: ModelJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub characteristic: Option<CharacteristicJson>,
    pub region: RegionJson,
    #[serde(default, skip_serializing_if = "is_default_tolerances")]
    pub tolerances: TolerancesJson,
    #[serde(default, skip_serializing_if = "is_default_oracle")]
    pub oracle: OracleJson,
    #[serde(default, skip_serializing_if = "is_default_outputs")]
    pub outputs: OutputsJson,
}

fn is_default_tolerances(t: &TolerancesJson) -> bool {
    *t == TolerancesJson::default()
}
fn is_default_oracle(o: &OracleJson) -> bool {
    *o == OracleJson::default()
}
fn is_default_outputs(o: &OutputsJson) -> bool {
    *o == OutputsJson::default()
}

/// A validated model: the user declares lattice or non-lattice.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    NonLattice(MeasureMatrix),
    Lattice(LatticeMeasureMatrix),
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::NonLattice(m) => m.dim(),
            ModelSpec::Lattice(l) => l.dim(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CharSpec {
    NonLattice(Characteristic),
    Lattice(LatticeCharacteristic),
}

/// Oracle knobs with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub lattice_n: usize,
    pub grid_t: f64,
    pub grid_h: f64,
    pub mc_replications: usize,
    pub mc_seed: u64,
    pub mc_cap: f64,
    pub validate_rtol: f64,
}

/// Fully validated run configuration with all defaults applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub characteristic: Option<CharSpec>,
    pub theta: f64,
    pub re_max: Option<f64>,
    pub im_max: f64,
    pub tolerances: Tolerances,
    pub oracle: OracleSettings,
    pub report_path: Option<String>,
    pub csv_path: Option<String>,
}

fn schema_err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema {
        path: path.to_string(),
        message: msg.to_string(),
    }
}

fn require_finite(path: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(schema_err(path, "must be finite"))
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let doc: ConfigDocument =
        serde_json::from_str(text).map_err(|e| schema_err("<document>", e))?;
    validate_document(&doc)
}

pub fn validate_document(doc: &ConfigDocument) -> Result<RunConfig, CliError> {
    let model = match (&doc.model.entries, &doc.model.weights) {
        (Some(_), Some(_)) => {
            return Err(schema_err(
                "model",
                "give either `entries` (non-lattice) or `weights` (lattice), not both",
            ))
        }
        (Some(entries), None) => {
            let p = doc.model.p.unwrap_or(entries.len());
            if entries.len() != p {
                return Err(schema_err(
                    "model.entries",
                    format!("expected {p} rows, got {}", entries.len()),
                ));
            }
            let mut grid = Vec::with_capacity(p);
            for (i, row) in entries.iter().enumerate() {
                if row.len() != p {
                    return Err(schema_err(
                        &format!("model.entries[{i}]"),
                        format!("expected {p} columns, got {}", row.len()),
                    ));
                }
                let mut out_row = Vec::with_capacity(p);
                for (j, e) in row.iter().enumerate() {
                    let mut sm = ScalarMeasure::zero();
                    for (a_idx, a) in e.atoms.iter().enumerate() {
                        let path = format!("model.entries[{i}][{j}].atoms[{a_idx}]");
                        require_finite(&path, a.loc)?;
                        require_finite(&path, a.w)?;
                        sm.atoms.push(AtomTerm {
                            location: a.loc,
                            weight: a.w,
                        });
                    }
                    for (d_idx, d) in e.exp_poly.iter().enumerate() {
                        let path = format!("model.entries[{i}][{j}].exp_poly[{d_idx}]");
                        require_finite(&path, d.c)?;
                        require_finite(&path, d.beta)?;
                        sm.densities.push(ExpPolyTerm {
                            coefficient: d.c,
                            power: d.k,
                            rate: d.beta,
                        });
                    }
                    sm.validate()
                        .map_err(|e| schema_err(&format!("model.entries[{i}][{j}]"), e))?;
                    out_row.push(sm);
                }
                grid.push(out_row);
            }
            ModelSpec::NonLattice(
                MeasureMatrix::from_grid(grid).map_err(|e| schema_err("model.entries", e))?,
            )
        }
        (None, Some(weights)) => {
            let h = doc.model.h.unwrap_or(1.0);
            let p = doc.model.p.unwrap_or(weights.len());
            if weights.len() != p {
                return Err(schema_err(
                    "model.weights",
                    format!("expected {p} rows, got {}", weights.len()),
                ));
            }
            let mut flat = Vec::with_capacity(p * p);
            for (i, row) in weights.iter().enumerate() {
                if row.len() != p {
                    return Err(schema_err(
                        &format!("model.weights[{i}]"),
                        format!("expected {p} columns, got {}", row.len()),
                    ));
                }
                for w in row {
                    flat.push(w.clone());
                }
            }
            ModelSpec::Lattice(
                LatticeMeasureMatrix::new(p, h, flat)
                    .map_err(|e| schema_err("model.weights", e))?,
            )
        }
        (None, None) => {
            return Err(schema_err(
                "model",
                "missing `entries` (non-lattice) or `weights` (lattice)",
            ))
        }
    };
    let p = model.dim();

    let characteristic = match &doc.characteristic {
        None => None,
        Some(cj) => match (&cj.components, &cj.values, &model) {
            (Some(_), Some(_), _) => {
                return Err(schema_err(
                    "characteristic",
                    "give either `components` or `values`, not both",
                ))
            }
            (Some(comps), None, ModelSpec::NonLattice(_)) => {
                if comps.len() != p {
                    return Err(CliError::Dimension {
                        path: "characteristic.components".into(),
                        expected: p,
                        got: comps.len(),
                    });
                }
                let components = comps
                    .iter()
                    .map(|c| CharComponent {
                        steps: c
                            .steps
                            .iter()
                            .map(|s| StepTerm {
                                location: s.loc,
                                height: s.h,
                            })
                            .collect(),
                        smooth: c
                            .exp_poly
                            .iter()
                            .map(|d| ExpPolyTerm {
                                coefficient: d.c,
                                power: d.k,
                                rate: d.beta,
                            })
                            .collect(),
                    })
                    .collect();
                let f = Characteristic::new(components);
                f.validate(p)
                    .map_err(|e| schema_err("characteristic.components", e))?;
                Some(CharSpec::NonLattice(f))
            }
            (None, Some(values), ModelSpec::Lattice(_)) => {
                if values.len() != p {
                    return Err(CliError::Dimension {
                        path: "characteristic.values".into(),
                        expected: p,
                        got: values.len(),
                    });
                }
                Some(CharSpec::Lattice(LatticeCharacteristic::new(
                    values.clone(),
                )))
            }
            (Some(_), None, ModelSpec::Lattice(_)) => {
                return Err(schema_err(
                    "characteristic",
                    "lattice models take `values`, not `components`",
                ))
            }
            (None, Some(_), ModelSpec::NonLattice(_)) => {
                return Err(schema_err(
                    "characteristic",
                    "non-lattice models take `components`, not `values`",
                ))
            }
            (None, None, _) => None,
        },
    };

    require_finite("region.theta", doc.region.theta)?;
    if let ModelSpec::NonLattice(m) = &model {
        if doc.region.theta <= m.abscissa() {
            return Err(schema_err(
                "region.theta",
                format!(
                    "must lie strictly above the domain abscissa {}",
                    m.abscissa()
                ),
            ));
        }
    }
    let im_max = match doc.region.im_max {
        Some(v) => {
            if !(v > 0.0) {
                return Err(schema_err("region.im_max", "must be positive"));
            }
            v
        }
        None => default_im_max(&model),
    };

    let defaults = Tolerances::default();
    let tolerances = Tolerances {
        tol_det: doc.tolerances.tol_det.unwrap_or(defaults.tol_det),
        tol_laurent: doc.tolerances.tol_laurent.unwrap_or(defaults.tol_laurent),
        tol_rho: doc.tolerances.tol_rho.unwrap_or(defaults.tol_rho),
        tol_quad: defaults.tol_quad,
    };
    for (name, v) in [
        ("tolerances.tol_det", tolerances.tol_det),
        ("tolerances.tol_laurent", tolerances.tol_laurent),
        ("tolerances.tol_rho", tolerances.tol_rho),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(schema_err(name, "must be a positive finite number"));
        }
    }

    let oracle = OracleSettings {
        lattice_n: doc.oracle.lattice_n.unwrap_or(60),
        grid_t: doc.oracle.grid_t.unwrap_or(3.0),
        grid_h: doc.oracle.grid_h.unwrap_or(1e-3),
        mc_replications: doc.oracle.mc_replications.unwrap_or(100_000),
        mc_seed: doc.oracle.mc_seed.unwrap_or(42),
        mc_cap: doc.oracle.mc_cap.unwrap_or(1e7),
        validate_rtol: doc.oracle.validate_rtol.unwrap_or(0.02),
    };
    if !(oracle.grid_h > 0.0) {
        return Err(schema_err("oracle.grid_h", "must be positive"));
    }
    if !(oracle.grid_t >= 0.0) {
        return Err(schema_err("oracle.grid_t", "must be nonnegative"));
    }

    Ok(RunConfig {
        model,
        characteristic,
        theta: doc.region.theta,
        re_max: doc.region.re_max,
        im_max,
        tolerances,
        oracle,
        report_path: doc.outputs.report.clone(),
        csv_path: doc.outputs.csv.clone(),
    })
}

/// Default imaginary search bound: 50 scaled down by the coarsest atom
/// spacing (atoms at location `a` make the transform `2 pi / a` periodic
/// in the imaginary direction, packing roots tighter as `a` grows).
fn default_im_max(model: &ModelSpec) -> f64 {
    match model {
        ModelSpec::NonLattice(m) => {
            let max_loc = m
                .entries()
                .iter()
                .flat_map(|e| e.atoms.iter())
                .filter(|a| a.weight > 0.0)
                .map(|a| a.location)
                .fold(0.0f64, f64::max);
            50.0 / max_loc.max(1.0)
        }
        ModelSpec::Lattice(_) => std::f64::consts::PI,
    }
}

/// Re-serialize a validated config with every default echoed.
pub fn echo_document(cfg: &RunConfig, original: &ConfigDocument) -> ConfigDocument {
    let mut doc = original.clone();
    doc.region.im_max = Some(cfg.im_max);
    doc.tolerances = TolerancesJson {
        tol_det: Some(cfg.tolerances.tol_det),
        tol_laurent: Some(cfg.tolerances.tol_laurent),
        tol_rho: Some(cfg.tolerances.tol_rho),
    };
    doc.oracle = OracleJson {
        lattice_n: Some(cfg.oracle.lattice_n),
        grid_t: Some(cfg.oracle.grid_t),
        grid_h: Some(cfg.oracle.grid_h),
        mc_replications: Some(cfg.oracle.mc_replications),
        mc_seed: Some(cfg.oracle.mc_seed),
        mc_cap: Some(cfg.oracle.mc_cap),
        validate_rtol: Some(cfg.oracle.validate_rtol),
    };
    doc
}

//! Machine-readable run report and the fixed-format CSV writer.

use serde::Serialize;

use mre_core::expansion::{Coeff, Expansion};
use mre_core::linalg::CMatrix;

/// Complex scalar as a `[re, im]` pair in JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ComplexJson(pub f64, pub f64);

#[derive(Debug, Clone, Serialize)]
pub struct VerdictEntry {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionsReport {
    pub a1_domain_nonempty: VerdictEntry,
    pub a2_instant_mass_subcritical: VerdictEntry,
    pub a3_supercritical_window: VerdictEntry,
}

#[derive(Debug, Clone, Serialize)]
pub struct MalthusianReport {
    pub alpha: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub varrho_at_alpha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RootReport {
    pub re: f64,
    pub im: f64,
    pub det_multiplicity: usize,
    pub pole_order: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientsReport {
    pub root_re: f64,
    pub root_im: f64,
    /// Laurent matrices `A_1..A_m`.
    pub a: Vec<Vec<Vec<ComplexJson>>>,
    /// `C_0..C_{k-1}` (empty for lattice runs).
    pub c: Vec<Vec<Vec<ComplexJson>>>,
    /// `B_0..B_{k-1}` (empty for lattice runs).
    pub b: Vec<Vec<Vec<ComplexJson>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReportJson {
    pub id: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_used: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub norms_by_m: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_at_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermReport {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub power: usize,
    pub coeff: Vec<Vec<ComplexJson>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub kind: String,
    pub remainder_exponent: f64,
    pub remainder_polynomial: bool,
    pub terms: Vec<TermReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub entry_i: usize,
    pub entry_j: usize,
    pub expansion: f64,
    pub oracle: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Timings {
    pub total_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roots_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub laurent_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub verdict: String,
    pub assumptions: AssumptionsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub malthusian: Option<MalthusianReport>,
    pub roots: Vec<RootReport>,
    pub coefficients: Vec<CoefficientsReport>,
    pub conditions: Vec<ConditionReportJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub oracle_comparison: Vec<ComparisonRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub timings: Timings,
}

pub fn matrix_json(m: &CMatrix) -> Vec<Vec<ComplexJson>> {
    (0..m.dim())
        .map(|i| {
            (0..m.dim())
                .map(|j| {
                    let z = m.get(i, j);
                    ComplexJson(z.re, z.im)
                })
                .collect()
        })
        .collect()
}

pub fn expansion_report(exp: &Expansion) -> ExpansionReport {
    let kind = match exp.kind {
        mre_core::expansion::ExpansionKind::UNonLattice => "U-nonlattice",
        mre_core::expansion::ExpansionKind::FNonLattice => "F-nonlattice",
        mre_core::expansion::ExpansionKind::ULattice => "U-lattice",
        mre_core::expansion::ExpansionKind::FLattice => "F-lattice",
    };
    ExpansionReport {
        kind: kind.to_string(),
        remainder_exponent: exp.remainder_exponent,
        remainder_polynomial: exp.remainder_polynomial,
        terms: exp
            .terms
            .iter()
            .map(|t| TermReport {
                lambda_re: t.lambda.re,
                lambda_im: t.lambda.im,
                power: t.power,
                coeff: match &t.coeff {
                    Coeff::Matrix(m) => matrix_json(m),
                    Coeff::Vector(v) => {
                        vec![v.iter().map(|z| ComplexJson(z.re, z.im)).collect()]
                    }
                },
            })
            .collect(),
    }
}

/// Fixed CSV float format: 17 significant digits, byte-stable.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str = "t,entry_i,entry_j,expansion,oracle,abs_err,rel_err";

/// One comparison row in the fixed column layout; oracle-less rows leave
/// the last three columns empty.
pub fn csv_row(t: f64, i: usize, j: usize, expansion: f64, oracle: Option<f64>) -> String {
    match oracle {
        Some(o) => {
            let abs = (expansion - o).abs();
            let rel = if o.abs() > 0.0 { abs / o.abs() } else { abs };
            format!(
                "{},{},{},{},{},{},{}",
                fmt_float(t),
                i,
                j,
                fmt_float(expansion),
                fmt_float(o),
                fmt_float(abs),
                fmt_float(rel)
            )
        }
        None => format!("{},{},{},{},,,", fmt_float(t), i, j, fmt_float(expansion)),
    }
}

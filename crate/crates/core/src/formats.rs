//! File formats: circuit and plan JSON, scan CSV, and fixed-precision
//! number printing.
//!
//! Circuit:
//! `{"modes": n, "gates": [{"type":"single","mode":i,"matrix":[[a,b],[c,d]]} | {"type":"cz","modes":[i,j]}]}`
//!
//! Plan:
//! `{"steps": [...], "budget": [...], "sigma2": s}` with the budget in
//! absolute units.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::Scan;
use crate::compiler::{CircuitIR, CompiledCircuit, Gate, PlanStep};
use crate::error::{Error, Result};
use crate::symplectic::{SqueezeVariance, SymplecticMatrix2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum GateDoc {
    Single { mode: usize, matrix: [[f64; 2]; 2] },
    Cz { modes: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    modes: usize,
    gates: Vec<GateDoc>,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parse and validate a circuit.
pub fn parse_circuit(text: &str) -> Result<CircuitIR> {
    let doc: CircuitDoc = serde_json::from_str(text).map_err(parse_error)?;
    let gates = doc
        .gates
        .into_iter()
        .enumerate()
        .map(|(index, g)| match g {
            GateDoc::Single { mode, matrix } => SymplecticMatrix2::from_rows(matrix)
                .map(|matrix| Gate::Single { mode, matrix })
                .map_err(|e| Error::NonSymplecticGate {
                    index,
                    reason: e.to_string(),
                }),
            GateDoc::Cz { modes: [a, b] } => Ok(Gate::Cz { a, b }),
        })
        .collect::<Result<Vec<_>>>()?;
    CircuitIR::new(doc.modes, gates)
}

pub fn circuit_to_json(c: &CircuitIR) -> String {
    let doc = CircuitDoc {
        modes: c.modes,
        gates: c
            .gates
            .iter()
            .map(|g| match *g {
                Gate::Single { mode, matrix } => GateDoc::Single {
                    mode,
                    matrix: matrix.rows(),
                },
                Gate::Cz { a, b } => GateDoc::Cz { modes: [a, b] },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("circuit serializes")
}

/// Serialized form of a compiled plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub steps: Vec<PlanStep>,
    pub budget: Vec<f64>,
    pub sigma2: f64,
}

impl From<&CompiledCircuit> for PlanDocument {
    fn from(c: &CompiledCircuit) -> Self {
        PlanDocument {
            steps: c.plan.clone(),
            budget: c.budget.absolute().0,
            sigma2: c.budget.sigma2.value(),
        }
    }
}

pub fn plan_to_json(p: &PlanDocument) -> String {
    serde_json::to_string_pretty(p).expect("plan serializes")
}

pub fn parse_plan(text: &str) -> Result<PlanDocument> {
    let doc: PlanDocument = serde_json::from_str(text).map_err(parse_error)?;
    SqueezeVariance::new(doc.sigma2)?;
    Ok(doc)
}

pub const SCAN_HEADER: &str = "theta3,theta4,norm_four_node,norm_pair";

/// Scan rows as CSV, nine digits after the point.
pub fn write_scan_csv<W: Write>(scan: &Scan, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SCAN_HEADER}")?;
    for r in &scan.rows {
        writeln!(
            w,
            "{:.9},{:.9},{:.9},{:.9}",
            r.theta3, r.theta4, r.norm_four_node, r.norm_pair
        )?;
    }
    w.flush()
}

/// `%.{digits}g`-style formatting: shortest of fixed or exponent notation,
/// trailing zeros dropped.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Space-separated values at 12 significant digits.
pub fn format_vector(v: &[f64]) -> String {
    v.iter()
        .map(|x| format_sig(*x, 12))
        .collect::<Vec<_>>()
        .join(" ")
}

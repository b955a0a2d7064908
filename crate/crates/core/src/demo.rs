//! Passive-observation signatures of the eight extremal mechanisms: the
//! four Pauli channels acting on a maximally mixed C, and the four Bell
//! states shared by C and B.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::passive::{causal_verdict, ObservedConditionalOperator};
use crate::qubit::{bell_state, pauli, Bell, ChannelOperator, PauliIndex};
use crate::scenario::{common_cause_scenario, direct_cause_scenario, exact_probabilities, Scheme};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignatureRow {
    pub label: String,
    /// "direct" for channels, "common" for shared states
    pub mechanism: &'static str,
    pub correlations: [f64; 3],
    pub product: f64,
    pub common_cause_explanation: bool,
    pub direct_cause_explanation: bool,
}

impl SignatureRow {
    /// Signs of (C_11, C_22, C_33) as ±1.
    pub fn signs(&self) -> [i8; 3] {
        self.correlations.map(|c| if c >= 0.0 { 1 } else { -1 })
    }
}

fn row(label: &str, mechanism: &'static str, map: &crate::CausalMap) -> Result<SignatureRow> {
    let dist = exact_probabilities(map, Scheme::Passive)?;
    let v = causal_verdict(&ObservedConditionalOperator::from_distribution(&dist)?);
    Ok(SignatureRow {
        label: label.to_string(),
        mechanism,
        correlations: v.correlations,
        product: v.signature_product,
        common_cause_explanation: v.common_cause_explanation,
        direct_cause_explanation: v.direct_cause_explanation,
    })
}

/// All eight rows from exact passive statistics.
pub fn signature_table() -> Result<Vec<SignatureRow>> {
    let mut rows = Vec::with_capacity(8);
    let channels = [("1", 0u8), ("sigma_1", 1), ("sigma_2", 2), ("sigma_3", 3)];
    for (label, i) in channels {
        let ch = ChannelOperator::unitary(&pauli(PauliIndex::new(i)?))?;
        rows.push(row(label, "direct", &direct_cause_scenario(&ch)?)?);
    }
    let states = [
        ("Psi-", Bell::PsiMinus),
        ("Phi-", Bell::PhiMinus),
        ("Phi+", Bell::PhiPlus),
        ("Psi+", Bell::PsiPlus),
    ];
    for (label, b) in states {
        rows.push(row(
            label,
            "common",
            &common_cause_scenario(&bell_state(b))?,
        )?);
    }
    Ok(rows)
}

fn sign(v: f64) -> &'static str {
    if v >= 0.0 {
        "+1"
    } else {
        "-1"
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render_table(rows: &[SignatureRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<10} {:<8} {:>4} {:>4} {:>4} {:>8} {:>7} {:>7}",
        "mechanism", "kind", "C11", "C22", "C33", "product", "common", "direct"
    )
    .expect("string write");
    for r in rows {
        writeln!(
            out,
            "{:<10} {:<8} {:>4} {:>4} {:>4} {:>8} {:>7} {:>7}",
            r.label,
            r.mechanism,
            sign(r.correlations[0]),
            sign(r.correlations[1]),
            sign(r.correlations[2]),
            sign(r.product),
            yes_no(r.common_cause_explanation),
            yes_no(r.direct_cause_explanation),
        )
        .expect("string write");
    }
    out
}

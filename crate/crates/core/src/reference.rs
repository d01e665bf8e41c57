//! Read-only lookup tables bundled for display: likelihood bands, severity
//! definitions, the risk matrix and the protocol table.

use serde::Serialize;

use crate::assessment::{aml_capabilities, aml_codes, AmlProtocol};
use crate::calculus::{
    hsl_reference_rows, hsl_upper_threshold, ll_band, ll_odds_labels, ll_reference_examples,
    risk_matrix, HarmSeverityLevel, HslReferenceRow, HslThresholdTable, LikelihoodLevel,
    DEATHS_TABLE, DOLLAR_TABLE,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodRow {
    pub level: LikelihoodLevel,
    pub lower: f64,
    pub upper: f64,
    pub odds_lower: &'static str,
    pub odds_upper: &'static str,
    pub examples: [&'static str; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityRow {
    pub level: HarmSeverityLevel,
    pub label: &'static str,
    /// Rounded upper threshold; `None` for the open-ended top level.
    pub upper_threshold: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceTables {
    pub likelihood_levels: Vec<LikelihoodRow>,
    pub harm_severity_levels: Vec<SeverityRow>,
    pub harm_severity_reference: Vec<HslReferenceRow>,
    pub numeric_thresholds: Vec<HslThresholdTable>,
    /// Indexed `[ll][hsl - 1]`.
    pub risk_matrix: [[u8; 6]; 9],
    pub aml_protocols: Vec<AmlProtocol>,
}

pub fn reference_tables() -> ReferenceTables {
    ReferenceTables {
        likelihood_levels: LikelihoodLevel::all()
            .map(|ll| {
                let band = ll_band(ll);
                let (odds_lower, odds_upper) = ll_odds_labels(ll);
                LikelihoodRow {
                    level: ll,
                    lower: band.lower,
                    upper: band.upper,
                    odds_lower,
                    odds_upper,
                    examples: ll_reference_examples(ll),
                }
            })
            .collect(),
        harm_severity_levels: HarmSeverityLevel::all()
            .map(|h| SeverityRow {
                level: h,
                label: h.label(),
                upper_threshold: hsl_upper_threshold(h.value() as u32).ok().map(|t| t as u64),
            })
            .collect(),
        harm_severity_reference: hsl_reference_rows(),
        numeric_thresholds: vec![DEATHS_TABLE, DOLLAR_TABLE],
        risk_matrix: risk_matrix(),
        aml_protocols: aml_codes()
            .map(|c| aml_capabilities(c).expect("table codes resolve"))
            .collect(),
    }
}

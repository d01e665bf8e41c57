use std::fmt;

use serde::{Deserialize, Serialize};

use super::AssessmentError;
use crate::taxonomy::TaxonomyLevel;

/// One assessment option of an AML protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmlFlag {
    AssessFocusedRange,
    AssessAspectGroup,
    ConsiderAspectLevel,
    AssessAspectLevel,
    AssessSecondOrder,
    AssessPropagationOperators,
}

impl AmlFlag {
    pub fn name(self) -> &'static str {
        match self {
            Self::AssessFocusedRange => "assess_focused_range",
            Self::AssessAspectGroup => "assess_aspect_group",
            Self::ConsiderAspectLevel => "consider_aspect_level",
            Self::AssessAspectLevel => "assess_aspect_level",
            Self::AssessSecondOrder => "assess_second_order",
            Self::AssessPropagationOperators => "assess_propagation_operators",
        }
    }
}

impl fmt::Display for AmlFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmlProtocol {
    pub code: String,
    pub assess_focused_range: bool,
    pub assess_aspect_group: bool,
    pub consider_aspect_level: bool,
    pub assess_aspect_level: bool,
    pub assess_second_order: bool,
    pub assess_propagation_operators: bool,
}

// code, focused range, aspect group, consider level, assess level, second order, operators
const AML_TABLE: [(&str, [bool; 6]); 11] = [
    ("AML-008", [true, true, false, false, false, false]),
    ("AML-010", [false, true, false, false, false, false]),
    ("AML-020", [false, true, false, false, true, false]),
    ("AML-110", [false, true, true, false, false, false]),
    ("AML-111", [false, true, true, false, false, true]),
    ("AML-120", [false, true, true, false, true, false]),
    ("AML-121", [false, true, true, false, true, true]),
    ("AML-210", [false, false, true, true, false, false]),
    ("AML-211", [false, false, true, true, false, true]),
    ("AML-220", [false, false, true, true, true, false]),
    ("AML-221", [false, false, true, true, true, true]),
];

/// All protocol codes, shallowest first.
pub fn aml_codes() -> impl Iterator<Item = &'static str> {
    AML_TABLE.iter().map(|(code, _)| *code)
}

pub fn aml_capabilities(code: &str) -> Result<AmlProtocol, AssessmentError> {
    let wanted = code.trim().to_ascii_uppercase();
    AML_TABLE
        .iter()
        .find(|(c, _)| *c == wanted)
        .map(|(c, f)| AmlProtocol {
            code: c.to_string(),
            assess_focused_range: f[0],
            assess_aspect_group: f[1],
            consider_aspect_level: f[2],
            assess_aspect_level: f[3],
            assess_second_order: f[4],
            assess_propagation_operators: f[5],
        })
        .ok_or_else(|| AssessmentError::UnknownAml(code.to_string()))
}

impl AmlProtocol {
    pub fn has(&self, flag: AmlFlag) -> bool {
        match flag {
            AmlFlag::AssessFocusedRange => self.assess_focused_range,
            AmlFlag::AssessAspectGroup => self.assess_aspect_group,
            AmlFlag::ConsiderAspectLevel => self.consider_aspect_level,
            AmlFlag::AssessAspectLevel => self.assess_aspect_level,
            AmlFlag::AssessSecondOrder => self.assess_second_order,
            AmlFlag::AssessPropagationOperators => self.assess_propagation_operators,
        }
    }

    /// Taxonomy level iterated during the assessment. "Consider aspect
    /// level" keeps iteration at aspect groups; only "assess aspect level"
    /// moves it down to individual aspects.
    pub fn working_level(&self) -> TaxonomyLevel {
        if self.assess_aspect_level {
            TaxonomyLevel::TL2
        } else {
            TaxonomyLevel::TL1
        }
    }

    /// Whether scenarios may reference nodes below the working level.
    pub fn admits_finer_aspects(&self) -> bool {
        self.consider_aspect_level || self.assess_aspect_level
    }

    /// True when the flags equal the reference table row for `code`.
    pub fn is_canonical(&self) -> bool {
        aml_capabilities(&self.code).is_ok_and(|p| p == *self)
    }
}

pub fn working_level(aml: &AmlProtocol) -> TaxonomyLevel {
    aml.working_level()
}

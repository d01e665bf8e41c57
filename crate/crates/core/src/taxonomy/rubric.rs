use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Taxonomy, TaxonomyLevel};

const BUNDLED_RUBRICS: &str = include_str!("../../data/rubrics.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RubricKind {
    CapabilityLevel,
    DomainKnowledgeLevel,
    PlausibleQualifier,
}

impl RubricKind {
    /// Inclusive index range: competency levels 1-9, qualifiers per HSL 1-6.
    pub fn index_range(self) -> (u8, u8) {
        match self {
            Self::CapabilityLevel | Self::DomainKnowledgeLevel => (1, 9),
            Self::PlausibleQualifier => (1, 6),
        }
    }

    pub fn requires_mode(self) -> bool {
        matches!(self, Self::PlausibleQualifier)
    }
}

impl fmt::Display for RubricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CapabilityLevel => "capability level",
            Self::DomainKnowledgeLevel => "domain knowledge level",
            Self::PlausibleQualifier => "plausible qualifier",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualifierMode {
    Competence,
    Incompetence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricEntry {
    pub kind: RubricKind,
    pub aspect_ref: String,
    pub index: u8,
    pub mode: Option<QualifierMode>,
    pub text: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum RubricError {
    #[error("rubric document does not parse: {0}")]
    Parse(String),
    #[error("{kind} index {index} outside {min}..={max}")]
    IndexOutOfRange {
        kind: RubricKind,
        index: u8,
        min: u8,
        max: u8,
    },
    #[error("{0} entries require a competence/incompetence mode")]
    ModeRequired(RubricKind),
    #[error("{0} entries take no mode")]
    ModeNotAllowed(RubricKind),
    #[error("rubric entry references unknown aspect `{0}`")]
    UnknownAspect(String),
    #[error("rubric entry for `{0}` must reference a TL1 or TL2 node")]
    WrongLevel(String),
    #[error("duplicate rubric entry for `{aspect_ref}` index {index}")]
    Duplicate { aspect_ref: String, index: u8 },
}

/// Read-only rubric reference content. Excerpts only: most
/// (kind, aspect, index) combinations have no entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubrics {
    pub version: String,
    entries: Vec<RubricEntry>,
}

fn check_arguments(
    kind: RubricKind,
    index: u8,
    mode: Option<QualifierMode>,
) -> Result<(), RubricError> {
    let (min, max) = kind.index_range();
    if !(min..=max).contains(&index) {
        return Err(RubricError::IndexOutOfRange {
            kind,
            index,
            min,
            max,
        });
    }
    match (kind.requires_mode(), mode) {
        (true, None) => Err(RubricError::ModeRequired(kind)),
        (false, Some(_)) => Err(RubricError::ModeNotAllowed(kind)),
        _ => Ok(()),
    }
}

/// Parses a rubric document and checks every entry against `taxonomy`.
pub fn load_rubrics(source: &str, taxonomy: &Taxonomy) -> Result<Rubrics, RubricError> {
    let rubrics: Rubrics =
        serde_json::from_str(source).map_err(|e| RubricError::Parse(e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    for entry in &rubrics.entries {
        check_arguments(entry.kind, entry.index, entry.mode)?;
        let node = taxonomy
            .node(&entry.aspect_ref)
            .ok_or_else(|| RubricError::UnknownAspect(entry.aspect_ref.clone()))?;
        if !matches!(node.level, TaxonomyLevel::TL1 | TaxonomyLevel::TL2) {
            return Err(RubricError::WrongLevel(entry.aspect_ref.clone()));
        }
        if !seen.insert((
            entry.kind,
            entry.aspect_ref.as_str(),
            entry.index,
            entry.mode,
        )) {
            return Err(RubricError::Duplicate {
                aspect_ref: entry.aspect_ref.clone(),
                index: entry.index,
            });
        }
    }
    Ok(rubrics)
}

impl Rubrics {
    pub fn bundled() -> &'static Rubrics {
        static BUNDLED: OnceLock<Rubrics> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            load_rubrics(BUNDLED_RUBRICS, Taxonomy::bundled()).expect("bundled rubrics are valid")
        })
    }

    pub fn entries(&self) -> &[RubricEntry] {
        &self.entries
    }

    /// `Ok(None)` means the arguments are valid but the excerpt has no entry.
    pub fn lookup(
        &self,
        kind: RubricKind,
        aspect_ref: &str,
        index: u8,
        mode: Option<QualifierMode>,
    ) -> Result<Option<&RubricEntry>, RubricError> {
        check_arguments(kind, index, mode)?;
        Ok(self.entries.iter().find(|e| {
            e.kind == kind && e.aspect_ref == aspect_ref && e.index == index && e.mode == mode
        }))
    }
}

//! Assessment sessions: protocol configuration, scenario records, team
//! estimates with recalibration, and the aspect-by-aspect workflow that ends
//! in a finalized, immutable session.
//!
//! Every mutating method is atomic. It either applies completely and bumps
//! `revision` by one, or returns an error and leaves the session untouched.

mod aml;
mod scenario;

pub use aml::{aml_capabilities, aml_codes, working_level, AmlFlag, AmlProtocol};
pub use scenario::{
    detect_divergence, select_final, DivergenceFlag, DivergenceThreshold, EstimateEntry,
    EstimateRound, FinalEstimate, HazardMode, Outcome, Rationale, RecalibrationEntry,
    ScenarioOrder, ScenarioRecord, ScenarioStatus,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calculus::{HarmSeverityLevel, LikelihoodLevel, RiskLevel};
use crate::pathway::{find_operator, validate_pathway};
use crate::taxonomy::{Taxonomy, TaxonomyError, TaxonomyLevel};

#[derive(Debug, Error, PartialEq)]
pub enum AssessmentError {
    #[error("unknown AML protocol code `{0}`")]
    UnknownAml(String),
    #[error("missing required system information: {}", .0.join(", "))]
    MissingSystemInfo(Vec<&'static str>),
    #[error("invalid assessment time frame `{0}`")]
    InvalidTimeFrame(String),
    #[error("{mode} mode needs {expected} assessor(s), got {count}")]
    TeamSize {
        mode: TeamMode,
        expected: &'static str,
        count: usize,
    },
    #[error("assessor `{0}` is listed twice")]
    DuplicateAssessor(String),
    #[error("session is finalized and can no longer change")]
    Finalized,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario id `{0}` already exists")]
    DuplicateScenario(String),
    #[error("unknown aspect `{0}`")]
    UnknownAspect(String),
    #[error("aspect `{aspect}` ({level}) sits above the working level {working}")]
    AspectAboveWorkingLevel {
        aspect: String,
        level: TaxonomyLevel,
        working: TaxonomyLevel,
    },
    #[error("{shape} requires {requirement}: {aml} does not set {flag}")]
    Gating {
        shape: &'static str,
        requirement: &'static str,
        aml: String,
        flag: AmlFlag,
    },
    #[error("scenario `{scenario}`: {problem}")]
    MalformedScenario { scenario: String, problem: String },
    #[error("scenario `{scenario}` has an invalid pathway: {}", .violations.join("; "))]
    InvalidPathway {
        scenario: String,
        violations: Vec<String>,
    },
    #[error("assessor `{0}` is not on the team")]
    UnknownAssessor(String),
    #[error("scenario `{scenario}` has no outcome {index}")]
    UnknownOutcome { scenario: String, index: usize },
    #[error("rationale field `{0}` must not be empty")]
    EmptyRationaleField(&'static str),
    #[error("scenario `{0}` is already complete")]
    ScenarioComplete(String),
    #[error("scenario `{scenario}` is {status:?}; expected {expected}")]
    WrongStatus {
        scenario: String,
        status: ScenarioStatus,
        expected: &'static str,
    },
    #[error("scenario `{scenario}` has diverging estimates on outcome(s) {outcomes:?}; flag divergences and recalibrate first")]
    UnresolvedDivergence {
        scenario: String,
        outcomes: Vec<usize>,
    },
    #[error("scenario `{scenario}` outcome {outcome} was not flagged; post-recalibration estimates are not accepted for it")]
    UnexpectedPostEntry { scenario: String, outcome: usize },
    #[error("scenario `{scenario}` outcome {outcome} lacks post-recalibration estimates from: {}", .assessors.join(", "))]
    MissingPostRecalibration {
        scenario: String,
        outcome: usize,
        assessors: Vec<String>,
    },
    #[error("aspect `{aspect}` is not at the working level {working}")]
    NotWorkingLevel {
        aspect: String,
        working: TaxonomyLevel,
    },
    #[error("completion rationale must not be empty")]
    EmptyCompletionRationale,
    #[error("cannot finalize: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    FinalizeBlocked(Vec<FinalizeGate>),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// An unmet precondition of [`AssessmentSession::finalize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FinalizeGate {
    AspectsIncomplete(Vec<String>),
    ScenarioOpen {
        scenario: String,
        status: ScenarioStatus,
    },
    ScenarioDiverging(String),
    SystemInfoIncomplete(Vec<&'static str>),
}

impl fmt::Display for FinalizeGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AspectsIncomplete(ids) => write!(f, "aspects not complete: {}", ids.join(", ")),
            Self::ScenarioOpen { scenario, status } => {
                write!(f, "scenario `{scenario}` is {status:?}")
            }
            Self::ScenarioDiverging(id) => {
                write!(f, "scenario `{id}` has unflagged diverging estimates")
            }
            Self::SystemInfoIncomplete(fields) => {
                write!(f, "system information incomplete: {}", fields.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamMode {
    Single,
    Team,
}

impl TeamMode {
    pub fn suffix(self) -> char {
        match self {
            Self::Single => 'S',
            Self::Team => 'T',
        }
    }
}

impl fmt::Display for TeamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Team => "team",
        })
    }
}

impl FromStr for TeamMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" | "s" => Ok(Self::Single),
            "team" | "t" => Ok(Self::Team),
            other => Err(format!(
                "unknown team mode `{other}` (expected single or team)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TeamMember {
    pub name: String,
    pub role: String,
}

impl FromStr for TeamMember {
    type Err = String;

    /// Parses `Name (Role)` or a bare name.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, role) = match s.split_once('(') {
            Some((name, rest)) => {
                let role = rest
                    .strip_suffix(')')
                    .ok_or_else(|| format!("unbalanced parentheses in `{s}`"))?;
                (name.trim(), role.trim())
            }
            None => (s, ""),
        };
        if name.is_empty() {
            return Err("team member name must not be empty".into());
        }
        Ok(Self {
            name: name.to_string(),
            role: role.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Days,
    Weeks,
    Months,
    Years,
}

/// Period over which every likelihood estimate is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeFrame {
    pub amount: u32,
    pub unit: TimeUnit,
}

impl fmt::Display for TimeFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = match self.unit {
            TimeUnit::Days => "day",
            TimeUnit::Weeks => "week",
            TimeUnit::Months => "month",
            TimeUnit::Years => "year",
        };
        let plural = if self.amount == 1 { "" } else { "s" };
        write!(f, "{} {unit}{plural}", self.amount)
    }
}

impl FromStr for TimeFrame {
    type Err = AssessmentError;

    fn from_str(s: &str) -> Result<Self, AssessmentError> {
        let bad = || AssessmentError::InvalidTimeFrame(s.to_string());
        let mut parts = s.split_whitespace();
        let amount: u32 = parts.next().and_then(|a| a.parse().ok()).ok_or_else(bad)?;
        let unit = match parts.next().map(|u| u.to_ascii_lowercase()) {
            Some(u) if u.starts_with("day") => TimeUnit::Days,
            Some(u) if u.starts_with("week") => TimeUnit::Weeks,
            Some(u) if u.starts_with("month") => TimeUnit::Months,
            Some(u) if u.starts_with("year") => TimeUnit::Years,
            _ => return Err(bad()),
        };
        if amount == 0 || parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self { amount, unit })
    }
}

/// System information supplied by the assessors; the type code is derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemInfoInput {
    pub assessment_date: NaiveDate,
    pub team_composition: Vec<TeamMember>,
    pub assessing_organization: String,
    pub assessment_time_frame: TimeFrame,
    pub system_name: String,
    pub version: String,
    pub access_level: String,
    pub generational_scope: String,
    pub system_level_assumptions: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub assessment_date: NaiveDate,
    pub team_composition: Vec<TeamMember>,
    pub assessing_organization: String,
    pub assessment_time_frame: TimeFrame,
    pub assessment_type_code: String,
    pub system_name: String,
    pub version: String,
    pub access_level: String,
    pub generational_scope: String,
    pub system_level_assumptions: String,
}

impl SystemInfo {
    fn from_input(input: SystemInfoInput, type_code: String) -> Self {
        Self {
            assessment_date: input.assessment_date,
            team_composition: input.team_composition,
            assessing_organization: input.assessing_organization,
            assessment_time_frame: input.assessment_time_frame,
            assessment_type_code: type_code,
            system_name: input.system_name,
            version: input.version,
            access_level: input.access_level,
            generational_scope: input.generational_scope,
            system_level_assumptions: input.system_level_assumptions,
        }
    }

    /// Blank fields that block finalization.
    pub fn missing_fields(&self) -> Vec<&'static str> {
        let mut missing: Vec<&'static str> = [
            ("assessing_organization", &self.assessing_organization),
            ("assessment_type_code", &self.assessment_type_code),
            ("system_name", &self.system_name),
            ("version", &self.version),
            ("access_level", &self.access_level),
            ("generational_scope", &self.generational_scope),
            ("system_level_assumptions", &self.system_level_assumptions),
        ]
        .into_iter()
        .filter(|(_, v)| v.trim().is_empty())
        .map(|(name, _)| name)
        .collect();
        if self.team_composition.is_empty() {
            missing.insert(0, "team_composition");
        }
        if self.assessment_time_frame.amount == 0 {
            missing.push("assessment_time_frame");
        }
        missing
    }

    pub fn assessor_names(&self) -> impl Iterator<Item = &str> {
        self.team_composition.iter().map(|m| m.name.as_str())
    }

    pub fn has_assessor(&self, name: &str) -> bool {
        self.assessor_names().any(|n| n == name)
    }
}

/// `{aml}-{framework version}-{T|S}`.
pub fn assessment_type_code(aml_code: &str, framework_version: &str, mode: TeamMode) -> String {
    format!("{aml_code}-{framework_version}-{}", mode.suffix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Configured,
    InProgress,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSession {
    pub id: String,
    pub system_info: SystemInfo,
    pub aml: AmlProtocol,
    pub framework_version: String,
    pub team_mode: TeamMode,
    pub divergence_threshold: DivergenceThreshold,
    pub scenarios: Vec<ScenarioRecord>,
    pub aspect_completion: BTreeMap<String, String>,
    pub state: SessionState,
    pub revision: u64,
}

/// A violation found while validating a stored session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn check_team(mode: TeamMode, team: &[TeamMember]) -> Result<(), AssessmentError> {
    let mut seen = BTreeSet::new();
    for member in team {
        if !seen.insert(member.name.as_str()) {
            return Err(AssessmentError::DuplicateAssessor(member.name.clone()));
        }
    }
    match mode {
        TeamMode::Single if team.len() != 1 => Err(AssessmentError::TeamSize {
            mode,
            expected: "exactly 1",
            count: team.len(),
        }),
        TeamMode::Team if team.len() < 2 => Err(AssessmentError::TeamSize {
            mode,
            expected: "at least 2",
            count: team.len(),
        }),
        _ => Ok(()),
    }
}

/// Opens a new session in the `Configured` state.
pub fn create_session(
    info: SystemInfoInput,
    aml_code: &str,
    framework_version: &str,
    team_mode: TeamMode,
) -> Result<AssessmentSession, AssessmentError> {
    let aml = aml_capabilities(aml_code)?;
    let mut missing = Vec::new();
    if info.system_name.trim().is_empty() {
        missing.push("system_name");
    }
    if info.team_composition.is_empty() {
        missing.push("team_composition");
    }
    if framework_version.trim().is_empty() {
        missing.push("framework_version");
    }
    if !missing.is_empty() {
        return Err(AssessmentError::MissingSystemInfo(missing));
    }
    if info.assessment_time_frame.amount == 0 {
        return Err(AssessmentError::InvalidTimeFrame(
            info.assessment_time_frame.to_string(),
        ));
    }
    check_team(team_mode, &info.team_composition)?;

    let type_code = assessment_type_code(&aml.code, framework_version, team_mode);
    let system_info = SystemInfo::from_input(info, type_code);
    let id = session_id(&system_info);
    Ok(AssessmentSession {
        id,
        system_info,
        aml,
        framework_version: framework_version.to_string(),
        team_mode,
        divergence_threshold: DivergenceThreshold::default(),
        scenarios: Vec::new(),
        aspect_completion: BTreeMap::new(),
        state: SessionState::Configured,
        revision: 0,
    })
}

fn session_id(info: &SystemInfo) -> String {
    let mut hasher = Sha256::new();
    for part in [
        info.system_name.as_str(),
        info.version.as_str(),
        &info.assessment_date.to_string(),
        info.assessment_type_code.as_str(),
    ] {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    for name in info.assessor_names() {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    format!("sess-{}", &hex::encode(digest)[..12])
}

impl AssessmentSession {
    fn transact<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, AssessmentError>,
    ) -> Result<T, AssessmentError> {
        if self.state == SessionState::Finalized {
            return Err(AssessmentError::Finalized);
        }
        let mut draft = self.clone();
        let out = f(&mut draft)?;
        if draft.state == SessionState::Configured {
            draft.state = SessionState::InProgress;
        }
        draft.revision += 1;
        *self = draft;
        Ok(out)
    }

    pub fn is_finalized(&self) -> bool {
        self.state == SessionState::Finalized
    }

    pub fn working_level(&self) -> TaxonomyLevel {
        self.aml.working_level()
    }

    pub fn scenario(&self, id: &str) -> Option<&ScenarioRecord> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    fn scenario_mut(&mut self, id: &str) -> Result<&mut ScenarioRecord, AssessmentError> {
        self.scenarios
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| AssessmentError::UnknownScenario(id.to_string()))
    }

    /// Working-level aspects still to be assessed, in taxonomy order.
    pub fn next_aspects(&self, taxonomy: &Taxonomy) -> Vec<String> {
        if self.is_finalized() {
            return Vec::new();
        }
        taxonomy
            .at_level(self.working_level())
            .filter(|n| !self.aspect_completion.contains_key(&n.id))
            .map(|n| n.id.clone())
            .collect()
    }

    /// The working-level node a scenario is recorded against.
    pub fn working_aspect<'t>(
        &self,
        taxonomy: &'t Taxonomy,
        aspect_ref: &str,
    ) -> Result<&'t str, AssessmentError> {
        let working = self.working_level();
        taxonomy
            .ancestor_at(aspect_ref, working)?
            .map(|n| n.id.as_str())
            .ok_or_else(|| AssessmentError::AspectAboveWorkingLevel {
                aspect: aspect_ref.to_string(),
                level: taxonomy
                    .node(aspect_ref)
                    .map(|n| n.level)
                    .unwrap_or(working),
                working,
            })
    }

    /// Structural and protocol checks for a scenario against this session.
    fn check_scenario(
        &self,
        taxonomy: &Taxonomy,
        scenario: &ScenarioRecord,
    ) -> Result<(), AssessmentError> {
        let malformed = |problem: &str| AssessmentError::MalformedScenario {
            scenario: scenario.id.clone(),
            problem: problem.to_string(),
        };

        let node = taxonomy
            .node(&scenario.aspect_ref)
            .ok_or_else(|| AssessmentError::UnknownAspect(scenario.aspect_ref.clone()))?;

        match (scenario.order, &scenario.interaction) {
            (ScenarioOrder::SecondOrder, None) => {
                return Err(malformed("second-order scenarios need an interaction cell"))
            }
            (ScenarioOrder::FirstOrder, Some(_)) => {
                return Err(malformed("first-order scenarios carry no interaction cell"))
            }
            _ => {}
        }
        if scenario.prop_enhanced != scenario.parent_scenario.is_some() {
            return Err(malformed(
                "propagation-enhanced scenarios need a parent scenario, and only they may have one",
            ));
        }
        if scenario.outcomes.is_empty() {
            return Err(malformed("at least one outcome is required"));
        }

        if scenario.order == ScenarioOrder::SecondOrder && !self.aml.assess_second_order {
            return Err(AssessmentError::Gating {
                shape: "second-order scenario",
                requirement: "second-order protocol",
                aml: self.aml.code.clone(),
                flag: AmlFlag::AssessSecondOrder,
            });
        }
        if scenario.prop_enhanced && !self.aml.assess_propagation_operators {
            return Err(AssessmentError::Gating {
                shape: "propagation-enhanced scenario",
                requirement: "propagation-operator protocol",
                aml: self.aml.code.clone(),
                flag: AmlFlag::AssessPropagationOperators,
            });
        }
        let working = self.working_level();
        if node.level < working {
            return Err(AssessmentError::AspectAboveWorkingLevel {
                aspect: node.id.clone(),
                level: node.level,
                working,
            });
        }
        if node.level > working && !self.aml.admits_finer_aspects() {
            return Err(AssessmentError::Gating {
                shape: "aspect-level scenario",
                requirement: "aspect-level protocol",
                aml: self.aml.code.clone(),
                flag: AmlFlag::ConsiderAspectLevel,
            });
        }

        if let Some(cell) = &scenario.interaction {
            for aspect in [&cell.aspect_a, &cell.aspect_b] {
                if !taxonomy.contains(aspect) {
                    return Err(AssessmentError::UnknownAspect(aspect.clone()));
                }
            }
            if cell.aspect_a == cell.aspect_b {
                return Err(malformed("interaction cell pairs an aspect with itself"));
            }
        }
        if let Some(op) = &scenario.propagation_operator {
            find_operator(op).map_err(|e| malformed(&e.to_string()))?;
        }
        if let Some(pathway) = &scenario.pathway {
            let report = validate_pathway(taxonomy, pathway);
            if !report.is_valid() {
                return Err(AssessmentError::InvalidPathway {
                    scenario: scenario.id.clone(),
                    violations: report.violations.iter().map(ToString::to_string).collect(),
                });
            }
        }
        Ok(())
    }

    /// Admits a draft scenario if the protocol permits its shape.
    pub fn add_scenario(
        &mut self,
        taxonomy: &Taxonomy,
        scenario: ScenarioRecord,
    ) -> Result<(), AssessmentError> {
        self.transact(|s| {
            if scenario.id.trim().is_empty() {
                return Err(AssessmentError::MalformedScenario {
                    scenario: scenario.id.clone(),
                    problem: "scenario id must not be empty".into(),
                });
            }
            if s.scenario(&scenario.id).is_some() {
                return Err(AssessmentError::DuplicateScenario(scenario.id.clone()));
            }
            if scenario.status != ScenarioStatus::Draft || scenario.has_estimates() {
                return Err(AssessmentError::MalformedScenario {
                    scenario: scenario.id.clone(),
                    problem: "new scenarios must be drafts without estimates".into(),
                });
            }
            s.check_scenario(taxonomy, &scenario)?;
            if let Some(parent) = &scenario.parent_scenario {
                if s.scenario(parent).is_none() {
                    return Err(AssessmentError::UnknownScenario(parent.clone()));
                }
            }
            s.scenarios.push(scenario);
            Ok(())
        })
    }

    /// Stores one assessor's estimate for one outcome. Returns the scenario
    /// status afterwards.
    #[allow(clippy::too_many_arguments)]
    pub fn record_estimate(
        &mut self,
        scenario_id: &str,
        assessor: &str,
        outcome_index: usize,
        hsl: HarmSeverityLevel,
        ll: LikelihoodLevel,
        rationale: Rationale,
    ) -> Result<ScenarioStatus, AssessmentError> {
        self.transact(|s| {
            if let Some(field) = rationale.missing_mandatory().first() {
                return Err(AssessmentError::EmptyRationaleField(field));
            }
            if !s.system_info.has_assessor(assessor) {
                return Err(AssessmentError::UnknownAssessor(assessor.to_string()));
            }
            let team: Vec<String> = s.system_info.assessor_names().map(String::from).collect();
            let scenario = s.scenario_mut(scenario_id)?;
            let round = match scenario.status {
                ScenarioStatus::Draft | ScenarioStatus::Estimated => EstimateRound::Initial,
                ScenarioStatus::Recalibrating => EstimateRound::PostRecalibration,
                ScenarioStatus::Complete => {
                    return Err(AssessmentError::ScenarioComplete(scenario_id.to_string()))
                }
            };
            let outcome = scenario.outcomes.get_mut(outcome_index).ok_or_else(|| {
                AssessmentError::UnknownOutcome {
                    scenario: scenario_id.to_string(),
                    index: outcome_index,
                }
            })?;
            outcome.upsert(EstimateEntry {
                assessor: assessor.to_string(),
                hsl,
                ll,
                round,
            });
            scenario.rationale = rationale;

            let quorum = scenario.outcomes.iter().all(|o| {
                team.iter()
                    .all(|name| o.entry(name, EstimateRound::Initial).is_some())
            });
            if scenario.status == ScenarioStatus::Draft && quorum {
                scenario.status = ScenarioStatus::Estimated;
            }
            Ok(scenario.status)
        })
    }

    /// Flags diverging outcomes of an estimated team scenario and moves it
    /// to `Recalibrating` when any are found.
    pub fn flag_divergences(
        &mut self,
        scenario_id: &str,
    ) -> Result<Vec<DivergenceFlag>, AssessmentError> {
        self.transact(|s| {
            let threshold = s.divergence_threshold;
            let team_mode = s.team_mode;
            let scenario = s.scenario_mut(scenario_id)?;
            match scenario.status {
                ScenarioStatus::Estimated | ScenarioStatus::Recalibrating => {}
                status => {
                    return Err(AssessmentError::WrongStatus {
                        scenario: scenario_id.to_string(),
                        status,
                        expected: "Estimated",
                    })
                }
            }
            if team_mode == TeamMode::Single {
                return Ok(Vec::new());
            }
            let flags = detect_divergence(scenario, threshold);
            if !flags.is_empty() {
                scenario.status = ScenarioStatus::Recalibrating;
            }
            Ok(flags)
        })
    }

    /// Sets the final estimate of every outcome and completes the scenario.
    ///
    /// Flagged outcomes take the maximum-risk post-recalibration entry;
    /// others take the maximum-risk initial entry.
    pub fn resolve_recalibration(
        &mut self,
        scenario_id: &str,
        post_entries: Vec<RecalibrationEntry>,
    ) -> Result<(), AssessmentError> {
        self.transact(|s| {
            let threshold = s.divergence_threshold;
            let team_mode = s.team_mode;
            let team: Vec<String> = s.system_info.assessor_names().map(String::from).collect();
            let scenario = s.scenario_mut(scenario_id)?;
            complete_scenario(scenario, team_mode, threshold, &team, post_entries)
        })
    }

    pub fn mark_aspect_complete(
        &mut self,
        taxonomy: &Taxonomy,
        aspect_id: &str,
        sufficiency_rationale: &str,
    ) -> Result<(), AssessmentError> {
        self.transact(|s| {
            if sufficiency_rationale.trim().is_empty() {
                return Err(AssessmentError::EmptyCompletionRationale);
            }
            let node = taxonomy
                .node(aspect_id)
                .ok_or_else(|| AssessmentError::UnknownAspect(aspect_id.to_string()))?;
            if node.level != s.working_level() {
                return Err(AssessmentError::NotWorkingLevel {
                    aspect: aspect_id.to_string(),
                    working: s.working_level(),
                });
            }
            s.aspect_completion
                .insert(aspect_id.to_string(), sufficiency_rationale.to_string());
            Ok(())
        })
    }

    /// Replaces the assessor-supplied system information. The team may not
    /// change once estimates exist.
    pub fn update_system_info(&mut self, info: SystemInfoInput) -> Result<(), AssessmentError> {
        self.transact(|s| {
            check_team(s.team_mode, &info.team_composition)?;
            if info.team_composition != s.system_info.team_composition
                && s.scenarios.iter().any(ScenarioRecord::has_estimates)
            {
                return Err(AssessmentError::MissingSystemInfo(vec![
                    "team_composition (fixed once estimates exist)",
                ]));
            }
            let code = s.system_info.assessment_type_code.clone();
            s.system_info = SystemInfo::from_input(info, code);
            Ok(())
        })
    }

    /// Unmet finalization preconditions; empty when `finalize` would pass.
    pub fn finalize_gates(&self, taxonomy: &Taxonomy) -> Vec<FinalizeGate> {
        let mut gates = Vec::new();
        let pending = self.next_aspects(taxonomy);
        if !pending.is_empty() {
            gates.push(FinalizeGate::AspectsIncomplete(pending));
        }
        for scenario in &self.scenarios {
            match scenario.status {
                ScenarioStatus::Draft | ScenarioStatus::Recalibrating => {
                    gates.push(FinalizeGate::ScenarioOpen {
                        scenario: scenario.id.clone(),
                        status: scenario.status,
                    })
                }
                ScenarioStatus::Estimated
                    if self.team_mode == TeamMode::Team
                        && !detect_divergence(scenario, self.divergence_threshold).is_empty() =>
                {
                    gates.push(FinalizeGate::ScenarioDiverging(scenario.id.clone()))
                }
                _ => {}
            }
        }
        let missing = self.system_info.missing_fields();
        if !missing.is_empty() {
            gates.push(FinalizeGate::SystemInfoIncomplete(missing));
        }
        gates
    }

    /// Completes remaining non-diverging estimated scenarios and freezes the
    /// session.
    pub fn finalize(&mut self, taxonomy: &Taxonomy) -> Result<(), AssessmentError> {
        self.transact(|s| {
            let gates = s.finalize_gates(taxonomy);
            if !gates.is_empty() {
                return Err(AssessmentError::FinalizeBlocked(gates));
            }
            let threshold = s.divergence_threshold;
            let team_mode = s.team_mode;
            let team: Vec<String> = s.system_info.assessor_names().map(String::from).collect();
            for scenario in s
                .scenarios
                .iter_mut()
                .filter(|sc| sc.status == ScenarioStatus::Estimated)
            {
                complete_scenario(scenario, team_mode, threshold, &team, Vec::new())?;
            }
            s.state = SessionState::Finalized;
            Ok(())
        })
    }

    /// Complete scenarios with their risk level.
    pub fn completed(&self) -> impl Iterator<Item = (&ScenarioRecord, RiskLevel)> {
        self.scenarios
            .iter()
            .filter_map(|s| s.risk_level().map(|rl| (s, rl)))
    }

    /// Full invariant scan of a stored session.
    pub fn validate(&self, taxonomy: &Taxonomy) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |path: String, message: String| out.push(Violation { path, message });

        if !self.aml.is_canonical() {
            push(
                "aml".into(),
                format!(
                    "flags do not match the protocol table for `{}`",
                    self.aml.code
                ),
            );
        }
        let code = assessment_type_code(&self.aml.code, &self.framework_version, self.team_mode);
        if self.system_info.assessment_type_code != code {
            push(
                "system_info.assessment_type_code".into(),
                format!("expected `{code}`"),
            );
        }
        if let Err(e) = check_team(self.team_mode, &self.system_info.team_composition) {
            push("system_info.team_composition".into(), e.to_string());
        }
        if self.system_info.assessment_time_frame.amount == 0 {
            push(
                "system_info.assessment_time_frame".into(),
                "must be positive".into(),
            );
        }

        for (aspect, rationale) in &self.aspect_completion {
            let path = format!("aspect_completion.{aspect}");
            match taxonomy.node(aspect) {
                None => push(path, format!("unknown aspect `{aspect}`")),
                Some(n) if n.level != self.working_level() => push(
                    path,
                    format!("not at working level {}", self.working_level()),
                ),
                _ if rationale.trim().is_empty() => push(path, "empty rationale".into()),
                _ => {}
            }
        }

        let mut ids = BTreeSet::new();
        for (i, scenario) in self.scenarios.iter().enumerate() {
            let path = |field: &str| format!("scenarios[{i}].{field}");
            if !ids.insert(scenario.id.as_str()) {
                push(
                    path("id"),
                    format!("duplicate scenario id `{}`", scenario.id),
                );
            }
            if let Err(e) = self.check_scenario(taxonomy, scenario) {
                let field = match e {
                    AssessmentError::UnknownAspect(_) | AssessmentError::Gating { .. } => {
                        "aspect_ref"
                    }
                    AssessmentError::InvalidPathway { .. } => "pathway",
                    _ => "shape",
                };
                push(path(field), e.to_string());
            }
            if let Some(parent) = &scenario.parent_scenario {
                if !self.scenarios[..i].iter().any(|s| &s.id == parent) {
                    push(
                        path("parent_scenario"),
                        format!("parent `{parent}` is not an earlier scenario"),
                    );
                }
            }
            for (o, outcome) in scenario.outcomes.iter().enumerate() {
                for entry in &outcome.estimates {
                    if !self.system_info.has_assessor(&entry.assessor) {
                        push(
                            path(&format!("outcomes[{o}].estimates")),
                            format!("assessor `{}` is not on the team", entry.assessor),
                        );
                    }
                    if entry.round == EstimateRound::PostRecalibration
                        && matches!(
                            scenario.status,
                            ScenarioStatus::Draft | ScenarioStatus::Estimated
                        )
                    {
                        push(
                            path(&format!("outcomes[{o}].estimates")),
                            "post-recalibration entry before any divergence flag".into(),
                        );
                    }
                }
                match (&outcome.final_estimate, scenario.status) {
                    (Some(f), ScenarioStatus::Complete) => {
                        if f.risk_level != crate::calculus::risk_level(f.hsl, f.ll) {
                            push(
                                path(&format!("outcomes[{o}].final_estimate.risk_level")),
                                "does not match the risk matrix".into(),
                            );
                        }
                    }
                    (None, ScenarioStatus::Complete) => push(
                        path(&format!("outcomes[{o}].final_estimate")),
                        "complete scenario lacks a final estimate".into(),
                    ),
                    (Some(_), _) => push(
                        path(&format!("outcomes[{o}].final_estimate")),
                        "only complete scenarios carry final estimates".into(),
                    ),
                    (None, _) => {}
                }
            }
            if scenario.status == ScenarioStatus::Complete {
                for field in scenario.rationale.missing_mandatory() {
                    push(
                        path(&format!("rationale.{field}")),
                        "must not be empty".into(),
                    );
                }
            }
        }

        if self.is_finalized() {
            for gate in self.finalize_gates(taxonomy) {
                push("state".into(), format!("finalized but {gate}"));
            }
            for scenario in &self.scenarios {
                if scenario.status != ScenarioStatus::Complete {
                    push(
                        format!("scenarios.{}", scenario.id),
                        "finalized session holds an incomplete scenario".into(),
                    );
                }
            }
        }
        out
    }
}

fn complete_scenario(
    scenario: &mut ScenarioRecord,
    team_mode: TeamMode,
    threshold: DivergenceThreshold,
    team: &[String],
    post_entries: Vec<RecalibrationEntry>,
) -> Result<(), AssessmentError> {
    let id = scenario.id.clone();
    let flagged: Vec<usize> = match team_mode {
        TeamMode::Single => Vec::new(),
        TeamMode::Team => detect_divergence(scenario, threshold)
            .into_iter()
            .map(|f| f.outcome_index)
            .collect(),
    };
    match scenario.status {
        ScenarioStatus::Estimated if !flagged.is_empty() => {
            return Err(AssessmentError::UnresolvedDivergence {
                scenario: id,
                outcomes: flagged,
            })
        }
        ScenarioStatus::Estimated | ScenarioStatus::Recalibrating => {}
        ScenarioStatus::Complete => return Err(AssessmentError::ScenarioComplete(id)),
        status => {
            return Err(AssessmentError::WrongStatus {
                scenario: id,
                status,
                expected: "Estimated or Recalibrating",
            })
        }
    }

    for entry in post_entries {
        if !team.contains(&entry.assessor) {
            return Err(AssessmentError::UnknownAssessor(entry.assessor));
        }
        if entry.outcome_index >= scenario.outcomes.len() {
            return Err(AssessmentError::UnknownOutcome {
                scenario: id,
                index: entry.outcome_index,
            });
        }
        if !flagged.contains(&entry.outcome_index) {
            return Err(AssessmentError::UnexpectedPostEntry {
                scenario: id,
                outcome: entry.outcome_index,
            });
        }
        scenario.outcomes[entry.outcome_index].upsert(EstimateEntry {
            assessor: entry.assessor,
            hsl: entry.hsl,
            ll: entry.ll,
            round: EstimateRound::PostRecalibration,
        });
    }

    for (i, outcome) in scenario.outcomes.iter_mut().enumerate() {
        let round = if flagged.contains(&i) {
            let missing: Vec<String> = team
                .iter()
                .filter(|name| {
                    outcome
                        .entry(name, EstimateRound::PostRecalibration)
                        .is_none()
                })
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(AssessmentError::MissingPostRecalibration {
                    scenario: id,
                    outcome: i,
                    assessors: missing,
                });
            }
            EstimateRound::PostRecalibration
        } else {
            EstimateRound::Initial
        };
        outcome.final_estimate = select_final(outcome.entries(round));
        if outcome.final_estimate.is_none() {
            return Err(AssessmentError::WrongStatus {
                scenario: id,
                status: scenario.status,
                expected: "estimates for every outcome",
            });
        }
    }
    if let Some(field) = scenario.rationale.missing_mandatory().first() {
        return Err(AssessmentError::EmptyRationaleField(field));
    }
    scenario.status = ScenarioStatus::Complete;
    Ok(())
}

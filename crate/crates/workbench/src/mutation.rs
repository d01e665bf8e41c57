//! Revision-checked commands against a session.

use pra_core::assessment::{
    AssessmentError, AssessmentSession, DivergenceFlag, Rationale, RecalibrationEntry,
    ScenarioRecord, ScenarioStatus, SystemInfoInput,
};
use pra_core::calculus::{HarmSeverityLevel, LikelihoodLevel};
use pra_core::pathway::{apply_operator, PathwayError};
use pra_core::taxonomy::Taxonomy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SessionCommand {
    AddScenario {
        scenario: Box<ScenarioRecord>,
    },
    /// Derives a propagation-enhanced variant of an existing scenario and
    /// adds it.
    ApplyOperator {
        parent: String,
        operator: String,
        #[serde(default)]
        narrative_delta: String,
    },
    RecordEstimate {
        scenario_id: String,
        assessor: String,
        outcome_index: usize,
        hsl: HarmSeverityLevel,
        ll: LikelihoodLevel,
        rationale: Rationale,
    },
    FlagDivergences {
        scenario_id: String,
    },
    ResolveRecalibration {
        scenario_id: String,
        #[serde(default)]
        post_entries: Vec<RecalibrationEntry>,
    },
    MarkAspectComplete {
        aspect_id: String,
        rationale: String,
    },
    UpdateSystemInfo {
        info: SystemInfoInput,
    },
    Finalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationEnvelope {
    pub expected_revision: u64,
    pub actor: String,
    pub command: SessionCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandResult {
    Done,
    ScenarioAdded { scenario_id: String },
    ScenarioStatus { status: ScenarioStatus },
    Divergences { flags: Vec<DivergenceFlag> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Applied {
    pub revision: u64,
    pub result: CommandResult,
}

#[derive(Debug, Error)]
pub enum MutationError {
    #[error("revision conflict: session is at revision {current_revision}")]
    Conflict { current_revision: u64 },
    #[error("actor must be named")]
    AnonymousActor,
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
    #[error(transparent)]
    Pathway(#[from] PathwayError),
}

/// Applies the command iff the envelope was prepared against the current
/// revision. On any error the session is left untouched.
pub fn apply_mutation(
    session: &mut AssessmentSession,
    taxonomy: &Taxonomy,
    envelope: MutationEnvelope,
) -> Result<Applied, MutationError> {
    if envelope.expected_revision != session.revision {
        return Err(MutationError::Conflict {
            current_revision: session.revision,
        });
    }
    if envelope.actor.trim().is_empty() {
        return Err(MutationError::AnonymousActor);
    }
    let result = match envelope.command {
        SessionCommand::AddScenario { scenario } => {
            let scenario_id = scenario.id.clone();
            session.add_scenario(taxonomy, *scenario)?;
            CommandResult::ScenarioAdded { scenario_id }
        }
        SessionCommand::ApplyOperator {
            parent,
            operator,
            narrative_delta,
        } => {
            let parent = session
                .scenario(&parent)
                .ok_or(AssessmentError::UnknownScenario(parent.clone()))?;
            let child = apply_operator(parent, &operator, &narrative_delta)?;
            let scenario_id = child.id.clone();
            session.add_scenario(taxonomy, child)?;
            CommandResult::ScenarioAdded { scenario_id }
        }
        SessionCommand::RecordEstimate {
            scenario_id,
            assessor,
            outcome_index,
            hsl,
            ll,
            rationale,
        } => CommandResult::ScenarioStatus {
            status: session.record_estimate(
                &scenario_id,
                &assessor,
                outcome_index,
                hsl,
                ll,
                rationale,
            )?,
        },
        SessionCommand::FlagDivergences { scenario_id } => CommandResult::Divergences {
            flags: session.flag_divergences(&scenario_id)?,
        },
        SessionCommand::ResolveRecalibration {
            scenario_id,
            post_entries,
        } => {
            session.resolve_recalibration(&scenario_id, post_entries)?;
            CommandResult::ScenarioStatus {
                status: ScenarioStatus::Complete,
            }
        }
        SessionCommand::MarkAspectComplete {
            aspect_id,
            rationale,
        } => {
            session.mark_aspect_complete(taxonomy, &aspect_id, &rationale)?;
            CommandResult::Done
        }
        SessionCommand::UpdateSystemInfo { info } => {
            session.update_system_info(info)?;
            CommandResult::Done
        }
        SessionCommand::Finalize => {
            session.finalize(taxonomy)?;
            CommandResult::Done
        }
    };
    Ok(Applied {
        revision: session.revision,
        result,
    })
}

/// Stable machine-readable code for an error, shared by the CLI and the
/// HTTP service.
pub fn error_code(err: &(dyn std::error::Error + 'static)) -> &'static str {
    if let Some(e) = err.downcast_ref::<MutationError>() {
        return match e {
            MutationError::Conflict { .. } => "conflict",
            MutationError::AnonymousActor => "invalid_request",
            MutationError::Assessment(a) => assessment_code(a),
            MutationError::Pathway(_) => "pathway",
        };
    }
    if let Some(a) = err.downcast_ref::<AssessmentError>() {
        return assessment_code(a);
    }
    if err.downcast_ref::<PathwayError>().is_some() {
        return "pathway";
    }
    if let Some(r) = err.downcast_ref::<pra_core::reporting::ReportingError>() {
        return match r {
            pra_core::reporting::ReportingError::NotFinalized => "not_finalized",
            pra_core::reporting::ReportingError::UnknownFormat(_) => "unknown_format",
            _ => "report",
        };
    }
    if let Some(w) = err.downcast_ref::<crate::workbook::WorkbookError>() {
        return match w {
            crate::workbook::WorkbookError::Parse { .. } => "parse",
            crate::workbook::WorkbookError::UnsupportedFormat { .. } => "format_version",
            crate::workbook::WorkbookError::Invalid(_) => "invalid_workbook",
            crate::workbook::WorkbookError::Io { .. } => "io",
        };
    }
    if err
        .downcast_ref::<pra_core::taxonomy::TaxonomyError>()
        .is_some()
    {
        return "taxonomy";
    }
    "error"
}

fn assessment_code(e: &AssessmentError) -> &'static str {
    use AssessmentError::*;
    match e {
        UnknownAml(_) => "unknown_aml",
        MissingSystemInfo(_) | InvalidTimeFrame(_) | TeamSize { .. } | DuplicateAssessor(_) => {
            "system_info"
        }
        Finalized => "finalized",
        UnknownScenario(_) | UnknownAspect(_) | UnknownAssessor(_) | UnknownOutcome { .. } => {
            "not_found"
        }
        Gating { .. } | AspectAboveWorkingLevel { .. } | NotWorkingLevel { .. } => "gating",
        EmptyRationaleField(_) | EmptyCompletionRationale => "rationale",
        UnresolvedDivergence { .. }
        | UnexpectedPostEntry { .. }
        | MissingPostRecalibration { .. } => "recalibration",
        FinalizeBlocked(_) => "finalize_blocked",
        _ => "invalid_scenario",
    }
}

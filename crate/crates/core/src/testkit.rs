//! Seeded generators of valid sessions, built only through the public API.
//! Enabled for tests and behind the `testkit` feature.

use chrono::NaiveDate;
use rand::seq::{IndexedRandom, IteratorRandom};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assessment::{
    aml_codes, create_session, AssessmentSession, HazardMode, Rationale, RecalibrationEntry,
    ScenarioRecord, ScenarioStatus, SystemInfoInput, TeamMember, TeamMode, TimeFrame, TimeUnit,
};
use crate::calculus::{HarmSeverityLevel, LikelihoodLevel, ProbabilityInterval};
use crate::pathway::{
    apply_operator, operator_catalog, InteractionCell, PathwayBuilder, StepProbability,
};
use crate::reporting::FocusedScheme;
use crate::taxonomy::{AspectCategory, Taxonomy, TaxonomyLevel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct SessionShape {
    pub max_scenarios: usize,
    pub max_outcomes: usize,
    pub max_team: usize,
    /// Drive the session all the way to `Finalized`.
    pub finalize: bool,
}

impl Default for SessionShape {
    fn default() -> Self {
        Self {
            max_scenarios: 10,
            max_outcomes: 3,
            max_team: 4,
            finalize: true,
        }
    }
}

pub fn random_hsl(rng: &mut impl Rng) -> HarmSeverityLevel {
    HarmSeverityLevel::new(rng.random_range(1..=6)).unwrap()
}

pub fn random_ll(rng: &mut impl Rng) -> LikelihoodLevel {
    LikelihoodLevel::new(rng.random_range(0..=8)).unwrap()
}

pub fn rationale(tag: &str) -> Rationale {
    Rationale {
        key_assumptions: format!("assumptions for {tag}"),
        evidence_quality: "expert judgement".into(),
        known_uncertainties: "deployment context".into(),
        sensitivity_notes: String::new(),
        operator_or_interaction_rationale: None,
    }
}

pub fn system_info(team: usize) -> SystemInfoInput {
    SystemInfoInput {
        assessment_date: NaiveDate::from_ymd_opt(2025, 1, 15).unwrap(),
        team_composition: (0..team)
            .map(|i| TeamMember {
                name: format!("assessor-{i}"),
                role: if i == 0 {
                    "lead".into()
                } else {
                    "domain expert".into()
                },
            })
            .collect(),
        assessing_organization: "Example Assessors".into(),
        assessment_time_frame: TimeFrame {
            amount: 1,
            unit: TimeUnit::Years,
        },
        system_name: "Example Model".into(),
        version: "1.0".into(),
        access_level: "API access only".into(),
        generational_scope: "Specific version".into(),
        system_level_assumptions: "Retrieval-augmented, no direct internet access".into(),
    }
}

fn random_pathway(rng: &mut impl Rng, taxonomy: &Taxonomy) -> crate::pathway::RiskPathway {
    let source = taxonomy
        .nodes()
        .iter()
        .filter(|n| {
            n.level != TaxonomyLevel::TL0
                && taxonomy
                    .category(&n.id)
                    .is_ok_and(AspectCategory::is_source)
        })
        .choose(rng)
        .unwrap();
    let terminal = taxonomy
        .nodes()
        .iter()
        .filter(|n| {
            n.level != TaxonomyLevel::TL0
                && taxonomy.category(&n.id) == Ok(AspectCategory::ImpactDomain)
        })
        .choose(rng)
        .unwrap();
    let prob = |rng: &mut dyn rand::RngCore| {
        if rng.random_bool(0.5) {
            Some(StepProbability::Level(
                LikelihoodLevel::new(rng.random_range(1..=8)).unwrap(),
            ))
        } else {
            let a: f64 = rng.random_range(1e-6..1.0);
            let b: f64 = rng.random_range(1e-6..1.0);
            Some(StepProbability::Interval(
                ProbabilityInterval::new(a.min(b), a.max(b)).unwrap(),
            ))
        }
    };
    let mut b = if rng.random_bool(0.5) {
        PathwayBuilder::forward(&source.id, &terminal.id, "source hazard", prob(rng))
    } else {
        PathwayBuilder::backward(&source.id, &terminal.id, "terminal hazard", prob(rng))
    };
    for i in 0..rng.random_range(0..3) {
        b = b.step(format!("intermediate {i}"), prob(rng));
    }
    b.finish("closing hazard", prob(rng))
}

/// A random session that satisfies every invariant, optionally finalized.
pub fn random_session(
    rng: &mut impl Rng,
    taxonomy: &Taxonomy,
    shape: SessionShape,
) -> AssessmentSession {
    let aml = aml_codes().choose(rng).unwrap();
    let team_size = if shape.max_team < 2 || rng.random_bool(0.3) {
        1
    } else {
        rng.random_range(2..=shape.max_team)
    };
    let mode = if team_size == 1 {
        TeamMode::Single
    } else {
        TeamMode::Team
    };
    let mut s = create_session(system_info(team_size), aml, "v0.9.1-alpha", mode).unwrap();
    let team: Vec<String> = s.system_info.assessor_names().map(String::from).collect();
    let working: Vec<String> = taxonomy
        .at_level(s.working_level())
        .map(|n| n.id.clone())
        .collect();
    let dims: Vec<String> = FocusedScheme::default_scheme()
        .dimensions
        .iter()
        .map(|d| d.id.clone())
        .collect();

    for k in 0..rng.random_range(0..=shape.max_scenarios) {
        let mut aspect = working.choose(rng).unwrap().clone();
        if s.aml.admits_finer_aspects() && rng.random_bool(0.3) {
            if let Some(child) = taxonomy.children(&aspect).unwrap().choose(rng) {
                aspect = child.id.clone();
            }
        }
        let mode = *[
            HazardMode::Competence,
            HazardMode::Incompetence,
            HazardMode::Combined,
        ]
        .choose(rng)
        .unwrap();
        let outcomes = rng.random_range(1..=shape.max_outcomes.max(1));
        let mut scenario =
            ScenarioRecord::new(format!("sc-{k}"), &aspect, mode, format!("scenario {k}"))
                .with_outcomes((0..outcomes).map(|o| format!("outcome {o}")))
                .with_dimensions(dims.iter().filter(|_| rng.random_bool(0.3)).cloned());
        if s.aml.assess_second_order && rng.random_bool(0.4) {
            let other = working
                .iter()
                .filter(|w| **w != aspect)
                .choose(rng)
                .unwrap();
            scenario =
                scenario.second_order(InteractionCell::new(&aspect, other, "pairing").unwrap());
        }
        if rng.random_bool(0.4) {
            scenario = scenario.with_pathway(random_pathway(rng, taxonomy));
        }
        if s.aml.assess_propagation_operators && !s.scenarios.is_empty() && rng.random_bool(0.3) {
            let parent = s.scenarios.choose(rng).unwrap().clone();
            let op = &operator_catalog().choose(rng).unwrap().name;
            let child = apply_operator(&parent, op, "operator variant").unwrap();
            if s.scenario(&child.id).is_none() {
                scenario = child;
            }
        }
        let id = scenario.id.clone();
        let n_outcomes = scenario.outcomes.len();
        s.add_scenario(taxonomy, scenario).unwrap();

        if shape.finalize || rng.random_bool(0.7) {
            for o in 0..n_outcomes {
                for who in &team {
                    let (h, l) = (random_hsl(rng), random_ll(rng));
                    s.record_estimate(&id, who, o, h, l, rationale(&id))
                        .unwrap();
                }
            }
            let flags = s.flag_divergences(&id).unwrap();
            if !flags.is_empty() && (shape.finalize || rng.random_bool(0.5)) {
                let post = flags
                    .iter()
                    .flat_map(|f| {
                        team.iter()
                            .map(|who| RecalibrationEntry {
                                assessor: who.clone(),
                                outcome_index: f.outcome_index,
                                hsl: random_hsl(rng),
                                ll: random_ll(rng),
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                s.resolve_recalibration(&id, post).unwrap();
            } else if flags.is_empty() && rng.random_bool(0.5) {
                s.resolve_recalibration(&id, Vec::new()).unwrap();
            }
        }
    }

    if shape.finalize {
        for aspect in s.next_aspects(taxonomy) {
            s.mark_aspect_complete(taxonomy, &aspect, "sampled enough threat models")
                .unwrap();
        }
        s.finalize(taxonomy).unwrap();
        debug_assert!(s
            .scenarios
            .iter()
            .all(|sc| sc.status == ScenarioStatus::Complete));
    } else {
        for aspect in s.next_aspects(taxonomy) {
            if rng.random_bool(0.3) {
                s.mark_aspect_complete(taxonomy, &aspect, "partial")
                    .unwrap();
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_sessions_validate() {
        let t = Taxonomy::bundled();
        let mut r = rng(7);
        for i in 0..40 {
            let shape = SessionShape {
                finalize: i % 2 == 0,
                ..SessionShape::default()
            };
            let s = random_session(&mut r, t, shape);
            assert!(s.validate(t).is_empty(), "{:?}", s.validate(t));
            assert_eq!(s.is_finalized(), shape.finalize);
        }
    }
}

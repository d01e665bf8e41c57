use serde::{Deserialize, Serialize};

use crate::calculus::{risk_level, HarmSeverityLevel, LikelihoodLevel, RiskLevel};
use crate::pathway::{InteractionCell, RiskPathway};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateRound {
    Initial,
    PostRecalibration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateEntry {
    pub assessor: String,
    pub hsl: HarmSeverityLevel,
    pub ll: LikelihoodLevel,
    pub round: EstimateRound,
}

impl EstimateEntry {
    pub fn risk_level(&self) -> RiskLevel {
        risk_level(self.hsl, self.ll)
    }
}

/// A post-recalibration estimate submitted for one outcome of a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecalibrationEntry {
    pub assessor: String,
    pub outcome_index: usize,
    pub hsl: HarmSeverityLevel,
    pub ll: LikelihoodLevel,
}

/// Uncertainty-tracing documentation attached to a scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rationale {
    pub key_assumptions: String,
    pub evidence_quality: String,
    pub known_uncertainties: String,
    pub sensitivity_notes: String,
    pub operator_or_interaction_rationale: Option<String>,
}

impl Rationale {
    /// Names of mandatory fields that are blank.
    pub fn missing_mandatory(&self) -> Vec<&'static str> {
        [
            ("key_assumptions", &self.key_assumptions),
            ("evidence_quality", &self.evidence_quality),
            ("known_uncertainties", &self.known_uncertainties),
        ]
        .into_iter()
        .filter(|(_, v)| v.trim().is_empty())
        .map(|(name, _)| name)
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalEstimate {
    pub hsl: HarmSeverityLevel,
    pub ll: LikelihoodLevel,
    pub risk_level: RiskLevel,
}

impl FinalEstimate {
    pub fn new(hsl: HarmSeverityLevel, ll: LikelihoodLevel) -> Self {
        Self {
            hsl,
            ll,
            risk_level: risk_level(hsl, ll),
        }
    }
}

/// One severity outcome of a scenario with every assessor's estimates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: String,
    pub estimates: Vec<EstimateEntry>,
    pub final_estimate: Option<FinalEstimate>,
}

impl Outcome {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            estimates: Vec::new(),
            final_estimate: None,
        }
    }

    pub fn entries(&self, round: EstimateRound) -> impl Iterator<Item = &EstimateEntry> {
        self.estimates.iter().filter(move |e| e.round == round)
    }

    pub fn entry(&self, assessor: &str, round: EstimateRound) -> Option<&EstimateEntry> {
        self.entries(round).find(|e| e.assessor == assessor)
    }

    /// Inserts or replaces the assessor's entry for that round.
    pub(crate) fn upsert(&mut self, entry: EstimateEntry) {
        match self
            .estimates
            .iter_mut()
            .find(|e| e.assessor == entry.assessor && e.round == entry.round)
        {
            Some(existing) => *existing = entry,
            None => self.estimates.push(entry),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioOrder {
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardMode {
    Competence,
    Incompetence,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioStatus {
    Draft,
    Estimated,
    Recalibrating,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub aspect_ref: String,
    pub order: ScenarioOrder,
    pub prop_enhanced: bool,
    pub propagation_operator: Option<String>,
    pub hazard_mode: HazardMode,
    pub narrative: String,
    pub pathway: Option<RiskPathway>,
    pub interaction: Option<InteractionCell>,
    pub parent_scenario: Option<String>,
    pub outcomes: Vec<Outcome>,
    pub dimension_refs: Vec<String>,
    pub rationale: Rationale,
    pub status: ScenarioStatus,
}

impl ScenarioRecord {
    /// A first-order draft with a single outcome slot.
    pub fn new(
        id: impl Into<String>,
        aspect_ref: impl Into<String>,
        hazard_mode: HazardMode,
        narrative: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            aspect_ref: aspect_ref.into(),
            order: ScenarioOrder::FirstOrder,
            prop_enhanced: false,
            propagation_operator: None,
            hazard_mode,
            narrative: narrative.into(),
            pathway: None,
            interaction: None,
            parent_scenario: None,
            outcomes: vec![Outcome::new("primary")],
            dimension_refs: Vec::new(),
            rationale: Rationale::default(),
            status: ScenarioStatus::Draft,
        }
    }

    pub fn second_order(mut self, interaction: InteractionCell) -> Self {
        self.order = ScenarioOrder::SecondOrder;
        self.interaction = Some(interaction);
        self
    }

    pub fn with_outcomes<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.outcomes = labels.into_iter().map(Outcome::new).collect();
        self
    }

    pub fn with_dimensions<I, S>(mut self, dims: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.dimension_refs = dims.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_pathway(mut self, pathway: RiskPathway) -> Self {
        self.pathway = Some(pathway);
        self
    }

    /// Highest final risk level across outcomes, once complete.
    pub fn risk_level(&self) -> Option<RiskLevel> {
        if self.status != ScenarioStatus::Complete {
            return None;
        }
        self.outcomes
            .iter()
            .filter_map(|o| o.final_estimate.map(|f| f.risk_level))
            .max()
    }

    pub fn has_estimates(&self) -> bool {
        self.outcomes
            .iter()
            .any(|o| !o.estimates.is_empty() || o.final_estimate.is_some())
    }
}

/// Spread thresholds above which a team's initial estimates count as
/// diverging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceThreshold {
    pub ll_spread: u8,
    pub hsl_spread: u8,
}

impl Default for DivergenceThreshold {
    fn default() -> Self {
        Self {
            ll_spread: 2,
            hsl_spread: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceFlag {
    pub outcome_index: usize,
    pub ll_spread: u8,
    pub hsl_spread: u8,
}

/// Outcomes whose initial estimates spread by at least the threshold in LL
/// or in HSL.
pub fn detect_divergence(
    scenario: &ScenarioRecord,
    threshold: DivergenceThreshold,
) -> Vec<DivergenceFlag> {
    fn spread(values: &[u8]) -> u8 {
        let max = values.iter().max().copied().unwrap_or(0);
        let min = values.iter().min().copied().unwrap_or(0);
        max - min
    }

    scenario
        .outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, outcome)| {
            let (lls, hsls): (Vec<u8>, Vec<u8>) = outcome
                .entries(EstimateRound::Initial)
                .map(|e| (e.ll.value(), e.hsl.value()))
                .unzip();
            let ll_spread = spread(&lls);
            let hsl_spread = spread(&hsls);
            (ll_spread >= threshold.ll_spread || hsl_spread >= threshold.hsl_spread).then_some(
                DivergenceFlag {
                    outcome_index: i,
                    ll_spread,
                    hsl_spread,
                },
            )
        })
        .collect()
}

/// Entry with the highest risk level; ties go to the higher HSL, then the
/// higher LL.
pub fn select_final<'a, I>(entries: I) -> Option<FinalEstimate>
where
    I: IntoIterator<Item = &'a EstimateEntry>,
{
    entries
        .into_iter()
        .max_by_key(|e| (e.risk_level(), e.hsl, e.ll))
        .map(|e| FinalEstimate::new(e.hsl, e.ll))
}

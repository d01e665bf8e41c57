//! Risk pathways from a source aspect to an impact-domain terminal aspect,
//! the propagation operator catalog, and second-order interaction cells.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{ScenarioRecord, ScenarioStatus};
use crate::calculus::{
    compose_sequential, ll_conservative, CalculusError, LikelihoodLevel, ProbabilityInterval,
};
use crate::taxonomy::{slugify, AspectCategory, Taxonomy};

const BUNDLED_OPERATORS: &str = include_str!("../data/operators.json");

#[derive(Debug, Error, PartialEq)]
pub enum PathwayError {
    #[error("step {step} has no probability")]
    MissingProbability { step: usize },
    #[error("pathway has no steps")]
    Empty,
    #[error("unknown propagation operator `{0}`")]
    UnknownOperator(String),
    #[error("interaction pairs need at least 2 distinct aspects, got {0}")]
    TooFewAspects(usize),
    #[error("an interaction cell needs two different aspects, got `{0}` twice")]
    SelfInteraction(String),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorCategory {
    Aggregates,
    Periodic,
    DeviatedOutputs,
    AlignmentModification,
    Distributive,
    InformationAsymmetry,
    SociotechnicalDiffusion,
}

impl OperatorCategory {
    pub const ALL: [OperatorCategory; 7] = [
        Self::Aggregates,
        Self::Periodic,
        Self::DeviatedOutputs,
        Self::AlignmentModification,
        Self::Distributive,
        Self::InformationAsymmetry,
        Self::SociotechnicalDiffusion,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Aggregates => "Aggregates",
            Self::Periodic => "Periodic",
            Self::DeviatedOutputs => "Deviated Outputs",
            Self::AlignmentModification => "Alignment Modification",
            Self::Distributive => "Distributive",
            Self::InformationAsymmetry => "Information Asymmetry",
            Self::SociotechnicalDiffusion => "Sociotechnical Diffusion",
        }
    }
}

impl fmt::Display for OperatorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationOperator {
    pub name: String,
    pub category: OperatorCategory,
    pub description: String,
}

#[derive(Deserialize)]
struct OperatorDocument {
    operators: Vec<PropagationOperator>,
}

/// The closed catalog, in category order.
pub fn operator_catalog() -> &'static [PropagationOperator] {
    static CATALOG: OnceLock<Vec<PropagationOperator>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let mut doc: OperatorDocument =
            serde_json::from_str(BUNDLED_OPERATORS).expect("bundled operator catalog parses");
        doc.operators.sort_by_key(|op| op.category);
        doc.operators
    })
}

/// Case- and whitespace-insensitive lookup by name.
pub fn find_operator(name: &str) -> Result<&'static PropagationOperator, PathwayError> {
    let wanted = slugify(name);
    operator_catalog()
        .iter()
        .find(|op| slugify(&op.name) == wanted)
        .ok_or_else(|| PathwayError::UnknownOperator(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    SourceHazard,
    Intermediate,
    TerminalHazard,
}

/// Conditional probability of a step given every earlier step occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepProbability {
    Interval(ProbabilityInterval),
    Level(LikelihoodLevel),
}

impl StepProbability {
    pub fn interval(self) -> ProbabilityInterval {
        match self {
            Self::Interval(i) => i,
            Self::Level(ll) => ProbabilityInterval::from_level(ll),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayStep {
    pub description: String,
    pub step_kind: StepKind,
    pub probability: Option<StepProbability>,
    pub operator_in: Option<String>,
}

impl PathwayStep {
    pub fn new(kind: StepKind, description: impl Into<String>) -> Self {
        Self {
            description: description.into(),
            step_kind: kind,
            probability: None,
            operator_in: None,
        }
    }

    pub fn with_probability(mut self, p: StepProbability) -> Self {
        self.probability = Some(p);
        self
    }

    pub fn with_operator(mut self, op: &PropagationOperator) -> Self {
        self.operator_in = Some(op.name.clone());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainDirection {
    Forward,
    Backward,
}

/// Steps are always stored source first, whatever the build direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPathway {
    pub source_aspect: String,
    pub steps: Vec<PathwayStep>,
    pub terminal_aspect: String,
    pub direction_built: ChainDirection,
}

/// Assembles a pathway step by step.
///
/// A forward builder is seeded with the source hazard and grows toward the
/// terminal; a backward builder is seeded with the terminal hazard and each
/// `step` call prepends an earlier cause.
#[derive(Debug, Clone)]
pub struct PathwayBuilder {
    direction: ChainDirection,
    source_aspect: String,
    terminal_aspect: String,
    seed: PathwayStep,
    intermediates: Vec<PathwayStep>,
}

impl PathwayBuilder {
    pub fn forward(
        source_aspect: impl Into<String>,
        terminal_aspect: impl Into<String>,
        source_hazard: impl Into<String>,
        probability: Option<StepProbability>,
    ) -> Self {
        let mut seed = PathwayStep::new(StepKind::SourceHazard, source_hazard);
        seed.probability = probability;
        Self {
            direction: ChainDirection::Forward,
            source_aspect: source_aspect.into(),
            terminal_aspect: terminal_aspect.into(),
            seed,
            intermediates: Vec::new(),
        }
    }

    pub fn backward(
        source_aspect: impl Into<String>,
        terminal_aspect: impl Into<String>,
        terminal_hazard: impl Into<String>,
        probability: Option<StepProbability>,
    ) -> Self {
        let mut seed = PathwayStep::new(StepKind::TerminalHazard, terminal_hazard);
        seed.probability = probability;
        Self {
            direction: ChainDirection::Backward,
            source_aspect: source_aspect.into(),
            terminal_aspect: terminal_aspect.into(),
            seed,
            intermediates: Vec::new(),
        }
    }

    /// Adds an intermediate step next to the growing end of the chain.
    pub fn step(
        mut self,
        description: impl Into<String>,
        probability: Option<StepProbability>,
    ) -> Self {
        let mut step = PathwayStep::new(StepKind::Intermediate, description);
        step.probability = probability;
        self.intermediates.push(step);
        self
    }

    /// Like [`step`](Self::step), recording the operator that carried risk
    /// into it.
    pub fn step_via(
        self,
        operator: &PropagationOperator,
        description: impl Into<String>,
        probability: Option<StepProbability>,
    ) -> Self {
        let mut this = self.step(description, probability);
        this.intermediates
            .last_mut()
            .expect("just pushed")
            .operator_in = Some(operator.name.clone());
        this
    }

    /// Closes the chain with the remaining end (the terminal hazard for a
    /// forward build, the source hazard for a backward one).
    pub fn finish(
        self,
        description: impl Into<String>,
        probability: Option<StepProbability>,
    ) -> RiskPathway {
        let steps = match self.direction {
            ChainDirection::Forward => {
                let mut end = PathwayStep::new(StepKind::TerminalHazard, description);
                end.probability = probability;
                std::iter::once(self.seed)
                    .chain(self.intermediates)
                    .chain(std::iter::once(end))
                    .collect()
            }
            ChainDirection::Backward => {
                let mut start = PathwayStep::new(StepKind::SourceHazard, description);
                start.probability = probability;
                std::iter::once(start)
                    .chain(self.intermediates.into_iter().rev())
                    .chain(std::iter::once(self.seed))
                    .collect()
            }
        };
        RiskPathway {
            source_aspect: self.source_aspect,
            steps,
            terminal_aspect: self.terminal_aspect,
            direction_built: self.direction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayViolation {
    /// `source_aspect`, `terminal_aspect`, `steps` or `steps[i]`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for PathwayViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<PathwayViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(PathwayViolation {
            field: field.into(),
            message: message.into(),
        });
    }
}

pub fn validate_pathway(taxonomy: &Taxonomy, p: &RiskPathway) -> ValidationReport {
    let mut report = ValidationReport::default();

    match taxonomy.category(&p.source_aspect) {
        Ok(cat) if cat.is_source() => {}
        Ok(_) => report.push(
            "source_aspect",
            "source must be a capability, domain knowledge or affordance aspect",
        ),
        Err(_) => report.push(
            "source_aspect",
            format!("unknown aspect `{}`", p.source_aspect),
        ),
    }
    match taxonomy.category(&p.terminal_aspect) {
        Ok(AspectCategory::ImpactDomain) => {}
        Ok(_) => report.push("terminal_aspect", "terminal must be an impact domain"),
        Err(_) => report.push(
            "terminal_aspect",
            format!("unknown aspect `{}`", p.terminal_aspect),
        ),
    }

    if p.steps.len() < 2 {
        report.push(
            "steps",
            "a pathway needs at least a source hazard and a terminal hazard",
        );
    }
    let last = p.steps.len().saturating_sub(1);
    for (i, step) in p.steps.iter().enumerate() {
        let expected = if i == 0 {
            StepKind::SourceHazard
        } else if i == last {
            StepKind::TerminalHazard
        } else {
            StepKind::Intermediate
        };
        if step.step_kind != expected {
            report.push(
                format!("steps[{i}]"),
                format!("expected {expected:?}, found {:?}", step.step_kind),
            );
        }
        if let Some(op) = &step.operator_in {
            if find_operator(op).is_err() {
                report.push(
                    format!("steps[{i}]"),
                    format!("unknown propagation operator `{op}`"),
                );
            }
        }
    }
    report
}

/// Composed probability of the whole chain and its conservative level.
pub fn pathway_likelihood(
    p: &RiskPathway,
) -> Result<(ProbabilityInterval, LikelihoodLevel), PathwayError> {
    if p.steps.is_empty() {
        return Err(PathwayError::Empty);
    }
    let intervals = p
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.probability
                .map(StepProbability::interval)
                .ok_or(PathwayError::MissingProbability { step: i + 1 })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let composed = compose_sequential(&intervals);
    Ok((composed, ll_conservative(composed)?))
}

/// Unordered pair of aspects; `aspect_a` sorts before `aspect_b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionCell {
    pub aspect_a: String,
    pub aspect_b: String,
    #[serde(default)]
    pub rationale: String,
}

impl InteractionCell {
    pub fn new(
        a: impl Into<String>,
        b: impl Into<String>,
        rationale: impl Into<String>,
    ) -> Result<Self, PathwayError> {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return Err(PathwayError::SelfInteraction(a));
        }
        let (aspect_a, aspect_b) = if a <= b { (a, b) } else { (b, a) };
        Ok(Self {
            aspect_a,
            aspect_b,
            rationale: rationale.into(),
        })
    }

    /// Same unordered pair, regardless of stored order or rationale.
    pub fn same_pair(&self, other: &InteractionCell) -> bool {
        let mine = sorted_pair(&self.aspect_a, &self.aspect_b);
        mine == sorted_pair(&other.aspect_a, &other.aspect_b)
    }
}

fn sorted_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Every unordered pair of the distinct inputs, in first-occurrence order.
pub fn interaction_pairs<S: AsRef<str>>(
    aspects: &[S],
) -> Result<Vec<InteractionCell>, PathwayError> {
    let mut seen = BTreeSet::new();
    let distinct: Vec<&str> = aspects
        .iter()
        .map(AsRef::as_ref)
        .filter(|a| seen.insert(*a))
        .collect();
    if distinct.len() < 2 {
        return Err(PathwayError::TooFewAspects(distinct.len()));
    }
    let mut out = Vec::with_capacity(distinct.len() * (distinct.len() - 1) / 2);
    for (i, a) in distinct.iter().enumerate() {
        for b in &distinct[i + 1..] {
            out.push(InteractionCell::new(*a, *b, "")?);
        }
    }
    Ok(out)
}

/// Derives a propagation-enhanced variant of `parent`.
///
/// The child gets id `{parent}+{operator slug}`, a parent link, the
/// operator, and `narrative_delta` appended to the narrative. If the parent
/// has a pathway, a new intermediate step entered via the operator is placed
/// before the terminal hazard. Estimates, final estimates, step
/// probabilities and rationale are cleared and the status is back to Draft.
pub fn apply_operator(
    parent: &ScenarioRecord,
    operator: &str,
    narrative_delta: &str,
) -> Result<ScenarioRecord, PathwayError> {
    let op = find_operator(operator)?;
    let mut child = parent.clone();
    child.id = format!("{}+{}", parent.id, slugify(&op.name));
    child.prop_enhanced = true;
    child.parent_scenario = Some(parent.id.clone());
    child.propagation_operator = Some(op.name.clone());
    if !narrative_delta.trim().is_empty() {
        child.narrative = if parent.narrative.is_empty() {
            narrative_delta.to_string()
        } else {
            format!("{}\n{}", parent.narrative, narrative_delta)
        };
    }
    if let Some(pathway) = &mut child.pathway {
        for step in &mut pathway.steps {
            step.probability = None;
        }
        let at = pathway.steps.len().saturating_sub(1);
        let mut step = PathwayStep::new(StepKind::Intermediate, narrative_delta).with_operator(op);
        if narrative_delta.trim().is_empty() {
            step.description = op.name.clone();
        }
        pathway.steps.insert(at, step);
    }
    for outcome in &mut child.outcomes {
        outcome.estimates.clear();
        outcome.final_estimate = None;
    }
    child.rationale = Default::default();
    child.status = ScenarioStatus::Draft;
    Ok(child)
}

//! Formal outputs of a finalized session: the report card, the tallied risk
//! matrix and the output log, plus focused aggregation, card diffs and
//! rendering.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assessment::{AssessmentSession, ScenarioOrder, ScenarioRecord, SystemInfo};
use crate::calculus::{HarmSeverityLevel, LikelihoodLevel, RiskLevel};
use crate::taxonomy::{Taxonomy, TaxonomyError, TaxonomyLevel};

const BUNDLED_SCHEME: &str = include_str!("../data/focused_dimensions.json");

pub const DISCLAIMER: &str = "These results record structured expert judgement about one \
system over the stated time frame and protocol. They are not measurements. Read the report \
card together with the tallied risk matrix and the output log, and weigh it alongside other \
quantitative and qualitative evaluations before drawing conclusions.";

#[derive(Debug, Error)]
pub enum ReportingError {
    #[error("session not finalized")]
    NotFinalized,
    #[error("a focused scheme needs at least 2 dimensions, got {0}")]
    SchemeTooSmall(usize),
    #[error("focused scheme lists dimension `{0}` twice")]
    DuplicateDimension(String),
    #[error("scenario `{scenario}` maps to dimension `{dimension}`, which scheme `{scheme}` does not define")]
    DanglingDimension {
        scenario: String,
        dimension: String,
        scheme: String,
    },
    #[error("report cards differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("unknown report format `{0}` (expected md, table or structured)")]
    UnknownFormat(String),
    #[error("structured report does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentTypeColumn {
    FirstOrder,
    FirstOrderProp,
    SecondOrder,
    SecondOrderProp,
}

impl AssessmentTypeColumn {
    pub const ALL: [AssessmentTypeColumn; 4] = [
        Self::FirstOrder,
        Self::FirstOrderProp,
        Self::SecondOrder,
        Self::SecondOrderProp,
    ];

    pub fn of(scenario: &ScenarioRecord) -> Self {
        match (scenario.order, scenario.prop_enhanced) {
            (ScenarioOrder::FirstOrder, false) => Self::FirstOrder,
            (ScenarioOrder::FirstOrder, true) => Self::FirstOrderProp,
            (ScenarioOrder::SecondOrder, false) => Self::SecondOrder,
            (ScenarioOrder::SecondOrder, true) => Self::SecondOrderProp,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::FirstOrder => "First order",
            Self::FirstOrderProp => "First order + prop",
            Self::SecondOrder => "Second order",
            Self::SecondOrderProp => "Second order + prop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusedDimension {
    pub id: String,
    pub label: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusedScheme {
    pub name: String,
    pub dimensions: Vec<FocusedDimension>,
}

impl FocusedScheme {
    /// The six default systemic dimensions.
    pub fn default_scheme() -> &'static FocusedScheme {
        static SCHEME: OnceLock<FocusedScheme> = OnceLock::new();
        SCHEME.get_or_init(|| {
            serde_json::from_str(BUNDLED_SCHEME).expect("bundled focused scheme parses")
        })
    }

    pub fn custom(
        name: impl Into<String>,
        dimensions: Vec<FocusedDimension>,
    ) -> Result<Self, ReportingError> {
        let scheme = Self {
            name: name.into(),
            dimensions,
        };
        scheme.check()?;
        Ok(scheme)
    }

    pub fn check(&self) -> Result<(), ReportingError> {
        if self.dimensions.len() < 2 {
            return Err(ReportingError::SchemeTooSmall(self.dimensions.len()));
        }
        let mut seen = BTreeSet::new();
        for d in &self.dimensions {
            if !seen.insert(d.id.as_str()) {
                return Err(ReportingError::DuplicateDimension(d.id.clone()));
            }
        }
        Ok(())
    }

    pub fn dimension(&self, id: &str) -> Option<&FocusedDimension> {
        self.dimensions.iter().find(|d| d.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusedValue {
    pub dimension_id: String,
    pub label: String,
    pub risk_level: Option<RiskLevel>,
}

/// One radar axis. `None` is a gap (unassessed), distinct from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub label: String,
    pub value: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportContext {
    pub session_id: String,
    pub assessment_type_code: String,
    pub revision: u64,
    pub system_info: SystemInfo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCardRow {
    pub group_id: String,
    pub group_label: String,
    /// Indexed by [`AssessmentTypeColumn::index`]; `None` is unassessed.
    pub cells: [Option<RiskLevel>; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCard {
    pub context: ReportContext,
    pub scheme: String,
    pub rows: Vec<ReportCardRow>,
    pub total_max: Option<RiskLevel>,
    pub focused: Vec<FocusedValue>,
    pub radar: Vec<RadarPoint>,
}

impl ReportCard {
    pub fn cell(&self, group_id: &str, column: AssessmentTypeColumn) -> Option<RiskLevel> {
        self.rows
            .iter()
            .find(|r| r.group_id == group_id)
            .and_then(|r| r.cells[column.index()])
    }
}

/// The TL1 aspect group a scenario rolls up into.
pub fn aspect_group<'t>(
    taxonomy: &'t Taxonomy,
    scenario: &ScenarioRecord,
) -> Result<&'t str, ReportingError> {
    taxonomy
        .ancestor_at(&scenario.aspect_ref, TaxonomyLevel::TL1)?
        .map(|n| n.id.as_str())
        .ok_or_else(|| {
            ReportingError::Taxonomy(TaxonomyError::UnknownId(scenario.aspect_ref.clone()))
        })
}

fn require_finalized(session: &AssessmentSession) -> Result<(), ReportingError> {
    if session.is_finalized() {
        Ok(())
    } else {
        Err(ReportingError::NotFinalized)
    }
}

pub fn report_card(
    session: &AssessmentSession,
    taxonomy: &Taxonomy,
    scheme: &FocusedScheme,
) -> Result<ReportCard, ReportingError> {
    require_finalized(session)?;
    scheme.check()?;
    let mut rows: Vec<ReportCardRow> = taxonomy
        .at_level(TaxonomyLevel::TL1)
        .map(|n| ReportCardRow {
            group_id: n.id.clone(),
            group_label: n.label.clone(),
            cells: [None; 4],
        })
        .collect();
    for (scenario, rl) in session.completed() {
        let group = aspect_group(taxonomy, scenario)?;
        let row = rows
            .iter_mut()
            .find(|r| r.group_id == group)
            .expect("every TL1 node has a row");
        let cell = &mut row.cells[AssessmentTypeColumn::of(scenario).index()];
        *cell = (*cell).max(Some(rl));
    }
    let total_max = rows.iter().flat_map(|r| r.cells).flatten().max();
    let focused = focused_aggregation(session, scheme)?;
    let radar = focused
        .iter()
        .map(|f| RadarPoint {
            label: f.label.clone(),
            value: f.risk_level.map(RiskLevel::value),
        })
        .collect();
    Ok(ReportCard {
        context: ReportContext {
            session_id: session.id.clone(),
            assessment_type_code: session.system_info.assessment_type_code.clone(),
            revision: session.revision,
            system_info: session.system_info.clone(),
        },
        scheme: scheme.name.clone(),
        rows,
        total_max,
        focused,
        radar,
    })
}

/// Max risk level per dimension over complete scenarios mapped to it.
pub fn focused_aggregation(
    session: &AssessmentSession,
    scheme: &FocusedScheme,
) -> Result<Vec<FocusedValue>, ReportingError> {
    for scenario in &session.scenarios {
        if let Some(dangling) = scenario
            .dimension_refs
            .iter()
            .find(|d| scheme.dimension(d).is_none())
        {
            return Err(ReportingError::DanglingDimension {
                scenario: scenario.id.clone(),
                dimension: dangling.clone(),
                scheme: scheme.name.clone(),
            });
        }
    }
    Ok(scheme
        .dimensions
        .iter()
        .map(|d| FocusedValue {
            dimension_id: d.id.clone(),
            label: d.label.clone(),
            risk_level: session
                .completed()
                .filter(|(s, _)| s.dimension_refs.contains(&d.id))
                .map(|(_, rl)| rl)
                .max(),
        })
        .collect())
}

/// Count of final outcome pairs, indexed `[ll][hsl - 1]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TalliedRiskMatrix {
    pub counts: [[u32; 6]; 9],
}

impl TalliedRiskMatrix {
    pub fn get(&self, hsl: HarmSeverityLevel, ll: LikelihoodLevel) -> u32 {
        self.counts[ll.value() as usize][hsl.value() as usize - 1]
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }
}

pub fn tallied_matrix(session: &AssessmentSession) -> Result<TalliedRiskMatrix, ReportingError> {
    require_finalized(session)?;
    let mut m = TalliedRiskMatrix::default();
    for (scenario, _) in session.completed() {
        for f in scenario.outcomes.iter().filter_map(|o| o.final_estimate) {
            m.counts[f.ll.value() as usize][f.hsl.value() as usize - 1] += 1;
        }
    }
    Ok(m)
}

#[derive(Serialize)]
struct LogBody<'a> {
    completed_at: &'a DateTime<Utc>,
    snapshot: &'a AssessmentSession,
}

/// Immutable record of a finalized session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLog {
    pub completed_at: DateTime<Utc>,
    pub snapshot: AssessmentSession,
    /// SHA-256 hex of the canonical serialization of the two fields above.
    pub content_digest: String,
}

fn log_digest(completed_at: &DateTime<Utc>, snapshot: &AssessmentSession) -> String {
    let body = serde_json::to_vec(&LogBody {
        completed_at,
        snapshot,
    })
    .expect("sessions always serialize");
    hex::encode(Sha256::digest(body))
}

pub fn emit_output_log(
    session: &AssessmentSession,
    completed_at: DateTime<Utc>,
) -> Result<OutputLog, ReportingError> {
    require_finalized(session)?;
    Ok(OutputLog {
        content_digest: log_digest(&completed_at, session),
        completed_at,
        snapshot: session.clone(),
    })
}

impl OutputLog {
    /// True when the digest still matches the content.
    pub fn verify(&self) -> bool {
        log_digest(&self.completed_at, &self.snapshot) == self.content_digest
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("output logs always serialize");
        out.push(b'\n');
        out
    }
}

/// Change of one cell between two report cards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum CellChange {
    BothUnassessed,
    Delta(i8),
    NewlyAssessed(RiskLevel),
    NoLongerAssessed(RiskLevel),
}

impl CellChange {
    fn between(a: Option<RiskLevel>, b: Option<RiskLevel>) -> Self {
        match (a, b) {
            (None, None) => Self::BothUnassessed,
            (Some(a), Some(b)) => Self::Delta(b.value() as i8 - a.value() as i8),
            (None, Some(b)) => Self::NewlyAssessed(b),
            (Some(a), None) => Self::NoLongerAssessed(a),
        }
    }

    pub fn is_unchanged(self) -> bool {
        matches!(self, Self::BothUnassessed | Self::Delta(0))
    }
}

impl fmt::Display for CellChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BothUnassessed => f.write_str("unassessed"),
            Self::Delta(d) => write!(f, "{d:+}"),
            Self::NewlyAssessed(rl) => write!(f, "newly assessed ({rl})"),
            Self::NoLongerAssessed(rl) => write!(f, "no longer assessed (was {rl})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDiff {
    pub group_id: String,
    pub cells: [CellChange; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FocusedDiff {
    pub dimension_id: String,
    pub change: CellChange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCardDiff {
    pub rows: Vec<RowDiff>,
    pub total_max: CellChange,
    pub focused: Vec<FocusedDiff>,
}

impl ReportCardDiff {
    pub fn is_unchanged(&self) -> bool {
        self.total_max.is_unchanged()
            && self
                .rows
                .iter()
                .flat_map(|r| r.cells)
                .all(CellChange::is_unchanged)
            && self.focused.iter().all(|f| f.change.is_unchanged())
    }
}

/// Cell-wise change from `a` to `b`.
pub fn diff_report_cards(a: &ReportCard, b: &ReportCard) -> Result<ReportCardDiff, ReportingError> {
    let groups = |c: &ReportCard| {
        c.rows
            .iter()
            .map(|r| r.group_id.clone())
            .collect::<Vec<_>>()
    };
    if groups(a) != groups(b) {
        return Err(ReportingError::ShapeMismatch("aspect groups differ".into()));
    }
    let dims = |c: &ReportCard| {
        c.focused
            .iter()
            .map(|f| f.dimension_id.clone())
            .collect::<Vec<_>>()
    };
    if a.scheme != b.scheme || dims(a) != dims(b) {
        return Err(ReportingError::ShapeMismatch(format!(
            "focused schemes differ (`{}` vs `{}`)",
            a.scheme, b.scheme
        )));
    }
    Ok(ReportCardDiff {
        rows: a
            .rows
            .iter()
            .zip(&b.rows)
            .map(|(ra, rb)| RowDiff {
                group_id: ra.group_id.clone(),
                cells: std::array::from_fn(|i| CellChange::between(ra.cells[i], rb.cells[i])),
            })
            .collect(),
        total_max: CellChange::between(a.total_max, b.total_max),
        focused: a
            .focused
            .iter()
            .zip(&b.focused)
            .map(|(fa, fb)| FocusedDiff {
                dimension_id: fa.dimension_id.clone(),
                change: CellChange::between(fa.risk_level, fb.risk_level),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    DelimitedTable,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = ReportingError;

    fn from_str(s: &str) -> Result<Self, ReportingError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Self::Markdown),
            "table" | "csv" | "delimited" => Ok(Self::DelimitedTable),
            "structured" | "json" => Ok(Self::Structured),
            _ => Err(ReportingError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredReport {
    pub report_card: ReportCard,
    pub tallied_matrix: TalliedRiskMatrix,
    pub disclaimer: String,
}

pub fn parse_structured(src: &str) -> Result<StructuredReport, ReportingError> {
    Ok(serde_json::from_str(src)?)
}

fn cell_text(rl: Option<RiskLevel>) -> String {
    rl.map_or_else(|| "Unassessed".to_string(), |rl| rl.value().to_string())
}

pub fn render_report(
    card: &ReportCard,
    matrix: &TalliedRiskMatrix,
    format: ReportFormat,
) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(card, matrix),
        ReportFormat::DelimitedTable => render_delimited(card, matrix),
        ReportFormat::Structured => {
            let doc = StructuredReport {
                report_card: card.clone(),
                tallied_matrix: matrix.clone(),
                disclaimer: DISCLAIMER.to_string(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("reports always serialize");
            s.push('\n');
            s
        }
    }
}

fn render_markdown(card: &ReportCard, matrix: &TalliedRiskMatrix) -> String {
    let info = &card.context.system_info;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Report Card: {} {}\n",
        info.system_name, info.version
    );
    let team = info
        .team_composition
        .iter()
        .map(|m| {
            if m.role.is_empty() {
                m.name.clone()
            } else {
                format!("{} ({})", m.name, m.role)
            }
        })
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str("| Field | Value |\n|---|---|\n");
    for (k, v) in [
        ("Assessment type", card.context.assessment_type_code.clone()),
        ("Session", card.context.session_id.clone()),
        ("Assessment date", info.assessment_date.to_string()),
        ("Organization", info.assessing_organization.clone()),
        ("Team", team),
        ("Time frame", info.assessment_time_frame.to_string()),
        ("Access level", info.access_level.clone()),
        ("Generational scope", info.generational_scope.clone()),
        (
            "System-level assumptions",
            info.system_level_assumptions.clone(),
        ),
    ] {
        let _ = writeln!(out, "| {k} | {} |", v.replace('|', "\\|"));
    }

    out.push_str("\n## Risk levels by aspect group\n\n| Aspect group |");
    for col in AssessmentTypeColumn::ALL {
        let _ = write!(out, " {} |", col.label());
    }
    out.push_str("\n|---|---|---|---|---|\n");
    for row in &card.rows {
        let _ = write!(out, "| {} |", row.group_label);
        for cell in row.cells {
            let _ = write!(out, " {} |", cell_text(cell));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "\n**Total (max):** {}\n", cell_text(card.total_max));

    let _ = writeln!(
        out,
        "## Focused aggregation ({})\n\n| Dimension | Risk level |\n|---|---|",
        card.scheme
    );
    for f in &card.focused {
        let _ = writeln!(out, "| {} | {} |", f.label, cell_text(f.risk_level));
    }

    out.push_str("\n## Tallied risk matrix\n\n| LL \\ HSL |");
    for h in HarmSeverityLevel::all() {
        let _ = write!(out, " {h} |");
    }
    out.push_str("\n|---|---|---|---|---|---|---|\n");
    for l in LikelihoodLevel::all().rev() {
        let _ = write!(out, "| {l} |");
        for h in HarmSeverityLevel::all() {
            let _ = write!(out, " {} |", matrix.get(h, l));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "\nScenario outcomes tallied: {}\n", matrix.total());
    let _ = writeln!(out, "## Disclaimer\n\n{DISCLAIMER}");
    out
}

fn render_delimited(card: &ReportCard, matrix: &TalliedRiskMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut row = |fields: [&str; 4]| w.write_record(fields).expect("in-memory write");
    row(["section", "key", "column", "value"]);
    row([
        "context",
        "assessment_type_code",
        "",
        &card.context.assessment_type_code,
    ]);
    row([
        "context",
        "system_name",
        "",
        &card.context.system_info.system_name,
    ]);
    row(["context", "version", "", &card.context.system_info.version]);
    for r in &card.rows {
        for col in AssessmentTypeColumn::ALL {
            let v = cell_text(r.cells[col.index()]);
            row(["report_card", &r.group_id, &format!("{col:?}"), &v]);
        }
    }
    row(["report_card", "total_max", "", &cell_text(card.total_max)]);
    for f in &card.focused {
        row([
            "focused",
            &f.dimension_id,
            &card.scheme,
            &cell_text(f.risk_level),
        ]);
    }
    for l in LikelihoodLevel::all().rev() {
        for h in HarmSeverityLevel::all() {
            row([
                "tallied_matrix",
                &l.to_string(),
                &h.to_string(),
                &matrix.get(h, l).to_string(),
            ]);
        }
    }
    row(["disclaimer", "", "", DISCLAIMER]);
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

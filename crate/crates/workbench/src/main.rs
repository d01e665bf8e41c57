use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pra_core::assessment::{
    create_session, HazardMode, Rationale, RecalibrationEntry, ScenarioRecord, SystemInfoInput,
    TeamMember, TeamMode, TimeFrame,
};
use pra_core::calculus::{HarmSeverityLevel, LikelihoodLevel};
use pra_core::pathway::InteractionCell;
use pra_core::reporting::{
    diff_report_cards, emit_output_log, render_report, report_card, tallied_matrix, FocusedScheme,
    ReportFormat,
};
use pra_core::taxonomy::{load_rubrics, load_taxonomy, Rubrics, Taxonomy};
use pra_workbench::service::{self, AppState, DEFAULT_FRAMEWORK_VERSION};
use pra_workbench::{
    apply_mutation, error_code, load_workbook, save_workbook, CommandResult, MutationEnvelope,
    SessionCommand, SessionStore, WorkbookDocument, WORKBOOK_DIR_ENV,
};

#[derive(Parser)]
#[command(
    name = "pra",
    version,
    about = "Probabilistic risk assessment workbench"
)]
struct Cli {
    /// Workbook file to read and update.
    #[arg(long, global = true, default_value = "workbook.json")]
    workbook: PathBuf,
    /// Taxonomy document to use instead of the bundled one.
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    /// Rubric document to use instead of the bundled one.
    #[arg(long, global = true)]
    rubrics: Option<PathBuf>,
    /// Name recorded as the author of mutations.
    #[arg(long, global = true, default_value = "cli")]
    actor: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a new workbook.
    Init(InitArgs),
    /// Load and validate the workbook.
    Validate,
    /// List aspects at the working level that still need completion.
    Aspects,
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Record one assessor's estimate for one outcome.
    Estimate(EstimateArgs),
    /// Flag divergent outcomes, or resolve them with --resolve.
    Recalibrate(RecalibrateArgs),
    /// Mark a working-level aspect complete.
    CompleteAspect(CompleteArgs),
    Finalize,
    /// Render the report card and tallied matrix.
    Report(ReportArgs),
    /// Emit the output log of a finalized session.
    OutputLog(OutputLogArgs),
    /// Compare this workbook's report card with another's.
    Diff(DiffArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    aml: String,
    #[arg(long, default_value = "single")]
    mode: TeamMode,
    /// Team member as "Name (Role)"; repeat for each member.
    #[arg(long = "team", required = true)]
    team: Vec<TeamMember>,
    #[arg(long)]
    date: NaiveDate,
    #[arg(long)]
    organization: String,
    #[arg(long, default_value = "1 year")]
    time_frame: TimeFrame,
    #[arg(long)]
    system_name: String,
    #[arg(long)]
    system_version: String,
    #[arg(long)]
    access_level: String,
    #[arg(long)]
    generational_scope: String,
    #[arg(long)]
    assumptions: String,
    #[arg(long, default_value = DEFAULT_FRAMEWORK_VERSION)]
    framework_version: String,
    /// Overwrite an existing workbook.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Competence,
    Incompetence,
    Combined,
}

impl From<ModeArg> for HazardMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Competence => HazardMode::Competence,
            ModeArg::Incompetence => HazardMode::Incompetence,
            ModeArg::Combined => HazardMode::Combined,
        }
    }
}

#[derive(Args, Default)]
struct RationaleArgs {
    #[arg(long)]
    key_assumptions: Option<String>,
    #[arg(long)]
    evidence_quality: Option<String>,
    #[arg(long)]
    known_uncertainties: Option<String>,
    #[arg(long)]
    sensitivity_notes: Option<String>,
    #[arg(long)]
    operator_rationale: Option<String>,
}

impl RationaleArgs {
    fn over(self, base: Rationale) -> Rationale {
        Rationale {
            key_assumptions: self.key_assumptions.unwrap_or(base.key_assumptions),
            evidence_quality: self.evidence_quality.unwrap_or(base.evidence_quality),
            known_uncertainties: self.known_uncertainties.unwrap_or(base.known_uncertainties),
            sensitivity_notes: self.sensitivity_notes.unwrap_or(base.sensitivity_notes),
            operator_or_interaction_rationale: self
                .operator_rationale
                .or(base.operator_or_interaction_rationale),
        }
    }
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum ScenarioCmd {
    /// Add a scenario from flags, or a full record with --from-json.
    Add(ScenarioAddArgs),
    /// Derive a propagation-enhanced variant of an existing scenario.
    Derive {
        #[arg(long)]
        parent: String,
        #[arg(long)]
        operator: String,
        #[arg(long, default_value = "")]
        delta: String,
    },
    List,
}

#[derive(Args)]
struct ScenarioAddArgs {
    #[arg(long, conflicts_with_all = ["id", "aspect"])]
    from_json: Option<PathBuf>,
    #[arg(long, required_unless_present = "from_json")]
    id: Option<String>,
    #[arg(long, required_unless_present = "from_json")]
    aspect: Option<String>,
    #[arg(long, value_enum, default_value = "combined")]
    mode: ModeArg,
    #[arg(long, default_value = "")]
    narrative: String,
    /// Outcome label; repeat for several outcomes.
    #[arg(long = "outcome")]
    outcomes: Vec<String>,
    /// Focused-aggregation dimension id; repeatable.
    #[arg(long = "dimension")]
    dimensions: Vec<String>,
    /// Second aspect for a second-order interaction scenario.
    #[arg(long)]
    interacts_with: Option<String>,
    #[command(flatten)]
    rationale: RationaleArgs,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    assessor: String,
    #[arg(long, default_value_t = 0)]
    outcome: usize,
    #[arg(long, value_parser = parse_hsl)]
    hsl: HarmSeverityLevel,
    #[arg(long, value_parser = parse_ll)]
    ll: LikelihoodLevel,
    #[command(flatten)]
    rationale: RationaleArgs,
}

#[derive(Args)]
struct RecalibrateArgs {
    #[arg(long)]
    scenario: String,
    /// Complete the scenario using the supplied post-recalibration entries.
    #[arg(long)]
    resolve: bool,
    /// Post-recalibration entry "assessor:outcome:hsl:ll"; repeatable.
    #[arg(long = "entry", value_parser = parse_entry, requires = "resolve")]
    entries: Vec<RecalibrationEntry>,
}

#[derive(Args)]
struct CompleteArgs {
    /// Aspect id; omit with --all to complete every remaining aspect.
    #[arg(long, required_unless_present = "all")]
    aspect: Option<String>,
    #[arg(long, conflicts_with = "aspect")]
    all: bool,
    #[arg(long)]
    rationale: String,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Custom focused-aggregation scheme (JSON).
    #[arg(long)]
    scheme: Option<PathBuf>,
}

#[derive(Args)]
struct OutputLogArgs {
    /// Completion timestamp (RFC 3339).
    #[arg(long)]
    completed_at: DateTime<Utc>,
    /// Write the log here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long)]
    against: PathBuf,
    #[arg(long)]
    scheme: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Storage root; falls back to the environment, then to memory only.
    #[arg(long, env = WORKBOOK_DIR_ENV)]
    dir: Option<PathBuf>,
}

fn parse_hsl(s: &str) -> Result<HarmSeverityLevel, String> {
    let n = level_number(s, "HSL")?;
    HarmSeverityLevel::new(n).map_err(|e| e.to_string())
}

fn parse_ll(s: &str) -> Result<LikelihoodLevel, String> {
    let n = level_number(s, "LL")?;
    LikelihoodLevel::new(n).map_err(|e| e.to_string())
}

/// Accepts `3` or `HSL-3` style input.
fn level_number(s: &str, prefix: &str) -> Result<u8, String> {
    let t = s.trim();
    let digits = t
        .strip_prefix(prefix)
        .or_else(|| t.strip_prefix(&prefix.to_ascii_lowercase()))
        .map(|r| r.trim_start_matches('-'))
        .unwrap_or(t);
    digits.parse().map_err(|_| format!("not a level: `{s}`"))
}

fn parse_entry(s: &str) -> Result<RecalibrationEntry, String> {
    let parts: Vec<&str> = s.rsplitn(4, ':').collect();
    let [ll, hsl, outcome, assessor] = parts.as_slice() else {
        return Err(format!("expected assessor:outcome:hsl:ll, got `{s}`"));
    };
    Ok(RecalibrationEntry {
        assessor: assessor.to_string(),
        outcome_index: outcome
            .parse()
            .map_err(|_| format!("bad outcome in `{s}`"))?,
        hsl: parse_hsl(hsl)?,
        ll: parse_ll(ll)?,
    })
}

struct Ctx {
    workbook: PathBuf,
    taxonomy: Taxonomy,
    rubrics: Rubrics,
    actor: String,
}

impl Ctx {
    fn load(&self) -> Result<WorkbookDocument> {
        let loaded = load_workbook(&self.workbook, &self.taxonomy)?;
        for w in &loaded.warnings {
            eprintln!("warning: {w}");
        }
        Ok(loaded.document)
    }

    /// Applies one command and saves the workbook only on success.
    fn mutate(&self, command: SessionCommand) -> Result<CommandResult> {
        let mut doc = self.load()?;
        let envelope = MutationEnvelope {
            expected_revision: doc.session.revision,
            actor: self.actor.clone(),
            command,
        };
        let applied = apply_mutation(&mut doc.session, &self.taxonomy, envelope)?;
        save_workbook(&doc, &self.workbook)?;
        Ok(applied.result)
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_scheme(path: Option<&Path>) -> Result<FocusedScheme> {
    match path {
        None => Ok(FocusedScheme::default_scheme().clone()),
        Some(p) => {
            let scheme: FocusedScheme = serde_json::from_str(&read_text(p)?)?;
            scheme.check()?;
            Ok(scheme)
        }
    }
}

fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let taxonomy = match &cli.taxonomy {
        Some(p) => load_taxonomy(&read_text(p)?)?,
        None => Taxonomy::bundled().clone(),
    };
    let rubrics = match &cli.rubrics {
        Some(p) => load_rubrics(&read_text(p)?, &taxonomy)?,
        None => Rubrics::bundled().clone(),
    };
    let ctx = Ctx {
        workbook: cli.workbook,
        taxonomy,
        rubrics,
        actor: cli.actor,
    };

    match cli.command {
        Command::Init(a) => {
            if ctx.workbook.exists() && !a.force {
                bail!(
                    "{} already exists (use --force to overwrite)",
                    ctx.workbook.display()
                );
            }
            let info = SystemInfoInput {
                assessment_date: a.date,
                team_composition: a.team,
                assessing_organization: a.organization,
                assessment_time_frame: a.time_frame,
                system_name: a.system_name,
                version: a.system_version,
                access_level: a.access_level,
                generational_scope: a.generational_scope,
                system_level_assumptions: a.assumptions,
            };
            let session = create_session(info, &a.aml, &a.framework_version, a.mode)?;
            let doc = WorkbookDocument::new(session, &ctx.taxonomy);
            save_workbook(&doc, &ctx.workbook)?;
            writeln!(
                out,
                "{} {}",
                doc.session.id, doc.session.system_info.assessment_type_code
            )?;
        }
        Command::Validate => {
            let doc = ctx.load()?;
            let s = &doc.session;
            writeln!(
                out,
                "ok {} revision {} scenarios {} state {:?}",
                s.id,
                s.revision,
                s.scenarios.len(),
                s.state
            )?;
        }
        Command::Aspects => {
            let doc = ctx.load()?;
            for aspect in doc.session.next_aspects(&ctx.taxonomy) {
                writeln!(out, "{aspect}")?;
            }
        }
        Command::Scenario(ScenarioCmd::Add(a)) => {
            let record = match a.from_json {
                Some(p) => serde_json::from_str(&read_text(&p)?)
                    .with_context(|| format!("parsing scenario in {}", p.display()))?,
                None => {
                    let aspect = a.aspect.expect("required by clap");
                    let mut r = ScenarioRecord::new(
                        a.id.expect("required by clap"),
                        aspect.clone(),
                        a.mode.into(),
                        a.narrative,
                    );
                    if !a.outcomes.is_empty() {
                        r = r.with_outcomes(a.outcomes);
                    }
                    r = r.with_dimensions(a.dimensions);
                    if let Some(other) = a.interacts_with {
                        let why = a.rationale.operator_rationale.clone().unwrap_or_default();
                        r = r.second_order(InteractionCell::new(aspect, other, why)?);
                    }
                    r.rationale = a.rationale.over(Rationale::default());
                    r
                }
            };
            if let CommandResult::ScenarioAdded { scenario_id } =
                ctx.mutate(SessionCommand::AddScenario {
                    scenario: Box::new(record),
                })?
            {
                writeln!(out, "{scenario_id}")?;
            }
        }
        Command::Scenario(ScenarioCmd::Derive {
            parent,
            operator,
            delta,
        }) => {
            if let CommandResult::ScenarioAdded { scenario_id } =
                ctx.mutate(SessionCommand::ApplyOperator {
                    parent,
                    operator,
                    narrative_delta: delta,
                })?
            {
                writeln!(out, "{scenario_id}")?;
            }
        }
        Command::Scenario(ScenarioCmd::List) => {
            let doc = ctx.load()?;
            for s in &doc.session.scenarios {
                let rl = s
                    .risk_level()
                    .map_or_else(|| "-".to_string(), |r| r.value().to_string());
                writeln!(out, "{}\t{}\t{:?}\t{}", s.id, s.aspect_ref, s.status, rl)?;
            }
        }
        Command::Estimate(a) => {
            let doc = ctx.load()?;
            let base = doc
                .session
                .scenario(&a.scenario)
                .map(|s| s.rationale.clone())
                .unwrap_or_default();
            let result = ctx.mutate(SessionCommand::RecordEstimate {
                scenario_id: a.scenario,
                assessor: a.assessor,
                outcome_index: a.outcome,
                hsl: a.hsl,
                ll: a.ll,
                rationale: a.rationale.over(base),
            })?;
            if let CommandResult::ScenarioStatus { status } = result {
                writeln!(out, "{status:?}")?;
            }
        }
        Command::Recalibrate(a) => {
            let command = if a.resolve {
                SessionCommand::ResolveRecalibration {
                    scenario_id: a.scenario,
                    post_entries: a.entries,
                }
            } else {
                SessionCommand::FlagDivergences {
                    scenario_id: a.scenario,
                }
            };
            match ctx.mutate(command)? {
                CommandResult::Divergences { flags } if flags.is_empty() => {
                    writeln!(out, "no divergence")?
                }
                CommandResult::Divergences { flags } => {
                    for f in flags {
                        writeln!(
                            out,
                            "outcome {} ll_spread {} hsl_spread {}",
                            f.outcome_index, f.ll_spread, f.hsl_spread
                        )?;
                    }
                }
                CommandResult::ScenarioStatus { status } => writeln!(out, "{status:?}")?,
                _ => {}
            }
        }
        Command::CompleteAspect(a) => {
            let targets = match a.aspect {
                Some(id) => vec![id],
                None => ctx.load()?.session.next_aspects(&ctx.taxonomy),
            };
            for aspect_id in targets {
                ctx.mutate(SessionCommand::MarkAspectComplete {
                    aspect_id: aspect_id.clone(),
                    rationale: a.rationale.clone(),
                })?;
                writeln!(out, "{aspect_id}")?;
            }
        }
        Command::Finalize => {
            ctx.mutate(SessionCommand::Finalize)?;
            writeln!(out, "finalized")?;
        }
        Command::Report(a) => {
            let doc = ctx.load()?;
            let scheme = load_scheme(a.scheme.as_deref())?;
            let card = report_card(&doc.session, &ctx.taxonomy, &scheme)?;
            let matrix = tallied_matrix(&doc.session)?;
            out.write_all(render_report(&card, &matrix, a.format).as_bytes())?;
        }
        Command::OutputLog(a) => {
            let mut doc = ctx.load()?;
            let log = emit_output_log(&doc.session, a.completed_at)?;
            let bytes = log.to_canonical_bytes();
            match a.out {
                Some(p) => {
                    std::fs::write(&p, &bytes)
                        .with_context(|| format!("writing {}", p.display()))?;
                    writeln!(out, "{}", log.content_digest)?;
                }
                None => out.write_all(&bytes)?,
            }
            doc.record_output(&log.content_digest);
            save_workbook(&doc, &ctx.workbook)?;
        }
        Command::Diff(a) => {
            let scheme = load_scheme(a.scheme.as_deref())?;
            let mine = ctx.load()?;
            let theirs = load_workbook(&a.against, &ctx.taxonomy)?.document;
            let card_a = report_card(&theirs.session, &ctx.taxonomy, &scheme)?;
            let card_b = report_card(&mine.session, &ctx.taxonomy, &scheme)?;
            let diff = diff_report_cards(&card_a, &card_b)?;
            if diff.is_unchanged() {
                writeln!(out, "unchanged")?;
            }
            for row in &diff.rows {
                for (col, change) in pra_core::reporting::AssessmentTypeColumn::ALL
                    .iter()
                    .zip(row.cells)
                {
                    if !change.is_unchanged() {
                        writeln!(out, "{}\t{}\t{}", row.group_id, col.label(), change)?;
                    }
                }
            }
            if !diff.total_max.is_unchanged() {
                writeln!(out, "total\t-\t{}", diff.total_max)?;
            }
            for f in &diff.focused {
                if !f.change.is_unchanged() {
                    writeln!(out, "focused\t{}\t{}", f.dimension_id, f.change)?;
                }
            }
        }
        Command::Serve(a) => {
            let store = match &a.dir {
                Some(dir) => SessionStore::open(ctx.taxonomy, dir)?,
                None => SessionStore::in_memory(ctx.taxonomy),
            };
            if ctx.workbook.exists() {
                let doc = load_workbook(&ctx.workbook, store.taxonomy())?.document;
                if let Err(e) = store.insert(doc.session) {
                    eprintln!("warning: {e}");
                }
            }
            let state = AppState {
                store: Arc::new(store),
                rubrics: Arc::new(ctx.rubrics),
            };
            eprintln!("listening on {}", a.listen);
            tokio::runtime::Runtime::new()?
                .block_on(service::serve(state, &a.listen))
                .map_err(|e| anyhow!("serve: {e}"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err
                .chain()
                .map(error_code)
                .find(|c| *c != "error")
                .unwrap_or("error");
            eprintln!("error: {code}: {err:#}");
            ExitCode::FAILURE
        }
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use osd_core::executor::{enumerate_inputs, parse_domains, DEFAULT_BUDGET, DEFAULT_ENUMERATION_CAP};
use osd_core::pipeline::{default_class, localize_against};
use osd_core::statechart::{build_transition_table, render_transition_table};
use osd_core::{
    analyze, build_cidg, localize, parse_model, validate_model, Analysis, Expr, LocalizeError, PipelineError,
    ProgramModel, StateChart, TestSuite,
};

#[derive(Parser)]
#[command(name = "osd", version, about = "Object-state based fault localization on statement-level program models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the statements where the failing run departs from its nearest passing run.
    Localize(RunArgs),
    /// Print the test-suite decision table, or the statechart transition table with --chart.
    Table(TableArgs),
    /// Print the state comparison matrix of the failing run and its witness.
    Matrix(RunArgs),
    /// Print per-case node states.
    Trace(TraceArgs),
    /// Print the class interaction dependence graph as DOT.
    Graph(GraphArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value = "text", env = "OSD_FORMAT")]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Program model file.
    #[arg(long, short)]
    model: PathBuf,
    /// Restrict the analysis to one class. Defaults to `Control` when the model declares it.
    #[arg(long)]
    class: Option<String>,
    /// Analyse every node regardless of class.
    #[arg(long, conflicts_with = "class")]
    all_classes: bool,
}

#[derive(Args)]
struct SuiteArgs {
    /// Test suite file.
    #[arg(long, short, conflicts_with = "enumerate", required_unless_present = "enumerate")]
    suite: Option<PathBuf>,
    /// Enumerate every combination of integer ranges, e.g. floor=0..2,req=0..2.
    #[arg(long)]
    enumerate: Option<String>,
    /// Verdict predicate for enumerated cases. Defaults to the model's `expect`.
    #[arg(long, requires = "enumerate")]
    expect: Option<String>,
    /// Step budget per test case.
    #[arg(long, default_value_t = DEFAULT_BUDGET, env = "OSD_BUDGET")]
    budget: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    suite: SuiteArgs,
    /// Failing case to localize when the suite has several.
    #[arg(long)]
    failing: Option<String>,
    /// Passing case to compare against instead of the selected witness.
    #[arg(long)]
    witness: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TableArgs {
    /// Statechart file; prints its transition table and needs no model or suite.
    #[arg(long, conflicts_with_all = ["model", "suite", "enumerate"])]
    chart: Option<PathBuf>,
    /// Program model file.
    #[arg(long, short, required_unless_present = "chart")]
    model: Option<PathBuf>,
    #[arg(long, conflicts_with = "all_classes")]
    class: Option<String>,
    #[arg(long)]
    all_classes: bool,
    #[arg(long, short, conflicts_with = "enumerate")]
    suite: Option<PathBuf>,
    #[arg(long)]
    enumerate: Option<String>,
    #[arg(long, requires = "enumerate")]
    expect: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BUDGET, env = "OSD_BUDGET")]
    budget: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    suite: SuiteArgs,
    /// Only this case.
    #[arg(long)]
    case: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    common: Common,
}

/// Failure carrying its process exit status.
#[derive(Debug)]
struct Exit {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Exit {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = match error.downcast_ref::<PipelineError>() {
            Some(PipelineError::Localize(l)) => localize_code(l),
            _ => error.downcast_ref::<LocalizeError>().map_or(1, localize_code),
        };
        Exit { code, error }
    }
}

fn localize_code(e: &LocalizeError) -> u8 {
    match e {
        LocalizeError::NoFailingTest => 2,
        LocalizeError::NoPassingTest => 3,
        LocalizeError::MultipleFailures(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Localize(args) => cmd_localize(args),
        Command::Table(args) => cmd_table(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Graph(args) => cmd_graph(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_model(path: &Path) -> Result<ProgramModel> {
    let m = parse_model(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    let diagnostics = validate_model(&m);
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(|d| format!("  {d}")).collect();
        bail!("{} is not a valid model:\n{}", path.display(), lines.join("\n"));
    }
    Ok(m)
}

fn load_suite(m: &ProgramModel, suite: Option<&Path>, enumerate: Option<&str>, expect: Option<&str>) -> Result<TestSuite> {
    match (suite, enumerate) {
        (Some(path), _) => Ok(TestSuite::from_json(&read(path)?).with_context(|| format!("in {}", path.display()))?),
        (None, Some(ranges)) => {
            let domains = parse_domains(ranges)?;
            let expect = match expect {
                Some(text) => Expr::parse(text).context("in --expect")?,
                None => m.expect().cloned().ok_or_else(|| anyhow!("the model has no `expect`; pass --expect"))?,
            };
            Ok(enumerate_inputs(&domains, &expect, DEFAULT_ENUMERATION_CAP)?)
        }
        (None, None) => bail!("a test suite is required: pass --suite or --enumerate"),
    }
}

fn class_for(m: &ProgramModel, class: &Option<String>, all: bool) -> Option<String> {
    if all {
        None
    } else {
        class.clone().or_else(|| default_class(m))
    }
}

fn run_analysis(model: &ModelArgs, suite: &SuiteArgs) -> Result<(ProgramModel, Analysis), Exit> {
    let m = load_model(&model.model)?;
    let tests = load_suite(&m, suite.suite.as_deref(), suite.enumerate.as_deref(), suite.expect.as_deref())?;
    let class = class_for(&m, &model.class, model.all_classes);
    let analysis = analyze(&m, &tests, class.as_deref(), suite.budget)?;
    Ok((m, analysis))
}

fn emit(common: &Common, text: String) -> Result<(), Exit> {
    let mut text = text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &common.output {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize")
}

fn run_localization(args: &RunArgs) -> Result<(ProgramModel, osd_core::Localization), Exit> {
    let (m, analysis) = run_analysis(&args.model, &args.suite)?;
    let mut loc = localize(&m, &analysis, args.failing.as_deref())?;
    if let Some(witness) = &args.witness {
        if !loc.selection.candidates.iter().any(|c| &c.case_id == witness) {
            return Err(anyhow!("`{witness}` is not a passing case").into());
        }
        loc = localize_against(&m, &analysis, &loc.selection, witness)?;
    }
    Ok((m, loc))
}

fn cmd_localize(args: RunArgs) -> Result<(), Exit> {
    let (m, loc) = run_localization(&args)?;
    let out = match args.common.format {
        Format::Text => loc.report.to_text(&m),
        Format::Json => loc.report.to_json(),
    };
    emit(&args.common, out)
}

fn cmd_matrix(args: RunArgs) -> Result<(), Exit> {
    let (_, loc) = run_localization(&args)?;
    let out = match args.common.format {
        Format::Text => loc.matrix.to_text(),
        Format::Json => json(&loc.matrix),
    };
    emit(&args.common, out)
}

fn cmd_table(args: TableArgs) -> Result<(), Exit> {
    if let Some(path) = &args.chart {
        let chart = StateChart::from_json(&read(path)?).with_context(|| format!("in {}", path.display()))?;
        let rows = build_transition_table(&chart);
        let out = match args.common.format {
            Format::Text => render_transition_table(&rows),
            Format::Json => json(&rows),
        };
        return emit(&args.common, out);
    }
    let model = ModelArgs {
        model: args.model.clone().expect("clap requires --model without --chart"),
        class: args.class.clone(),
        all_classes: args.all_classes,
    };
    let suite = SuiteArgs { suite: args.suite.clone(), enumerate: args.enumerate.clone(), expect: args.expect.clone(), budget: args.budget };
    let (_, analysis) = run_analysis(&model, &suite)?;
    let out = match args.common.format {
        Format::Text => analysis.table.to_text(),
        Format::Json => json(&analysis.table),
    };
    emit(&args.common, out)
}

fn cmd_trace(args: TraceArgs) -> Result<(), Exit> {
    let (_, analysis) = run_analysis(&args.model, &args.suite)?;
    let traces: Vec<_> = match &args.case {
        Some(id) => {
            let t = analysis.traces.iter().find(|t| &t.case_id == id).ok_or_else(|| anyhow!("no case `{id}`"))?;
            vec![t.clone()]
        }
        None => analysis.traces.clone(),
    };
    let out = match args.common.format {
        Format::Json => json(&traces),
        Format::Text => {
            let order = &analysis.table.node_order;
            let mut header: Vec<String> = analysis.table.input_vars.clone();
            header.extend(order.iter().map(ToString::to_string));
            header.push("Test".into());
            let mut rows = Vec::new();
            for t in &traces {
                let mut row: Vec<String> = analysis
                    .table
                    .input_vars
                    .iter()
                    .map(|v| t.assignments.get(v).map_or("-".into(), ToString::to_string))
                    .collect();
                row.extend(order.iter().map(|id| t.state_vector.get(id).map_or("-".into(), |s| s.to_string())));
                row.push(format!("{:?}", t.verdict));
                rows.push(row);
            }
            let widths: Vec<usize> = (0..header.len())
                .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            for line in std::iter::once(&header).chain(&rows) {
                let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                let _ = writeln!(out, "{}", cells.join(" ").trim_end());
            }
            for t in &traces {
                let seq: Vec<&str> = t.executed.iter().map(|id| id.as_str()).collect();
                let _ = writeln!(out, "\n{} ({} steps, {:?}): {}", t.case_id, t.steps, t.halt_reason, seq.join(" "));
            }
            out
        }
    };
    emit(&args.common, out)
}

fn cmd_graph(args: GraphArgs) -> Result<(), Exit> {
    let m = load_model(&args.model.model)?;
    let class = class_for(&m, &args.model.class, args.model.all_classes);
    let cidg = build_cidg(&m, class.as_deref())?;
    let out = match args.common.format {
        Format::Text => cidg.to_dot(),
        Format::Json => json(&cidg),
    };
    emit(&args.common, out)
}

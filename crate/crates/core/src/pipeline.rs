//! End-to-end orchestration: validate, build the class graph, run the suite,
//! select the witness, align, and report.

use serde::Serialize;
use thiserror::Error;

use crate::cidg::{build_cidg, Cidg, CidgError};
use crate::executor::{run_suite, ExecError, ExecutionTrace, TestSuite};
use crate::localizer::{
    build_comparison_matrix, build_decision_table, find_divergence, generate_bug_report, select_nearest_pass,
    select_nearest_pass_for, BugReport, ComparisonMatrix, DecisionTable, Divergence, LocalizeError,
    SelectionResult,
};
use crate::model::{validate_model, Diagnostic, ProgramModel};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid model: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Diagnostic>),
    #[error(transparent)]
    Cidg(#[from] CidgError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Localize(#[from] LocalizeError),
}

/// Suite results projected onto the analysed class.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub cidg: Cidg,
    pub traces: Vec<ExecutionTrace>,
    pub table: DecisionTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Localization {
    pub selection: SelectionResult,
    pub matrix: ComparisonMatrix,
    pub divergence: Divergence,
    pub report: BugReport,
}

/// The class analysed when none is named: `Control` if the model declares
/// it, otherwise the whole program.
pub fn default_class(m: &ProgramModel) -> Option<String> {
    m.classes().contains(&"Control").then(|| "Control".to_string())
}

pub fn analyze(
    m: &ProgramModel,
    suite: &TestSuite,
    class: Option<&str>,
    budget: u64,
) -> Result<Analysis, PipelineError> {
    let diagnostics = validate_model(m);
    if !diagnostics.is_empty() {
        return Err(PipelineError::InvalidModel(diagnostics));
    }
    let cidg = build_cidg(m, class)?;
    let traces: Vec<ExecutionTrace> =
        run_suite(m, suite, budget)?.iter().map(|t| t.restrict_to(&cidg.nodes)).collect();
    let table = build_decision_table(&cidg, &traces)?;
    Ok(Analysis { cidg, traces, table })
}

/// Localizes against the nearest passing run. `failing` names the failing
/// case when the suite has several.
pub fn localize(m: &ProgramModel, analysis: &Analysis, failing: Option<&str>) -> Result<Localization, PipelineError> {
    let selection = match failing {
        Some(id) => select_nearest_pass_for(&analysis.traces, id)?,
        None => select_nearest_pass(&analysis.traces)?,
    };
    localize_against(m, analysis, &selection, &selection.chosen)
}

/// Localizes against a specific passing witness.
pub fn localize_against(
    m: &ProgramModel,
    analysis: &Analysis,
    selection: &SelectionResult,
    witness: &str,
) -> Result<Localization, PipelineError> {
    let find = |id: &str| {
        analysis
            .traces
            .iter()
            .find(|t| t.case_id == id)
            .ok_or_else(|| LocalizeError::UnknownCase(id.to_string()))
    };
    let fail = find(&selection.failing)?;
    let pass = find(witness)?;
    let matrix = build_comparison_matrix(pass, fail);
    let divergence = find_divergence(&matrix);
    let mut selection = selection.clone();
    selection.chosen = witness.to_string();
    if let Some(c) = selection.candidates.iter().find(|c| c.case_id == witness) {
        selection.distance = c.distance;
    }
    let report = generate_bug_report(m, &selection, &divergence, &analysis.traces)?;
    Ok(Localization { selection, matrix, divergence, report })
}

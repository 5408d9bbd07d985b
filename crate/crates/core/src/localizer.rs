//! Decision table, nearest-passing-run selection, state alignment and the
//! source-level bug report.
//!
//! The failing run is compared against every passing run by Hamming distance
//! over binary coverage vectors. The closest passing run (the witness) is then
//! aligned with the failing run over `(node, state)` pairs; whatever falls off
//! the alignment is the divergence that gets mapped back to source lines.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cidg::Cidg;
use crate::executor::{ExecutionTrace, Verdict};
use crate::model::{NodeId, ProgramModel, StateLabel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LocalizeError {
    #[error("no traces to tabulate")]
    EmptySuite,
    #[error("coverage vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no failing test: nothing to localize")]
    NoFailingTest,
    #[error("no passing test to compare against")]
    NoPassingTest,
    #[error("{} failing tests ({}); choose one to localize", .0.len(), .0.join(", "))]
    MultipleFailures(Vec<String>),
    #[error("unknown or non-failing case `{0}`")]
    UnknownCase(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub case_id: String,
    pub inputs: IndexMap<String, i64>,
    /// One `+`/`-` per entry of the table's node order.
    pub marks: String,
    pub verdict: Verdict,
}

impl DecisionRow {
    pub fn mark_vector(&self) -> Vec<bool> {
        self.marks.chars().map(|c| c == '+').collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub node_order: Vec<NodeId>,
    pub input_vars: Vec<String>,
    pub rows: Vec<DecisionRow>,
}

pub fn build_decision_table(cidg: &Cidg, traces: &[ExecutionTrace]) -> Result<DecisionTable, LocalizeError> {
    if traces.is_empty() {
        return Err(LocalizeError::EmptySuite);
    }
    let mut input_vars: Vec<String> = Vec::new();
    for t in traces {
        for var in t.assignments.keys() {
            if !input_vars.contains(var) {
                input_vars.push(var.clone());
            }
        }
    }
    let rows = traces
        .iter()
        .map(|t| DecisionRow {
            case_id: t.case_id.clone(),
            inputs: t.assignments.clone(),
            marks: cidg.nodes.iter().map(|id| if t.is_executed(id) { '+' } else { '-' }).collect(),
            verdict: t.verdict,
        })
        .collect();
    Ok(DecisionTable { node_order: cidg.nodes.clone(), input_vars, rows })
}

impl DecisionTable {
    pub fn row(&self, case_id: &str) -> Option<&DecisionRow> {
        self.rows.iter().find(|r| r.case_id == case_id)
    }

    /// Aligned `+`/`-` grid: input columns, one column per node, verdict last.
    pub fn to_text(&self) -> String {
        let mut header: Vec<String> = self.input_vars.clone();
        header.extend(self.node_order.iter().map(|n| n.to_string()));
        header.push("Test".into());
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells: Vec<String> = self
                    .input_vars
                    .iter()
                    .map(|v| r.inputs.get(v).map(i64::to_string).unwrap_or_else(|| "-".into()))
                    .collect();
                cells.extend(r.marks.chars().map(String::from));
                cells.push(format!("{:?}", r.verdict));
                cells
            })
            .collect();
        let mut out = grid(&header, &body);
        out.push_str("+ executed  - not executed\n");
        out
    }
}

fn grid(header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(body.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (c, w) in row.iter().zip(&widths) {
            let _ = write!(line, "{c:<w$} ");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn coverage_distance(a: &[bool], b: &[bool]) -> Result<usize, LocalizeError> {
    if a.len() != b.len() {
        return Err(LocalizeError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub case_id: String,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub failing: String,
    /// Passing runs at the minimal coverage distance, in suite order.
    pub witnesses: Vec<Witness>,
    pub chosen: String,
    pub distance: usize,
    /// Distance from the failing run to every passing run, in suite order.
    pub candidates: Vec<Witness>,
}

/// Picks the single failing run and its nearest passing witness.
pub fn select_nearest_pass(traces: &[ExecutionTrace]) -> Result<SelectionResult, LocalizeError> {
    let failing: Vec<&ExecutionTrace> = traces.iter().filter(|t| t.verdict == Verdict::Fail).collect();
    if failing.is_empty() {
        return Err(LocalizeError::NoFailingTest);
    }
    if failing.len() == traces.len() {
        return Err(LocalizeError::NoPassingTest);
    }
    if failing.len() > 1 {
        return Err(LocalizeError::MultipleFailures(failing.iter().map(|t| t.case_id.clone()).collect()));
    }
    select_nearest_pass_for(traces, &failing[0].case_id)
}

/// Same as [`select_nearest_pass`] with the failing run named explicitly.
pub fn select_nearest_pass_for(traces: &[ExecutionTrace], failing_id: &str) -> Result<SelectionResult, LocalizeError> {
    let fail = traces
        .iter()
        .find(|t| t.case_id == failing_id && t.verdict == Verdict::Fail)
        .ok_or_else(|| LocalizeError::UnknownCase(failing_id.to_string()))?;

    let mut universe: Vec<&NodeId> = Vec::new();
    for t in traces {
        for id in t.coverage.keys() {
            if !universe.contains(&id) {
                universe.push(id);
            }
        }
    }
    let vector = |t: &ExecutionTrace| universe.iter().map(|id| t.is_executed(id)).collect::<Vec<bool>>();
    let fail_vec = vector(fail);

    let mut candidates = Vec::new();
    let mut passing = Vec::new();
    for t in traces.iter().filter(|t| t.verdict == Verdict::Pass) {
        let distance = coverage_distance(&fail_vec, &vector(t))?;
        candidates.push(Witness { case_id: t.case_id.clone(), distance });
        passing.push((t, distance));
    }
    let min = passing.iter().map(|(_, d)| *d).min().ok_or(LocalizeError::NoPassingTest)?;
    let tied: Vec<&ExecutionTrace> = passing.iter().filter(|(_, d)| *d == min).map(|(t, _)| *t).collect();
    // min_by_key keeps the first of equal keys, so suite order breaks ties
    let chosen = tied.iter().min_by_key(|t| state_difference(fail, t)).expect("at least one witness");

    Ok(SelectionResult {
        failing: fail.case_id.clone(),
        witnesses: tied.iter().map(|t| Witness { case_id: t.case_id.clone(), distance: min }).collect(),
        chosen: chosen.case_id.clone(),
        distance: min,
        candidates,
    })
}

/// Nodes whose state differs between the two runs, counting nodes present in
/// only one state vector.
pub fn state_difference(a: &ExecutionTrace, b: &ExecutionTrace) -> usize {
    let only_or_diff_in_a =
        a.state_vector.iter().filter(|(id, s)| b.state_vector.get(*id) != Some(*s)).count();
    let only_in_b = b.state_vector.keys().filter(|id| !a.state_vector.contains_key(*id)).count();
    only_or_diff_in_a + only_in_b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PathStep {
    Match { row: usize, col: usize },
    /// Passing-run row with no partner in the failing run.
    PassOnly { row: usize },
    /// Failing-run column with no partner in the passing run.
    FailOnly { col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub node: NodeId,
    pub state: StateLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub pass_case: String,
    pub fail_case: String,
    /// Executed nodes of the passing run, in node order.
    pub row_nodes: Vec<NodeState>,
    /// Executed nodes of the failing run, in node order.
    pub col_nodes: Vec<NodeState>,
    #[serde(rename = "match")]
    pub matches: Vec<Vec<bool>>,
    pub path: Vec<PathStep>,
}

/// Longest-common-subsequence alignment of two sequences. Matches are taken
/// greedily from the front whenever that keeps the alignment optimal; among
/// gaps, failing-side columns are emitted before passing-side rows.
pub fn align<T: PartialEq>(rows: &[T], cols: &[T]) -> Vec<PathStep> {
    let (n, m) = (rows.len(), cols.len());
    // suffix LCS lengths
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if rows[i] == cols[j] { dp[i + 1][j + 1] + 1 } else { dp[i + 1][j].max(dp[i][j + 1]) };
        }
    }
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && rows[i] == cols[j] && dp[i][j] == dp[i + 1][j + 1] + 1 {
            path.push(PathStep::Match { row: i, col: j });
            i += 1;
            j += 1;
        } else if j < m && (i == n || dp[i][j + 1] >= dp[i + 1][j]) {
            path.push(PathStep::FailOnly { col: j });
            j += 1;
        } else {
            path.push(PathStep::PassOnly { row: i });
            i += 1;
        }
    }
    path
}

pub fn build_comparison_matrix(pass: &ExecutionTrace, fail: &ExecutionTrace) -> ComparisonMatrix {
    let seq = |t: &ExecutionTrace| -> Vec<NodeState> {
        t.executed_nodes()
            .map(|id| NodeState { node: id.clone(), state: t.state_vector.get(id).copied().unwrap_or_default() })
            .collect()
    };
    let row_nodes = seq(pass);
    let col_nodes = seq(fail);
    let matches = row_nodes.iter().map(|r| col_nodes.iter().map(|c| r == c).collect()).collect();
    let path = align(&row_nodes, &col_nodes);
    ComparisonMatrix { pass_case: pass.case_id.clone(), fail_case: fail.case_id.clone(), row_nodes, col_nodes, matches, path }
}

impl ComparisonMatrix {
    pub fn matched_len(&self) -> usize {
        self.path.iter().filter(|s| matches!(s, PathStep::Match { .. })).count()
    }

    /// Grid with the alignment drawn in: `\` matched path cell, `-` a failing
    /// column skipped by the path, `|` a passing row skipped, `o` an
    /// off-path match, `.` otherwise.
    pub fn to_text(&self) -> String {
        let n = self.row_nodes.len();
        let m = self.col_nodes.len();
        let mut cells = vec![vec!['.'; m]; n];
        for (i, row) in self.matches.iter().enumerate() {
            for (j, &hit) in row.iter().enumerate() {
                if hit {
                    cells[i][j] = 'o';
                }
            }
        }
        let (mut last_row, mut last_col) = (0usize, 0usize);
        for step in &self.path {
            match *step {
                PathStep::Match { row, col } => {
                    cells[row][col] = '\\';
                    last_row = row;
                    last_col = col;
                }
                PathStep::FailOnly { col } if n > 0 => {
                    cells[last_row][col] = '-';
                    last_col = col;
                }
                PathStep::PassOnly { row } if m > 0 => {
                    cells[row][last_col] = '|';
                    last_row = row;
                }
                _ => {}
            }
        }
        let label = |ns: &NodeState| format!("{} {}", ns.node, ns.state);
        let mut header = vec![format!("pass {} \\ fail {}", self.pass_case, self.fail_case)];
        header.extend(self.col_nodes.iter().map(label));
        let body: Vec<Vec<String>> = self
            .row_nodes
            .iter()
            .zip(&cells)
            .map(|(ns, row)| {
                let mut r = vec![label(ns)];
                r.extend(row.iter().map(|c| c.to_string()));
                r
            })
            .collect();
        grid(&header, &body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Divergence {
    pub fail_only: Vec<NodeId>,
    pub pass_only: Vec<NodeId>,
}

impl Divergence {
    pub fn is_empty(&self) -> bool {
        self.fail_only.is_empty() && self.pass_only.is_empty()
    }
}

pub fn find_divergence(matrix: &ComparisonMatrix) -> Divergence {
    let mut div = Divergence::default();
    for step in &matrix.path {
        match *step {
            PathStep::FailOnly { col } => div.fail_only.push(matrix.col_nodes[col].node.clone()),
            PathStep::PassOnly { row } => div.pass_only.push(matrix.row_nodes[row].node.clone()),
            PathStep::Match { .. } => {}
        }
    }
    let order = |nodes: &[NodeState], id: &NodeId| nodes.iter().position(|n| &n.node == id);
    div.fail_only.sort_by_key(|id| order(&matrix.col_nodes, id));
    div.pass_only.sort_by_key(|id| order(&matrix.row_nodes, id));
    div
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suspect {
    pub node: NodeId,
    pub state: StateLabel,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugReport {
    pub failing: String,
    pub witness: String,
    pub distance: usize,
    pub fail_only: Vec<Suspect>,
    pub pass_only: Vec<Suspect>,
    pub narrative: String,
}

/// Maps the divergence back to states and source lines. A node that appears
/// on both sides (same node, different state) is reported once, under
/// `fail_only`.
pub fn generate_bug_report(
    m: &ProgramModel,
    sel: &SelectionResult,
    divergence: &Divergence,
    traces: &[ExecutionTrace],
) -> Result<BugReport, LocalizeError> {
    let find = |id: &str| {
        traces.iter().find(|t| t.case_id == id).ok_or_else(|| LocalizeError::UnknownCase(id.to_string()))
    };
    let fail = find(&sel.failing)?;
    let pass = find(&sel.chosen)?;
    let suspect = |id: &NodeId, t: &ExecutionTrace| {
        let node = m.node(id);
        Suspect {
            node: id.clone(),
            state: t.state_vector.get(id).copied().or(node.map(|n| n.state)).unwrap_or_default(),
            line: node.map(|n| n.line).unwrap_or(0),
        }
    };
    let fail_only: Vec<Suspect> = divergence.fail_only.iter().map(|id| suspect(id, fail)).collect();
    let pass_only: Vec<Suspect> = divergence
        .pass_only
        .iter()
        .filter(|id| !divergence.fail_only.contains(id))
        .map(|id| suspect(id, pass))
        .collect();
    let narrative = narrate(&sel.failing, &sel.chosen, &fail_only, &pass_only);
    Ok(BugReport { failing: sel.failing.clone(), witness: sel.chosen.clone(), distance: sel.distance, fail_only, pass_only, narrative })
}

fn narrate(failing: &str, witness: &str, fail_only: &[Suspect], pass_only: &[Suspect]) -> String {
    if fail_only.is_empty() && pass_only.is_empty() {
        return "no state-flow divergence found".to_string();
    }
    let chain = |s: &[Suspect]| s.iter().map(|x| format!("{} at {}", x.state, x.node)).collect::<Vec<_>>().join(" → ");
    let mut parts = Vec::new();
    if !fail_only.is_empty() {
        let mut text = format!("failing run {failing} executes {}", chain(fail_only));
        let mut states: Vec<StateLabel> = fail_only.iter().map(|s| s.state).collect();
        states.dedup();
        if states.len() > 1 {
            let names: Vec<&str> = states.iter().map(|s| s.name()).collect();
            let _ = write!(text, ", an unexpected {} transition", names.join(" → "));
        }
        parts.push(text);
    }
    if !pass_only.is_empty() {
        parts.push(format!("passing run {witness} instead executes {}", chain(pass_only)));
    } else {
        parts.push(format!("passing run {witness} skips these nodes"));
    }
    parts.join("; ")
}

impl BugReport {
    /// Distinct suspect lines of the failing side, ascending.
    pub fn error_lines(&self) -> Vec<u32> {
        let mut lines: Vec<u32> = self.fail_only.iter().map(|s| s.line).collect();
        lines.sort_unstable();
        lines.dedup();
        lines
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// Program listing in node order with arrows at the suspect lines.
    pub fn to_text(&self, m: &ProgramModel) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "failing input   : {}", self.failing);
        let _ = writeln!(out, "passing witness : {} (coverage distance {})", self.witness, self.distance);
        let lines = self.error_lines();
        if lines.is_empty() {
            let _ = writeln!(out, "{}", self.narrative);
            return out;
        }
        let _ = writeln!(out, "Error detected at line {}", join_and(&lines));
        let _ = writeln!(out, "{}", self.narrative);
        out.push('\n');

        let order = m.node_order();
        let width = order.iter().map(|&i| m.nodes()[i].text.chars().count()).max().unwrap_or(0);
        for &i in &order {
            let node = &m.nodes()[i];
            let marker = if self.fail_only.iter().any(|s| s.node == node.id) {
                "← Error detected"
            } else if self.pass_only.iter().any(|s| s.node == node.id) {
                "← passing run only"
            } else {
                ""
            };
            let line = format!("{:<5} {:<width$}  {marker}", node.id.as_str(), node.text);
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

fn join_and(lines: &[u32]) -> String {
    let parts: Vec<String> = lines.iter().map(u32::to_string).collect();
    match parts.split_last() {
        Some((last, rest)) if !rest.is_empty() => format!("{} and {last}", rest.join(", ")),
        Some((last, _)) => last.clone(),
        None => String::new(),
    }
}

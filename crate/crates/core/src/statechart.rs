//! Flat statechart with guarded transitions, its transition table, and a
//! value-based state decoder.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::model::StateLabel;

/// Output bits of a transition: up, down, open, timer_start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionTuple {
    pub up: bool,
    pub down: bool,
    pub open: bool,
    pub timer_start: bool,
}

impl ActionTuple {
    pub fn bits(self) -> [u8; 4] {
        [self.up as u8, self.down as u8, self.open as u8, self.timer_start as u8]
    }
}

impl Serialize for ActionTuple {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.bits().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ActionTuple {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let bits = <[u8; 4]>::deserialize(deserializer)?;
        if bits.iter().any(|&b| b > 1) {
            return Err(serde::de::Error::custom(format!("action bits must be 0 or 1, got {bits:?}")));
        }
        Ok(ActionTuple { up: bits[0] == 1, down: bits[1] == 1, open: bits[2] == 1, timer_start: bits[3] == 1 })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRow {
    #[serde(rename = "from")]
    pub initial: StateLabel,
    #[serde(rename = "cond")]
    pub condition: Expr,
    pub action: ActionTuple,
    #[serde(rename = "to")]
    pub final_state: StateLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateChart {
    /// Declared states; their order fixes the transition table order.
    pub states: Vec<StateLabel>,
    #[serde(rename = "initial")]
    pub initial_state: StateLabel,
    /// Variables guards may read. Empty means unchecked.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variables: Vec<String>,
    pub rows: Vec<TransitionRow>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChartError {
    #[error("malformed chart file: {0}")]
    Syntax(String),
    #[error("Nd cannot be a chart state")]
    NdState,
    #[error("state {0} declared twice")]
    DuplicateState(StateLabel),
    #[error("initial state {0} is not declared")]
    UnknownInitial(StateLabel),
    #[error("row {row}: state {state} is not declared")]
    UnknownRowState { row: usize, state: StateLabel },
    #[error("row {row}: condition reads undeclared variable `{var}`")]
    UndeclaredVariable { row: usize, var: String },
    #[error("{count} rows from {current} match the valuation")]
    AmbiguousState { current: StateLabel, count: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl StateChart {
    pub fn from_json(text: &str) -> Result<StateChart, ChartError> {
        let chart: StateChart = serde_json::from_str(text).map_err(|e| ChartError::Syntax(e.to_string()))?;
        chart.validate()?;
        Ok(chart)
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        for (i, s) in self.states.iter().enumerate() {
            if *s == StateLabel::Nd {
                return Err(ChartError::NdState);
            }
            if self.states[..i].contains(s) {
                return Err(ChartError::DuplicateState(*s));
            }
        }
        if !self.states.contains(&self.initial_state) {
            return Err(ChartError::UnknownInitial(self.initial_state));
        }
        for (row, r) in self.rows.iter().enumerate() {
            for state in [r.initial, r.final_state] {
                if !self.states.contains(&state) {
                    return Err(ChartError::UnknownRowState { row, state });
                }
            }
            if !self.variables.is_empty() {
                if let Some(var) = r.condition.variables().into_iter().find(|v| !self.variables.iter().any(|d| d == v)) {
                    return Err(ChartError::UndeclaredVariable { row, var: var.to_string() });
                }
            }
        }
        Ok(())
    }
}

/// Rows grouped by initial state in declared-state order, keeping declaration
/// order within a group.
pub fn build_transition_table(chart: &StateChart) -> Vec<TransitionRow> {
    let rank = |s: StateLabel| chart.states.iter().position(|&x| x == s).unwrap_or(usize::MAX);
    let mut rows = chart.rows.clone();
    rows.sort_by_key(|r| rank(r.initial));
    rows
}

/// Final state of the unique row leaving `current` whose guard holds, or `Nd`
/// when none does.
pub fn decode_state<F>(lookup: &F, table: &[TransitionRow], current: StateLabel) -> Result<StateLabel, ChartError>
where
    F: Fn(&str) -> Option<i64>,
{
    let mut matched = None;
    let mut count = 0;
    for row in table.iter().filter(|r| r.initial == current) {
        if row.condition.eval(lookup)? != 0 {
            count += 1;
            matched.get_or_insert(row.final_state);
        }
    }
    match count {
        0 => Ok(StateLabel::Nd),
        1 => Ok(matched.unwrap()),
        _ => Err(ChartError::AmbiguousState { current, count }),
    }
}

/// Aligned text rendering in the usual four-column layout.
pub fn render_transition_table(rows: &[TransitionRow]) -> String {
    let header = ["Initial State", "Condition", "Operation (Action)", "Final State"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            let [u, d, o, t] = r.action.bits();
            [
                r.initial.name().to_string(),
                r.condition.to_infix(),
                format!("u,d,o,t ={u},{d},{o},{t}"),
                r.final_state.name().to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cols: [&str; 4]| {
        let mut l = String::new();
        for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
            if i + 1 == cols.len() {
                l.push_str(c);
            } else {
                let _ = write!(l, "{c:<w$}  ");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(header);
    for row in &cells {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}

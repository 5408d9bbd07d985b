//! Deterministic interpreter for program models and the test-suite runner.

use std::collections::VecDeque;
use std::ops::RangeInclusive;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::model::{initial_valuation, Action, EdgeLabel, NodeId, ProgramModel, StateLabel};

pub const DEFAULT_BUDGET: u64 = 100_000;
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    /// Initial-value overrides for declared variables.
    #[serde(rename = "assign", default)]
    pub assignments: IndexMap<String, i64>,
    /// Values consumed in order by input nodes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<i64>,
    /// Verdict predicate over the final valuation.
    pub expect: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestSuite {
    pub cases: Vec<TestCase>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuiteError {
    #[error("malformed suite file: {0}")]
    Syntax(String),
    #[error("duplicate case id `{0}`")]
    DuplicateCase(String),
    #[error("input domain has {size} combinations, above the cap of {cap}")]
    DomainTooLarge { size: u128, cap: u64 },
    #[error("empty range for `{0}`")]
    EmptyRange(String),
}

impl TestSuite {
    pub fn from_json(text: &str) -> Result<TestSuite, SuiteError> {
        let suite: TestSuite = serde_json::from_str(text).map_err(|e| SuiteError::Syntax(e.to_string()))?;
        for (i, case) in suite.cases.iter().enumerate() {
            if suite.cases[..i].iter().any(|c| c.id == case.id) {
                return Err(SuiteError::DuplicateCase(case.id.clone()));
            }
        }
        Ok(suite)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serialization is infallible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    Executed,
    NotExecuted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    HaltFlag,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub case_id: String,
    pub assignments: IndexMap<String, i64>,
    /// Raw execution order. A cond node is listed only for the steps where its
    /// guard held; every other node is listed on every step that reaches it.
    pub executed: Vec<NodeId>,
    /// Per node, in ordinal order.
    pub coverage: IndexMap<NodeId, Coverage>,
    /// Executed nodes only, in ordinal order.
    pub state_vector: IndexMap<NodeId, StateLabel>,
    pub final_valuation: IndexMap<String, i64>,
    pub verdict: Verdict,
    pub halt_reason: HaltReason,
    pub steps: u64,
}

impl ExecutionTrace {
    pub fn is_executed(&self, id: &NodeId) -> bool {
        self.coverage.get(id) == Some(&Coverage::Executed)
    }

    /// Executed nodes in ordinal order.
    pub fn executed_nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.coverage.iter().filter(|(_, c)| **c == Coverage::Executed).map(|(id, _)| id)
    }

    /// Projection onto a node subset, e.g. the members of one class.
    pub fn restrict_to(&self, keep: &[NodeId]) -> ExecutionTrace {
        let kept = |id: &NodeId| keep.contains(id);
        ExecutionTrace {
            case_id: self.case_id.clone(),
            assignments: self.assignments.clone(),
            executed: self.executed.iter().filter(|id| kept(id)).cloned().collect(),
            coverage: self.coverage.iter().filter(|(id, _)| kept(id)).map(|(k, v)| (k.clone(), *v)).collect(),
            state_vector: self.state_vector.iter().filter(|(id, _)| kept(id)).map(|(k, v)| (k.clone(), *v)).collect(),
            final_valuation: self.final_valuation.clone(),
            verdict: self.verdict,
            halt_reason: self.halt_reason,
            steps: self.steps,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization is infallible")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("at {node}: {source}")]
    Eval {
        node: NodeId,
        #[source]
        source: EvalError,
    },
    #[error("verdict predicate: {0}")]
    Expect(EvalError),
    #[error("at {node}: assignment to undeclared variable `{var}`")]
    UndefinedVariable { node: NodeId, var: String },
    #[error("test case assigns undeclared variable `{0}`")]
    UnknownAssignment(String),
    #[error("at {0}: input queue exhausted")]
    InputExhausted(NodeId),
    #[error("at {0}: no successor to continue with")]
    Stuck(NodeId),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("case {case}: {source}")]
    InCase {
        case: String,
        #[source]
        source: Box<ExecError>,
    },
}

/// Runs one test case from the model entry until a halt flag fires or the
/// step budget is spent.
pub fn run_test(m: &ProgramModel, tc: &TestCase, budget: u64) -> Result<ExecutionTrace, ExecError> {
    if budget == 0 {
        return Err(ExecError::ZeroBudget);
    }
    let mut env = initial_valuation(m);
    for (var, value) in &tc.assignments {
        match env.get_mut(var) {
            Some(slot) => *slot = *value,
            None => return Err(ExecError::UnknownAssignment(var.clone())),
        }
    }
    let mut inputs: VecDeque<i64> = tc.inputs.iter().copied().collect();
    let mut executed = Vec::new();
    let mut seen = vec![false; m.nodes().len()];
    let mut current = m.entry_index();
    let mut steps = 0u64;
    let mut halted = false;

    while steps < budget {
        let node = &m.nodes()[current];
        steps += 1;
        let mut record = |executed: &mut Vec<NodeId>| {
            executed.push(node.id.clone());
            seen[current] = true;
        };

        let eval = |e: &Expr, env: &IndexMap<String, i64>| {
            e.eval(&|name: &str| env.get(name).copied())
                .map_err(|source| ExecError::Eval { node: node.id.clone(), source })
        };
        let mut branch = EdgeLabel::Uncond;
        match &node.semantics.action {
            Action::Assign { var, expr } => {
                let value = eval(expr, &env)?;
                store(&mut env, &node.id, var, value)?;
                record(&mut executed);
            }
            Action::Input { var } => {
                let value = inputs.pop_front().ok_or_else(|| ExecError::InputExhausted(node.id.clone()))?;
                store(&mut env, &node.id, var, value)?;
                record(&mut executed);
            }
            Action::Cond { expr } => {
                let holds = eval(expr, &env)? != 0;
                if holds {
                    record(&mut executed);
                }
                if holds && node.semantics.halt_when_true {
                    halted = true;
                    break;
                }
                branch = if holds { EdgeLabel::True } else { EdgeLabel::False };
            }
            Action::Nop => record(&mut executed),
        }
        if node.semantics.halt_after {
            halted = true;
            break;
        }
        current = m
            .successors(current)
            .iter()
            .find(|(_, label)| *label == branch)
            .map(|(to, _)| *to)
            .ok_or_else(|| ExecError::Stuck(node.id.clone()))?;
    }

    let verdict = if halted {
        let ok = tc
            .expect
            .eval(&|name: &str| env.get(name).copied())
            .map_err(ExecError::Expect)?;
        if ok != 0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    } else {
        Verdict::Fail
    };

    let order = m.node_order();
    let coverage = order
        .iter()
        .map(|&i| (m.nodes()[i].id.clone(), if seen[i] { Coverage::Executed } else { Coverage::NotExecuted }))
        .collect();
    let state_vector =
        order.iter().filter(|&&i| seen[i]).map(|&i| (m.nodes()[i].id.clone(), m.nodes()[i].state)).collect();

    Ok(ExecutionTrace {
        case_id: tc.id.clone(),
        assignments: tc.assignments.clone(),
        executed,
        coverage,
        state_vector,
        final_valuation: env,
        verdict,
        halt_reason: if halted { HaltReason::HaltFlag } else { HaltReason::BudgetExhausted },
        steps,
    })
}

fn store(env: &mut IndexMap<String, i64>, node: &NodeId, var: &str, value: i64) -> Result<(), ExecError> {
    match env.get_mut(var) {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => Err(ExecError::UndefinedVariable { node: node.clone(), var: var.to_string() }),
    }
}

/// Runs every case in suite order.
pub fn run_suite(m: &ProgramModel, suite: &TestSuite, budget: u64) -> Result<Vec<ExecutionTrace>, ExecError> {
    suite
        .cases
        .iter()
        .map(|tc| {
            run_test(m, tc, budget).map_err(|e| ExecError::InCase { case: tc.id.clone(), source: Box::new(e) })
        })
        .collect()
}

/// Cartesian product of the domains in lexicographic order; case ids read
/// `<v1,v2,...>`.
pub fn enumerate_inputs(
    domains: &[(String, RangeInclusive<i64>)],
    expect: &Expr,
    cap: u64,
) -> Result<TestSuite, SuiteError> {
    let mut size: u128 = 1;
    for (name, range) in domains {
        if range.is_empty() {
            return Err(SuiteError::EmptyRange(name.clone()));
        }
        let width = (*range.end() as i128 - *range.start() as i128 + 1) as u128;
        size = size.saturating_mul(width);
    }
    if size > cap as u128 {
        return Err(SuiteError::DomainTooLarge { size, cap });
    }
    let mut cases = Vec::with_capacity(size as usize);
    let mut current: Vec<i64> = domains.iter().map(|(_, r)| *r.start()).collect();
    loop {
        let id = format!("<{}>", current.iter().map(i64::to_string).collect::<Vec<_>>().join(","));
        cases.push(TestCase {
            id,
            assignments: domains.iter().zip(&current).map(|((n, _), v)| (n.clone(), *v)).collect(),
            inputs: Vec::new(),
            expect: expect.clone(),
        });
        // odometer increment, last variable fastest
        let mut pos = domains.len();
        loop {
            if pos == 0 {
                return Ok(TestSuite { cases });
            }
            pos -= 1;
            if current[pos] < *domains[pos].1.end() {
                current[pos] += 1;
                for (slot, (_, r)) in current[pos + 1..].iter_mut().zip(&domains[pos + 1..]) {
                    *slot = *r.start();
                }
                break;
            }
        }
    }
}

/// Parses `floor=0..2,req=0..2` (inclusive bounds; a bare value means a single point).
pub fn parse_domains(spec: &str) -> Result<Vec<(String, RangeInclusive<i64>)>, SuiteError> {
    let bad = |part: &str| SuiteError::Syntax(format!("bad domain `{part}`, expected name=lo..hi"));
    spec.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let (name, range) = part.split_once('=').ok_or_else(|| bad(part))?;
            let (lo, hi) = match range.split_once("..") {
                Some((lo, hi)) => (lo, hi.trim_start_matches('=')),
                None => (range, range),
            };
            let lo: i64 = lo.trim().parse().map_err(|_| bad(part))?;
            let hi: i64 = hi.trim().parse().map_err(|_| bad(part))?;
            Ok((name.trim().to_string(), lo..=hi))
        })
        .collect()
}

//! Statement-level program model: numbered nodes, CFG edges, variables and
//! per-node statechart annotations, loaded from a JSON model file.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{is_identifier, Expr, ExprSyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    ClassEntry,
    MethodEntry,
    Statement,
    Call,
}

impl NodeKind {
    pub fn prefix(self) -> &'static str {
        match self {
            NodeKind::ClassEntry => "CE",
            NodeKind::MethodEntry => "E",
            NodeKind::Statement => "S",
            NodeKind::Call => "C",
        }
    }

    pub fn from_prefix(prefix: &str) -> Option<Self> {
        Some(match prefix {
            "CE" => NodeKind::ClassEntry,
            "E" => NodeKind::MethodEntry,
            "S" => NodeKind::Statement,
            "C" => NodeKind::Call,
            _ => return None,
        })
    }
}

/// Object state attached to a node. `Nd` marks nodes outside every chart state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum StateLabel {
    Id,
    Gu,
    Gd,
    Do,
    #[default]
    Nd,
}

impl StateLabel {
    pub const ALL: [StateLabel; 5] =
        [StateLabel::Id, StateLabel::Gu, StateLabel::Gd, StateLabel::Do, StateLabel::Nd];

    pub fn code(self) -> &'static str {
        match self {
            StateLabel::Id => "Id",
            StateLabel::Gu => "Gu",
            StateLabel::Gd => "Gd",
            StateLabel::Do => "Do",
            StateLabel::Nd => "Nd",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateLabel::Id => "Idle",
            StateLabel::Gu => "Going Up",
            StateLabel::Gd => "Going Down",
            StateLabel::Do => "Door Open",
            StateLabel::Nd => "Not Defined",
        }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Node label such as `S13`: kind prefix followed by the statement ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Splits the label into its kind prefix and ordinal.
    pub fn split(&self) -> Option<(NodeKind, u32)> {
        let digits_at = self.0.find(|c: char| c.is_ascii_digit())?;
        let (prefix, digits) = self.0.split_at(digits_at);
        let kind = NodeKind::from_prefix(prefix)?;
        if !digits.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        Some((kind, digits.parse().ok()?))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Assign { var: String, expr: Expr },
    Cond { expr: Expr },
    Input { var: String },
    Nop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Semantics {
    pub action: Action,
    /// Cond nodes only: the run terminates when the condition holds.
    pub halt_when_true: bool,
    /// The run terminates right after this node executes.
    pub halt_after: bool,
}

impl Semantics {
    pub fn nop() -> Self {
        Semantics { action: Action::Nop, halt_when_true: false, halt_after: false }
    }

    pub fn is_cond(&self) -> bool {
        matches!(self.action, Action::Cond { .. })
    }

    pub fn halts(&self) -> bool {
        self.halt_when_true || self.halt_after
    }

    pub fn defined_var(&self) -> Option<&str> {
        match &self.action {
            Action::Assign { var, .. } | Action::Input { var } => Some(var),
            _ => None,
        }
    }

    pub fn used_vars(&self) -> Vec<&str> {
        match &self.action {
            Action::Assign { expr, .. } | Action::Cond { expr } => expr.variables(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub ordinal: u32,
    pub line: u32,
    pub text: String,
    pub semantics: Semantics,
    pub state: StateLabel,
    /// Class (or free-function group) the node belongs to.
    pub class: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Uncond,
    True,
    False,
}

impl EdgeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::Uncond => "uncond",
            EdgeLabel::True => "true",
            EdgeLabel::False => "false",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CfgEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub init: i64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("syntax error in expression of {context}: {source}")]
    ExprSyntax {
        context: String,
        #[source]
        source: ExprSyntaxError,
    },
    #[error("{context} references undeclared node `{id}`")]
    UnknownNode { id: String, context: String },
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
}

/// An immutable program model. Construction checks referential integrity only;
/// semantic rules are reported by [`validate_model`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramModel {
    variables: Vec<Variable>,
    nodes: Vec<ProgramNode>,
    edges: Vec<CfgEdge>,
    entry: NodeId,
    expect: Option<Expr>,
    index: HashMap<NodeId, usize>,
    succ: Vec<Vec<(usize, EdgeLabel)>>,
}

impl ProgramModel {
    pub fn new(
        variables: Vec<Variable>,
        nodes: Vec<ProgramNode>,
        edges: Vec<CfgEdge>,
        entry: NodeId,
        expect: Option<Expr>,
    ) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateId(node.id.to_string()));
            }
        }
        let mut succ = vec![Vec::new(); nodes.len()];
        for edge in &edges {
            let context = format!("edge {}->{}", edge.from, edge.to);
            let from = *index
                .get(&edge.from)
                .ok_or_else(|| ModelError::UnknownNode { id: edge.from.to_string(), context: context.clone() })?;
            let to = *index
                .get(&edge.to)
                .ok_or_else(|| ModelError::UnknownNode { id: edge.to.to_string(), context })?;
            succ[from].push((to, edge.label));
        }
        if !index.contains_key(&entry) {
            return Err(ModelError::UnknownNode { id: entry.to_string(), context: "entry".into() });
        }
        Ok(ProgramModel { variables, nodes, edges, entry, expect, index, succ })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn nodes(&self) -> &[ProgramNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[CfgEdge] {
        &self.edges
    }

    pub fn entry(&self) -> &NodeId {
        &self.entry
    }

    pub fn entry_index(&self) -> usize {
        self.index[&self.entry]
    }

    /// Default verdict predicate declared by the model file, if any.
    pub fn expect(&self) -> Option<&Expr> {
        self.expect.as_ref()
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, id: &NodeId) -> Option<&ProgramNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn successors(&self, idx: usize) -> &[(usize, EdgeLabel)] {
        &self.succ[idx]
    }

    pub fn is_declared(&self, var: &str) -> bool {
        self.variables.iter().any(|v| v.name == var)
    }

    /// Declared class groups in order of first appearance.
    pub fn classes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for class in self.nodes.iter().filter_map(|n| n.class.as_deref()) {
            if !out.contains(&class) {
                out.push(class);
            }
        }
        out
    }

    /// Node indices sorted by ordinal (declaration order breaks ties).
    pub fn node_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&i| self.nodes[i].ordinal);
        order
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            variables: self.variables.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| RawNode {
                    id: n.id.to_string(),
                    kind: n.kind,
                    line: n.line as i64,
                    text: n.text.clone(),
                    semantics: RawSemantics::from(&n.semantics),
                    state: n.state,
                    class: n.class.clone(),
                })
                .collect(),
            edges: self.edges.clone(),
            entry: self.entry.to_string(),
            expect: self.expect.as_ref().map(|e| e.to_string()),
        };
        serde_json::to_string_pretty(&file).expect("model serialization is infallible")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    variables: Vec<Variable>,
    nodes: Vec<RawNode>,
    edges: Vec<CfgEdge>,
    entry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expect: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: String,
    kind: NodeKind,
    line: i64,
    #[serde(default)]
    text: String,
    semantics: RawSemantics,
    #[serde(default)]
    state: StateLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum RawSemantics {
    Assign {
        var: String,
        expr: String,
        #[serde(default, skip_serializing_if = "is_false")]
        halt_after: bool,
    },
    Cond {
        expr: String,
        #[serde(default)]
        halt_when_true: bool,
        #[serde(default, skip_serializing_if = "is_false")]
        halt_after: bool,
    },
    Input {
        var: String,
        #[serde(default, skip_serializing_if = "is_false")]
        halt_after: bool,
    },
    Nop {
        #[serde(default)]
        halt_after: bool,
        #[serde(default, skip_serializing_if = "is_false")]
        halt_when_true: bool,
    },
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl From<&Semantics> for RawSemantics {
    fn from(s: &Semantics) -> Self {
        match &s.action {
            Action::Assign { var, expr } => {
                RawSemantics::Assign { var: var.clone(), expr: expr.to_string(), halt_after: s.halt_after }
            }
            Action::Cond { expr } => RawSemantics::Cond {
                expr: expr.to_string(),
                halt_when_true: s.halt_when_true,
                halt_after: s.halt_after,
            },
            Action::Input { var } => RawSemantics::Input { var: var.clone(), halt_after: s.halt_after },
            Action::Nop => RawSemantics::Nop { halt_after: s.halt_after, halt_when_true: s.halt_when_true },
        }
    }
}

fn convert_semantics(raw: RawSemantics, id: &str) -> Result<Semantics, ModelError> {
    let parse = |text: &str| {
        Expr::parse(text).map_err(|source| ModelError::ExprSyntax { context: format!("node {id}"), source })
    };
    Ok(match raw {
        RawSemantics::Assign { var, expr, halt_after } => Semantics {
            action: Action::Assign { var, expr: parse(&expr)? },
            halt_when_true: false,
            halt_after,
        },
        RawSemantics::Cond { expr, halt_when_true, halt_after } => {
            Semantics { action: Action::Cond { expr: parse(&expr)? }, halt_when_true, halt_after }
        }
        RawSemantics::Input { var, halt_after } => {
            Semantics { action: Action::Input { var }, halt_when_true: false, halt_after }
        }
        RawSemantics::Nop { halt_after, halt_when_true } => {
            Semantics { action: Action::Nop, halt_when_true, halt_after }
        }
    })
}

/// Parses a model file. Unannotated nodes receive the `Nd` state.
pub fn parse_model(text: &str) -> Result<ProgramModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for raw in file.nodes {
        let id = NodeId::new(raw.id.clone());
        let Some((_, ordinal)) = id.split() else {
            return Err(ModelError::Syntax {
                line: 0,
                column: 0,
                message: format!("node id `{}` is not a CE/E/S/C prefix followed by a number", raw.id),
            });
        };
        let semantics = convert_semantics(raw.semantics, &raw.id)?;
        // negative lines are kept as 0 so validation can flag them
        let line = u32::try_from(raw.line.max(0)).unwrap_or(u32::MAX);
        nodes.push(ProgramNode {
            id,
            kind: raw.kind,
            ordinal,
            line,
            text: raw.text,
            semantics,
            state: raw.state,
            class: raw.class,
        });
    }
    let expect = file
        .expect
        .map(|e| Expr::parse(&e).map_err(|source| ModelError::ExprSyntax { context: "expect".into(), source }))
        .transpose()?;
    ProgramModel::new(file.variables, nodes, file.edges, NodeId::new(file.entry), expect)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    IdKindMismatch,
    LineNotPositive,
    InvalidVariableName,
    DuplicateVariable,
    UndeclaredVariable,
    CondArity,
    NonCondBranching,
    HaltWhenTrueOnNonCond,
    HaltAfterOnCond,
    Unreachable,
    NoExitPath,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::IdKindMismatch => "id prefix does not match node kind",
            Rule::LineNotPositive => "line must be at least 1",
            Rule::InvalidVariableName => "variable name is not an identifier",
            Rule::DuplicateVariable => "variable declared twice",
            Rule::UndeclaredVariable => "reference to undeclared variable",
            Rule::CondArity => "cond requires true and false edges",
            Rule::NonCondBranching => "non-cond node allows at most one unconditional edge",
            Rule::HaltWhenTrueOnNonCond => "halt_when_true is only allowed on cond nodes",
            Rule::HaltAfterOnCond => "halt_after is not allowed on cond nodes",
            Rule::Unreachable => "unreachable from entry",
            Rule::NoExitPath => "no path to exit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub node: Option<NodeId>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(id) => write!(f, "{id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn diag(node: Option<&NodeId>, rule: Rule, detail: Option<String>) -> Diagnostic {
    let message = match detail {
        Some(d) => format!("{} ({d})", rule.describe()),
        None => rule.describe().to_string(),
    };
    Diagnostic { node: node.cloned(), rule, message }
}

/// Checks every model invariant; an empty result means the model is well formed.
pub fn validate_model(m: &ProgramModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for v in &m.variables {
        if !is_identifier(&v.name) {
            out.push(diag(None, Rule::InvalidVariableName, Some(v.name.clone())));
        }
        if !seen.insert(v.name.as_str()) {
            out.push(diag(None, Rule::DuplicateVariable, Some(v.name.clone())));
        }
    }

    for (i, node) in m.nodes.iter().enumerate() {
        let id = Some(&node.id);
        if node.id.split().map(|(k, _)| k) != Some(node.kind) {
            out.push(diag(id, Rule::IdKindMismatch, Some(format!("kind {}", node.kind.prefix()))));
        }
        if node.line == 0 {
            out.push(diag(id, Rule::LineNotPositive, None));
        }
        let mut referenced: Vec<&str> = node.semantics.used_vars();
        if let Some(def) = node.semantics.defined_var() {
            referenced.push(def);
        }
        for var in referenced {
            if !m.is_declared(var) {
                out.push(diag(id, Rule::UndeclaredVariable, Some(var.to_string())));
            }
        }

        let succ = &m.succ[i];
        if node.semantics.is_cond() {
            let trues = succ.iter().filter(|(_, l)| *l == EdgeLabel::True).count();
            let falses = succ.iter().filter(|(_, l)| *l == EdgeLabel::False).count();
            if trues != 1 || falses != 1 || succ.len() != 2 {
                out.push(diag(id, Rule::CondArity, Some(format!("found {} outgoing", succ.len()))));
            }
            if node.semantics.halt_after {
                out.push(diag(id, Rule::HaltAfterOnCond, None));
            }
        } else {
            if succ.len() > 1 || succ.iter().any(|(_, l)| *l != EdgeLabel::Uncond) {
                out.push(diag(id, Rule::NonCondBranching, None));
            }
            if node.semantics.halt_when_true {
                out.push(diag(id, Rule::HaltWhenTrueOnNonCond, None));
            }
        }
    }

    if let Some(expect) = &m.expect {
        for var in expect.variables() {
            if !m.is_declared(var) {
                out.push(diag(None, Rule::UndeclaredVariable, Some(format!("expect reads {var}"))));
            }
        }
    }

    let reachable = reachable_from(m.nodes.len(), m.entry_index(), |i| m.succ[i].iter().map(|(t, _)| *t));
    for (i, node) in m.nodes.iter().enumerate() {
        if !reachable[i] {
            out.push(diag(Some(&node.id), Rule::Unreachable, None));
        }
    }

    // reverse reachability from the halting nodes, i.e. from the virtual exit
    let mut pred = vec![Vec::new(); m.nodes.len()];
    for (from, succ) in m.succ.iter().enumerate() {
        for (to, _) in succ {
            pred[*to].push(from);
        }
    }
    let mut reaches_exit = vec![false; m.nodes.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, node) in m.nodes.iter().enumerate() {
        if node.semantics.halts() {
            reaches_exit[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(n) = queue.pop_front() {
        for &p in &pred[n] {
            if !reaches_exit[p] {
                reaches_exit[p] = true;
                queue.push_back(p);
            }
        }
    }
    for (i, node) in m.nodes.iter().enumerate() {
        if !reaches_exit[i] {
            out.push(diag(Some(&node.id), Rule::NoExitPath, None));
        }
    }

    out
}

pub(crate) fn reachable_from<I>(n: usize, start: usize, succ: impl Fn(usize) -> I) -> Vec<bool>
where
    I: Iterator<Item = usize>,
{
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for w in succ(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Assignment map helper used by the executor and tests.
pub fn initial_valuation(m: &ProgramModel) -> IndexMap<String, i64> {
    m.variables.iter().map(|v| (v.name.clone(), v.init)).collect()
}

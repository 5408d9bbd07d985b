//! Class dependence graph construction.
//!
//! Post-dominators are computed on the CFG augmented with a virtual exit that
//! every halting node flows into; control dependences follow the
//! Ferrante/Ottenstein/Warren criterion and data dependences come from a
//! reaching-definitions fixpoint.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::model::{EdgeLabel, NodeId, NodeKind, ProgramModel, StateLabel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CidgError {
    #[error("node {0} has no path to the program exit")]
    NoExitPath(NodeId),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
}

/// The model's CFG plus a virtual exit node at index `len()`.
///
/// Halt-when-true conds reach the exit on their true branch; halt-after nodes
/// reach it unconditionally.
#[derive(Debug, Clone)]
pub struct AugmentedCfg {
    succ: Vec<Vec<(usize, EdgeLabel)>>,
    pred: Vec<Vec<usize>>,
}

impl AugmentedCfg {
    pub fn from_model(m: &ProgramModel) -> Self {
        let n = m.nodes().len();
        let mut succ: Vec<Vec<(usize, EdgeLabel)>> = (0..n).map(|i| m.successors(i).to_vec()).collect();
        succ.push(Vec::new());
        for (i, node) in m.nodes().iter().enumerate() {
            if node.semantics.halt_when_true {
                succ[i].push((n, EdgeLabel::True));
            }
            if node.semantics.halt_after {
                succ[i].push((n, EdgeLabel::Uncond));
            }
        }
        let mut pred = vec![Vec::new(); n + 1];
        for (from, out) in succ.iter().enumerate() {
            for &(to, _) in out {
                if !pred[to].contains(&from) {
                    pred[to].push(from);
                }
            }
        }
        AugmentedCfg { succ, pred }
    }

    /// Number of real nodes; the exit has this index.
    pub fn len(&self) -> usize {
        self.succ.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exit(&self) -> usize {
        self.len()
    }

    pub fn successors(&self, v: usize) -> &[(usize, EdgeLabel)] {
        &self.succ[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PdomParent {
    Node(NodeId),
    Exit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostDominatorTree {
    /// Immediate post-dominator of every node.
    pub parent: IndexMap<NodeId, PdomParent>,
    // ipdom by model node index; the exit index maps to itself
    ipdom: Vec<usize>,
}

impl PostDominatorTree {
    pub fn ipdom_index(&self, v: usize) -> usize {
        self.ipdom[v]
    }

    pub fn exit_index(&self) -> usize {
        self.ipdom.len() - 1
    }

    /// Whether `d` post-dominates `v` (reflexive). Indices may include the exit.
    pub fn post_dominates(&self, d: usize, v: usize) -> bool {
        let exit = self.exit_index();
        let mut cur = v;
        loop {
            if cur == d {
                return true;
            }
            if cur == exit {
                return false;
            }
            cur = self.ipdom[cur];
        }
    }
}

pub fn compute_postdominators(m: &ProgramModel) -> Result<PostDominatorTree, CidgError> {
    let cfg = AugmentedCfg::from_model(m);
    let exit = cfg.exit();
    let total = exit + 1;

    // postorder of the reverse graph rooted at the exit
    let mut po_num = vec![usize::MAX; total];
    let mut order = Vec::with_capacity(total);
    let mut visited = vec![false; total];
    let mut stack: Vec<(usize, usize)> = vec![(exit, 0)];
    visited[exit] = true;
    while let Some(&mut (v, ref mut next)) = stack.last_mut() {
        let preds = cfg.predecessors(v);
        if *next < preds.len() {
            let w = preds[*next];
            *next += 1;
            if !visited[w] {
                visited[w] = true;
                stack.push((w, 0));
            }
        } else {
            po_num[v] = order.len();
            order.push(v);
            stack.pop();
        }
    }
    if let Some(stuck) = (0..exit).find(|&v| !visited[v]) {
        return Err(CidgError::NoExitPath(m.nodes()[stuck].id.clone()));
    }

    const UNDEF: usize = usize::MAX;
    let mut ipdom = vec![UNDEF; total];
    ipdom[exit] = exit;
    let mut changed = true;
    while changed {
        changed = false;
        for &b in order.iter().rev() {
            if b == exit {
                continue;
            }
            let mut new_ipdom = UNDEF;
            for &(s, _) in cfg.successors(b) {
                if ipdom[s] == UNDEF {
                    continue;
                }
                new_ipdom = if new_ipdom == UNDEF { s } else { intersect(&ipdom, &po_num, s, new_ipdom) };
            }
            if new_ipdom != ipdom[b] {
                ipdom[b] = new_ipdom;
                changed = true;
            }
        }
    }

    let parent = m
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let p = if ipdom[i] == exit { PdomParent::Exit } else { PdomParent::Node(m.nodes()[ipdom[i]].id.clone()) };
            (node.id.clone(), p)
        })
        .collect();
    Ok(PostDominatorTree { parent, ipdom })
}

fn intersect(ipdom: &[usize], po_num: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while po_num[a] < po_num[b] {
            a = ipdom[a];
        }
        while po_num[b] < po_num[a] {
            b = ipdom[b];
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CdEdge {
    pub governing: NodeId,
    pub dependent: NodeId,
    pub branch: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DdEdge {
    pub def: NodeId,
    #[serde(rename = "use")]
    pub use_: NodeId,
    pub var: String,
}

/// Control dependences on cond nodes. For every branch edge `c -> x` the nodes
/// on the post-dominator chain from `x` up to (excluding) `ipdom(c)` depend on
/// `c` with that branch label.
pub fn derive_control_dependences(m: &ProgramModel, pdt: &PostDominatorTree) -> Vec<CdEdge> {
    let cfg = AugmentedCfg::from_model(m);
    let mut found: BTreeSet<(u32, usize, EdgeLabel, u32, usize)> = BTreeSet::new();
    for (c, node) in m.nodes().iter().enumerate() {
        if !node.semantics.is_cond() {
            continue;
        }
        let stop = pdt.ipdom_index(c);
        for &(x, label) in cfg.successors(c) {
            let mut runner = x;
            while runner != stop && runner != cfg.exit() {
                let dep = &m.nodes()[runner];
                found.insert((node.ordinal, c, label, dep.ordinal, runner));
                runner = pdt.ipdom_index(runner);
            }
        }
    }
    found
        .into_iter()
        .map(|(_, c, branch, _, d)| CdEdge {
            governing: m.nodes()[c].id.clone(),
            dependent: m.nodes()[d].id.clone(),
            branch,
        })
        .collect()
}

/// Def-use edges from reaching definitions over the (unaugmented) CFG.
pub fn derive_data_dependences(m: &ProgramModel) -> Vec<DdEdge> {
    let nodes = m.nodes();
    let defs: Vec<(usize, &str)> = nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| n.semantics.defined_var().map(|v| (i, v)))
        .collect();
    let n = nodes.len();

    let gen: Vec<Option<usize>> = (0..n).map(|i| defs.iter().position(|&(d, _)| d == i)).collect();
    let kills = |node: usize, def: usize| nodes[node].semantics.defined_var() == Some(defs[def].1);

    let mut preds = vec![Vec::new(); n];
    for v in 0..n {
        for &(w, _) in m.successors(v) {
            preds[w].push(v);
        }
    }

    let mut in_sets = vec![vec![false; defs.len()]; n];
    let mut out_sets = vec![vec![false; defs.len()]; n];
    let order = m.node_order();
    let mut changed = true;
    while changed {
        changed = false;
        for &v in &order {
            let mut input = vec![false; defs.len()];
            for &p in &preds[v] {
                for (slot, &bit) in input.iter_mut().zip(&out_sets[p]) {
                    *slot |= bit;
                }
            }
            let mut output: Vec<bool> = input.iter().enumerate().map(|(d, &b)| b && !kills(v, d)).collect();
            if let Some(g) = gen[v] {
                output[g] = true;
            }
            if input != in_sets[v] || output != out_sets[v] {
                in_sets[v] = input;
                out_sets[v] = output;
                changed = true;
            }
        }
    }

    let mut found: BTreeSet<(u32, u32, String, usize, usize)> = BTreeSet::new();
    for u in 0..n {
        for var in nodes[u].semantics.used_vars() {
            for (d, &(def_node, def_var)) in defs.iter().enumerate() {
                if def_var == var && in_sets[u][d] {
                    found.insert((nodes[def_node].ordinal, nodes[u].ordinal, var.to_string(), def_node, u));
                }
            }
        }
    }
    found
        .into_iter()
        .map(|(_, _, var, d, u)| DdEdge { def: nodes[d].id.clone(), use_: nodes[u].id.clone(), var })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cidg {
    /// Class the graph was restricted to, if any.
    pub class: Option<String>,
    /// Included nodes in ordinal order.
    pub nodes: Vec<NodeId>,
    pub classes: IndexMap<String, Vec<NodeId>>,
    pub cd_edges: Vec<CdEdge>,
    pub dd_edges: Vec<DdEdge>,
    pub annotations: IndexMap<NodeId, StateLabel>,
}

impl Cidg {
    pub fn contains(&self, id: &NodeId) -> bool {
        self.annotations.contains_key(id)
    }

    /// Nodes other than class entries and the model entry that lack an
    /// incoming control-dependence edge.
    pub fn unanchored(&self, m: &ProgramModel) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|id| *id != m.entry())
            .filter(|id| m.node(id).map(|n| n.kind) != Some(NodeKind::ClassEntry))
            .filter(|id| !self.cd_edges.iter().any(|e| &e.dependent == *id))
            .cloned()
            .collect()
    }

    /// Keeps only the nodes of `class` and the edges between them.
    pub fn restrict(&self, class: &str) -> Result<Cidg, CidgError> {
        let members = self.classes.get(class).ok_or_else(|| CidgError::UnknownClass(class.to_string()))?;
        let keep = |id: &NodeId| members.contains(id);
        Ok(Cidg {
            class: Some(class.to_string()),
            nodes: self.nodes.iter().filter(|id| keep(id)).cloned().collect(),
            classes: IndexMap::from([(class.to_string(), members.clone())]),
            cd_edges: self
                .cd_edges
                .iter()
                .filter(|e| keep(&e.governing) && keep(&e.dependent))
                .cloned()
                .collect(),
            dd_edges: self.dd_edges.iter().filter(|e| keep(&e.def) && keep(&e.use_)).cloned().collect(),
            annotations: self.annotations.iter().filter(|(id, _)| keep(id)).map(|(k, v)| (k.clone(), *v)).collect(),
        })
    }

    /// DOT rendering: nodes labelled `id\nstate`, control edges solid, data edges dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cidg {\n  node [shape=box];\n");
        let mut clustered = BTreeSet::new();
        for (i, (class, members)) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_{i} {{\n    label=\"{class}\";");
            for id in members.iter().filter(|id| self.contains(id)) {
                clustered.insert(id.clone());
                let _ = writeln!(out, "    \"{id}\" [label=\"{id}\\n{}\"];", self.annotations[id]);
            }
            out.push_str("  }\n");
        }
        for id in self.nodes.iter().filter(|id| !clustered.contains(*id)) {
            let _ = writeln!(out, "  \"{id}\" [label=\"{id}\\n{}\"];", self.annotations[id]);
        }
        for e in &self.cd_edges {
            let label = match e.branch {
                EdgeLabel::True => " [label=\"T\"]",
                EdgeLabel::False => " [label=\"F\"]",
                EdgeLabel::Uncond => "",
            };
            let _ = writeln!(out, "  \"{}\" -> \"{}\"{label};", e.governing, e.dependent);
        }
        for e in &self.dd_edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\" [style=dashed, label=\"{}\"];", e.def, e.use_, e.var);
        }
        out.push_str("}\n");
        out
    }
}

/// Assembles the graph from precomputed edges, anchoring every node that has
/// no control dependence under its method entry (and method entries under
/// their class entry).
pub fn assemble_cidg(
    m: &ProgramModel,
    cd_edges: &[CdEdge],
    dd_edges: &[DdEdge],
    restrict_to_class: Option<&str>,
) -> Result<Cidg, CidgError> {
    let order = m.node_order();
    let nodes: Vec<NodeId> = order.iter().map(|&i| m.nodes()[i].id.clone()).collect();

    let mut classes: IndexMap<String, Vec<NodeId>> = IndexMap::new();
    for &i in &order {
        let node = &m.nodes()[i];
        if let Some(class) = &node.class {
            classes.entry(class.clone()).or_default().push(node.id.clone());
        }
    }

    let mut cd: Vec<CdEdge> = cd_edges.to_vec();
    for (pos, &i) in order.iter().enumerate() {
        let node = &m.nodes()[i];
        if node.kind == NodeKind::ClassEntry || node.id == *m.entry() {
            continue;
        }
        if cd_edges.iter().any(|e| e.dependent == node.id) {
            continue;
        }
        let wanted = |k: NodeKind| {
            if node.kind == NodeKind::MethodEntry {
                k == NodeKind::ClassEntry
            } else {
                k == NodeKind::MethodEntry || k == NodeKind::ClassEntry
            }
        };
        let anchor = order[..pos].iter().rev().map(|&j| &m.nodes()[j]).find(|cand| {
            cand.class == node.class && wanted(cand.kind) && (node.class.is_some() || cand.kind == NodeKind::MethodEntry)
        });
        if let Some(anchor) = anchor {
            cd.push(CdEdge { governing: anchor.id.clone(), dependent: node.id.clone(), branch: EdgeLabel::Uncond });
        }
    }
    let ordinal = |id: &NodeId| m.node(id).map(|n| n.ordinal).unwrap_or(u32::MAX);
    cd.sort_by(|a, b| {
        (ordinal(&a.governing), a.branch, ordinal(&a.dependent)).cmp(&(ordinal(&b.governing), b.branch, ordinal(&b.dependent)))
    });
    cd.dedup();

    let annotations = nodes.iter().map(|id| (id.clone(), m.node(id).map(|n| n.state).unwrap_or_default())).collect();
    let full = Cidg { class: None, nodes, classes, cd_edges: cd, dd_edges: dd_edges.to_vec(), annotations };
    match restrict_to_class {
        Some(class) => full.restrict(class),
        None => Ok(full),
    }
}

/// Computes post-dominators, both edge kinds and the assembled graph in one go.
pub fn build_cidg(m: &ProgramModel, restrict_to_class: Option<&str>) -> Result<Cidg, CidgError> {
    if let Some(class) = restrict_to_class {
        if !m.classes().contains(&class) {
            return Err(CidgError::UnknownClass(class.to_string()));
        }
    }
    let pdt = compute_postdominators(m)?;
    let cd = derive_control_dependences(m, &pdt);
    let dd = derive_data_dependences(m);
    assemble_cidg(m, &cd, &dd, restrict_to_class)
}

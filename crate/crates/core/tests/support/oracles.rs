//! Brute-force reference implementations. Nothing here goes through the
//! dominator-tree or dataflow code paths of the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use osd_core::expr::Expr;
use osd_core::model::{
    Action, CfgEdge, EdgeLabel, NodeId, NodeKind, ProgramModel, ProgramNode, Semantics, StateLabel, Variable,
};
use rand::Rng;

/// Successor lists with a virtual exit at index `n`, built straight from the
/// model's edges and halt flags.
pub fn exit_graph(m: &ProgramModel) -> Vec<Vec<(usize, EdgeLabel)>> {
    let n = m.nodes().len();
    let index = |id: &NodeId| m.nodes().iter().position(|x| &x.id == id).unwrap();
    let mut succ = vec![Vec::new(); n + 1];
    for e in m.edges() {
        succ[index(&e.from)].push((index(&e.to), e.label));
    }
    for (i, node) in m.nodes().iter().enumerate() {
        if node.semantics.halt_when_true {
            succ[i].push((n, EdgeLabel::True));
        }
        if node.semantics.halt_after {
            succ[i].push((n, EdgeLabel::Uncond));
        }
    }
    succ
}

/// Searches for a path `from -> exit` that avoids `avoid`; one exists iff a
/// simple one does. Post-dominance of `avoid` over `from` is exactly the
/// absence of such a path.
fn path_to_exit_avoiding(g: &[Vec<(usize, EdgeLabel)>], from: usize, avoid: usize) -> bool {
    let exit = g.len() - 1;
    let mut seen = vec![false; g.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        if v == exit {
            return true;
        }
        for &(w, _) in &g[v] {
            if w != avoid && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

pub fn post_dominates(g: &[Vec<(usize, EdgeLabel)>], d: usize, v: usize) -> bool {
    d == v || (v != g.len() - 1 && !path_to_exit_avoiding(g, v, d))
}

/// Immediate post-dominator by enumeration: the strict post-dominator of `v`
/// that every other strict post-dominator post-dominates.
pub fn brute_ipdom(g: &[Vec<(usize, EdgeLabel)>], v: usize) -> usize {
    let all: Vec<usize> = (0..g.len()).filter(|&d| d != v && post_dominates(g, d, v)).collect();
    *all.iter().find(|&&d| all.iter().all(|&o| post_dominates(g, o, d))).expect("exit always post-dominates")
}

/// `n` is control dependent on cond `c` via branch `b` iff some `b`-successor
/// `x` of `c` is post-dominated by `n` and `n` does not strictly post-dominate `c`.
pub fn brute_control_dependences(m: &ProgramModel) -> BTreeSet<(String, String, EdgeLabel)> {
    let g = exit_graph(m);
    let n = m.nodes().len();
    let mut out = BTreeSet::new();
    for (c, cnode) in m.nodes().iter().enumerate() {
        if !cnode.semantics.is_cond() {
            continue;
        }
        for &(x, label) in &g[c] {
            for dep in 0..n {
                let strictly = dep != c && post_dominates(&g, dep, c);
                if post_dominates(&g, dep, x) && !strictly {
                    out.insert((cnode.id.to_string(), m.nodes()[dep].id.to_string(), label));
                }
            }
        }
    }
    out
}

/// Def-use pairs witnessed by an explicit kill-free CFG path search.
pub fn brute_data_dependences(m: &ProgramModel) -> BTreeSet<(String, String, String)> {
    let nodes = m.nodes();
    let index = |id: &NodeId| nodes.iter().position(|x| &x.id == id).unwrap();
    let mut succ = vec![Vec::new(); nodes.len()];
    for e in m.edges() {
        succ[index(&e.from)].push(index(&e.to));
    }
    let mut out = BTreeSet::new();
    for (d, dnode) in nodes.iter().enumerate() {
        let Some(var) = dnode.semantics.defined_var() else { continue };
        for (u, unode) in nodes.iter().enumerate() {
            if !unode.semantics.used_vars().contains(&var) {
                continue;
            }
            let mut seen = vec![false; nodes.len()];
            let mut stack: Vec<usize> = succ[d].clone();
            let mut found = false;
            while let Some(w) = stack.pop() {
                if w == u {
                    found = true;
                    break;
                }
                if seen[w] || nodes[w].semantics.defined_var() == Some(var) {
                    continue;
                }
                seen[w] = true;
                stack.extend(&succ[w]);
            }
            if found {
                out.insert((dnode.id.to_string(), unode.id.to_string(), var.to_string()));
            }
        }
    }
    out
}

/// LCS length by trying every subsequence of the shorter input, longest first.
pub fn brute_lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let k = short.len();
    let mut best = 0;
    for mask in 0u32..(1u32 << k) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let sub: Vec<&T> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| &short[i]).collect();
        let mut it = long.iter();
        if sub.iter().all(|x| it.any(|y| y == *x)) {
            best = size;
        }
    }
    best
}

/// Random well-formed model over `n` statement nodes: conds get a true and a
/// false edge, other nodes at most one edge, and halting nodes give every
/// node a way out. Rejection-samples until the model validates.
pub fn random_model<R: Rng>(rng: &mut R, max_nodes: usize) -> ProgramModel {
    loop {
        let n = rng.gen_range(1..=max_nodes);
        let vars = ["a", "b", "c"];
        let mut nodes = Vec::with_capacity(n);
        let mut edges = Vec::new();
        let id = |i: usize| NodeId::new(format!("S{}", i + 1));
        for i in 0..n {
            let last = i + 1 == n;
            let roll: f64 = rng.gen();
            let next = |rng: &mut R| if !last && rng.gen_bool(0.7) { i + 1 } else { rng.gen_range(0..n) };
            let (action, halt_when_true, halt_after) = if roll < 0.4 && n > 1 {
                let (t, f) = (next(rng), next(rng));
                edges.push(CfgEdge { from: id(i), to: id(t), label: EdgeLabel::True });
                edges.push(CfgEdge { from: id(i), to: id(f), label: EdgeLabel::False });
                let e = Expr::parse(&format!("(> {} {})", vars[i % 3], vars[(i + 1) % 3])).unwrap();
                (Action::Cond { expr: e }, rng.gen_bool(0.1), false)
            } else {
                let halt = last || rng.gen_bool(0.1);
                if !halt || rng.gen_bool(0.3) {
                    edges.push(CfgEdge { from: id(i), to: id(next(rng)), label: EdgeLabel::Uncond });
                }
                let action = if rng.gen_bool(0.6) {
                    let v = vars[rng.gen_range(0..3)];
                    let w = vars[rng.gen_range(0..3)];
                    Action::Assign { var: v.into(), expr: Expr::parse(&format!("(+ {w} 1)")).unwrap() }
                } else {
                    Action::Nop
                };
                (action, false, halt)
            };
            nodes.push(ProgramNode {
                id: id(i),
                kind: NodeKind::Statement,
                ordinal: (i + 1) as u32,
                line: (i + 1) as u32,
                text: String::new(),
                semantics: Semantics { action, halt_when_true, halt_after },
                state: StateLabel::Nd,
                class: None,
            });
        }
        let variables = vars.iter().map(|v| Variable { name: v.to_string(), init: 0 }).collect();
        let m = ProgramModel::new(variables, nodes, edges, id(0), None).unwrap();
        if osd_core::validate_model(&m).is_empty() {
            return m;
        }
    }
}

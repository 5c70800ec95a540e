//! Structural-causality graph over the unique messages of a trace.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ingest::MessageCatalog;
use crate::types::{causal, Message, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub support: u64,
}

/// Directed graph whose nodes are unique messages (canonical indices) and
/// whose edges are causal pairs with non-zero support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalityGraph {
    nodes: Vec<Message>,
    node_support: Vec<u64>,
    roots: Vec<bool>,
    terminals: Vec<bool>,
    /// Sorted by `(from, to)`.
    edges: Vec<Edge>,
}

impl CausalityGraph {
    /// Assembles a graph from explicit parts, checking every structural
    /// invariant.
    pub fn from_parts(
        nodes: Vec<Message>,
        node_support: Vec<u64>,
        roots: Vec<bool>,
        terminals: Vec<bool>,
        mut edges: Vec<Edge>,
    ) -> Result<Self> {
        let n = nodes.len();
        if node_support.len() != n || roots.len() != n || terminals.len() != n {
            return Err(Error::InvalidGraph("node attribute lengths differ".into()));
        }
        edges.sort();
        for pair in edges.windows(2) {
            if (pair[0].from, pair[0].to) == (pair[1].from, pair[1].to) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {} -> {}",
                    pair[0].from, pair[0].to
                )));
            }
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidGraph(format!("edge {} -> {} out of range", e.from, e.to)));
            }
            if !causal(&nodes[e.from], &nodes[e.to]) {
                return Err(Error::NotCausal {
                    a: nodes[e.from].to_string(),
                    b: nodes[e.to].to_string(),
                });
            }
            if roots[e.to] {
                return Err(Error::InvalidGraph(format!("edge enters root {}", nodes[e.to])));
            }
            if terminals[e.from] {
                return Err(Error::InvalidGraph(format!("edge leaves terminal {}", nodes[e.from])));
            }
            if e.support > node_support[e.from].min(node_support[e.to]) {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} support {} exceeds its endpoints",
                    nodes[e.from], nodes[e.to], e.support
                )));
            }
        }
        Ok(CausalityGraph {
            nodes,
            node_support,
            roots,
            terminals,
            edges,
        })
    }

    pub fn nodes(&self) -> &[Message] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_support(&self, i: usize) -> u64 {
        self.node_support[i]
    }

    pub fn is_root(&self, i: usize) -> bool {
        self.roots[i]
    }

    pub fn is_terminal(&self, i: usize) -> bool {
        self.terminals[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.edges
            .binary_search_by(|e| (e.from, e.to).cmp(&(from, to)))
            .ok()
            .map(|i| &self.edges[i])
    }

    pub fn out_edges(&self, from: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == from)
    }

    pub fn in_edges(&self, to: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == to)
    }

    /// Graphviz rendering: roots are double circles, terminals boxes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph causality {\n    rankdir=LR;\n");
        for (i, m) in self.nodes.iter().enumerate() {
            let shape = match (self.roots[i], self.terminals[i]) {
                (true, true) => "box, peripheries=2",
                (true, false) => "doublecircle",
                (false, true) => "box",
                (false, false) => "ellipse",
            };
            writeln!(
                out,
                "    n{i} [label=\"{i}:{}:{}:{} ({})\", shape={shape}];",
                escape(&m.src),
                escape(&m.dest),
                escape(&m.cmd),
                self.node_support[i]
            )
            .unwrap();
        }
        for e in &self.edges {
            writeln!(out, "    n{} -> n{} [label=\"{}\"];", e.from, e.to, e.support).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Greedy disjoint pairing of `a` occurrences with strictly later `b`
/// occurrences. Both slices hold ascending event indices.
pub(crate) fn paired_support(a_events: &[usize], b_events: &[usize]) -> u64 {
    let mut i = 0;
    let mut pending = 0u64;
    let mut support = 0u64;
    for &e in b_events {
        while i < a_events.len() && a_events[i] < e {
            pending += 1;
            i += 1;
        }
        if pending > 0 {
            pending -= 1;
            support += 1;
        }
    }
    support
}

/// Number of occurrences of `m` in `trace`.
pub fn node_support(trace: &Trace, m: &Message) -> u64 {
    trace.occurrences().filter(|(_, x)| *x == m).count() as u64
}

/// Maximum number of disjoint `(a, b)` occurrence pairs with `a` in a
/// strictly earlier event than `b`.
pub fn edge_support(trace: &Trace, a: &Message, b: &Message) -> Result<u64> {
    if !causal(a, b) {
        return Err(Error::NotCausal {
            a: a.to_string(),
            b: b.to_string(),
        });
    }
    let events_of = |target: &Message| -> Vec<usize> {
        trace
            .occurrences()
            .filter(|(_, x)| *x == target)
            .map(|(e, _)| e)
            .collect()
    };
    Ok(paired_support(&events_of(a), &events_of(b)))
}

/// Builds the causality graph: every causal pair `(a, b)` with `a` not an
/// end message, `b` not a start message and non-zero support becomes an
/// edge.
pub fn build_graph(catalog: &MessageCatalog, exec: Execution) -> CausalityGraph {
    let nodes = catalog.messages().to_vec();
    let n = nodes.len();
    let mut by_src: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, m) in nodes.iter().enumerate() {
        by_src.entry(m.src.as_str()).or_default().push(i);
    }
    let mut candidates = Vec::new();
    for (a, m) in nodes.iter().enumerate() {
        if catalog.is_end(a) {
            continue;
        }
        if let Some(succ) = by_src.get(m.dest.as_str()) {
            candidates.extend(succ.iter().filter(|&&b| !catalog.is_start(b)).map(|&b| (a, b)));
        }
    }
    let supports = exec.map(candidates.len(), |k| {
        let (a, b) = candidates[k];
        paired_support(catalog.occurrences(a), catalog.occurrences(b))
    });
    let edges = candidates
        .iter()
        .zip(supports)
        .filter(|(_, s)| *s > 0)
        .map(|(&(from, to), support)| Edge { from, to, support })
        .collect();
    CausalityGraph {
        node_support: (0..n).map(|i| catalog.occurrences(i).len() as u64).collect(),
        roots: (0..n).map(|i| catalog.is_start(i)).collect(),
        terminals: (0..n).map(|i| catalog.is_end(i)).collect(),
        nodes,
        edges,
    }
}

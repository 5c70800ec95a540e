//! Finite-state automata derived from reduced solutions.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::causality::{escape, CausalityGraph};
use crate::constraints::{check_solution, generate_constraints, Solution};
use crate::error::{Error, Result};
use crate::types::Message;

pub const JSON_FORMAT: &str = "flowsynth-fsa-1";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub label: Message,
    pub to: String,
}

/// An automaton whose initial state is its only accepting state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fsa {
    states: Vec<String>,
    initial: String,
    alphabet: Vec<Message>,
    transitions: Vec<Transition>,
}

#[derive(Serialize, Deserialize)]
struct FsaJson {
    format: String,
    states: Vec<String>,
    initial: String,
    accepting: Vec<String>,
    alphabet: Vec<Message>,
    transitions: Vec<Transition>,
}

impl Fsa {
    pub fn new(
        states: Vec<String>,
        initial: String,
        alphabet: Vec<Message>,
        transitions: Vec<Transition>,
    ) -> Result<Self> {
        let state_set: HashSet<&String> = states.iter().collect();
        if state_set.len() != states.len() {
            return Err(Error::InvalidFsa("duplicate state".into()));
        }
        if !state_set.contains(&initial) {
            return Err(Error::InvalidFsa(format!("initial state `{initial}` is not a state")));
        }
        let sigma: HashSet<&Message> = alphabet.iter().collect();
        if sigma.len() != alphabet.len() {
            return Err(Error::InvalidFsa("duplicate alphabet symbol".into()));
        }
        for t in &transitions {
            if !state_set.contains(&t.from) || !state_set.contains(&t.to) {
                return Err(Error::InvalidFsa(format!(
                    "transition {} -{}-> {} has an unknown endpoint",
                    t.from, t.label, t.to
                )));
            }
            if !sigma.contains(&t.label) {
                return Err(Error::InvalidFsa(format!("label {} is not in the alphabet", t.label)));
            }
        }
        Ok(Fsa {
            states,
            initial,
            alphabet,
            transitions,
        })
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial(&self) -> &str {
        &self.initial
    }

    pub fn accepting(&self) -> &str {
        &self.initial
    }

    pub fn alphabet(&self) -> &[Message] {
        &self.alphabet
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn to_json(&self) -> String {
        let doc = FsaJson {
            format: JSON_FORMAT.to_string(),
            states: self.states.clone(),
            initial: self.initial.clone(),
            accepting: vec![self.initial.clone()],
            alphabet: self.alphabet.clone(),
            transitions: self.transitions.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("FSA serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FsaJson = serde_json::from_str(text)?;
        if doc.format != JSON_FORMAT {
            return Err(Error::InvalidFsa(format!("unsupported format tag `{}`", doc.format)));
        }
        if doc.accepting != [doc.initial.clone()] {
            return Err(Error::InvalidFsa("the accepting set must be exactly the initial state".into()));
        }
        Fsa::new(doc.states, doc.initial, doc.alphabet, doc.transitions)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph fsa {\n    rankdir=LR;\n");
        for s in &self.states {
            let shape = if *s == self.initial { "doublecircle" } else { "circle" };
            writeln!(out, "    \"{}\" [shape={shape}];", escape(s)).unwrap();
        }
        for t in &self.transitions {
            writeln!(
                out,
                "    \"{}\" -> \"{}\" [label=\"{}\"];",
                escape(&t.from),
                escape(&t.to),
                escape(&t.label.to_string())
            )
            .unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Name of the state reached after consuming message `i` of a flow that has
/// not finished yet.
pub fn message_state(i: usize) -> String {
    format!("m{i}")
}

/// Builds the automaton for a consistent solution: one state per
/// non-terminal message that carries flow, plus `q0`. Consuming a start
/// message leaves `q0`; consuming an end message returns to it.
pub fn derive_fsa(graph: &CausalityGraph, sol: &Solution) -> Result<Fsa> {
    let cs = generate_constraints(graph);
    let full = Solution::from_values(&cs, &sol.values(&cs));
    if !check_solution(&cs, &full)? || full.size() != sol.size() {
        return Err(Error::InconsistentSolution(
            "solution does not satisfy the graph's constraints".into(),
        ));
    }
    let n = graph.num_nodes();
    let mut out_flow = vec![0u64; n];
    let mut in_flow = vec![0u64; n];
    for (&(a, b), &x) in full.assignment() {
        out_flow[a] += x;
        in_flow[b] += x;
    }
    let throughput = |i: usize| match (graph.is_root(i), graph.is_terminal(i)) {
        (_, false) => out_flow[i],
        (false, true) => in_flow[i],
        (true, true) => graph.node_support(i),
    };
    let initial = "q0".to_string();
    let target = |i: usize| {
        if graph.is_terminal(i) {
            initial.clone()
        } else {
            message_state(i)
        }
    };
    let mut states = vec![initial.clone()];
    states.extend((0..n).filter(|&i| !graph.is_terminal(i) && throughput(i) > 0).map(message_state));
    let mut transitions = Vec::new();
    for i in (0..n).filter(|&i| graph.is_root(i) && throughput(i) > 0) {
        transitions.push(Transition {
            from: initial.clone(),
            label: graph.nodes()[i].clone(),
            to: target(i),
        });
    }
    for (a, b) in full.support_edges() {
        transitions.push(Transition {
            from: message_state(a),
            label: graph.nodes()[b].clone(),
            to: target(b),
        });
    }
    Fsa::new(states, initial, graph.nodes().to_vec(), transitions)
}

/// Index structures for running an automaton.
#[derive(Debug, Clone)]
pub(crate) struct CompiledFsa {
    pub initial: usize,
    pub num_states: usize,
    pub symbol: HashMap<Message, usize>,
    /// `moves[symbol]` = all `(from, to)` state pairs labeled by `symbol`.
    pub moves: Vec<Vec<(usize, usize)>>,
    /// `out_symbols[state]` = symbols labeling a transition out of `state`.
    pub out_symbols: Vec<Vec<usize>>,
}

impl CompiledFsa {
    pub fn new(fsa: &Fsa) -> Self {
        let state: HashMap<&str, usize> = fsa
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let symbol: HashMap<Message, usize> = fsa
            .alphabet
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut moves = vec![Vec::new(); fsa.alphabet.len()];
        let mut out_symbols = vec![Vec::new(); fsa.states.len()];
        for t in &fsa.transitions {
            let (from, to, sym) = (state[t.from.as_str()], state[t.to.as_str()], symbol[&t.label]);
            if !moves[sym].contains(&(from, to)) {
                moves[sym].push((from, to));
            }
            if !out_symbols[from].contains(&sym) {
                out_symbols[from].push(sym);
            }
        }
        CompiledFsa {
            initial: state[fsa.initial.as_str()],
            num_states: fsa.states.len(),
            symbol,
            moves,
            out_symbols,
        }
    }
}

//! Integer consistency constraints over the edges of a causality graph.
//!
//! Every edge `a -> b` gets a variable `c(a -> b)` bounded by the edge
//! support. Every non-terminal node equates its support with the sum of its
//! outgoing variables, every non-root node with the sum of its incoming ones.

use std::collections::BTreeMap;
use std::fmt;

use crate::causality::CausalityGraph;
use crate::error::{Error, Result};
use crate::types::Message;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variable {
    pub from: usize,
    pub to: usize,
    pub upper: u64,
}

impl Variable {
    pub fn name(&self) -> String {
        format!("c_{}_{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Outgoing,
    Incoming,
}

/// `target == sum(vars)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equality {
    pub node: usize,
    pub side: Side,
    pub target: u64,
    pub vars: Vec<usize>,
}

/// A node whose equality has an empty sum but a positive target. Typically
/// the trace was cut off while a flow instance was still in progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasibility {
    pub node: usize,
    pub message: Message,
    pub side: Side,
    pub support: u64,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.side {
            Side::Outgoing => "is not an end message but has no causal successor",
            Side::Incoming => "is not a start message but has no causal predecessor",
        };
        write!(f, "{} (support {}) {what}", self.message, self.support)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSystem {
    nodes: Vec<Message>,
    variables: Vec<Variable>,
    equalities: Vec<Equality>,
    infeasible: Vec<Infeasibility>,
}

impl ConstraintSystem {
    pub fn nodes(&self) -> &[Message] {
        &self.nodes
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn equalities(&self) -> &[Equality] {
        &self.equalities
    }

    /// Equalities that can never hold; non-empty means trivially UNSAT.
    pub fn structural_infeasibilities(&self) -> &[Infeasibility] {
        &self.infeasible
    }

    pub fn var_index(&self, from: usize, to: usize) -> Option<usize> {
        self.variables
            .binary_search_by(|v| (v.from, v.to).cmp(&(from, to)))
            .ok()
    }

    pub fn var_by_name(&self, name: &str) -> Option<usize> {
        let rest = name.strip_prefix("c_")?;
        let (a, b) = rest.split_once('_')?;
        self.var_index(a.parse().ok()?, b.parse().ok()?)
    }
}

/// Derives the constraint system of `graph`.
pub fn generate_constraints(graph: &CausalityGraph) -> ConstraintSystem {
    let variables: Vec<Variable> = graph
        .edges()
        .iter()
        .map(|e| Variable {
            from: e.from,
            to: e.to,
            upper: e.support,
        })
        .collect();
    let n = graph.num_nodes();
    let mut out_vars = vec![Vec::new(); n];
    let mut in_vars = vec![Vec::new(); n];
    for (k, v) in variables.iter().enumerate() {
        out_vars[v.from].push(k);
        in_vars[v.to].push(k);
    }
    let mut equalities = Vec::new();
    let mut infeasible = Vec::new();
    for (node, (outs, ins)) in out_vars.into_iter().zip(in_vars).enumerate() {
        let target = graph.node_support(node);
        for (side, vars, applies) in [
            (Side::Outgoing, outs, !graph.is_terminal(node)),
            (Side::Incoming, ins, !graph.is_root(node)),
        ] {
            if !applies {
                continue;
            }
            if vars.is_empty() && target > 0 {
                infeasible.push(Infeasibility {
                    node,
                    message: graph.nodes()[node].clone(),
                    side,
                    support: target,
                });
            }
            equalities.push(Equality {
                node,
                side,
                target,
                vars,
            });
        }
    }
    ConstraintSystem {
        nodes: graph.nodes().to_vec(),
        variables,
        equalities,
        infeasible,
    }
}

/// An integral assignment to the edge variables, keyed by `(from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    assignment: BTreeMap<(usize, usize), u64>,
}

impl Solution {
    pub fn new(assignment: BTreeMap<(usize, usize), u64>) -> Self {
        Solution { assignment }
    }

    /// Builds a solution from values listed in variable order.
    pub fn from_values(cs: &ConstraintSystem, values: &[u64]) -> Self {
        Solution {
            assignment: cs
                .variables()
                .iter()
                .zip(values)
                .map(|(v, &x)| ((v.from, v.to), x))
                .collect(),
        }
    }

    pub fn empty() -> Self {
        Solution {
            assignment: BTreeMap::new(),
        }
    }

    pub fn get(&self, from: usize, to: usize) -> Option<u64> {
        self.assignment.get(&(from, to)).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<(usize, usize), u64> {
        &self.assignment
    }

    /// Values in variable order; unassigned variables read as zero.
    pub fn values(&self, cs: &ConstraintSystem) -> Vec<u64> {
        cs.variables()
            .iter()
            .map(|v| self.get(v.from, v.to).unwrap_or(0))
            .collect()
    }

    /// Edges with a positive value, sorted.
    pub fn support_edges(&self) -> Vec<(usize, usize)> {
        self.assignment
            .iter()
            .filter(|(_, &x)| x > 0)
            .map(|(&e, _)| e)
            .collect()
    }

    pub fn size(&self) -> usize {
        self.assignment.values().filter(|&&x| x > 0).count()
    }
}

/// Checks every bound and equality of `cs` by direct substitution.
pub fn check_solution(cs: &ConstraintSystem, sol: &Solution) -> Result<bool> {
    let mut values = Vec::with_capacity(cs.variables().len());
    for v in cs.variables() {
        let x = sol
            .get(v.from, v.to)
            .ok_or_else(|| Error::MissingAssignment(v.name()))?;
        if x > v.upper {
            return Ok(false);
        }
        values.push(x);
    }
    if sol
        .assignment()
        .iter()
        .any(|(&(a, b), &x)| x > 0 && cs.var_index(a, b).is_none())
    {
        return Ok(false);
    }
    Ok(cs.equalities().iter().all(|eq| {
        let sum: u128 = eq.vars.iter().map(|&k| values[k] as u128).sum();
        sum == eq.target as u128
    }))
}

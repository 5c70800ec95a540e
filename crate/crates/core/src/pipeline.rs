//! The end-to-end mining pipeline: trace to causality graph to constraints
//! to a reduced solution to an automaton.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::causality::{build_graph, CausalityGraph};
use crate::constraints::{generate_constraints, ConstraintSystem, Infeasibility, Solution};
use crate::error::Result;
use crate::exec::Execution;
use crate::fsa::{derive_fsa, Fsa};
use crate::ingest::{collect_messages, MessageCatalog};
use crate::solver::{extract_candidates, Backend, Reduction};
use crate::types::Trace;

pub const DEFAULT_SZ: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct MineOptions {
    /// Number of solutions sampled before reduction.
    pub sz: usize,
    pub seed: u64,
    pub exec: Execution,
    pub reduction: Reduction,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            sz: DEFAULT_SZ,
            seed: 0,
            exec: Execution::default(),
            reduction: Reduction::default(),
        }
    }
}

/// Wall-clock time per phase, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub parse: f64,
    pub catalog: f64,
    pub graph: f64,
    pub constraints: f64,
    pub solve: f64,
    pub fsa: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.parse + self.catalog + self.graph + self.constraints + self.solve + self.fsa
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MineStats {
    pub unique_messages: usize,
    pub length: usize,
    pub events: usize,
    pub starts: usize,
    pub ends: usize,
    pub edges: usize,
    pub candidates: usize,
    pub solution_edges: usize,
    pub states: usize,
    pub transitions: usize,
    pub seconds: PhaseTimes,
}

impl MineStats {
    /// A fixed-width table, one row per figure.
    pub fn to_table(&self) -> String {
        let t = &self.seconds;
        let rows: [(&str, String); 17] = [
            ("unique messages", self.unique_messages.to_string()),
            ("trace length", self.length.to_string()),
            ("events", self.events.to_string()),
            ("start messages", self.starts.to_string()),
            ("end messages", self.ends.to_string()),
            ("graph edges", self.edges.to_string()),
            ("reduced candidates", self.candidates.to_string()),
            ("solution edges", self.solution_edges.to_string()),
            ("states", self.states.to_string()),
            ("transitions", self.transitions.to_string()),
            ("time parse (s)", format!("{:.4}", t.parse)),
            ("time catalog (s)", format!("{:.4}", t.catalog)),
            ("time graph (s)", format!("{:.4}", t.graph)),
            ("time constraints (s)", format!("{:.4}", t.constraints)),
            ("time solve (s)", format!("{:.4}", t.solve)),
            ("time fsa (s)", format!("{:.4}", t.fsa)),
            ("time total (s)", format!("{:.4}", t.total())),
        ];
        rows.iter().map(|(k, v)| format!("{k:<22}{v:>12}\n")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Mined {
    pub catalog: MessageCatalog,
    pub graph: CausalityGraph,
    pub constraints: ConstraintSystem,
    pub solution: Solution,
    /// Every distinct reduced solution found, best first. `solution` is
    /// the first entry.
    pub candidates: Vec<Solution>,
    pub fsa: Fsa,
    pub stats: MineStats,
}

#[derive(Debug, Clone)]
pub enum MineOutcome {
    Model(Box<Mined>),
    /// Nodes whose equality can never hold, usually a truncated trace.
    Infeasible {
        diagnostics: Vec<Infeasibility>,
        stats: MineStats,
    },
    /// The constraints are unsatisfiable for a less obvious reason.
    Unsat { stats: MineStats },
}

fn secs(since: Instant) -> f64 {
    Duration::as_secs_f64(&since.elapsed())
}

/// Mines an automaton from `trace`.
pub fn mine<B: Backend + ?Sized>(trace: &Trace, backend: &B, opts: &MineOptions) -> Result<MineOutcome> {
    let mut stats = MineStats {
        length: trace.len(),
        events: trace.num_events(),
        ..MineStats::default()
    };

    let t = Instant::now();
    let catalog = collect_messages(trace);
    stats.seconds.catalog = secs(t);
    stats.unique_messages = catalog.len();
    stats.starts = catalog.starts().len();
    stats.ends = catalog.ends().len();

    let t = Instant::now();
    let graph = build_graph(&catalog, opts.exec);
    stats.seconds.graph = secs(t);
    stats.edges = graph.edges().len();

    let t = Instant::now();
    let cs = generate_constraints(&graph);
    stats.seconds.constraints = secs(t);
    if !cs.structural_infeasibilities().is_empty() {
        return Ok(MineOutcome::Infeasible {
            diagnostics: cs.structural_infeasibilities().to_vec(),
            stats,
        });
    }

    let t = Instant::now();
    let candidates = extract_candidates(backend, &cs, opts.sz, opts.seed, opts.exec, opts.reduction)?;
    stats.seconds.solve = secs(t);
    let Some(solution) = candidates.first().cloned() else {
        return Ok(MineOutcome::Unsat { stats });
    };
    stats.candidates = candidates.len();
    stats.solution_edges = solution.size();

    let t = Instant::now();
    let fsa = derive_fsa(&graph, &solution)?;
    stats.seconds.fsa = secs(t);
    stats.states = fsa.states().len();
    stats.transitions = fsa.transitions().len();

    Ok(MineOutcome::Model(Box::new(Mined {
        catalog,
        graph,
        constraints: cs,
        solution,
        candidates,
        fsa,
        stats,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_trace;
    use crate::solver::FlowBackend;

    const WORKED: &str = include_str!("../data/traces/worked_example.trace");

    #[test]
    fn worked_example_stats() {
        let t = parse_trace(WORKED).unwrap();
        let MineOutcome::Model(m) = mine(&t, &FlowBackend, &MineOptions::default()).unwrap() else {
            panic!("expected a model");
        };
        assert_eq!(m.stats.unique_messages, 6);
        assert_eq!(m.stats.length, 12);
        assert_eq!((m.stats.starts, m.stats.ends), (2, 2));
        assert_eq!(m.stats.edges, 10);
        assert!(m.stats.states <= 7);
        assert!(m.stats.to_table().contains("trace length"));
    }

    #[test]
    fn truncated_trace_is_diagnosed() {
        let text = "1 (cpu0:cache:rd_req)\n2 (cache:mem:rd_req)\n3 (mem:cache:rd_resp)\n\
                    4 (cache:cpu0:rd_resp)\n1\n2\n3\n4\n1\n2\n";
        let t = parse_trace(text).unwrap();
        match mine(&t, &FlowBackend, &MineOptions::default()).unwrap() {
            MineOutcome::Infeasible { diagnostics, .. } => {
                // the reply to cpu0 never gets a successor because the second
                // request is left hanging
                assert!(diagnostics.iter().any(|d| d.message.to_string() == "(cache:cpu0:rd_resp)"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_trace_gives_trivial_model() {
        let MineOutcome::Model(m) = mine(&Trace::default(), &FlowBackend, &MineOptions::default()).unwrap() else {
            panic!("expected a model");
        };
        assert_eq!(m.fsa.states().len(), 1);
        assert!(m.fsa.transitions().is_empty());
    }
}

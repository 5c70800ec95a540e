//! Mining finite-state models of message flows from interleaved SoC
//! communication traces.
//!
//! The pipeline: [`ingest`] parses a trace and classifies its messages,
//! [`causality`] builds the support-annotated causality graph,
//! [`constraints`] turns it into integer consistency constraints,
//! [`solver`] finds and reduces a solution via min-cost flow, and [`fsa`]
//! derives the automaton. [`accept`] checks traces against an automaton and
//! [`flowgen`] produces synthetic traces from ground-truth flows.

pub mod accept;
pub mod causality;
pub mod constraints;
pub mod error;
pub mod exec;
pub mod flowgen;
pub mod fsa;
pub mod ingest;
pub mod pipeline;
pub mod smtlib;
pub mod solver;
pub mod types;

pub use accept::{accepts, Verdict, DEFAULT_BUDGET};
pub use causality::{build_graph, CausalityGraph, Edge};
pub use constraints::{check_solution, generate_constraints, ConstraintSystem, Solution};
pub use error::{Error, ParseError, Result};
pub use exec::Execution;
pub use fsa::{derive_fsa, Fsa};
pub use ingest::{collect_messages, parse_trace, MessageCatalog};
pub use pipeline::{mine, MineOptions, MineOutcome, MineStats};
pub use solver::{model_extract, Backend, FlowBackend, Reduction};
pub use types::{causal, Event, FlowSpec, Message, Trace};

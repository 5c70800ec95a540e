use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use flowsynth::accept::{accepts, Rejection, Verdict, DEFAULT_BUDGET};
use flowsynth::flowgen::{generate_trace, parse_flows};
use flowsynth::ingest::{parse_dictionary, parse_trace, parse_trace_with_dictionary, write_trace};
use flowsynth::pipeline::{mine, MineOptions, MineOutcome, MineStats, DEFAULT_SZ};
use flowsynth::smtlib::{export_smtlib, SmtBackend};
use flowsynth::solver::{Backend, FlowBackend};
use flowsynth::{build_graph, collect_messages, generate_constraints, Execution, Fsa, Trace};

#[derive(Parser)]
#[command(name = "flowsynth", version, about = "Mine message-flow automata from SoC traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Flow,
    Smtlib,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Mine an automaton from a trace.
    Mine {
        #[arg(long)]
        trace: PathBuf,
        /// Message dictionary kept in a separate file.
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Number of solutions sampled before reduction.
        #[arg(long, default_value_t = DEFAULT_SZ)]
        sz: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BackendKind::Flow)]
        backend: BackendKind,
        /// Solver command for the smtlib backend; the query file path is appended.
        #[arg(long, default_value = "z3 -smt2")]
        solver_cmd: String,
        /// Run every phase on one thread.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Causality graph in DOT.
        #[arg(long)]
        graph_dot: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = StatsFormat::Text)]
        stats: StatsFormat,
    },
    /// Generate a trace from flow specifications.
    Gen {
        #[arg(long)]
        flows: PathBuf,
        /// Instances started per flow.
        #[arg(long)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probability that a message joins the previous event.
        #[arg(long, default_value_t = 0.0)]
        simul: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check whether a model accepts a trace.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Search-node budget.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Write the constraint system of a trace in SMT-LIB v2.
    ExportSmt {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_trace(path: &Path, dict: Option<&Path>) -> Result<Trace> {
    let text = read(path)?;
    let trace = match dict {
        Some(d) => {
            let dict = parse_dictionary(&read(d)?).with_context(|| format!("in {}", d.display()))?;
            parse_trace_with_dictionary(&text, &dict)
        }
        None => parse_trace(&text),
    };
    trace.with_context(|| format!("in {}", path.display()))
}

fn print_stats(stats: &MineStats, format: StatsFormat) -> Result<()> {
    match format {
        StatsFormat::Text => print!("{}", stats.to_table()),
        StatsFormat::Json => println!("{}", serde_json::to_string_pretty(stats)?),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_mine(
    trace: &Path,
    dict: Option<&Path>,
    sz: usize,
    seed: u64,
    backend: BackendKind,
    solver_cmd: &str,
    sequential: bool,
    dot: Option<&Path>,
    json: Option<&Path>,
    graph_dot: Option<&Path>,
    stats_format: StatsFormat,
) -> Result<ExitCode> {
    let t = Instant::now();
    let trace = load_trace(trace, dict)?;
    let parse = t.elapsed().as_secs_f64();

    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let opts = MineOptions {
        sz: sz.max(1),
        seed,
        exec,
        ..MineOptions::default()
    };
    let workdir;
    let smt;
    let backend: &dyn Backend = match backend {
        BackendKind::Flow => &FlowBackend,
        BackendKind::Smtlib => {
            workdir = tempfile::tempdir()?;
            smt = SmtBackend::new(solver_cmd, workdir.path())?;
            &smt
        }
    };
    if let Some(path) = graph_dot {
        let graph = build_graph(&collect_messages(&trace), exec);
        write(path, &graph.to_dot())?;
    }
    match mine(&trace, backend, &opts)? {
        MineOutcome::Model(mut m) => {
            m.stats.seconds.parse = parse;
            if let Some(path) = dot {
                write(path, &m.fsa.to_dot())?;
            }
            if let Some(path) = json {
                write(path, &m.fsa.to_json())?;
            }
            print_stats(&m.stats, stats_format)?;
            Ok(ExitCode::SUCCESS)
        }
        MineOutcome::Infeasible { diagnostics, .. } => {
            eprintln!("error: the consistency constraints are unsatisfiable");
            for d in diagnostics {
                eprintln!("  {d}");
            }
            eprintln!("is the trace truncated in the middle of a flow?");
            Ok(ExitCode::from(2))
        }
        MineOutcome::Unsat { .. } => {
            eprintln!("error: the consistency constraints are unsatisfiable");
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_gen(flows: &Path, limit: usize, seed: u64, simul: f64, out: &Path) -> Result<ExitCode> {
    let specs = parse_flows(&read(flows)?).with_context(|| format!("in {}", flows.display()))?;
    let trace = generate_trace(&specs, limit, seed, simul);
    write(out, &write_trace(&trace))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(model: &Path, trace: &Path, dict: Option<&Path>, budget: u64, witness: Option<&Path>) -> Result<ExitCode> {
    let fsa = Fsa::from_json(&read(model)?).with_context(|| format!("in {}", model.display()))?;
    let trace = load_trace(trace, dict)?;
    match accepts(&fsa, &trace, budget) {
        Verdict::Accepted(steps) => {
            if let Some(path) = witness {
                let mut text = String::from("# event position instance from to\n");
                for s in &steps {
                    text.push_str(&format!("{} {} {} {} {}\n", s.event, s.position, s.instance, s.from, s.to));
                }
                write(path, &text)?;
            }
            println!("accepted");
            Ok(ExitCode::SUCCESS)
        }
        Verdict::Rejected(why) => {
            match why {
                Rejection::UnknownMessage { event, message } => {
                    println!("rejected: {message} in event {event} is not in the model's alphabet")
                }
                Rejection::NoScenario => println!("rejected: no execution scenario consumes the trace"),
            }
            Ok(ExitCode::from(3))
        }
        Verdict::Indeterminate { explored } => {
            println!("indeterminate: search budget exhausted after {explored} nodes");
            Ok(ExitCode::from(4))
        }
    }
}

fn cmd_export(trace: &Path, dict: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let trace = load_trace(trace, dict)?;
    let cs = generate_constraints(&build_graph(&collect_messages(&trace), Execution::default()));
    write(out, &export_smtlib(&cs))?;
    for d in cs.structural_infeasibilities() {
        eprintln!("warning: {d}");
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Mine {
            trace,
            dict,
            sz,
            seed,
            backend,
            solver_cmd,
            sequential,
            dot,
            json,
            graph_dot,
            stats,
        } => cmd_mine(
            &trace,
            dict.as_deref(),
            sz,
            seed,
            backend,
            &solver_cmd,
            sequential,
            dot.as_deref(),
            json.as_deref(),
            graph_dot.as_deref(),
            stats,
        ),
        Command::Gen {
            flows,
            limit,
            seed,
            simul,
            out,
        } => cmd_gen(&flows, limit, seed, simul, &out),
        Command::Check {
            model,
            trace,
            dict,
            budget,
            witness,
        } => cmd_check(&model, &trace, dict.as_deref(), budget, witness.as_deref()),
        Command::ExportSmt { trace, dict, out } => cmd_export(&trace, dict.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

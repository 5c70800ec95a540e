//! SMT-LIB v2 (QF_LIA) export of constraint systems, model import, and a
//! backend that drives an external SMT solver through files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::constraints::{ConstraintSystem, Solution};
use crate::error::{Error, ParseError, Result};
use crate::solver::Backend;

/// The problem for `cs` with no extra assertions.
pub fn export_smtlib(cs: &ConstraintSystem) -> String {
    export_with_zeros(cs, &[])
}

/// The problem for `cs` with `(assert (= c 0))` appended for every variable
/// index in `zeros`, in the given order.
pub fn export_with_zeros(cs: &ConstraintSystem, zeros: &[usize]) -> String {
    let vars = cs.variables();
    let mut out = String::new();
    out.push_str("; consistency constraints\n(set-logic QF_LIA)\n");
    if vars.is_empty() {
        for eq in cs.equalities() {
            writeln!(out, "(assert (= {} 0))", eq.target).unwrap();
        }
        out.push_str("(check-sat)\n");
        return out;
    }
    out.push_str("(set-option :produce-models true)\n");
    for v in vars {
        writeln!(
            out,
            "(declare-const {} Int) ; {} -> {}",
            v.name(),
            cs.nodes()[v.from],
            cs.nodes()[v.to]
        )
        .unwrap();
    }
    for v in vars {
        writeln!(out, "(assert (<= 0 {} {}))", v.name(), v.upper).unwrap();
    }
    for eq in cs.equalities() {
        let sum = match eq.vars.as_slice() {
            [] => "0".to_string(),
            [k] => vars[*k].name(),
            ks => {
                let names: Vec<String> = ks.iter().map(|&k| vars[k].name()).collect();
                format!("(+ {})", names.join(" "))
            }
        };
        writeln!(out, "(assert (= {} {}))", eq.target, sum).unwrap();
    }
    for &k in zeros {
        writeln!(out, "(assert (= {} 0))", vars[k].name()).unwrap();
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

/// Outcome reported by a solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    Sat(Solution),
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_comment = false;
    for c in text.chars() {
        if in_comment {
            in_comment = c != '\n';
            continue;
        }
        match c {
            ';' => {
                in_comment = true;
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| ParseError::bare("unbalanced `)`"))?;
                stack.last_mut().unwrap().push(Sexp::List(done));
            }
            atom => stack.last_mut().unwrap().push(Sexp::Atom(atom.to_string())),
        }
    }
    if stack.len() != 1 {
        return Err(ParseError::bare("unbalanced `(`"));
    }
    Ok(stack.pop().unwrap())
}

fn int_value(e: &Sexp) -> Option<i128> {
    match e {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => int_value(x).map(|v| -v),
            _ => None,
        },
    }
}

fn collect_define_funs(e: &Sexp, out: &mut BTreeMap<String, i128>) -> Result<(), ParseError> {
    if let Sexp::List(items) = e {
        if let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), value] = items.as_slice() {
            if kw == "define-fun" && args.is_empty() && sort == "Int" {
                let v = int_value(value)
                    .ok_or_else(|| ParseError::bare(format!("non-integer value for `{name}`")))?;
                out.insert(name.clone(), v);
                return Ok(());
            }
        }
        for item in items {
            collect_define_funs(item, out)?;
        }
    }
    Ok(())
}

/// Parses a solver's answer: `sat`/`unsat`/`unknown` followed by a model in
/// `(define-fun c_i_j () Int k)` form, or plain `name value` lines.
pub fn parse_model(text: &str, cs: &ConstraintSystem) -> Result<SolverAnswer> {
    let sexps = parse_sexps(&tokenize(text))?;
    let mut values: BTreeMap<String, i128> = BTreeMap::new();
    let mut status = None;
    let mut loose = Vec::new();
    for e in &sexps {
        match e {
            Sexp::Atom(a) if status.is_none() && matches!(a.as_str(), "sat" | "unsat" | "unknown") => {
                status = Some(a.clone());
            }
            Sexp::Atom(a) => loose.push(a.clone()),
            Sexp::List(_) => collect_define_funs(e, &mut values)?,
        }
    }
    if loose.len() % 2 != 0 {
        return Err(ParseError::bare("dangling token in `name value` model").into());
    }
    for pair in loose.chunks(2) {
        let v = pair[1]
            .parse::<i128>()
            .map_err(|_| ParseError::bare(format!("bad value `{}` for `{}`", pair[1], pair[0])))?;
        values.insert(pair[0].clone(), v);
    }
    match status.as_deref() {
        Some("unsat") => return Ok(SolverAnswer::Unsat),
        Some("unknown") => return Ok(SolverAnswer::Unknown),
        _ => {}
    }
    let mut assignment = BTreeMap::new();
    for v in cs.variables() {
        let name = v.name();
        let x = *values.get(&name).ok_or(Error::MissingAssignment(name.clone()))?;
        let x = u64::try_from(x).map_err(|_| Error::InconsistentSolution(format!("{name} = {x} is negative")))?;
        assignment.insert((v.from, v.to), x);
    }
    Ok(SolverAnswer::Sat(Solution::new(assignment)))
}

/// Runs an external SMT-LIB solver on problem files.
///
/// Each query is written to `<workdir>/query-<n>.smt2`; the command is
/// invoked with the file path as its last argument and its standard output
/// is parsed with [`parse_model`]. Cost weights are ignored.
#[derive(Debug)]
pub struct SmtBackend {
    program: String,
    args: Vec<String>,
    workdir: PathBuf,
    counter: AtomicU64,
}

impl SmtBackend {
    /// `command` is split on whitespace, e.g. `"z3 -smt2"`.
    pub fn new(command: &str, workdir: impl Into<PathBuf>) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::Backend("empty solver command".into()))?;
        let workdir = workdir.into();
        std::fs::create_dir_all(&workdir)?;
        Ok(SmtBackend {
            program,
            args: parts.collect(),
            workdir,
            counter: AtomicU64::new(0),
        })
    }

    /// `true` if `program` can be found on `PATH`.
    pub fn available(program: &str) -> bool {
        Command::new(program)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    }

    pub fn query(&self, cs: &ConstraintSystem, zeros: &[usize]) -> Result<SolverAnswer> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let path = self.workdir.join(format!("query-{n}.smt2"));
        std::fs::write(&path, export_with_zeros(cs, zeros))?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(&path)
            .output()
            .map_err(|e| Error::Backend(format!("cannot run `{}`: {e}", self.program)))?;
        let stdout = String::from_utf8_lossy(&output.stdout);
        if cs.variables().is_empty() {
            // No `(get-model)` was requested.
            return Ok(match stdout.split_whitespace().next() {
                Some("sat") => SolverAnswer::Sat(Solution::empty()),
                Some("unsat") => SolverAnswer::Unsat,
                _ => SolverAnswer::Unknown,
            });
        }
        if stdout.trim_start().starts_with("unsat") {
            return Ok(SolverAnswer::Unsat);
        }
        parse_model(&stdout, cs)
    }
}

impl Backend for SmtBackend {
    fn solve(&self, cs: &ConstraintSystem, forced_zero: &[bool], _weights: Option<&[i64]>) -> Result<Option<Solution>> {
        let zeros: Vec<usize> = forced_zero
            .iter()
            .enumerate()
            .filter_map(|(k, &z)| z.then_some(k))
            .collect();
        match self.query(cs, &zeros)? {
            SolverAnswer::Sat(s) => Ok(Some(s)),
            SolverAnswer::Unsat => Ok(None),
            SolverAnswer::Unknown => Err(Error::Backend("solver answered `unknown`".into())),
        }
    }
}

//! Ground-truth flow specifications and a randomized trace generator.
//!
//! Flow-spec files:
//!
//! ```text
//! flow read param x in {0,1}
//! msg 1 (cpu{x}:cache:rd_req)
//! msg 2 (cache:cpu{x}:rd_resp)
//! branch: 1,2
//! ```
//!
//! `param (x,y) in {(0,1),(1,0)}` binds several names at once; several
//! `param` clauses expand to their cartesian product. Each binding becomes
//! its own [`FlowSpec`] named `read[x=0]`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ParseError;
use crate::fsa::{Fsa, Transition};
use crate::types::{Event, FlowSpec, Message, Trace};

pub const SOC_LIBRARY: &str = include_str!("../data/soc_library.flow");
pub const CPU_READ: &str = include_str!("../data/cpu_read.flow");

/// The bundled ten-flow library.
pub fn soc_library() -> Vec<FlowSpec> {
    parse_flows(SOC_LIBRARY).expect("bundled library parses")
}

/// The CPU read flows of the bundled library only.
pub fn soc_cpu_reads() -> Vec<FlowSpec> {
    soc_library()
        .into_iter()
        .filter(|f| f.name().starts_with("cpu_read"))
        .collect()
}

/// The two-branch read flow for two cores.
pub fn cpu_read() -> Vec<FlowSpec> {
    parse_flows(CPU_READ).expect("bundled flow parses")
}

struct Param {
    names: Vec<String>,
    values: Vec<Vec<String>>,
}

struct Block {
    name: String,
    line: usize,
    params: Vec<Param>,
    msgs: BTreeMap<u64, (usize, String)>,
    branches: Vec<(usize, Vec<u64>)>,
}

fn parse_tuple(s: &str) -> Vec<String> {
    let s = s.trim();
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(s);
    inner.split(',').map(|v| v.trim().to_string()).collect()
}

/// Splits `{a,b}` or `{(a,b),(c,d)}` into items.
fn parse_value_set(s: &str) -> Result<Vec<Vec<String>>, ParseError> {
    let inner = s
        .trim()
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| ParseError::bare("parameter values must be written `{..}`"))?;
    let mut items = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(parse_tuple(&inner[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(parse_tuple(&inner[start..]));
    if items.iter().flatten().any(|v| v.is_empty()) {
        return Err(ParseError::bare("empty parameter value"));
    }
    Ok(items)
}

fn parse_header(rest: &str, line: usize) -> Result<Block, ParseError> {
    let rest = rest.trim();
    let (name, mut tail) = match rest.find(char::is_whitespace) {
        Some(i) => (&rest[..i], rest[i..].trim()),
        None => (rest, ""),
    };
    if name.is_empty() {
        return Err(ParseError::at(line, "flow needs a name"));
    }
    let mut params = Vec::new();
    while !tail.is_empty() {
        let body = tail
            .strip_prefix("param")
            .ok_or_else(|| ParseError::at(line, format!("unexpected `{tail}`")))?
            .trim_start();
        let in_pos = body
            .find(" in ")
            .ok_or_else(|| ParseError::at(line, "expected `param <name> in {..}`"))?;
        let names = parse_tuple(&body[..in_pos]);
        let after = body[in_pos + 4..].trim_start();
        let close = after
            .find('}')
            .ok_or_else(|| ParseError::at(line, "unterminated value set"))?;
        let values = parse_value_set(&after[..=close]).map_err(|e| e.with_line(line))?;
        if names.iter().any(|n| n.is_empty() || !n.chars().all(|c| c.is_alphanumeric() || c == '_')) {
            return Err(ParseError::at(line, "invalid parameter name"));
        }
        if values.iter().any(|v| v.len() != names.len()) {
            return Err(ParseError::at(line, "parameter tuple arity mismatch"));
        }
        params.push(Param { names, values });
        tail = after[close + 1..].trim_start();
    }
    Ok(Block {
        name: name.to_string(),
        line,
        params,
        msgs: BTreeMap::new(),
        branches: Vec::new(),
    })
}

fn substitute(template: &str, binding: &[(String, String)], line: usize) -> Result<Message, ParseError> {
    let mut text = template.to_string();
    for (name, value) in binding {
        text = text.replace(&format!("{{{name}}}"), value);
    }
    if let Some(start) = text.find('{') {
        let end = text[start..].find('}').map_or(text.len(), |e| start + e + 1);
        return Err(ParseError::at(line, format!("unbound parameter `{}`", &text[start..end])));
    }
    text.parse().map_err(|e: ParseError| e.with_line(line))
}

fn bindings(params: &[Param]) -> Vec<Vec<(String, String)>> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for p in params {
        let mut next = Vec::new();
        for prefix in &out {
            for tuple in &p.values {
                let mut b = prefix.clone();
                b.extend(p.names.iter().cloned().zip(tuple.iter().cloned()));
                next.push(b);
            }
        }
        out = next;
    }
    out
}

fn expand(block: Block) -> Result<Vec<FlowSpec>, ParseError> {
    if block.branches.is_empty() {
        return Err(ParseError::at(block.line, format!("flow `{}` has no branches", block.name)));
    }
    let mut flows = Vec::new();
    for binding in bindings(&block.params) {
        let mut msgs = BTreeMap::new();
        for (&idx, (line, template)) in &block.msgs {
            msgs.insert(idx, substitute(template, &binding, *line)?);
        }
        let mut branches = Vec::new();
        for (line, refs) in &block.branches {
            let branch = refs
                .iter()
                .map(|i| {
                    msgs.get(i)
                        .cloned()
                        .ok_or_else(|| ParseError::at(*line, format!("undeclared message {i}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            // validate this branch alone so the error carries its line
            FlowSpec::new(block.name.clone(), vec![branch.clone()]).map_err(|e| e.with_line(*line))?;
            branches.push(branch);
        }
        let name = if binding.is_empty() {
            block.name.clone()
        } else {
            let parts: Vec<String> = binding.iter().map(|(n, v)| format!("{n}={v}")).collect();
            format!("{}[{}]", block.name, parts.join(","))
        };
        let line = block.branches[0].0;
        flows.push(FlowSpec::new(name, branches).map_err(|e| e.with_line(line))?);
    }
    Ok(flows)
}

/// Parses a flow-spec file, expanding parameters.
pub fn parse_flows(text: &str) -> Result<Vec<FlowSpec>, ParseError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("flow ") {
            blocks.push(parse_header(rest, line)?);
            continue;
        }
        let block = blocks
            .last_mut()
            .ok_or_else(|| ParseError::at(line, "expected `flow <name>` first"))?;
        if let Some(rest) = content.strip_prefix("msg ") {
            let rest = rest.trim();
            let (idx, msg) = rest
                .split_once(char::is_whitespace)
                .ok_or_else(|| ParseError::at(line, "expected `msg <index> (src:dest:cmd)`"))?;
            let idx: u64 = idx
                .parse()
                .map_err(|_| ParseError::at(line, format!("bad message index `{idx}`")))?;
            if block.msgs.insert(idx, (line, msg.trim().to_string())).is_some() {
                return Err(ParseError::at(line, format!("message {idx} declared twice")));
            }
        } else if let Some(rest) = content.strip_prefix("branch:") {
            let refs = rest
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|_| ParseError::at(line, format!("bad message reference `{}`", s.trim())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            block.branches.push((line, refs));
        } else {
            return Err(ParseError::at(line, format!("unrecognized line `{content}`")));
        }
    }
    let mut flows = Vec::new();
    for b in blocks {
        flows.extend(expand(b)?);
    }
    Ok(flows)
}

/// Provenance of one generated flow instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceRecord {
    pub flow: usize,
    pub branch: usize,
    /// `(event, position in event)` of every emitted message, in order.
    pub occurrences: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub trace: Trace,
    pub instances: Vec<InstanceRecord>,
}

struct Active {
    id: usize,
    next: usize,
}

/// Simulates concurrent flow execution.
///
/// Each step either initiates an instance of a random flow that is still
/// under `limit_per_flow` (emitting its start message) or advances a random
/// active instance, with equal probability when both are possible. The
/// branch of an instance is drawn uniformly when it starts. With
/// probability `simultaneity` the emitted message joins the previous event,
/// unless that event already holds a message of the same instance. The run
/// ends when every limit is reached and every instance has completed.
pub fn generate(flows: &[FlowSpec], limit_per_flow: usize, seed: u64, simultaneity: f64) -> Generated {
    let p_merge = if simultaneity.is_nan() { 0.0 } else { simultaneity.clamp(0.0, 1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut started = vec![0usize; flows.len()];
    let mut active: Vec<Active> = Vec::new();
    let mut instances: Vec<InstanceRecord> = Vec::new();
    let mut trace = Trace::default();
    let mut last_event_instances: Vec<usize> = Vec::new();
    loop {
        let open: Vec<usize> = (0..flows.len())
            .filter(|&f| started[f] < limit_per_flow)
            .collect();
        if open.is_empty() && active.is_empty() {
            break;
        }
        let initiate = match (open.is_empty(), active.is_empty()) {
            (false, true) => true,
            (true, false) => false,
            _ => rng.random_bool(0.5),
        };
        let slot = if initiate {
            let flow = open[rng.random_range(0..open.len())];
            let branch = rng.random_range(0..flows[flow].branches().len());
            started[flow] += 1;
            instances.push(InstanceRecord {
                flow,
                branch,
                occurrences: Vec::new(),
            });
            active.push(Active {
                id: instances.len() - 1,
                next: 0,
            });
            active.len() - 1
        } else {
            rng.random_range(0..active.len())
        };
        let id = active[slot].id;
        let rec = &instances[id];
        let branch = &flows[rec.flow].branches()[rec.branch];
        let msg = branch[active[slot].next].clone();
        active[slot].next += 1;
        if active[slot].next == branch.len() {
            active.remove(slot);
        }
        let merge = rng.random_bool(p_merge) && !trace.is_empty() && !last_event_instances.contains(&id);
        let events = trace.events_mut();
        if merge {
            let last = events.last_mut().unwrap();
            last.push(msg);
            last_event_instances.push(id);
        } else {
            events.push(Event::single(msg));
            last_event_instances.clear();
            last_event_instances.push(id);
        }
        let ev = events.len() - 1;
        let pos = events[ev].len() - 1;
        instances[id].occurrences.push((ev, pos));
    }
    Generated { trace, instances }
}

/// [`generate`] without provenance.
pub fn generate_trace(flows: &[FlowSpec], limit_per_flow: usize, seed: u64, simultaneity: f64) -> Trace {
    generate(flows, limit_per_flow, seed, simultaneity).trace
}

/// Average number of messages one round of instances (one per flow)
/// contributes, assuming uniform branch choice.
pub fn expected_length_per_limit(flows: &[FlowSpec]) -> f64 {
    flows
        .iter()
        .map(|f| {
            let total: usize = f.branches().iter().map(Vec::len).sum();
            total as f64 / f.branches().len() as f64
        })
        .sum()
}

/// The per-flow limit whose expected trace length is closest to `length`.
pub fn limit_for_length(flows: &[FlowSpec], length: usize) -> usize {
    let per = expected_length_per_limit(flows);
    if per == 0.0 {
        return 0;
    }
    (length as f64 / per).round() as usize
}

/// The automaton that runs every branch of every flow. A state stands for
/// the set of branch suffixes still possible after some prefix; prefixes
/// with the same remaining suffixes share a state, across flows as well,
/// so no two states are equivalent. The last message of a branch leads
/// back to `q0`.
pub fn ground_truth_fsa(flows: &[FlowSpec]) -> Fsa {
    type Suffixes = Vec<Vec<Message>>;
    let remaining = |flow: &FlowSpec, prefix: &[Message]| -> Suffixes {
        let mut out: Suffixes = flow
            .branches()
            .iter()
            .filter(|b| b.len() > prefix.len() && b.starts_with(prefix))
            .map(|b| b[prefix.len()..].to_vec())
            .collect();
        out.sort();
        out.dedup();
        out
    };
    let mut states = vec!["q0".to_string()];
    let mut by_suffixes: BTreeMap<Suffixes, String> = BTreeMap::new();
    let mut alphabet: Vec<Message> = Vec::new();
    let mut transitions: Vec<Transition> = Vec::new();
    for flow in flows {
        for branch in flow.branches() {
            let mut from = "q0".to_string();
            for (j, m) in branch.iter().enumerate() {
                if !alphabet.contains(m) {
                    alphabet.push(m.clone());
                }
                let suffixes = remaining(flow, &branch[..=j]);
                let to = if j + 1 == branch.len() {
                    "q0".to_string()
                } else {
                    let next = format!("g{}", by_suffixes.len() + 1);
                    by_suffixes
                        .entry(suffixes)
                        .or_insert_with(|| {
                            states.push(next.clone());
                            next
                        })
                        .clone()
                };
                let t = Transition {
                    from: from.clone(),
                    label: m.clone(),
                    to: to.clone(),
                };
                if !transitions.contains(&t) {
                    transitions.push(t);
                }
                from = to;
            }
        }
    }
    Fsa::new(states, "q0".into(), alphabet, transitions).expect("suffix states are well formed")
}

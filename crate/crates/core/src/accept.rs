//! Trace acceptance under execution-scenario semantics.
//!
//! A scenario is a multiset of automaton instances, each in some state. A
//! message is consumed by moving one instance along a transition labeled
//! with it; instances start (and are done) in the initial state, so new
//! ones can be created at any time. A trace is accepted if its messages can
//! be consumed in order, taking any order within an event, such that every
//! instance is back in the initial state at the end.
//!
//! Instances in the same state are interchangeable, so the search state is
//! the count of instances per non-initial state. The search is a
//! depth-first backtracking over consumer choices with a memo of failed
//! search states and a node budget.

use std::collections::HashSet;

use crate::fsa::{CompiledFsa, Fsa};
use crate::types::{Message, Trace};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// One consumed occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStep {
    pub event: usize,
    /// Position of the occurrence inside its event.
    pub position: usize,
    pub instance: usize,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    UnknownMessage { event: usize, message: Message },
    NoScenario,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Steps in consumption order.
    Accepted(Vec<WitnessStep>),
    Rejected(Rejection),
    /// The budget ran out before the search finished.
    Indeterminate { explored: u64 },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Choice {
    symbol: usize,
    from: usize,
    to: usize,
}

type Key = (usize, Vec<u32>, Vec<(u32, u32)>);

struct Search<'a> {
    fsa: &'a CompiledFsa,
    events: Vec<Vec<usize>>,
    event: usize,
    /// Symbols of the current event not consumed yet, ascending.
    pending: Vec<usize>,
    active: Vec<u32>,
    future: Vec<u64>,
    /// `finishable[e]` is a bitset of the states from which a lone instance
    /// could still reach the initial state using events `e..`.
    finishable: Vec<Vec<u64>>,
}

/// What `apply` changed, for `undo`.
struct Applied {
    choice: Choice,
    advanced: bool,
}

impl<'a> Search<'a> {
    fn apply(&mut self, c: Choice) -> Applied {
        let pos = self.pending.iter().position(|&s| s == c.symbol).expect("symbol pending");
        self.pending.remove(pos);
        self.future[c.symbol] -= 1;
        if c.from != self.fsa.initial {
            self.active[c.from] -= 1;
        }
        if c.to != self.fsa.initial {
            self.active[c.to] += 1;
        }
        let advanced = self.pending.is_empty() && self.event < self.events.len();
        if advanced {
            self.event += 1;
            if let Some(next) = self.events.get(self.event) {
                self.pending = next.clone();
            }
        }
        Applied { choice: c, advanced }
    }

    fn undo(&mut self, a: Applied) {
        let c = a.choice;
        if a.advanced {
            self.event -= 1;
            self.pending.clear();
        }
        let pos = self.pending.partition_point(|&s| s < c.symbol);
        self.pending.insert(pos, c.symbol);
        self.future[c.symbol] += 1;
        if c.to != self.fsa.initial {
            self.active[c.to] -= 1;
        }
        if c.from != self.fsa.initial {
            self.active[c.from] += 1;
        }
    }

    fn done(&self) -> bool {
        self.event >= self.events.len()
    }

    fn key(&self) -> Key {
        let sparse = self
            .active
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(s, &n)| (s as u32, n))
            .collect();
        (
            self.event,
            self.pending.iter().map(|&s| s as u32).collect(),
            sparse,
        )
    }

    /// Every active instance must be able to finish on its own, and needs
    /// a distinct future message that can move it on.
    fn viable(&self) -> bool {
        let finishable = &self.finishable[self.event];
        self.active.iter().enumerate().all(|(q, &n)| {
            n == 0 || {
                let avail: u64 = self.fsa.out_symbols[q].iter().map(|&s| self.future[s]).sum();
                avail >= n as u64 && finishable[q / 64] >> (q % 64) & 1 == 1
            }
        })
    }

    fn choices(&self) -> Vec<Choice> {
        let mut out = Vec::new();
        let mut last = None;
        for &s in &self.pending {
            if last == Some(s) {
                continue;
            }
            last = Some(s);
            let moves = &self.fsa.moves[s];
            for &(from, to) in moves {
                if from != self.fsa.initial && self.active[from] > 0 {
                    out.push(Choice { symbol: s, from, to });
                }
            }
            for &(from, to) in moves {
                if from == self.fsa.initial {
                    out.push(Choice { symbol: s, from, to });
                }
            }
        }
        out
    }
}

struct Frame {
    key: Key,
    choices: Vec<Choice>,
    next: usize,
    applied: Option<Applied>,
}

/// Decides whether `fsa` accepts `trace`, exploring at most `budget` search
/// nodes.
pub fn accepts(fsa: &Fsa, trace: &Trace, budget: u64) -> Verdict {
    let compiled = CompiledFsa::new(fsa);
    let mut events = Vec::with_capacity(trace.num_events());
    let mut future = vec![0u64; fsa.alphabet().len()];
    for (i, ev) in trace.events().iter().enumerate() {
        let mut syms = Vec::with_capacity(ev.len());
        for m in ev.messages() {
            match compiled.symbol.get(m) {
                Some(&s) => {
                    syms.push(s);
                    future[s] += 1;
                }
                None => {
                    return Verdict::Rejected(Rejection::UnknownMessage {
                        event: i,
                        message: m.clone(),
                    })
                }
            }
        }
        syms.sort_unstable();
        events.push(syms);
    }
    let finishable = finishable_states(&compiled, &events);
    let pending = events.first().cloned().unwrap_or_default();
    let mut search = Search {
        fsa: &compiled,
        events,
        event: 0,
        pending,
        active: vec![0; compiled.num_states],
        future,
        finishable,
    };
    if search.done() {
        return Verdict::Accepted(Vec::new());
    }

    let mut failed: HashSet<Key> = HashSet::new();
    let mut explored = 0u64;
    let mut stack = vec![Frame {
        key: search.key(),
        choices: search.choices(),
        next: 0,
        applied: None,
    }];
    while let Some(top) = stack.last_mut() {
        if let Some(a) = top.applied.take() {
            search.undo(a);
        }
        if top.next >= top.choices.len() {
            let frame = stack.pop().unwrap();
            failed.insert(frame.key);
            continue;
        }
        let choice = top.choices[top.next];
        top.next += 1;
        explored += 1;
        if explored > budget {
            return Verdict::Indeterminate { explored: budget };
        }
        let applied = search.apply(choice);
        if search.done() {
            if search.active.iter().all(|&n| n == 0) {
                top.applied = Some(applied);
                let path: Vec<Choice> = stack
                    .iter()
                    .filter_map(|f| f.applied.as_ref().map(|a| a.choice))
                    .collect();
                return Verdict::Accepted(witness(fsa, trace, &compiled, &path));
            }
            search.undo(applied);
            continue;
        }
        let key = search.key();
        if !search.viable() || failed.contains(&key) {
            search.undo(applied);
            continue;
        }
        let choices = search.choices();
        top.applied = Some(applied);
        stack.push(Frame {
            key,
            choices,
            next: 0,
            applied: None,
        });
    }
    Verdict::Rejected(Rejection::NoScenario)
}

/// Backward pass over the events: a state can finish from event `e` if it
/// is initial, can finish from `e + 1`, or reaches such a state through
/// transitions labeled by symbols of event `e`. Reusing an occurrence is
/// allowed here, which only makes the test weaker, never wrong.
fn finishable_states(fsa: &CompiledFsa, events: &[Vec<usize>]) -> Vec<Vec<u64>> {
    let words = fsa.num_states.div_ceil(64);
    let mut out = vec![vec![0u64; words]; events.len() + 1];
    out[events.len()][fsa.initial / 64] |= 1 << (fsa.initial % 64);
    for e in (0..events.len()).rev() {
        let mut good = out[e + 1].clone();
        let is = |g: &[u64], q: usize| g[q / 64] >> (q % 64) & 1 == 1;
        loop {
            let mut changed = false;
            for &s in &events[e] {
                for &(from, to) in &fsa.moves[s] {
                    if is(&good, to) && !is(&good, from) {
                        good[from / 64] |= 1 << (from % 64);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        out[e] = good;
    }
    out
}

/// Replays a successful choice sequence, assigning each step to the oldest
/// instance in the required state.
fn witness(fsa: &Fsa, trace: &Trace, compiled: &CompiledFsa, path: &[Choice]) -> Vec<WitnessStep> {
    let mut instances: Vec<usize> = Vec::new();
    let mut steps = Vec::with_capacity(path.len());
    let mut event = 0;
    let mut used: Vec<bool> = vec![false; trace.events().first().map_or(0, |e| e.len())];
    for c in path {
        while used.iter().all(|&u| u) {
            event += 1;
            used = vec![false; trace.events()[event].len()];
        }
        let msg = &fsa.alphabet()[c.symbol];
        let position = trace.events()[event]
            .messages()
            .iter()
            .enumerate()
            .position(|(i, m)| !used[i] && m == msg)
            .expect("witness follows the trace");
        used[position] = true;
        let instance = if c.from == compiled.initial {
            instances.push(c.to);
            instances.len() - 1
        } else {
            let id = instances
                .iter()
                .position(|&s| s == c.from)
                .expect("an instance waits in the source state");
            instances[id] = c.to;
            id
        };
        if c.to == compiled.initial {
            instances[instance] = usize::MAX;
        }
        steps.push(WitnessStep {
            event,
            position,
            instance,
            from: fsa.states()[c.from].clone(),
            to: fsa.states()[c.to].clone(),
        });
    }
    steps
}

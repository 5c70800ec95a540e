//! Messages, events and traces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;

/// A `(src:dest:cmd)` triple exchanged between two components.
///
/// Components and commands are opaque identifiers. Two messages are the
/// same message iff all three fields agree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Message {
    pub src: String,
    pub dest: String,
    pub cmd: String,
}

impl Message {
    /// Builds a message, rejecting empty fields and fields containing the
    /// characters that delimit the textual form.
    pub fn new(
        src: impl Into<String>,
        dest: impl Into<String>,
        cmd: impl Into<String>,
    ) -> Result<Self, ParseError> {
        let msg = Message {
            src: src.into(),
            dest: dest.into(),
            cmd: cmd.into(),
        };
        for field in [&msg.src, &msg.dest, &msg.cmd] {
            if field.is_empty() {
                return Err(ParseError::bare("message fields must be non-empty"));
            }
            if field.chars().any(|c| matches!(c, ':' | '(' | ')' | '{' | '}' | ',') || c.is_whitespace()) {
                return Err(ParseError::bare(format!("invalid character in message field `{field}`")));
            }
        }
        Ok(msg)
    }

    /// Structural causality: `next` can be emitted by the component that
    /// received `self`.
    pub fn causes(&self, next: &Message) -> bool {
        causal(self, next)
    }
}

/// `true` iff `b` can be emitted in reaction to `a`, i.e. `a.dest == b.src`.
pub fn causal(a: &Message, b: &Message) -> bool {
    a.dest == b.src
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}:{}:{})", self.src, self.dest, self.cmd)
    }
}

impl FromStr for Message {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let inner = s
            .strip_prefix('(')
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| ParseError::bare(format!("expected `(src:dest:cmd)`, found `{s}`")))?;
        let parts: Vec<&str> = inner.split(':').map(str::trim).collect();
        match parts.as_slice() {
            [src, dest, cmd] => Message::new(*src, *dest, *cmd),
            _ => Err(ParseError::bare(format!("expected three `:`-separated fields in `{s}`"))),
        }
    }
}

/// Messages observed at one time index. Intra-event order carries no meaning;
/// the stored order is the order of appearance in the source, kept only so
/// that witnesses can point back at concrete occurrences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    messages: Vec<Message>,
}

impl Event {
    pub fn new(messages: Vec<Message>) -> Result<Self, ParseError> {
        if messages.is_empty() {
            return Err(ParseError::bare("empty event set"));
        }
        Ok(Event { messages })
    }

    pub fn single(message: Message) -> Self {
        Event { messages: vec![message] }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub(crate) fn push(&mut self, message: Message) {
        self.messages.push(message);
    }
}

/// An ordered sequence of events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<Event>,
}

impl Trace {
    pub fn new(events: Vec<Event>) -> Self {
        Trace { events }
    }

    /// A trace with one single-message event per message.
    pub fn from_sequence<I: IntoIterator<Item = Message>>(messages: I) -> Self {
        Trace {
            events: messages.into_iter().map(Event::single).collect(),
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of events (time indices).
    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    /// Total number of message occurrences.
    pub fn len(&self) -> usize {
        self.events.iter().map(Event::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Iterates `(event_index, message)` over every occurrence.
    pub fn occurrences(&self) -> impl Iterator<Item = (usize, &Message)> {
        self.events
            .iter()
            .enumerate()
            .flat_map(|(i, e)| e.messages.iter().map(move |m| (i, m)))
    }

    pub(crate) fn events_mut(&mut self) -> &mut Vec<Event> {
        &mut self.events
    }
}

/// A ground-truth message flow: a set of branches sharing one start message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSpec {
    name: String,
    branches: Vec<Vec<Message>>,
}

impl FlowSpec {
    /// Validates that every branch is non-empty, starts with the same message
    /// and is structurally causal between consecutive messages.
    pub fn new(name: impl Into<String>, branches: Vec<Vec<Message>>) -> Result<Self, ParseError> {
        let name = name.into();
        let first = branches
            .first()
            .and_then(|b| b.first())
            .ok_or_else(|| ParseError::bare(format!("flow `{name}` has no non-empty branch")))?
            .clone();
        for (bi, branch) in branches.iter().enumerate() {
            let head = branch
                .first()
                .ok_or_else(|| ParseError::bare(format!("flow `{name}` branch {bi} is empty")))?;
            if *head != first {
                return Err(ParseError::bare(format!(
                    "flow `{name}` branch {bi} starts with {head}, expected {first}"
                )));
            }
            for pair in branch.windows(2) {
                if !causal(&pair[0], &pair[1]) {
                    return Err(ParseError::bare(format!(
                        "flow `{name}` branch {bi}: {} cannot cause {}",
                        pair[0], pair[1]
                    )));
                }
            }
        }
        Ok(FlowSpec { name, branches })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Vec<Message>] {
        &self.branches
    }

    pub fn start(&self) -> &Message {
        &self.branches[0][0]
    }

    /// Distinct last messages of the branches, in branch order.
    pub fn ends(&self) -> Vec<&Message> {
        let mut ends: Vec<&Message> = Vec::new();
        for b in &self.branches {
            let last = b.last().expect("branches are non-empty");
            if !ends.contains(&last) {
                ends.push(last);
            }
        }
        ends
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Message {
        s.parse().unwrap()
    }

    #[test]
    fn causal_follows_dest_to_src() {
        assert!(causal(&m("(cpu0:cache:rd_req)"), &m("(cache:mem:rd_req)")));
        assert!(!causal(&m("(cpu0:cache:rd_req)"), &m("(cpu1:cache:rd_req)")));
        assert!(causal(&m("(x:y:c)"), &m("(y:x:c2)")));
    }

    #[test]
    fn message_text_form() {
        let msg = m(" ( cpu0 : cache : rd_req ) ");
        assert_eq!(msg.to_string(), "(cpu0:cache:rd_req)");
        assert!("(a:b)".parse::<Message>().is_err());
        assert!("(a::c)".parse::<Message>().is_err());
        assert!("a:b:c".parse::<Message>().is_err());
    }

    #[test]
    fn trace_length_counts_occurrences() {
        let a = m("(a:b:x)");
        let t = Trace::new(vec![
            Event::new(vec![a.clone(), a.clone()]).unwrap(),
            Event::single(a),
        ]);
        assert_eq!(t.len(), 3);
        assert_eq!(t.num_events(), 2);
        assert!(Event::new(vec![]).is_err());
    }

    #[test]
    fn flow_spec_rejects_noncausal_branch() {
        let err = FlowSpec::new("bad", vec![vec![m("(cpu0:cache:rd_req)"), m("(cpu1:cache:rd_req)")]]);
        assert!(err.is_err());
        let err = FlowSpec::new(
            "bad",
            vec![vec![m("(a:b:x)")], vec![m("(a:b:y)")]],
        );
        assert!(err.is_err());
    }

    #[test]
    fn flow_spec_ends_are_distinct() {
        let f = FlowSpec::new(
            "rd",
            vec![
                vec![m("(c:k:rq)"), m("(k:c:rs)")],
                vec![m("(c:k:rq)"), m("(k:m:rq)"), m("(m:k:rs)"), m("(k:c:rs)")],
            ],
        )
        .unwrap();
        assert_eq!(f.ends().len(), 1);
        assert_eq!(f.start(), &m("(c:k:rq)"));
    }
}

//! Trace files, unique-message collection and start/end classification.
//!
//! Trace file format (UTF-8, `#` starts a comment):
//!
//! ```text
//! # dictionary
//! 1 (cpu0:cache:rd_req)
//! 2 (cache:cpu0:rd_resp)
//! # events, one per line; `{..}` groups simultaneous messages
//! {1, 3}
//! 1
//! (cache:mem:rd_req)
//! ```
//!
//! A line may also hold several comma-separated events (`{1,3}, 1, 2`).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::ParseError;
use crate::types::{Event, Message, Trace};

/// Numeric message references used by indexed trace files.
pub type Dictionary = BTreeMap<u64, Message>;

enum Ref {
    Index(u64),
    Inline(Message),
}

struct RawEvent {
    line: usize,
    refs: Vec<Ref>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Recognizes `<index> (<src>:<dest>:<cmd>)`.
fn dictionary_entry(line: &str) -> Option<Result<(u64, Message), ParseError>> {
    let digits_end = line.find(|c: char| !c.is_ascii_digit())?;
    if digits_end == 0 {
        return None;
    }
    let rest = line[digits_end..].trim_start();
    if !rest.starts_with('(') || line[digits_end..].len() == rest.len() {
        return None;
    }
    let index = match line[..digits_end].parse::<u64>() {
        Ok(i) => i,
        Err(e) => return Some(Err(ParseError::bare(format!("bad index: {e}")))),
    };
    Some(rest.parse::<Message>().map(|m| (index, m)))
}

/// Splits on commas that are not nested inside `{}` or `()`.
fn split_top_level(s: &str) -> Result<Vec<&str>, ParseError> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '{' | '(' => depth += 1,
            '}' | ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(ParseError::bare(format!("unbalanced `{c}`")));
                }
            }
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(ParseError::bare("unbalanced brackets"));
    }
    parts.push(&s[start..]);
    Ok(parts)
}

fn parse_ref(s: &str) -> Result<Ref, ParseError> {
    let s = s.trim();
    if s.starts_with('(') {
        return s.parse().map(Ref::Inline);
    }
    s.parse::<u64>()
        .map(Ref::Index)
        .map_err(|_| ParseError::bare(format!("expected a message index or `(src:dest:cmd)`, found `{s}`")))
}

fn parse_event(item: &str) -> Result<Vec<Ref>, ParseError> {
    let item = item.trim();
    if item.is_empty() {
        return Err(ParseError::bare("empty event"));
    }
    if let Some(inner) = item.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| ParseError::bare("unterminated `{`"))?;
        if inner.trim().is_empty() {
            return Err(ParseError::bare("empty event set"));
        }
        return split_top_level(inner)?.into_iter().map(parse_ref).collect();
    }
    Ok(vec![parse_ref(item)?])
}

fn parse_lines(text: &str) -> Result<(Dictionary, Vec<RawEvent>), ParseError> {
    let mut dict = Dictionary::new();
    let mut events = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(entry) = dictionary_entry(line) {
            let (idx, msg) = entry.map_err(|e| e.with_line(line_no))?;
            if let Some(prev) = dict.insert(idx, msg.clone()) {
                if prev != msg {
                    return Err(ParseError::at(
                        line_no,
                        format!("index {idx} redefined: {prev} vs {msg}"),
                    ));
                }
            }
            continue;
        }
        for item in split_top_level(line).map_err(|e| e.with_line(line_no))? {
            let refs = parse_event(item).map_err(|e| e.with_line(line_no))?;
            events.push(RawEvent { line: line_no, refs });
        }
    }
    Ok((dict, events))
}

/// Parses a trace file that may carry its own dictionary.
pub fn parse_trace(text: &str) -> Result<Trace, ParseError> {
    parse_trace_with_dictionary(text, &Dictionary::new())
}

/// Parses a trace, resolving indices against `external` and any dictionary
/// lines in the file itself. In-file entries may not contradict `external`.
pub fn parse_trace_with_dictionary(text: &str, external: &Dictionary) -> Result<Trace, ParseError> {
    let (local, raw) = parse_lines(text)?;
    let mut dict = external.clone();
    for (idx, msg) in local {
        if let Some(prev) = dict.get(&idx) {
            if *prev != msg {
                return Err(ParseError::bare(format!(
                    "index {idx} is {prev} in the dictionary file but {msg} in the trace"
                )));
            }
        }
        dict.insert(idx, msg);
    }
    let mut events = Vec::with_capacity(raw.len());
    for ev in raw {
        let mut messages = Vec::with_capacity(ev.refs.len());
        for r in ev.refs {
            match r {
                Ref::Inline(m) => messages.push(m),
                Ref::Index(i) => match dict.get(&i) {
                    Some(m) => messages.push(m.clone()),
                    None => {
                        return Err(ParseError::at(ev.line, format!("undeclared message index {i}")));
                    }
                },
            }
        }
        events.push(Event::new(messages).map_err(|e| e.with_line(ev.line))?);
    }
    Ok(Trace::new(events))
}

/// Parses a stand-alone dictionary file; event lines are rejected.
pub fn parse_dictionary(text: &str) -> Result<Dictionary, ParseError> {
    let (dict, events) = parse_lines(text)?;
    if let Some(ev) = events.first() {
        return Err(ParseError::at(ev.line, "dictionary files may only contain `<index> (src:dest:cmd)` lines"));
    }
    Ok(dict)
}

/// Writes a self-contained trace file. Messages are numbered from 1 in
/// first-occurrence order.
pub fn write_trace(trace: &Trace) -> String {
    let mut index: HashMap<&Message, usize> = HashMap::new();
    let mut order: Vec<&Message> = Vec::new();
    for (_, m) in trace.occurrences() {
        index.entry(m).or_insert_with(|| {
            order.push(m);
            order.len()
        });
    }
    let mut out = String::new();
    writeln!(out, "# messages").unwrap();
    for (i, m) in order.iter().enumerate() {
        writeln!(out, "{} {}", i + 1, m).unwrap();
    }
    writeln!(out, "# events").unwrap();
    for ev in trace.events() {
        if ev.len() == 1 {
            writeln!(out, "{}", index[&ev.messages()[0]]).unwrap();
        } else {
            let refs: Vec<String> = ev.messages().iter().map(|m| index[m].to_string()).collect();
            writeln!(out, "{{{}}}", refs.join(", ")).unwrap();
        }
    }
    out
}

/// Unique messages of a trace with their start/end classification.
///
/// Message `i` of the catalog has canonical index `i` (first-occurrence
/// order, ties within one event broken by file order).
#[derive(Debug, Clone)]
pub struct MessageCatalog {
    messages: Vec<Message>,
    index: HashMap<Message, usize>,
    is_start: Vec<bool>,
    is_end: Vec<bool>,
    first: Vec<usize>,
    last: Vec<usize>,
    /// Event index of every occurrence, per message, ascending.
    occurrences: Vec<Vec<usize>>,
}

impl MessageCatalog {
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn index_of(&self, m: &Message) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn is_start(&self, i: usize) -> bool {
        self.is_start[i]
    }

    pub fn is_end(&self, i: usize) -> bool {
        self.is_end[i]
    }

    pub fn starts(&self) -> Vec<&Message> {
        self.select(&self.is_start)
    }

    pub fn ends(&self) -> Vec<&Message> {
        self.select(&self.is_end)
    }

    fn select<'a>(&'a self, flags: &[bool]) -> Vec<&'a Message> {
        self.messages
            .iter()
            .zip(flags)
            .filter_map(|(m, &f)| f.then_some(m))
            .collect()
    }

    pub fn first_occurrence(&self, i: usize) -> usize {
        self.first[i]
    }

    pub fn last_occurrence(&self, i: usize) -> usize {
        self.last[i]
    }

    pub fn occurrences(&self, i: usize) -> &[usize] {
        &self.occurrences[i]
    }
}

/// Collects unique messages and classifies start and end messages.
pub fn collect_messages(trace: &Trace) -> MessageCatalog {
    let mut messages = Vec::new();
    let mut index = HashMap::new();
    let mut occurrences: Vec<Vec<usize>> = Vec::new();
    for (ev, m) in trace.occurrences() {
        let i = *index.entry(m.clone()).or_insert_with(|| {
            messages.push(m.clone());
            occurrences.push(Vec::new());
            messages.len() - 1
        });
        occurrences[i].push(ev);
    }
    let first: Vec<usize> = occurrences.iter().map(|o| o[0]).collect();
    let last: Vec<usize> = occurrences.iter().map(|o| *o.last().unwrap()).collect();

    let (first_dest, last_src) = component_extents(trace);
    let is_start = messages
        .iter()
        .zip(&first)
        .map(|(m, &f)| first_dest.get(m.src.as_str()).is_none_or(|&d| d >= f))
        .collect();
    let is_end = messages
        .iter()
        .zip(&last)
        .map(|(m, &l)| last_src.get(m.dest.as_str()).is_none_or(|&s| s <= l))
        .collect();

    MessageCatalog {
        messages,
        index,
        is_start,
        is_end,
        first,
        last,
        occurrences,
    }
}

/// Earliest event in which each component receives a message, and latest
/// event in which it sends one.
fn component_extents(trace: &Trace) -> (HashMap<&str, usize>, HashMap<&str, usize>) {
    let mut first_dest: HashMap<&str, usize> = HashMap::new();
    let mut last_src: HashMap<&str, usize> = HashMap::new();
    for (ev, m) in trace.occurrences() {
        first_dest.entry(m.dest.as_str()).or_insert(ev);
        last_src.insert(m.src.as_str(), ev);
    }
    (first_dest, last_src)
}

/// Messages of `candidates` whose first occurrence has no strictly earlier
/// message addressed to their source component.
pub fn find_start_messages(trace: &Trace, candidates: &[Message]) -> Vec<Message> {
    let (first_dest, _) = component_extents(trace);
    let mut first: HashMap<&Message, usize> = HashMap::new();
    for (ev, m) in trace.occurrences() {
        first.entry(m).or_insert(ev);
    }
    candidates
        .iter()
        .filter(|m| match first.get(m) {
            Some(&f) => first_dest.get(m.src.as_str()).is_none_or(|&d| d >= f),
            None => false,
        })
        .cloned()
        .collect()
}

/// Messages of `candidates` whose last occurrence has no strictly later
/// message sent by their destination component.
pub fn find_end_messages(trace: &Trace, candidates: &[Message]) -> Vec<Message> {
    let (_, last_src) = component_extents(trace);
    let mut last: HashMap<&Message, usize> = HashMap::new();
    for (ev, m) in trace.occurrences() {
        last.insert(m, ev);
    }
    candidates
        .iter()
        .filter(|m| match last.get(m) {
            Some(&l) => last_src.get(m.dest.as_str()).is_none_or(|&s| s <= l),
            None => false,
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG2_DICT: &str = "\
1 (cpu0:cache:rd_req)
2 (cache:cpu0:rd_resp)
3 (cpu1:cache:rd_req)
4 (cache:cpu1:rd_resp)
5 (cache:mem:rd_req)
6 (mem:cache:rd_resp)
";

    fn indexed(seq: &[u64]) -> Trace {
        let dict = parse_dictionary(FIG2_DICT).unwrap();
        Trace::from_sequence(seq.iter().map(|i| dict[i].clone()))
    }

    fn idx(dict: &Dictionary, ms: &[&Message]) -> Vec<u64> {
        let mut v: Vec<u64> = ms
            .iter()
            .map(|m| *dict.iter().find(|(_, d)| d == m).unwrap().0)
            .collect();
        v.sort();
        v
    }

    #[test]
    fn parses_braced_trace_with_dictionary() {
        let text = format!("{FIG2_DICT}{{1,3}}\n1\n2\n5\n1\n5\n6\n2\n4\n6\n2\n");
        let t = parse_trace(&text).unwrap();
        assert_eq!(t.num_events(), 11);
        assert_eq!(t.len(), 12);
        let inline = format!("{FIG2_DICT}{{1,3}}, 1, 2, 5, 1, 5, 6, 2, 4, 6, 2 # one line\n");
        assert_eq!(parse_trace(&inline).unwrap(), t);
    }

    #[test]
    fn empty_and_inline_traces() {
        let t = parse_trace("# nothing here\n\n").unwrap();
        assert_eq!(t.len(), 0);
        let t = parse_trace("(cpu0:cache:rd_req)\n").unwrap();
        assert_eq!(t.num_events(), 1);
        assert_eq!(t.events()[0].messages()[0].cmd, "rd_req");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_trace("1 (a:b:c)\n1\n7\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("undeclared"));
        let err = parse_trace("1 (a:b:c)\n{}\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = parse_trace("(a:b)\n").unwrap_err();
        assert_eq!(err.line, Some(1));
        let err = parse_trace("{1, 2\n").unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn external_dictionary_resolves_indices() {
        let dict = parse_dictionary(FIG2_DICT).unwrap();
        let t = parse_trace_with_dictionary("1\n5\n6\n2\n", &dict).unwrap();
        assert_eq!(t.len(), 4);
        assert!(parse_dictionary("1 (a:b:c)\n2\n").is_err());
        assert!(parse_trace_with_dictionary("1 (x:y:z)\n1\n", &dict).is_err());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let text = format!("{FIG2_DICT}{{1,3}}\n1\n2\n5\n(a:b:c)\n");
        let t = parse_trace(&text).unwrap();
        assert_eq!(parse_trace(&write_trace(&t)).unwrap(), t);
    }

    #[test]
    fn worked_example_start_end() {
        let dict = parse_dictionary(FIG2_DICT).unwrap();
        let t = indexed(&[1, 3, 5, 6, 1, 3, 5, 6, 2, 4, 2, 4]);
        let cat = collect_messages(&t);
        assert_eq!(cat.len(), 6);
        assert_eq!(idx(&dict, &cat.starts()), vec![1, 3]);
        assert_eq!(idx(&dict, &cat.ends()), vec![2, 4]);
    }

    #[test]
    fn single_miss_flow_start_end() {
        let dict = parse_dictionary(FIG2_DICT).unwrap();
        let t = indexed(&[1, 5, 6, 2]);
        let cat = collect_messages(&t);
        assert_eq!(idx(&dict, &cat.starts()), vec![1]);
        assert_eq!(idx(&dict, &cat.ends()), vec![2]);
        let all: Vec<Message> = cat.messages().to_vec();
        let ends = find_end_messages(&t, &all);
        assert!(!ends.contains(&dict[&6]));
    }

    #[test]
    fn single_message_is_start_and_end() {
        let t = indexed(&[1]);
        let cat = collect_messages(&t);
        assert!(cat.is_start(0) && cat.is_end(0));
    }

    #[test]
    fn same_event_messages_do_not_block_each_other() {
        // (a:b) and (b:a) together: neither precedes the other.
        let text = "{(a:b:x), (b:a:y)}\n";
        let cat = collect_messages(&parse_trace(text).unwrap());
        assert!(cat.is_start(0) && cat.is_start(1));
        assert!(cat.is_end(0) && cat.is_end(1));
    }

    #[test]
    fn repeated_initiation_uses_first_occurrence() {
        let dict = parse_dictionary(FIG2_DICT).unwrap();
        let t = indexed(&[1, 2, 1, 2]);
        let all = collect_messages(&t).messages().to_vec();
        assert_eq!(find_start_messages(&t, &all), vec![dict[&1].clone()]);
        assert_eq!(find_end_messages(&t, &all), vec![dict[&2].clone()]);
    }
}

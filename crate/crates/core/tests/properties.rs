use proptest::prelude::*;

use flowsynth::causality::{build_graph, edge_support, node_support};
use flowsynth::fsa::{derive_fsa, Fsa};
use flowsynth::ingest::{collect_messages, parse_trace, write_trace};
use flowsynth::solver::{model_extract, FlowBackend, Reduction};
use flowsynth::types::{causal, Event, Message, Trace};
use flowsynth::{generate_constraints, Execution};

fn alphabet() -> Vec<Message> {
    let comps = ["a", "b", "c"];
    let mut out = Vec::new();
    for s in comps {
        for d in comps {
            out.push(Message::new(s, d, "x").unwrap());
        }
    }
    out
}

fn trace_strategy(max_events: usize) -> impl Strategy<Value = Trace> {
    let n = alphabet().len();
    prop::collection::vec(prop::collection::vec(0..n, 1..=3), 0..=max_events).prop_map(|events| {
        let sigma = alphabet();
        Trace::new(
            events
                .into_iter()
                .map(|ev| Event::new(ev.into_iter().map(|i| sigma[i].clone()).collect()).unwrap())
                .collect(),
        )
    })
}

/// Maximum matching between occurrences of `a` and strictly later
/// occurrences of `b`, by augmenting paths.
fn max_matching(trace: &Trace, a: &Message, b: &Message) -> u64 {
    let left: Vec<usize> = trace.occurrences().filter(|(_, m)| *m == a).map(|(e, _)| e).collect();
    let right: Vec<usize> = trace.occurrences().filter(|(_, m)| *m == b).map(|(e, _)| e).collect();
    fn augment(u: usize, left: &[usize], right: &[usize], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for v in 0..right.len() {
            if left[u] < right[v] && !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, left, right, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; right.len()];
    let mut size = 0;
    for u in 0..left.len() {
        let mut seen = vec![false; right.len()];
        if augment(u, &left, &right, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn edge_support_is_maximum_matching(t in trace_strategy(20)) {
        for a in alphabet() {
            for b in alphabet() {
                if causal(&a, &b) {
                    prop_assert_eq!(edge_support(&t, &a, &b).unwrap(), max_matching(&t, &a, &b));
                }
            }
        }
    }

    #[test]
    fn graph_invariants(t in trace_strategy(25)) {
        let cat = collect_messages(&t);
        let g = build_graph(&cat, Execution::Sequential);
        let total: u64 = (0..g.num_nodes()).map(|i| g.node_support(i)).sum();
        prop_assert_eq!(total as usize, t.len());
        for (i, m) in g.nodes().iter().enumerate() {
            prop_assert_eq!(g.node_support(i), node_support(&t, m));
        }
        for e in g.edges() {
            prop_assert!(!g.is_root(e.to) && !g.is_terminal(e.from));
            prop_assert!(e.support >= 1);
            prop_assert!(e.support <= g.node_support(e.from).min(g.node_support(e.to)));
            prop_assert!(causal(&g.nodes()[e.from], &g.nodes()[e.to]));
        }
        prop_assert_eq!(build_graph(&cat, Execution::Parallel), g);
    }

    #[test]
    fn supports_ignore_order_within_events(t in trace_strategy(20)) {
        let reversed = Trace::new(
            t.events()
                .iter()
                .map(|e| Event::new(e.messages().iter().rev().cloned().collect()).unwrap())
                .collect(),
        );
        let g1 = build_graph(&collect_messages(&t), Execution::Sequential);
        let g2 = build_graph(&collect_messages(&reversed), Execution::Sequential);
        let edges = |g: &flowsynth::CausalityGraph| -> Vec<(Message, Message, u64)> {
            let mut v: Vec<_> = g
                .edges()
                .iter()
                .map(|e| (g.nodes()[e.from].clone(), g.nodes()[e.to].clone(), e.support))
                .collect();
            v.sort();
            v
        };
        prop_assert_eq!(edges(&g1), edges(&g2));
    }

    #[test]
    fn trace_files_round_trip(t in trace_strategy(30)) {
        prop_assert_eq!(parse_trace(&write_trace(&t)).unwrap(), t);
    }

    #[test]
    fn mined_models_are_consistent(t in trace_strategy(15), seed in 0u64..50) {
        let g = build_graph(&collect_messages(&t), Execution::Sequential);
        let cs = generate_constraints(&g);
        if let Some(sol) = model_extract(&FlowBackend, &cs, 3, seed, Execution::Sequential, Reduction::Exhaustive).unwrap() {
            let fsa = derive_fsa(&g, &sol).unwrap();
            let nonterminal_used = (0..g.num_nodes())
                .filter(|&i| !g.is_terminal(i))
                .filter(|&i| sol.assignment().iter().any(|(&(a, _), &x)| a == i && x > 0))
                .count();
            // a message that both starts and ends a flow carries its own support
            let used_starts = (0..g.num_nodes())
                .filter(|&i| g.is_root(i))
                .filter(|&i| g.is_terminal(i) || sol.assignment().iter().any(|(&(a, _), &x)| a == i && x > 0))
                .count();
            prop_assert_eq!(fsa.states().len(), 1 + nonterminal_used);
            prop_assert_eq!(fsa.transitions().len(), used_starts + sol.size());
            prop_assert_eq!(Fsa::from_json(&fsa.to_json()).unwrap(), fsa);
        }
    }
}

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowsynth::causality::{CausalityGraph, Edge};
use flowsynth::constraints::ConstraintSystem;
use flowsynth::types::{causal, Message};

/// A random well-formed causality graph with at most `max_edges` edges and
/// every support at most `max_support`. Odd seeds plant a satisfiable
/// assignment so both verdicts are well represented.
pub fn random_graph(seed: u64, max_edges: usize, max_support: u64) -> CausalityGraph {
    if seed % 2 == 1 {
        return planted_graph(seed, max_edges, max_support);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = ["p", "q", "r"];
    let n = rng.random_range(1..=6);
    let nodes: Vec<Message> = (0..n)
        .map(|i| {
            let s = comps[rng.random_range(0..comps.len())];
            let d = comps[rng.random_range(0..comps.len())];
            Message::new(s, d, format!("m{i}")).unwrap()
        })
        .collect();
    let support: Vec<u64> = (0..n).map(|_| rng.random_range(1..=max_support)).collect();
    let roots: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let terminals: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let mut candidates = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if causal(&nodes[a], &nodes[b]) && !terminals[a] && !roots[b] {
                candidates.push((a, b));
            }
        }
    }
    let mut edges = Vec::new();
    for (a, b) in candidates {
        if edges.len() < max_edges && rng.random_bool(0.6) {
            let cap = support[a].min(support[b]);
            edges.push(Edge {
                from: a,
                to: b,
                support: rng.random_range(1..=cap),
            });
        }
    }
    CausalityGraph::from_parts(nodes, support, roots, terminals, edges).unwrap()
}

/// Walks from a root to a terminal over one shared component, so every
/// pair of messages is causal; supports are the walk counts plus slack.
fn planted_graph(seed: u64, max_edges: usize, max_support: u64) -> CausalityGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let nodes: Vec<Message> = (0..n).map(|i| Message::new("p", "p", format!("m{i}")).unwrap()).collect();
    // node 0 is the root, node n-1 the terminal
    let mut visits = vec![0u64; n];
    let mut count: std::collections::BTreeMap<(usize, usize), u64> = Default::default();
    let walks = rng.random_range(1..=max_support);
    for _ in 0..walks {
        let mut walk = vec![0];
        if n > 2 {
            for _ in 0..rng.random_range(0..=2) {
                walk.push(rng.random_range(1..n - 1));
            }
        }
        walk.push(n - 1);
        walk.dedup();
        let new_edges = walk
            .windows(2)
            .filter(|w| !count.contains_key(&(w[0], w[1])))
            .count();
        let fits = count.len() + new_edges <= max_edges
            && walk.iter().all(|&v| visits[v] < max_support);
        let repeats = walk.len() != walk.iter().collect::<std::collections::HashSet<_>>().len();
        if !fits || repeats {
            continue;
        }
        for &v in &walk {
            visits[v] += 1;
        }
        for w in walk.windows(2) {
            *count.entry((w[0], w[1])).or_default() += 1;
        }
    }
    if count.is_empty() {
        count.insert((0, n - 1), 1);
        visits[0] = 1;
        visits[n - 1] = 1;
    }
    // keep visited nodes only, so every planted count is a valid assignment
    let kept: Vec<usize> = (0..n).filter(|&v| visits[v] > 0).collect();
    let pos = |v: usize| kept.iter().position(|&k| k == v).unwrap();
    let nodes: Vec<Message> = kept.iter().map(|&v| nodes[v].clone()).collect();
    let support: Vec<u64> = kept.iter().map(|&v| visits[v]).collect();
    let mut edges: Vec<Edge> = count
        .iter()
        .map(|(&(a, b), &c)| Edge {
            from: pos(a),
            to: pos(b),
            support: c,
        })
        .collect();
    let n = kept.len();
    let roots: Vec<bool> = (0..n).map(|i| i == 0).collect();
    let terminals: Vec<bool> = (0..n).map(|i| i == n - 1).collect();
    for e in &mut edges {
        let cap = support[e.from].min(support[e.to]);
        e.support = rng.random_range(e.support..=cap);
    }
    // distractor edges the planted assignment leaves at zero
    for a in 0..n - 1 {
        for b in 1..n {
            if edges.len() < max_edges && rng.random_bool(0.3) && !edges.iter().any(|e| (e.from, e.to) == (a, b)) {
                let cap = support[a].min(support[b]);
                edges.push(Edge {
                    from: a,
                    to: b,
                    support: rng.random_range(1..=cap),
                });
            }
        }
    }
    CausalityGraph::from_parts(nodes, support, roots, terminals, edges).unwrap()
}

/// Whether `values` satisfies every equality and bound of `cs`.
pub fn satisfies(cs: &ConstraintSystem, values: &[u64]) -> bool {
    cs.variables().iter().zip(values).all(|(v, &x)| x <= v.upper)
        && cs
            .equalities()
            .iter()
            .all(|eq| eq.vars.iter().map(|&k| values[k]).sum::<u64>() == eq.target)
}

/// Enumerates every assignment within the bounds, with `zero[k]` forcing
/// variable `k` to zero. Returns the first satisfying one.
pub fn brute_force(cs: &ConstraintSystem, zero: &[bool]) -> Option<Vec<u64>> {
    let vars = cs.variables();
    let upper: Vec<u64> = vars
        .iter()
        .enumerate()
        .map(|(k, v)| if zero[k] { 0 } else { v.upper })
        .collect();
    let mut values = vec![0u64; vars.len()];
    loop {
        if satisfies(cs, &values) {
            return Some(values);
        }
        let mut k = 0;
        loop {
            if k == values.len() {
                return None;
            }
            if values[k] < upper[k] {
                values[k] += 1;
                break;
            }
            values[k] = 0;
            k += 1;
        }
    }
}

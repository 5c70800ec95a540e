//! Exact reduction of the consistency constraints to a bipartite
//! transportation network.
//!
//! ```text
//!   S --sup(a)--> L_a --[0, sup(a->b)]--> R_b --sup(b)--> T
//! ```
//!
//! `L_a` exists for every outgoing equality and `R_b` for every incoming
//! one. The system is satisfiable iff a maximum flow saturates every source
//! and every sink arc; the middle-arc flows are then a solution, and every
//! solution is such a flow.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::constraints::{ConstraintSystem, Side};
use crate::error::{Error, Result};

/// Largest support the network accepts; keeps every sum inside `i64`.
pub const MAX_SUPPORT: u64 = (i64::MAX / 4) as u64;

const INF_COST: i64 = i64::MAX / 4;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: i64,
}

/// Residual network with paired forward/backward arcs (`2k`, `2k + 1`).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    source: usize,
    sink: usize,
    /// Forward arc id of every middle arc, in variable order.
    middle: Vec<usize>,
    supply: i64,
    demand: i64,
}

impl FlowNetwork {
    /// Builds the network for `cs`. Variables flagged in `forced_zero` get
    /// capacity 0; `weights` (one per variable) become middle-arc costs.
    pub fn new(cs: &ConstraintSystem, forced_zero: &[bool], weights: Option<&[i64]>) -> Result<Self> {
        let nvars = cs.variables().len();
        let mut left = vec![usize::MAX; nvars];
        let mut right = vec![usize::MAX; nvars];
        let mut net = FlowNetwork {
            arcs: Vec::new(),
            adj: vec![Vec::new(); 2],
            source: 0,
            sink: 1,
            middle: Vec::with_capacity(nvars),
            supply: 0,
            demand: 0,
        };
        for eq in cs.equalities() {
            if eq.target > MAX_SUPPORT {
                return Err(Error::Overflow(eq.target));
            }
            let v = net.add_vertex();
            let target = eq.target as i64;
            match eq.side {
                Side::Outgoing => {
                    net.add_arc(net.source, v, target, 0);
                    net.supply = checked_add(net.supply, target)?;
                    for &k in &eq.vars {
                        left[k] = v;
                    }
                }
                Side::Incoming => {
                    net.add_arc(v, net.sink, target, 0);
                    net.demand = checked_add(net.demand, target)?;
                    for &k in &eq.vars {
                        right[k] = v;
                    }
                }
            }
        }
        for (k, var) in cs.variables().iter().enumerate() {
            if var.upper > MAX_SUPPORT {
                return Err(Error::Overflow(var.upper));
            }
            debug_assert!(left[k] != usize::MAX && right[k] != usize::MAX);
            let cap = if forced_zero.get(k).copied().unwrap_or(false) {
                0
            } else {
                var.upper as i64
            };
            let cost = weights.map_or(0, |w| w[k]);
            let id = net.add_arc(left[k], right[k], cap, cost);
            net.middle.push(id);
        }
        Ok(net)
    }

    fn add_vertex(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    /// Flow currently on each middle arc, in variable order.
    pub fn middle_flows(&self) -> Vec<u64> {
        self.middle.iter().map(|&id| self.arcs[id + 1].cap as u64).collect()
    }

    /// Maximum flow by Dinic's algorithm, ignoring costs.
    pub fn max_flow(&mut self) -> i64 {
        let n = self.num_vertices();
        let mut total = 0;
        let mut level = vec![-1i32; n];
        let mut iter = vec![0usize; n];
        loop {
            level.iter_mut().for_each(|l| *l = -1);
            level[self.source] = 0;
            let mut queue = VecDeque::from([self.source]);
            while let Some(u) = queue.pop_front() {
                for &id in &self.adj[u] {
                    let a = &self.arcs[id];
                    if a.cap > 0 && level[a.to] < 0 {
                        level[a.to] = level[u] + 1;
                        queue.push_back(a.to);
                    }
                }
            }
            if level[self.sink] < 0 {
                return total;
            }
            iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.blocking_dfs(self.source, i64::MAX, &level, &mut iter);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn blocking_dfs(&mut self, u: usize, limit: i64, level: &[i32], iter: &mut [usize]) -> i64 {
        if u == self.sink {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let id = self.adj[u][iter[u]];
            let (to, cap) = (self.arcs[id].to, self.arcs[id].cap);
            if cap > 0 && level[to] == level[u] + 1 {
                let pushed = self.blocking_dfs(to, limit.min(cap), level, iter);
                if pushed > 0 {
                    self.arcs[id].cap -= pushed;
                    self.arcs[id ^ 1].cap += pushed;
                    return pushed;
                }
            }
            iter[u] += 1;
        }
        0
    }

    /// Minimum-cost maximum flow by successive shortest paths with vertex
    /// potentials. Requires non-negative arc costs. Returns `(flow, cost)`.
    pub fn min_cost_max_flow(&mut self) -> (i64, i64) {
        let n = self.num_vertices();
        let mut potential = vec![0i64; n];
        let mut dist = vec![INF_COST; n];
        let mut parent = vec![usize::MAX; n];
        let (mut flow, mut cost) = (0i64, 0i64);
        loop {
            dist.iter_mut().for_each(|d| *d = INF_COST);
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            dist[self.source] = 0;
            let mut heap = BinaryHeap::from([Reverse((0i64, self.source))]);
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &id in &self.adj[u] {
                    let a = &self.arcs[id];
                    if a.cap <= 0 {
                        continue;
                    }
                    let nd = d + a.cost + potential[u] - potential[a.to];
                    if nd < dist[a.to] {
                        dist[a.to] = nd;
                        parent[a.to] = id;
                        heap.push(Reverse((nd, a.to)));
                    }
                }
            }
            if dist[self.sink] == INF_COST {
                return (flow, cost);
            }
            for v in 0..n {
                if dist[v] < INF_COST {
                    potential[v] += dist[v];
                }
            }
            let mut push = i64::MAX;
            let mut v = self.sink;
            while v != self.source {
                let id = parent[v];
                push = push.min(self.arcs[id].cap);
                v = self.arcs[id ^ 1].to;
            }
            let mut v = self.sink;
            while v != self.source {
                let id = parent[v];
                self.arcs[id].cap -= push;
                self.arcs[id ^ 1].cap += push;
                cost += push * self.arcs[id].cost;
                v = self.arcs[id ^ 1].to;
            }
            flow += push;
        }
    }

    /// `true` iff `flow` saturates every source and sink arc.
    pub fn saturates(&self, flow: i64) -> bool {
        self.supply == self.demand && flow == self.supply
    }
}

fn checked_add(a: i64, b: i64) -> Result<i64> {
    a.checked_add(b)
        .filter(|s| *s <= MAX_SUPPORT as i64)
        .ok_or(Error::Overflow(b as u64))
}

/// Solves `cs` with the listed variables forced to zero. With weights the
/// returned assignment has minimum total weight among all solutions.
pub fn solve_network(
    cs: &ConstraintSystem,
    forced_zero: &[bool],
    weights: Option<&[i64]>,
) -> Result<Option<Vec<u64>>> {
    if !cs.structural_infeasibilities().is_empty() {
        return Ok(None);
    }
    let mut net = FlowNetwork::new(cs, forced_zero, weights)?;
    if net.supply != net.demand {
        return Ok(None);
    }
    let flow = match weights {
        Some(_) => net.min_cost_max_flow().0,
        None => net.max_flow(),
    };
    Ok(net.saturates(flow).then(|| net.middle_flows()))
}

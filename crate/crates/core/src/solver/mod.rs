//! Solving the consistency constraints and reducing solutions.
//!
//! Solutions are sampled by re-solving with random per-edge costs, then
//! each one is shrunk by repeatedly forcing a non-zero edge to zero and
//! re-solving. The smallest reduced solution wins.

pub mod flow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{ConstraintSystem, Solution};
use crate::error::Result;
use crate::exec::Execution;

/// Something that can decide and solve a constraint system with a set of
/// variables forced to zero.
pub trait Backend: Sync {
    /// `weights`, when given, hold one cost per variable; backends may use
    /// them to pick among solutions.
    fn solve(&self, cs: &ConstraintSystem, forced_zero: &[bool], weights: Option<&[i64]>) -> Result<Option<Solution>>;
}

/// Min-cost max-flow backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlowBackend;

impl Backend for FlowBackend {
    fn solve(&self, cs: &ConstraintSystem, forced_zero: &[bool], weights: Option<&[i64]>) -> Result<Option<Solution>> {
        Ok(flow::solve_network(cs, forced_zero, weights)?.map(|v| Solution::from_values(cs, &v)))
    }
}

/// How far `reduce_model` goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Keep trying the remaining candidates after a failed zeroing, until no
    /// non-zero edge can be removed.
    #[default]
    Exhaustive,
    /// Stop at the first edge that cannot be zeroed.
    SingleAttempt,
}

const WEIGHT_RANGE: std::ops::RangeInclusive<i64> = 1..=1 << 20;

/// Random edge costs for sample `stream` of `seed`. Stream 0 is the
/// costing used by [`solve_one`].
pub fn random_weights(cs: &ConstraintSystem, seed: u64, stream: u64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..cs.variables().len())
        .map(|_| rng.random_range(WEIGHT_RANGE))
        .collect()
}

/// One solution of `cs`, minimum-cost under the seeded random costs, or
/// `None` when `cs` is unsatisfiable.
pub fn solve_one<B: Backend + ?Sized>(backend: &B, cs: &ConstraintSystem, seed: u64) -> Result<Option<Solution>> {
    let w = random_weights(cs, seed, 0);
    backend.solve(cs, &vec![false; cs.variables().len()], Some(&w))
}

/// Up to `sz` distinct solutions, in sample order. Empty iff UNSAT.
pub fn sample_solutions<B: Backend + ?Sized>(
    backend: &B,
    cs: &ConstraintSystem,
    sz: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Solution>> {
    let Some(first) = solve_one(backend, cs, seed)? else {
        return Ok(Vec::new());
    };
    let zeros = vec![false; cs.variables().len()];
    let rest = exec.map(sz.saturating_sub(1), |i| {
        let w = random_weights(cs, seed, i as u64 + 1);
        backend.solve(cs, &zeros, Some(&w))
    });
    let mut out = vec![first];
    for sol in rest {
        if let Some(sol) = sol? {
            if !out.contains(&sol) {
                out.push(sol);
            }
        }
    }
    Ok(out)
}

/// Shrinks `sol` by forcing non-zero edges to zero one at a time.
///
/// Every edge that is zero in the current solution stays forced to zero, so
/// the support set only ever shrinks. Candidates are tried by descending
/// value, then by `(from, to)`; the order is recomputed after every
/// successful step. An edge that failed once is never retried, since the
/// forced-zero set only grows.
pub fn reduce_model<B: Backend + ?Sized>(
    backend: &B,
    cs: &ConstraintSystem,
    sol: &Solution,
    seed: u64,
    mode: Reduction,
) -> Result<Solution> {
    let weights = random_weights(cs, seed, 0);
    reduce_weighted(backend, cs, sol, &weights, mode)
}

fn reduce_weighted<B: Backend + ?Sized>(
    backend: &B,
    cs: &ConstraintSystem,
    sol: &Solution,
    weights: &[i64],
    mode: Reduction,
) -> Result<Solution> {
    let vars = cs.variables();
    let mut current = sol.values(cs);
    let mut zero: Vec<bool> = current.iter().map(|&x| x == 0).collect();
    let mut failed = vec![false; vars.len()];
    let mut result = sol.clone();
    'outer: loop {
        let mut candidates: Vec<usize> = (0..vars.len())
            .filter(|&k| current[k] > 0 && !failed[k])
            .collect();
        candidates.sort_by_key(|&k| (std::cmp::Reverse(current[k]), vars[k].from, vars[k].to));
        for k in candidates {
            zero[k] = true;
            match backend.solve(cs, &zero, Some(weights))? {
                Some(next) => {
                    current = next.values(cs);
                    for (z, &x) in zero.iter_mut().zip(&current) {
                        *z |= x == 0;
                    }
                    result = next;
                    continue 'outer;
                }
                None => {
                    zero[k] = false;
                    failed[k] = true;
                    if mode == Reduction::SingleAttempt {
                        break 'outer;
                    }
                }
            }
        }
        break;
    }
    Ok(result)
}

/// Samples up to `sz` solutions, reduces each, and returns the reduced
/// solution with the fewest non-zero edges (ties: smallest sorted edge
/// list). `None` iff `cs` is unsatisfiable.
pub fn model_extract<B: Backend + ?Sized>(
    backend: &B,
    cs: &ConstraintSystem,
    sz: usize,
    seed: u64,
    exec: Execution,
    mode: Reduction,
) -> Result<Option<Solution>> {
    let candidates = extract_candidates(backend, cs, sz, seed, exec, mode)?;
    Ok(candidates.into_iter().next())
}

/// All distinct reduced solutions, best first.
pub fn extract_candidates<B: Backend + ?Sized>(
    backend: &B,
    cs: &ConstraintSystem,
    sz: usize,
    seed: u64,
    exec: Execution,
    mode: Reduction,
) -> Result<Vec<Solution>> {
    let zeros = vec![false; cs.variables().len()];
    let reduced = exec.map(sz.max(1), |i| -> Result<Option<Solution>> {
        let w = random_weights(cs, seed, i as u64);
        match backend.solve(cs, &zeros, Some(&w))? {
            Some(sol) => reduce_weighted(backend, cs, &sol, &w, mode).map(Some),
            None => Ok(None),
        }
    });
    let mut out: Vec<Solution> = Vec::new();
    for r in reduced {
        if let Some(sol) = r? {
            out.push(sol);
        }
    }
    out.sort_by_cached_key(|s| (s.size(), s.support_edges()));
    out.dedup();
    Ok(out)
}

/// `true` iff no non-zero edge of `sol` can be forced to zero while every
/// edge that is already zero stays zero.
pub fn is_locally_minimal<B: Backend + ?Sized>(backend: &B, cs: &ConstraintSystem, sol: &Solution) -> Result<bool> {
    let values = sol.values(cs);
    let mut zero: Vec<bool> = values.iter().map(|&x| x == 0).collect();
    for k in 0..values.len() {
        if values[k] == 0 {
            continue;
        }
        zero[k] = true;
        if backend.solve(cs, &zero, None)?.is_some() {
            return Ok(false);
        }
        zero[k] = false;
    }
    Ok(true)
}

//! Independent reference implementations used to check the fast paths.

use crate::oracle::{is_feasible, objective_value, OracleInstance, OracleSolution, SolveStatus};

pub const BRUTE_FORCE_MAX_JOBS: usize = 20;

#[derive(Debug, thiserror::Error)]
#[error("instance has {0} jobs; exhaustive search is limited to {BRUTE_FORCE_MAX_JOBS}")]
pub struct TooLarge(pub usize);

/// Enumerates every subset. Ties keep the first subset in counting order.
pub fn brute_force_oracle(inst: &OracleInstance) -> Result<OracleSolution, TooLarge> {
    let n = inst.jobs.len();
    if n > BRUTE_FORCE_MAX_JOBS {
        return Err(TooLarge(n));
    }
    let mut best_x = vec![false; n];
    let mut best = 0.0;
    let mut x = vec![false; n];
    for mask in 0u32..(1u32 << n) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = mask & (1 << i) != 0;
        }
        if !is_feasible(inst, &x) {
            continue;
        }
        let v = objective_value(inst, &x);
        if v > best {
            best = v;
            best_x.clone_from(&x);
        }
    }
    Ok(OracleSolution {
        x: best_x,
        objective_value: best,
        upper_bound: best,
        status: SolveStatus::Optimal,
        nodes_explored: 1u64 << n,
    })
}

/// Feasibility checked on a dense grid of instants instead of arrivals only.
pub fn dense_grid_feasible(inst: &OracleInstance, x: &[bool], step: f64) -> bool {
    let start = inst.jobs.iter().map(|j| j.arrival).fold(f64::INFINITY, f64::min);
    let end = inst.jobs.iter().map(|j| j.end).fold(f64::NEG_INFINITY, f64::max);
    if !start.is_finite() {
        return true;
    }
    let mut instants: Vec<f64> = Vec::new();
    let mut t = start;
    while t <= end {
        instants.push(t);
        t += step;
    }
    instants.extend(inst.jobs.iter().flat_map(|j| [j.arrival, j.end]));
    instants.iter().all(|&t| {
        let load: f64 = inst
            .jobs
            .iter()
            .zip(x)
            .filter(|(j, &on)| on && j.arrival <= t && t <= j.end)
            .map(|(j, _)| j.size as f64)
            .sum();
        load <= inst.capacity
    })
}

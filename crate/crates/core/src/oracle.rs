//! Clairvoyant placement: a temporal knapsack solved by branch and bound.
//!
//! Capacity is only checked at arrival instants. Footprints are constant
//! and lifetimes are closed intervals, so the active set can only grow at an
//! arrival; any overload shows up at the latest arrival before it.
//!
//! Presolve fixes jobs with non-positive gain or `s > M` to HDD, and fixes to
//! SSD every job whose arrival points never carry more than `M` of candidate
//! load. The remaining jobs split into independent components (their binding
//! point ranges overlap) and each component is searched depth-first in gain
//! density order.
//!
//! Upper bound at a node: every undecided job is charged to one fixed
//! binding point inside its lifetime (the most loaded one). A completion
//! must respect capacity at each of those points, so the sum over points of
//! the fractional knapsack on that point's residual capacity bounds the gain
//! still reachable. Jobs that no longer fit anywhere in their range drop out.

use std::collections::HashMap;
use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cost::{CostError, CostRates, JobCosts};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Tco,
    Tcio,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::Tco => "tco",
            Objective::Tcio => "tcio",
        })
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tco" => Ok(Objective::Tco),
            "tcio" => Ok(Objective::Tcio),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleJob {
    pub id: String,
    pub arrival: f64,
    pub end: f64,
    pub size: u64,
    /// HDD cost minus SSD cost in the chosen objective.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleInstance {
    pub jobs: Vec<OracleJob>,
    pub capacity: f64,
    pub objective: Objective,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLimits {
    /// Search nodes across all components.
    pub node_budget: u64,
    /// Wall-clock cap; makes results timing-dependent when it triggers.
    pub time_budget: Option<Duration>,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            node_budget: 2_000_000,
            time_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Bounded { gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<bool>,
    pub objective_value: f64,
    /// Proven upper bound on the optimum.
    pub upper_bound: f64,
    pub status: SolveStatus,
    pub nodes_explored: u64,
}

pub fn build_instance(
    trace: &Trace,
    rates: &CostRates,
    capacity: f64,
    objective: Objective,
) -> Result<OracleInstance, CostError> {
    let jobs = trace
        .jobs()
        .iter()
        .map(|j| {
            let c = JobCosts::compute(j, rates)?;
            Ok(OracleJob {
                id: j.job_id.clone(),
                arrival: j.arrival_time,
                end: j.end_time,
                size: j.peak_bytes,
                gain: match objective {
                    Objective::Tco => c.savings(),
                    Objective::Tcio => c.tcio_hdd,
                },
            })
        })
        .collect::<Result<Vec<_>, CostError>>()?;
    Ok(OracleInstance {
        jobs,
        capacity,
        objective,
    })
}

/// Sum of selected gains in job order.
pub fn objective_value(inst: &OracleInstance, x: &[bool]) -> f64 {
    inst.jobs
        .iter()
        .zip(x)
        .filter(|(_, &on)| on)
        .map(|(j, _)| j.gain)
        .sum()
}

/// Whether the selection respects capacity at every arrival instant.
pub fn is_feasible(inst: &OracleInstance, x: &[bool]) -> bool {
    if x.len() != inst.jobs.len() {
        return false;
    }
    let mut events: Vec<(f64, u8, f64)> = Vec::new();
    for (j, &on) in inst.jobs.iter().zip(x) {
        if on {
            events.push((j.arrival, 0, j.size as f64));
            events.push((j.end, 1, -(j.size as f64)));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut load = 0.0;
    for (_, kind, delta) in events {
        load += delta;
        if kind == 0 && load > inst.capacity {
            return false;
        }
    }
    true
}

/// Independent recheck of feasibility and the reported objective.
pub fn verify(inst: &OracleInstance, sol: &OracleSolution) -> bool {
    is_feasible(inst, &sol.x) && objective_value(inst, &sol.x) == sol.objective_value
}

/// Range-add, range-max segment tree.
struct SegTree {
    n: usize,
    max: Vec<f64>,
    lazy: Vec<f64>,
}

impl SegTree {
    fn new(values: &[f64]) -> Self {
        let n = values.len().max(1);
        let mut t = SegTree {
            n,
            max: vec![0.0; 4 * n],
            lazy: vec![0.0; 4 * n],
        };
        t.build(1, 0, n - 1, values);
        t
    }

    fn build(&mut self, node: usize, l: usize, r: usize, v: &[f64]) {
        if l == r {
            self.max[node] = v.get(l).copied().unwrap_or(0.0);
            return;
        }
        let m = (l + r) / 2;
        self.build(2 * node, l, m, v);
        self.build(2 * node + 1, m + 1, r, v);
        self.max[node] = self.max[2 * node].max(self.max[2 * node + 1]);
    }

    fn add(&mut self, lo: usize, hi: usize, d: f64) {
        self.add_rec(1, 0, self.n - 1, lo, hi, d);
    }

    fn add_rec(&mut self, node: usize, l: usize, r: usize, lo: usize, hi: usize, d: f64) {
        if hi < l || r < lo {
            return;
        }
        if lo <= l && r <= hi {
            self.max[node] += d;
            self.lazy[node] += d;
            return;
        }
        let m = (l + r) / 2;
        self.add_rec(2 * node, l, m, lo, hi, d);
        self.add_rec(2 * node + 1, m + 1, r, lo, hi, d);
        self.max[node] = self.max[2 * node].max(self.max[2 * node + 1]) + self.lazy[node];
    }

    fn query(&self, lo: usize, hi: usize) -> f64 {
        self.query_rec(1, 0, self.n - 1, lo, hi)
    }

    fn query_rec(&self, node: usize, l: usize, r: usize, lo: usize, hi: usize) -> f64 {
        if hi < l || r < lo {
            return f64::NEG_INFINITY;
        }
        if lo <= l && r <= hi {
            return self.max[node];
        }
        let m = (l + r) / 2;
        self.query_rec(2 * node, l, m, lo, hi)
            .max(self.query_rec(2 * node + 1, m + 1, r, lo, hi))
            + self.lazy[node]
    }
}

/// A contested job inside a component, with its binding-point range.
#[derive(Debug, Clone, Copy)]
struct Item {
    job: usize,
    lo: usize,
    hi: usize,
    size: f64,
    gain: f64,
    /// Binding point this job is charged to in the bound.
    anchor: usize,
}

struct Component {
    items: Vec<Item>,
    n_points: usize,
}

struct Search<'a> {
    items: &'a [Item],
    capacity: f64,
    tree: SegTree,
    residual: Vec<f64>,
    eps: f64,
}

impl Search<'_> {
    fn fits(&self, it: &Item) -> bool {
        self.tree.query(it.lo, it.hi) + it.size <= self.capacity
    }

    /// Reachable gain from items `k..`, stopping early once `need` is exceeded.
    fn bound(&mut self, k: usize, need: f64) -> f64 {
        let mut touched: Vec<usize> = Vec::new();
        let mut total = 0.0;
        for it in &self.items[k..] {
            if !self.fits(it) {
                continue;
            }
            let r = &mut self.residual[it.anchor];
            if r.is_nan() {
                *r = self.capacity - self.tree.query(it.anchor, it.anchor);
                touched.push(it.anchor);
            }
            if *r <= 0.0 {
                continue;
            }
            if it.size <= *r {
                *r -= it.size;
                total += it.gain;
            } else {
                total += it.gain * (*r / it.size);
                *r = 0.0;
            }
            if total > need {
                break;
            }
        }
        for p in touched {
            self.residual[p] = f64::NAN;
        }
        total
    }

    fn greedy(&mut self, order: &[usize]) -> (Vec<bool>, f64) {
        let mut x = vec![false; self.items.len()];
        let mut value = 0.0;
        for &k in order {
            let it = self.items[k];
            if self.fits(&it) {
                self.tree.add(it.lo, it.hi, it.size);
                x[k] = true;
                value += it.gain;
            }
        }
        for (k, &on) in x.iter().enumerate() {
            if on {
                let it = self.items[k];
                self.tree.add(it.lo, it.hi, -it.size);
            }
        }
        (x, value)
    }
}

struct ComponentResult {
    x: Vec<bool>,
    value: f64,
    bound: f64,
    complete: bool,
    nodes: u64,
}

fn solve_component(
    comp: &Component,
    capacity: f64,
    budget: u64,
    deadline: Option<Instant>,
    warm: Option<Vec<bool>>,
) -> ComponentResult {
    let items = &comp.items;
    let n = items.len();
    let total_gain: f64 = items.iter().map(|i| i.gain).sum();
    let mut s = Search {
        items,
        capacity,
        tree: SegTree::new(&vec![0.0; comp.n_points]),
        residual: vec![f64::NAN; comp.n_points],
        eps: 1e-12 * total_gain.abs().max(f64::MIN_POSITIVE),
    };
    let root_bound = s.bound(0, f64::INFINITY);

    // Incumbents: density order (the item order) and plain gain order.
    let by_density: Vec<usize> = (0..n).collect();
    let mut by_gain: Vec<usize> = (0..n).collect();
    by_gain.sort_by(|&a, &b| items[b].gain.total_cmp(&items[a].gain).then(a.cmp(&b)));
    let (mut best_x, mut best) = s.greedy(&by_density);
    let (gx, gv) = s.greedy(&by_gain);
    if gv > best {
        best_x = gx;
        best = gv;
    }
    if let Some(w) = warm {
        let mut ok = true;
        for (k, it) in items.iter().enumerate() {
            if w[k] {
                if !s.fits(it) {
                    ok = false;
                }
                s.tree.add(it.lo, it.hi, it.size);
            }
        }
        for (k, it) in items.iter().enumerate() {
            if w[k] {
                s.tree.add(it.lo, it.hi, -it.size);
            }
        }
        let v: f64 = items.iter().zip(&w).filter(|(_, &on)| on).map(|(i, _)| i.gain).sum();
        if ok && v > best {
            best = v;
            best_x = w;
        }
    }

    // Depth-first: (depth, included) frames.
    let mut stack: Vec<(usize, bool)> = Vec::with_capacity(n);
    let mut k = 0usize;
    let mut value = 0.0;
    let mut nodes = 0u64;
    let mut complete = false;
    'search: loop {
        let mut backtrack = false;
        if nodes >= budget || (nodes % 1024 == 0 && deadline.is_some_and(|d| Instant::now() >= d)) {
            break 'search;
        }
        nodes += 1;
        if k == n {
            if value > best {
                best = value;
                best_x = vec![false; n];
                for &(d, inc) in &stack {
                    best_x[d] = inc;
                }
            }
            backtrack = true;
        } else {
            let need = best - value + s.eps;
            if s.bound(k, need) <= need {
                backtrack = true;
            } else {
                let it = items[k];
                if s.fits(&it) {
                    s.tree.add(it.lo, it.hi, it.size);
                    value += it.gain;
                    stack.push((k, true));
                } else {
                    stack.push((k, false));
                }
                k += 1;
            }
        }
        if backtrack {
            loop {
                match stack.pop() {
                    None => {
                        complete = true;
                        break 'search;
                    }
                    Some((d, true)) => {
                        let it = items[d];
                        s.tree.add(it.lo, it.hi, -it.size);
                        value -= it.gain;
                        stack.push((d, false));
                        k = d + 1;
                        break;
                    }
                    Some((_, false)) => {}
                }
            }
        }
    }
    ComponentResult {
        x: best_x,
        value: best,
        bound: if complete { best } else { root_bound.max(best) },
        complete,
        nodes,
    }
}

/// Presolve and component split; returns fixed-SSD flags and components.
fn decompose(inst: &OracleInstance) -> (Vec<bool>, Vec<Component>) {
    let n = inst.jobs.len();
    let m = inst.capacity;
    let candidate: Vec<bool> = inst
        .jobs
        .iter()
        .map(|j| j.gain > 0.0 && (j.size as f64) <= m)
        .collect();
    let mut times: Vec<f64> = inst.jobs.iter().map(|j| j.arrival).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let range = |a: f64, e: f64| {
        let lo = times.partition_point(|&t| t < a);
        let hi = times.partition_point(|&t| t <= e);
        (lo, hi)
    };
    let mut diff = vec![0.0; times.len() + 1];
    for (j, _) in inst.jobs.iter().zip(&candidate).filter(|(_, &c)| c) {
        let (lo, hi) = range(j.arrival, j.end);
        diff[lo] += j.size as f64;
        diff[hi] -= j.size as f64;
    }
    let mut load = 0.0;
    let mut binding_prefix = vec![0usize; times.len() + 1];
    let mut point_load = vec![0.0; times.len()];
    for p in 0..times.len() {
        load += diff[p];
        point_load[p] = load;
        binding_prefix[p + 1] = binding_prefix[p] + usize::from(load > m);
    }
    // Binding points, indexed 0..B in time order.
    let binding: Vec<usize> = (0..times.len()).filter(|&p| point_load[p] > m).collect();

    let mut fixed = vec![false; n];
    let mut contested: Vec<Item> = Vec::new();
    for (i, j) in inst.jobs.iter().enumerate() {
        if !candidate[i] {
            continue;
        }
        let (lo, hi) = range(j.arrival, j.end);
        let (blo, bhi) = (binding_prefix[lo], binding_prefix[hi]);
        if blo == bhi {
            fixed[i] = true;
            continue;
        }
        let anchor = (blo..bhi)
            .max_by(|&a, &b| point_load[binding[a]].total_cmp(&point_load[binding[b]]).then(b.cmp(&a)))
            .expect("non-empty range");
        contested.push(Item {
            job: i,
            lo: blo,
            hi: bhi - 1,
            size: j.size as f64,
            gain: j.gain,
            anchor,
        });
    }
    contested.sort_by_key(|it| (it.lo, it.hi, it.job));
    let mut comps: Vec<Component> = Vec::new();
    let mut cur: Vec<Item> = Vec::new();
    let mut reach = 0usize;
    for it in contested {
        if !cur.is_empty() && it.lo > reach {
            comps.push(finish_component(std::mem::take(&mut cur)));
        }
        reach = if cur.is_empty() { it.hi } else { reach.max(it.hi) };
        cur.push(it);
    }
    if !cur.is_empty() {
        comps.push(finish_component(cur));
    }
    (fixed, comps)
}

fn finish_component(mut items: Vec<Item>) -> Component {
    let base = items.iter().map(|i| i.lo).min().expect("non-empty");
    let top = items.iter().map(|i| i.hi).max().expect("non-empty");
    for it in &mut items {
        it.lo -= base;
        it.hi -= base;
        it.anchor -= base;
    }
    items.sort_by(|a, b| {
        (b.gain / b.size)
            .total_cmp(&(a.gain / a.size))
            .then(a.job.cmp(&b.job))
    });
    Component {
        items,
        n_points: top - base + 1,
    }
}

pub fn solve(inst: &OracleInstance, limits: &OracleLimits) -> OracleSolution {
    solve_with_incumbent(inst, limits, None)
}

/// Like [`solve`], seeding the search with a known feasible selection.
pub fn solve_with_incumbent(
    inst: &OracleInstance,
    limits: &OracleLimits,
    incumbent: Option<&[bool]>,
) -> OracleSolution {
    let deadline = limits.time_budget.map(|d| Instant::now() + d);
    let (mut x, comps) = decompose(inst);
    let fixed_value: f64 = inst.jobs.iter().zip(&x).filter(|(_, &on)| on).map(|(j, _)| j.gain).sum();
    let mut upper = fixed_value;
    let mut lower = fixed_value;
    let mut nodes = 0u64;
    let mut complete = true;
    let mut remaining = limits.node_budget;
    let total_items: usize = comps.iter().map(|c| c.items.len()).sum();
    let mut items_left = total_items;
    for comp in &comps {
        // Budget shares follow component size; leftovers roll forward.
        let share = if items_left == 0 {
            remaining
        } else {
            ((remaining as u128 * comp.items.len() as u128) / items_left as u128) as u64
        }
        .max(1);
        let warm = incumbent.map(|inc| comp.items.iter().map(|it| inc.get(it.job).copied().unwrap_or(false)).collect());
        let r = solve_component(comp, inst.capacity, share, deadline, warm);
        remaining = remaining.saturating_sub(r.nodes);
        items_left -= comp.items.len();
        nodes += r.nodes;
        complete &= r.complete;
        upper += r.bound;
        lower += r.value;
        for (it, &on) in comp.items.iter().zip(&r.x) {
            x[it.job] = on;
        }
    }
    let value = objective_value(inst, &x);
    let upper = upper.max(value);
    OracleSolution {
        status: if complete {
            SolveStatus::Optimal
        } else {
            SolveStatus::Bounded {
                gap: (upper - lower).max(0.0),
            }
        },
        x,
        objective_value: value,
        upper_bound: upper,
        nodes_explored: nodes,
    }
}

/// Instance CSV: one row per job.
pub fn write_instance_csv<W: Write>(inst: &OracleInstance, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["job_id", "arrival", "end", "size", "gain"])?;
    for j in &inst.jobs {
        w.write_record([
            j.id.clone(),
            j.arrival.to_string(),
            j.end.to_string(),
            j.size.to_string(),
            j.gain.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_instance_csv<R: std::io::Read>(
    input: R,
    capacity: f64,
    objective: Objective,
) -> Result<OracleInstance, csv::Error> {
    #[derive(Deserialize)]
    struct Row {
        job_id: String,
        arrival: f64,
        end: f64,
        size: u64,
        gain: f64,
    }
    let mut r = csv::Reader::from_reader(input);
    let jobs = r
        .deserialize::<Row>()
        .map(|row| {
            row.map(|row| OracleJob {
                id: row.job_id,
                arrival: row.arrival,
                end: row.end,
                size: row.size,
                gain: row.gain,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OracleInstance {
        jobs,
        capacity,
        objective,
    })
}

/// Solution CSV: one row per job with its placement.
pub fn write_solution_csv<W: Write>(
    inst: &OracleInstance,
    sol: &OracleSolution,
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["job_id", "ssd", "gain"])?;
    for (j, &on) in inst.jobs.iter().zip(&sol.x) {
        w.write_record([j.id.clone(), u8::from(on).to_string(), j.gain.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `job_id,ssd` placements written by `write_solution_csv`.
pub fn read_solution_csv<R: std::io::Read>(input: R) -> Result<HashMap<String, bool>, csv::Error> {
    #[derive(Deserialize)]
    struct Row {
        job_id: String,
        ssd: u8,
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<Row>()
        .map(|row| row.map(|row| (row.job_id, row.ssd != 0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ij(id: &str, a: f64, e: f64, size: u64, gain: f64) -> OracleJob {
        OracleJob {
            id: id.into(),
            arrival: a,
            end: e,
            size,
            gain,
        }
    }

    fn inst(jobs: Vec<OracleJob>, cap: f64) -> OracleInstance {
        OracleInstance {
            jobs,
            capacity: cap,
            objective: Objective::Tco,
        }
    }

    #[test]
    fn all_negative_gains_select_nothing() {
        let i = inst(vec![ij("a", 0.0, 1.0, 1, -1.0), ij("b", 0.0, 1.0, 1, -2.0)], 10.0);
        let s = solve(&i, &OracleLimits::default());
        assert_eq!(s.x, vec![false, false]);
        assert_eq!(s.objective_value, 0.0);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(verify(&i, &s));
    }

    #[test]
    fn disjoint_jobs_all_selected() {
        let i = inst(
            vec![ij("a", 0.0, 1.0, 10, 1.0), ij("b", 2.0, 3.0, 10, 2.0), ij("c", 4.0, 5.0, 10, 3.0)],
            10.0,
        );
        let s = solve(&i, &OracleLimits::default());
        assert_eq!(s.x, vec![true, true, true]);
        assert_eq!(s.objective_value, 6.0);
    }

    #[test]
    fn overlap_picks_larger_gain() {
        let i = inst(vec![ij("a", 0.0, 10.0, 6, 3.0), ij("b", 5.0, 15.0, 6, 5.0)], 10.0);
        let s = solve(&i, &OracleLimits::default());
        assert_eq!(s.x, vec![false, true]);
        assert!(verify(&i, &s));
    }

    #[test]
    fn touching_endpoints_conflict() {
        // Closed intervals: b arrives exactly when a ends.
        let i = inst(vec![ij("a", 0.0, 10.0, 6, 3.0), ij("b", 10.0, 15.0, 6, 5.0)], 10.0);
        assert!(!is_feasible(&i, &[true, true]));
        assert_eq!(solve(&i, &OracleLimits::default()).objective_value, 5.0);
    }

    #[test]
    fn verify_rejects_overloaded_and_misreported() {
        let i = inst(vec![ij("a", 0.0, 10.0, 6, 3.0), ij("b", 5.0, 15.0, 6, 5.0)], 10.0);
        let mut s = solve(&i, &OracleLimits::default());
        s.x = vec![true, true];
        s.objective_value = 8.0;
        assert!(!verify(&i, &s));
        let hdd = OracleSolution {
            x: vec![false, false],
            objective_value: 0.0,
            upper_bound: 0.0,
            status: SolveStatus::Optimal,
            nodes_explored: 0,
        };
        assert!(verify(&i, &hdd));
    }

    #[test]
    fn zero_capacity_is_all_hdd() {
        let i = inst(vec![ij("a", 0.0, 10.0, 6, 3.0)], 0.0);
        let s = solve(&i, &OracleLimits::default());
        assert_eq!(s.x, vec![false]);
    }

    #[test]
    fn segtree_range_ops() {
        let mut t = SegTree::new(&[0.0; 8]);
        t.add(2, 5, 3.0);
        t.add(4, 7, 1.0);
        assert_eq!(t.query(0, 1), 0.0);
        assert_eq!(t.query(0, 7), 4.0);
        assert_eq!(t.query(6, 7), 1.0);
        t.add(4, 5, -4.0);
        assert_eq!(t.query(0, 7), 3.0);
    }

    #[test]
    fn budget_exhaustion_reports_gap() {
        let jobs: Vec<OracleJob> = (0..30)
            .map(|i| ij(&i.to_string(), (i % 5) as f64, 100.0, 3 + (i * 7 % 11) as u64, 1.0 + (i * 13 % 17) as f64))
            .collect();
        let i = inst(jobs, 25.0);
        let s = solve(
            &i,
            &OracleLimits {
                node_budget: 5,
                time_budget: None,
            },
        );
        assert!(verify(&i, &s));
        match s.status {
            SolveStatus::Bounded { gap } => assert!(gap >= 0.0 && s.upper_bound >= s.objective_value),
            SolveStatus::Optimal => panic!("5 nodes cannot close this instance"),
        }
    }
}

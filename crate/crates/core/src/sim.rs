//! Event-driven SSD/HDD placement simulator.
//!
//! Events at the same instant run in the order: footprint growth, arrivals,
//! then evictions and ends. Lifetimes are closed intervals, so a job ending
//! at `t` still holds its bytes when another job arrives at `t`.
//!
//! Spilled bytes never move back to SSD when capacity frees up.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cost::{CostError, CostRates, Device, JobCosts};
use crate::labeling::FeatureVector;
use crate::policy::{ActPoint, PlacementPolicy, PolicyError};
use crate::trace::{Job, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FootprintModel {
    /// Full peak footprint from arrival to end.
    #[default]
    Constant,
    /// Footprint grows linearly to the peak over the write phase.
    LinearGrowth,
}

impl std::fmt::Display for FootprintModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FootprintModel::Constant => "constant",
            FootprintModel::LinearGrowth => "linear_growth",
        })
    }
}

impl std::str::FromStr for FootprintModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(FootprintModel::Constant),
            "linear_growth" | "linear-growth" => Ok(FootprintModel::LinearGrowth),
            other => Err(format!("unknown footprint model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// SSD capacity in bytes; `f64::INFINITY` for no limit.
    pub ssd_quota: f64,
    pub footprint_model: FootprintModel,
    pub rates: CostRates,
    pub record_act_series: bool,
    /// Spacing and look-back of the sampled spillover series; 0 disables it.
    pub sample_interval: f64,
}

impl SimConfig {
    pub fn new(ssd_quota: f64, footprint_model: FootprintModel, rates: CostRates) -> Self {
        SimConfig {
            ssd_quota,
            footprint_model,
            rates,
            record_act_series: false,
            sample_interval: 3600.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("policy returned an invalid decision for job {job_id}: {detail}")]
    InvalidDecision { job_id: String, detail: String },
    #[error("invalid quota {0}")]
    InvalidQuota(f64),
    #[error("expected {expected} feature vectors, got {got}")]
    FeatureCount { expected: usize, got: usize },
    #[error("capacity accounting broke at t={t}: used {used} of {quota}")]
    Capacity { t: f64, used: f64, quota: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Placement outcome for one job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub job_id: String,
    pub device: Device,
    pub arrival_time: f64,
    pub end_time: f64,
    pub peak_bytes: u64,
    /// End of the growth phase; `None` in constant mode.
    pub growth_end: Option<f64>,
    /// Spill onset.
    pub spill_start: Option<f64>,
    /// Bytes held on SSD from the spill onset on (or at eviction).
    pub ssd_bytes_at_spill: f64,
    pub evicted_at: Option<f64>,
    /// Fraction of the job's lifetime cost charged at HDD rates.
    pub hdd_share: f64,
    pub realized_tco: f64,
    pub realized_tcio: f64,
    pub baseline_tco: f64,
    pub baseline_tcio: f64,
}

impl PlacementRecord {
    fn footprint(&self, t: f64) -> f64 {
        let s = self.peak_bytes as f64;
        match self.growth_end {
            Some(g) if g > self.arrival_time => s * ((t - self.arrival_time) / (g - self.arrival_time)).clamp(0.0, 1.0),
            _ => s,
        }
    }

    /// Bytes of the job resident on SSD at `t`.
    pub fn ssd_resident_bytes(&self, t: f64) -> f64 {
        if self.device == Device::Hdd || t < self.arrival_time || t > self.end_time {
            return 0.0;
        }
        if self.evicted_at.is_some_and(|ev| t >= ev) {
            return 0.0;
        }
        match self.spill_start {
            Some(ts) if t >= ts => self.ssd_bytes_at_spill.min(self.footprint(t)),
            _ => self.footprint(t),
        }
    }

    /// Spilled bytes over the peak size at `t`; spilling stops at eviction.
    pub fn byte_spill_fraction(&self, t: f64) -> f64 {
        let Some(ts) = self.spill_start else { return 0.0 };
        if self.device == Device::Hdd {
            return 0.0;
        }
        let t = t.min(self.end_time).min(self.evicted_at.unwrap_or(f64::INFINITY));
        if t < ts {
            return 0.0;
        }
        ((self.footprint(t) - self.ssd_bytes_at_spill).max(0.0) / self.peak_bytes as f64).clamp(0.0, 1.0)
    }

    fn spill_tcio_with_rate(&self, t: f64, tcio_rate: f64) -> f64 {
        let Some(ts) = self.spill_start else { return 0.0 };
        if self.device == Device::Hdd {
            return 0.0;
        }
        let tc = t.min(self.end_time);
        if tc <= self.arrival_time {
            return 0.0;
        }
        let stop = tc.min(self.evicted_at.unwrap_or(f64::INFINITY));
        let time_fraction = ((stop - ts) / (tc - self.arrival_time)).clamp(0.0, 1.0);
        let tcio_hdd = tcio_rate * (tc - self.arrival_time);
        self.byte_spill_fraction(t) * time_fraction * tcio_hdd
    }
}

/// TCIO of an SSD-scheduled job that landed on HDD because of spilling, up to `t`.
pub fn spillover_tcio(
    record: &PlacementRecord,
    job: &Job,
    t: f64,
    rates: &CostRates,
) -> Result<f64, CostError> {
    let total = crate::cost::tcio_total(job, Device::Hdd, rates, t)?;
    let tc = t.min(job.end_time);
    if tc <= job.arrival_time {
        return Ok(0.0);
    }
    Ok(record.spill_tcio_with_rate(t, total / (tc - job.arrival_time)))
}

/// Spilled TCIO over the HDD TCIO of SSD-scheduled jobs; 0 for an empty
/// denominator.
pub fn spillover_percentage(
    history: &[(&PlacementRecord, &Job)],
    t: f64,
    rates: &CostRates,
) -> Result<f64, CostError> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (rec, job) in history {
        if rec.device != Device::Ssd {
            continue;
        }
        num += spillover_tcio(rec, job, t, rates)?;
        den += crate::cost::tcio_total(job, Device::Hdd, rates, t)?;
    }
    Ok(ratio(num, den))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// What a policy may see at an arrival.
pub struct Observation<'a> {
    pub time: f64,
    pub free_bytes: f64,
    pub quota: f64,
    state: &'a State<'a>,
}

impl Observation<'_> {
    /// Spillover percentage over jobs with `time - window < a_i <= time`.
    pub fn spillover_percentage(&self, window: f64) -> f64 {
        self.state.window_spillover(self.time, window)
    }

    /// Number of jobs already placed.
    pub fn placed(&self) -> usize {
        self.state.placed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpillSample {
    pub time: f64,
    pub spillover: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: String,
    pub quota: f64,
    pub footprint_model: FootprintModel,
    pub records: Vec<PlacementRecord>,
    pub baseline_tco: f64,
    pub baseline_tcio: f64,
    pub realized_tco: f64,
    pub realized_tcio: f64,
    /// Percent: `100 × (1 − realized / all-HDD)`.
    pub tco_savings_percent: f64,
    pub tcio_savings_percent: f64,
    pub spillover_series: Vec<SpillSample>,
    pub act_series: Option<Vec<ActPoint>>,
    /// Highest SSD usage seen at any event.
    pub peak_ssd_bytes: f64,
}

impl SimResult {
    pub fn tco_savings(&self) -> f64 {
        self.baseline_tco - self.realized_tco
    }

    pub fn spill_count(&self) -> usize {
        self.records.iter().filter(|r| r.spill_start.is_some()).count()
    }

    /// One row per job.
    pub fn write_jobs_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "job_id",
            "device",
            "spill_start",
            "ssd_bytes_at_spill",
            "evicted_at",
            "hdd_share",
            "realized_tco",
            "realized_tcio",
            "baseline_tco",
            "baseline_tcio",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.job_id.clone(),
                r.device.to_string(),
                opt(r.spill_start),
                r.ssd_bytes_at_spill.to_string(),
                opt(r.evicted_at),
                r.hdd_share.to_string(),
                r.realized_tco.to_string(),
                r.realized_tcio.to_string(),
                r.baseline_tco.to_string(),
                r.baseline_tcio.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Single-row summary with header.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "policy",
            "quota_bytes",
            "footprint_model",
            "jobs",
            "ssd_jobs",
            "spilled_jobs",
            "tco_savings_pct",
            "tcio_savings_pct",
            "baseline_tco",
            "realized_tco",
            "baseline_tcio",
            "realized_tcio",
            "peak_ssd_bytes",
        ])?;
        let ssd = self.records.iter().filter(|r| r.device == Device::Ssd).count();
        w.write_record([
            self.policy.clone(),
            self.quota.to_string(),
            self.footprint_model.to_string(),
            self.records.len().to_string(),
            ssd.to_string(),
            self.spill_count().to_string(),
            self.tco_savings_percent.to_string(),
            self.tcio_savings_percent.to_string(),
            self.baseline_tco.to_string(),
            self.realized_tco.to_string(),
            self.baseline_tcio.to_string(),
            self.realized_tcio.to_string(),
            self.peak_ssd_bytes.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    GrowthDone = 0,
    Evict = 1,
    End = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: EventKind,
    idx: usize,
}

impl Eq for Event {}

impl Ord for Event {
    // Reversed for a min-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.cmp(&self.kind))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Residency {
    None,
    /// Growing on SSD with bytes/second `rate`.
    Growing { rate: f64 },
    Held(f64),
}

struct State<'a> {
    jobs: &'a [Job],
    tcio_rate: Vec<f64>,
    records: Vec<PlacementRecord>,
    residency: Vec<Residency>,
    growing: Vec<usize>,
    held_bytes: f64,
    quota: f64,
    now: f64,
    placed: usize,
    peak: f64,
}

impl State<'_> {
    fn growing_bytes(&self, t: f64) -> f64 {
        self.growing
            .iter()
            .map(|&i| self.records[i].footprint(t))
            .sum()
    }

    fn used(&self, t: f64) -> f64 {
        self.held_bytes + self.growing_bytes(t)
    }

    fn free(&self, t: f64) -> f64 {
        (self.quota - self.used(t)).max(0.0)
    }

    fn is_full(&self, free: f64) -> bool {
        self.quota.is_finite() && free <= 1e-9 * self.quota.max(1.0)
    }

    fn check_capacity(&mut self, t: f64) -> Result<(), SimError> {
        let used = self.used(t);
        let slack = if self.quota.is_finite() { 1e-6 * self.quota.max(1.0) } else { 0.0 };
        if used > self.quota + slack || self.held_bytes < -slack {
            return Err(SimError::Capacity {
                t,
                used,
                quota: self.quota,
            });
        }
        self.peak = self.peak.max(used);
        Ok(())
    }

    /// Moves the clock to `t`, spilling every growing job if SSD fills first.
    fn advance(&mut self, t: f64) {
        if t <= self.now {
            return;
        }
        if !self.growing.is_empty() {
            let rate: f64 = self
                .growing
                .iter()
                .map(|&i| match self.residency[i] {
                    Residency::Growing { rate } => rate,
                    _ => 0.0,
                })
                .sum();
            let free = self.quota - self.used(self.now);
            if rate > 0.0 && self.used(t) > self.quota {
                let fill = (self.now + free.max(0.0) / rate).clamp(self.now, t);
                self.spill_all_growing(fill);
            }
        }
        self.now = t;
    }

    fn spill_all_growing(&mut self, t: f64) {
        for i in std::mem::take(&mut self.growing) {
            let rec = &mut self.records[i];
            let bytes = rec.footprint(t);
            rec.spill_start = Some(t);
            rec.ssd_bytes_at_spill = bytes;
            self.residency[i] = Residency::Held(bytes);
            self.held_bytes += bytes;
        }
        // Float drift can leave the total a hair above the quota.
        self.held_bytes = self.held_bytes.min(self.quota);
    }

    fn release(&mut self, i: usize, t: f64) -> f64 {
        let bytes = match self.residency[i] {
            Residency::None => 0.0,
            Residency::Held(b) => {
                self.held_bytes -= b;
                b
            }
            Residency::Growing { .. } => {
                self.growing.retain(|&g| g != i);
                self.records[i].footprint(t)
            }
        };
        self.residency[i] = Residency::None;
        if self.growing.is_empty() && self.held_bytes.abs() < 1e-6 {
            self.held_bytes = self.held_bytes.max(0.0);
        }
        bytes
    }

    fn window_spillover(&self, t: f64, window: f64) -> f64 {
        let placed = &self.jobs[..self.placed];
        let hi = placed.partition_point(|j| j.arrival_time <= t);
        let lo = placed.partition_point(|j| j.arrival_time <= t - window);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in lo..hi {
            let rec = &self.records[i];
            if rec.device != Device::Ssd {
                continue;
            }
            let rate = self.tcio_rate[i];
            let tc = t.min(rec.end_time);
            den += rate * (tc - rec.arrival_time).max(0.0);
            num += rec.spill_tcio_with_rate(t, rate);
        }
        ratio(num, den)
    }
}

/// Replays `trace` under `policy`. `features[i]` belongs to `trace.jobs()[i]`.
pub fn run(
    trace: &Trace,
    features: &[FeatureVector],
    policy: &mut dyn PlacementPolicy,
    config: &SimConfig,
) -> Result<SimResult, SimError> {
    let jobs = trace.jobs();
    if features.len() != jobs.len() {
        return Err(SimError::FeatureCount {
            expected: jobs.len(),
            got: features.len(),
        });
    }
    if config.ssd_quota.is_nan() || config.ssd_quota < 0.0 {
        return Err(SimError::InvalidQuota(config.ssd_quota));
    }
    let costs = jobs
        .iter()
        .map(|j| JobCosts::compute(j, &config.rates))
        .collect::<Result<Vec<_>, _>>()?;
    let linear = config.footprint_model == FootprintModel::LinearGrowth;
    let records = jobs
        .iter()
        .zip(&costs)
        .map(|(j, c)| PlacementRecord {
            job_id: j.job_id.clone(),
            device: Device::Hdd,
            arrival_time: j.arrival_time,
            end_time: j.end_time,
            peak_bytes: j.peak_bytes,
            growth_end: linear.then(|| j.arrival_time + j.write_phase_fraction * j.duration()),
            spill_start: None,
            ssd_bytes_at_spill: 0.0,
            evicted_at: None,
            hdd_share: 1.0,
            realized_tco: c.tco_hdd,
            realized_tcio: c.tcio_hdd,
            baseline_tco: c.tco_hdd,
            baseline_tcio: c.tcio_hdd,
        })
        .collect();
    let mut st = State {
        jobs,
        tcio_rate: costs.iter().map(|c| c.profile.tcio_hdd_rate).collect(),
        records,
        residency: vec![Residency::None; jobs.len()],
        growing: Vec::new(),
        held_bytes: 0.0,
        quota: config.ssd_quota,
        now: f64::NEG_INFINITY,
        placed: 0,
        peak: 0.0,
    };
    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    let mut samples = Vec::new();
    let horizon = jobs.iter().map(|j| j.end_time).fold(0.0, f64::max);
    let sample_step = config.sample_interval;
    let mut next_sample = if sample_step > 0.0 && !jobs.is_empty() {
        sample_step
    } else {
        f64::INFINITY
    };
    let mut next_arrival = 0usize;

    loop {
        let ta = jobs.get(next_arrival).map_or(f64::INFINITY, |j| j.arrival_time);
        let th = heap.peek().map_or(f64::INFINITY, |e| e.time);
        if ta.is_infinite() && th.is_infinite() {
            break;
        }
        if next_sample <= ta.min(th) && next_sample <= horizon {
            st.advance(next_sample);
            samples.push(SpillSample {
                time: next_sample,
                spillover: st.window_spillover(next_sample, sample_step),
            });
            next_sample += sample_step;
            continue;
        }
        // Growth completions at `t` precede arrivals at `t`.
        let take_heap = th < ta || (th == ta && heap.peek().is_some_and(|e| e.kind == EventKind::GrowthDone));
        if take_heap {
            let ev = heap.pop().expect("peeked");
            st.advance(ev.time);
            match ev.kind {
                EventKind::GrowthDone => {
                    if matches!(st.residency[ev.idx], Residency::Growing { .. }) {
                        st.growing.retain(|&g| g != ev.idx);
                        let b = jobs[ev.idx].peak_bytes as f64;
                        st.residency[ev.idx] = Residency::Held(b);
                        st.held_bytes += b;
                    }
                }
                EventKind::Evict => {
                    if st.residency[ev.idx] != Residency::None {
                        let bytes = st.release(ev.idx, ev.time);
                        let rec = &mut st.records[ev.idx];
                        rec.evicted_at = Some(ev.time);
                        if rec.spill_start.is_none() {
                            rec.ssd_bytes_at_spill = bytes;
                        }
                    }
                }
                EventKind::End => {
                    st.release(ev.idx, ev.time);
                    policy.on_end(&jobs[ev.idx], &st.records[ev.idx]);
                }
            }
            st.check_capacity(ev.time)?;
            continue;
        }

        let i = next_arrival;
        next_arrival += 1;
        let job = &jobs[i];
        let t = job.arrival_time;
        st.advance(t);
        let decision = {
            let obs = Observation {
                time: t,
                free_bytes: st.free(t),
                quota: st.quota,
                state: &st,
            };
            policy.on_arrival(job, &features[i], &obs)?
        };
        st.placed = i + 1;
        heap.push(Event {
            time: job.end_time,
            kind: EventKind::End,
            idx: i,
        });
        st.records[i].device = decision.device;
        if decision.device == Device::Ssd {
            if let Some(ev) = decision.evict_at {
                if ev.is_nan() || ev <= t {
                    return Err(SimError::InvalidDecision {
                        job_id: job.job_id.clone(),
                        detail: format!("eviction time {ev} is not after arrival {t}"),
                    });
                }
                if ev < job.end_time {
                    heap.push(Event {
                        time: ev,
                        kind: EventKind::Evict,
                        idx: i,
                    });
                }
            }
            let free = st.free(t);
            let s = job.peak_bytes as f64;
            if linear {
                let growth_end = st.records[i].growth_end.expect("linear mode");
                if st.is_full(free) {
                    st.records[i].spill_start = Some(t);
                    st.records[i].ssd_bytes_at_spill = 0.0;
                } else if growth_end <= t {
                    // Instant write: behaves like the constant model.
                    let alloc = s.min(free);
                    st.residency[i] = Residency::Held(alloc);
                    st.held_bytes += alloc;
                    if alloc < s {
                        st.records[i].spill_start = Some(t);
                        st.records[i].ssd_bytes_at_spill = alloc;
                    }
                } else {
                    st.residency[i] = Residency::Growing {
                        rate: s / (growth_end - t),
                    };
                    st.growing.push(i);
                    heap.push(Event {
                        time: growth_end,
                        kind: EventKind::GrowthDone,
                        idx: i,
                    });
                }
            } else {
                let alloc = s.min(free);
                st.residency[i] = Residency::Held(alloc);
                st.held_bytes += alloc;
                if alloc < s {
                    st.records[i].spill_start = Some(t);
                    st.records[i].ssd_bytes_at_spill = alloc;
                }
            }
        }
        st.check_capacity(t)?;
    }

    for (rec, c) in st.records.iter_mut().zip(&costs) {
        finalize(rec, c);
    }
    let baseline_tco: f64 = st.records.iter().map(|r| r.baseline_tco).sum();
    let baseline_tcio: f64 = st.records.iter().map(|r| r.baseline_tcio).sum();
    let realized_tco: f64 = st.records.iter().map(|r| r.realized_tco).sum();
    let realized_tcio: f64 = st.records.iter().map(|r| r.realized_tcio).sum();
    let pct = |realized: f64, base: f64| {
        if base != 0.0 {
            100.0 * (1.0 - realized / base)
        } else {
            0.0
        }
    };
    Ok(SimResult {
        policy: policy.name(),
        quota: config.ssd_quota,
        footprint_model: config.footprint_model,
        tco_savings_percent: pct(realized_tco, baseline_tco),
        tcio_savings_percent: pct(realized_tcio, baseline_tcio),
        baseline_tco,
        baseline_tcio,
        realized_tco,
        realized_tcio,
        records: st.records,
        spillover_series: samples,
        act_series: config.record_act_series.then(|| policy.act_series().to_vec()),
        peak_ssd_bytes: st.peak,
    })
}

fn finalize(rec: &mut PlacementRecord, costs: &JobCosts) {
    if rec.device == Device::Hdd {
        return;
    }
    let d = rec.end_time - rec.arrival_time;
    let mut share = 0.0;
    if let Some(ts) = rec.spill_start {
        let stop = rec.end_time.min(rec.evicted_at.unwrap_or(f64::INFINITY));
        share += rec.byte_spill_fraction(stop) * (stop - ts).max(0.0) / d;
    }
    if let Some(ev) = rec.evicted_at {
        share += (rec.end_time - ev).max(0.0) / d;
    }
    let share = share.clamp(0.0, 1.0);
    rec.hdd_share = share;
    rec.realized_tco = share * costs.tco_hdd + (1.0 - share) * costs.tco_ssd;
    rec.realized_tcio = share * costs.tcio_hdd;
}

//! Online placement policies.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cost::{CostRates, Device, JobCosts};
use crate::labeling::FeatureVector;
use crate::model::{CategoryModel, LifetimeRegressor, ModelError};
use crate::sim::{Observation, PlacementRecord};
use crate::trace::Job;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub device: Device,
    /// Release the SSD copy at this time (TTL eviction).
    pub evict_at: Option<f64>,
}

impl Decision {
    pub fn ssd() -> Self {
        Decision {
            device: Device::Ssd,
            evict_at: None,
        }
    }

    pub fn hdd() -> Self {
        Decision {
            device: Device::Hdd,
            evict_at: None,
        }
    }

    fn from_bool(ssd: bool) -> Self {
        if ssd {
            Self::ssd()
        } else {
            Self::hdd()
        }
    }
}

/// One threshold decision of the adaptive policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActPoint {
    pub time: f64,
    pub act: usize,
    pub spillover: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("no precomputed placement for job {0}")]
    MissingJob(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid policy parameter: {0}")]
    InvalidParameter(String),
}

pub trait PlacementPolicy {
    fn name(&self) -> String;

    fn on_arrival(
        &mut self,
        job: &Job,
        features: &FeatureVector,
        obs: &Observation<'_>,
    ) -> Result<Decision, PolicyError>;

    fn on_end(&mut self, _job: &Job, _record: &PlacementRecord) {}

    fn act_series(&self) -> &[ActPoint] {
        &[]
    }
}

pub struct AlwaysSsd;

impl PlacementPolicy for AlwaysSsd {
    fn name(&self) -> String {
        "always-ssd".into()
    }

    fn on_arrival(&mut self, _: &Job, _: &FeatureVector, _: &Observation<'_>) -> Result<Decision, PolicyError> {
        Ok(Decision::ssd())
    }
}

pub struct AlwaysHdd;

impl PlacementPolicy for AlwaysHdd {
    fn name(&self) -> String {
        "always-hdd".into()
    }

    fn on_arrival(&mut self, _: &Job, _: &FeatureVector, _: &Observation<'_>) -> Result<Decision, PolicyError> {
        Ok(Decision::hdd())
    }
}

/// SSD whenever the whole peak footprint fits in the free space right now.
pub struct FirstFit;

impl PlacementPolicy for FirstFit {
    fn name(&self) -> String {
        "firstfit".into()
    }

    fn on_arrival(&mut self, job: &Job, _: &FeatureVector, obs: &Observation<'_>) -> Result<Decision, PolicyError> {
        Ok(Decision::from_bool(job.peak_bytes as f64 <= obs.free_bytes))
    }
}

/// Recurring identity used by the admission-set heuristic.
pub type CategoryKey = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryStats {
    pub key: CategoryKey,
    pub savings: f64,
    pub peak_space: f64,
}

/// Categories by descending savings (key order on ties), added until the
/// next one would push the cumulative space past `quota`.
pub fn admission_set_rebuild(stats: &[CategoryStats], quota: f64) -> HashSet<CategoryKey> {
    let mut order: Vec<&CategoryStats> = stats.iter().filter(|s| s.savings > 0.0).collect();
    order.sort_by(|a, b| b.savings.total_cmp(&a.savings).then_with(|| a.key.cmp(&b.key)));
    let mut used = 0.0;
    let mut set = HashSet::new();
    for s in order {
        if used + s.peak_space > quota {
            break;
        }
        used += s.peak_space;
        set.insert(s.key.clone());
    }
    set
}

#[derive(Debug, Clone)]
struct Completed {
    key: CategoryKey,
    arrival: f64,
    end: f64,
    savings: f64,
    bytes: f64,
}

/// Admission-set heuristic keyed by `(pipeline_id, step_name)`.
pub struct Heuristic {
    rates: CostRates,
    rebuild_interval: f64,
    window: f64,
    completed: VecDeque<Completed>,
    admitted: HashSet<CategoryKey>,
    next_rebuild: f64,
}

impl Heuristic {
    pub fn new(rates: CostRates, rebuild_interval: f64, window: f64) -> Result<Self, PolicyError> {
        if !(rebuild_interval > 0.0) || !(window > 0.0) {
            return Err(PolicyError::InvalidParameter(
                "rebuild interval and window must be positive".into(),
            ));
        }
        Ok(Heuristic {
            rates,
            rebuild_interval,
            window,
            completed: VecDeque::new(),
            admitted: HashSet::new(),
            next_rebuild: 0.0,
        })
    }

    /// Seeds the history with jobs completed before the replay starts, in
    /// end-time order. Jobs still running at a rebuild are ignored then.
    pub fn warm<'a>(&mut self, jobs: impl IntoIterator<Item = &'a Job>) {
        for job in jobs {
            self.record(job);
        }
    }

    fn record(&mut self, job: &Job) {
        let savings = JobCosts::compute(job, &self.rates).map_or(0.0, |c| c.savings());
        self.completed.push_back(Completed {
            key: (job.pipeline_id.clone(), job.step_name.clone()),
            arrival: job.arrival_time,
            end: job.end_time,
            savings,
            bytes: job.peak_bytes as f64,
        });
    }

    pub fn admitted(&self) -> &HashSet<CategoryKey> {
        &self.admitted
    }

    fn stats(&self, now: f64) -> Vec<CategoryStats> {
        let mut by_key: BTreeMap<&CategoryKey, Vec<&Completed>> = BTreeMap::new();
        for c in &self.completed {
            if c.end >= now - self.window && c.end <= now {
                by_key.entry(&c.key).or_default().push(c);
            }
        }
        by_key
            .into_iter()
            .map(|(key, jobs)| CategoryStats {
                key: key.clone(),
                savings: jobs.iter().map(|c| c.savings).sum(),
                peak_space: peak_concurrent(jobs.iter().map(|c| (c.arrival, c.end, c.bytes))),
            })
            .collect()
    }
}

/// Highest total size over any instant for closed intervals.
pub fn peak_concurrent(intervals: impl Iterator<Item = (f64, f64, f64)>) -> f64 {
    let mut events: Vec<(f64, u8, f64)> = Vec::new();
    for (a, e, s) in intervals {
        events.push((a, 0, s));
        events.push((e, 1, -s));
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut cur: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (_, _, d) in events {
        cur += d;
        peak = peak.max(cur);
    }
    peak
}

impl PlacementPolicy for Heuristic {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn on_arrival(&mut self, job: &Job, _: &FeatureVector, obs: &Observation<'_>) -> Result<Decision, PolicyError> {
        let t = job.arrival_time;
        if t >= self.next_rebuild {
            while self.completed.front().is_some_and(|c| c.end < t - self.window) {
                self.completed.pop_front();
            }
            self.admitted = admission_set_rebuild(&self.stats(t), obs.quota);
            self.next_rebuild = ((t / self.rebuild_interval).floor() + 1.0) * self.rebuild_interval;
        }
        let key = (job.pipeline_id.clone(), job.step_name.clone());
        Ok(Decision::from_bool(self.admitted.contains(&key)))
    }

    fn on_end(&mut self, job: &Job, _: &PlacementRecord) {
        self.record(job);
    }
}

/// Admits jobs whose predicted `μ + σ` lifetime is under the TTL and evicts
/// them once that predicted lifetime has elapsed.
pub struct LifetimeTtl {
    model: Arc<LifetimeRegressor>,
    ttl: f64,
}

impl LifetimeTtl {
    pub fn new(model: Arc<LifetimeRegressor>, ttl: f64) -> Result<Self, PolicyError> {
        if !(ttl > 0.0) {
            return Err(PolicyError::InvalidParameter(format!("ttl {ttl} must be positive")));
        }
        Ok(LifetimeTtl { model, ttl })
    }
}

impl PlacementPolicy for LifetimeTtl {
    fn name(&self) -> String {
        "lifetime".into()
    }

    fn on_arrival(&mut self, job: &Job, features: &FeatureVector, _: &Observation<'_>) -> Result<Decision, PolicyError> {
        let (mu, sigma) = self.model.predict(features)?;
        let horizon = mu + sigma;
        if horizon < self.ttl {
            Ok(Decision {
                device: Device::Ssd,
                evict_at: Some(job.arrival_time + horizon),
            })
        } else {
            Ok(Decision::hdd())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    /// Spillover tolerance `[low, high]`.
    pub spill_low: f64,
    pub spill_high: f64,
    /// Look-back window.
    pub t_w: f64,
    /// Minimum time between threshold updates.
    pub t_l: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        AdaptiveParams {
            spill_low: 0.01,
            spill_high: 0.15,
            t_w: 900.0,
            t_l: 900.0,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let ok = 0.0 <= self.spill_low
            && self.spill_low < self.spill_high
            && self.spill_high <= 1.0
            && self.t_w > 0.0
            && self.t_l > 0.0;
        if ok {
            Ok(())
        } else {
            Err(PolicyError::InvalidParameter(format!("{self:?}")))
        }
    }
}

/// Adaptive category selection: a job goes to SSD when its predicted
/// category reaches the admission threshold, and the threshold follows the
/// recent spillover percentage.
pub struct Adaptive {
    label: String,
    model: Arc<dyn CategoryModel>,
    params: AdaptiveParams,
    n: usize,
    act: usize,
    last_decision: f64,
    series: Vec<ActPoint>,
}

impl Adaptive {
    pub fn new(label: impl Into<String>, model: Arc<dyn CategoryModel>, params: AdaptiveParams) -> Result<Self, PolicyError> {
        params.validate()?;
        let n = model.n_categories();
        if n < 2 {
            return Err(PolicyError::InvalidParameter(format!("{n} categories")));
        }
        Ok(Adaptive {
            label: label.into(),
            model,
            params,
            n,
            act: 1,
            last_decision: 0.0,
            series: Vec::new(),
        })
    }

    pub fn with_initial_act(mut self, act: usize) -> Self {
        self.act = act.clamp(1, self.n - 1);
        self
    }

    pub fn act(&self) -> usize {
        self.act
    }
}

impl PlacementPolicy for Adaptive {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn on_arrival(&mut self, job: &Job, features: &FeatureVector, obs: &Observation<'_>) -> Result<Decision, PolicyError> {
        let t = job.arrival_time;
        if t >= self.last_decision + self.params.t_l {
            let h = obs.spillover_percentage(self.params.t_w);
            if h < self.params.spill_low {
                self.act = self.act.saturating_sub(1).max(1);
            } else if h > self.params.spill_high {
                self.act = (self.act + 1).min(self.n - 1);
            }
            self.last_decision = t;
            self.series.push(ActPoint {
                time: t,
                act: self.act,
                spillover: h,
            });
        }
        let category = self.model.predict(features)?;
        Ok(Decision::from_bool(category >= self.act))
    }

    fn act_series(&self) -> &[ActPoint] {
        &self.series
    }
}

/// Replays precomputed placements by job id.
pub struct OracleReplay {
    label: String,
    placements: HashMap<String, bool>,
}

impl OracleReplay {
    pub fn new(label: impl Into<String>, placements: HashMap<String, bool>) -> Self {
        OracleReplay {
            label: label.into(),
            placements,
        }
    }

    pub fn from_vectors(label: impl Into<String>, ids: &[String], x: &[bool]) -> Self {
        Self::new(label, ids.iter().cloned().zip(x.iter().copied()).collect())
    }
}

impl PlacementPolicy for OracleReplay {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn on_arrival(&mut self, job: &Job, _: &FeatureVector, _: &Observation<'_>) -> Result<Decision, PolicyError> {
        self.placements
            .get(&job.job_id)
            .map(|&x| Decision::from_bool(x))
            .ok_or_else(|| PolicyError::MissingJob(job.job_id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat(p: &str, savings: f64, space: f64) -> CategoryStats {
        CategoryStats {
            key: (p.into(), "s".into()),
            savings,
            peak_space: space,
        }
    }

    #[test]
    fn admission_set_examples() {
        assert!(admission_set_rebuild(&[stat("a", -1.0, 1.0), stat("b", -2.0, 1.0)], 100.0).is_empty());
        let set = admission_set_rebuild(&[stat("a", 1.0, 60.0), stat("b", 2.0, 60.0)], 100.0);
        assert_eq!(set.len(), 1);
        assert!(set.contains(&("b".to_string(), "s".to_string())));
        let set = admission_set_rebuild(
            &[stat("a", 1.0, 60.0), stat("b", 2.0, 60.0), stat("c", -1.0, 1.0)],
            f64::INFINITY,
        );
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn peak_concurrent_closed_intervals() {
        let v = [(0.0, 10.0, 5.0), (10.0, 20.0, 7.0), (30.0, 40.0, 1.0)];
        assert_eq!(peak_concurrent(v.into_iter()), 12.0);
        assert_eq!(peak_concurrent(std::iter::empty()), 0.0);
    }

    #[test]
    fn adaptive_params_validation() {
        assert!(AdaptiveParams::default().validate().is_ok());
        let bad = AdaptiveParams {
            spill_low: 0.2,
            spill_high: 0.1,
            ..AdaptiveParams::default()
        };
        assert!(bad.validate().is_err());
    }
}

//! Job and trace data model plus the newline-delimited JSON trace format.
//!
//! A trace file is UTF-8 text. The first line is a header object:
//!
//! ```text
//! {"tierlab_trace":1,"epoch":1700000000,"generator_seed":7}
//! ```
//!
//! Every following non-empty line is one [`Job`] serialized as a JSON object
//! whose keys mirror the struct field names (see `docs/formats.md`).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Format version written into the header line.
pub const TRACE_FORMAT_VERSION: u32 = 1;

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIoProfile {
    pub read_ops: u64,
    pub write_ops: u64,
    pub read_bytes: u64,
    pub write_bytes: u64,
    pub cache_hit_fraction: f64,
    pub mean_write_op_bytes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceFeatures {
    pub num_workers: u64,
    pub num_worker_threads: u64,
    pub num_buckets: u64,
    pub initial_num_buckets: u64,
    pub num_shards: u64,
    pub records_written: u64,
    /// 0 = Monday.
    pub weekday: u8,
    pub hour_of_day: u8,
}

/// One shuffle job, the unit of placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub job_id: String,
    pub pipeline_id: String,
    pub user_id: String,
    pub step_name: String,
    /// Seconds since the trace epoch.
    pub arrival_time: f64,
    pub end_time: f64,
    /// Peak footprint in bytes.
    pub peak_bytes: u64,
    /// Fraction of the lifetime over which the footprint is written out.
    pub write_phase_fraction: f64,
    pub raw_io: RawIoProfile,
    pub resources: ResourceFeatures,
    pub metadata_tokens: Vec<String>,
}

impl Job {
    pub fn duration(&self) -> f64 {
        self.end_time - self.arrival_time
    }

    /// Whether the job occupies storage at `t` (closed interval).
    pub fn is_active_at(&self, t: f64) -> bool {
        self.arrival_time <= t && t <= self.end_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceHeader {
    tierlab_trace: u32,
    epoch: i64,
    generator_seed: Option<u64>,
}

/// An immutable, arrival-ordered list of jobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    jobs: Vec<Job>,
    /// Unix seconds of time zero.
    epoch: i64,
    generator_seed: Option<u64>,
}

fn arrival_order(a: &Job, b: &Job) -> Ordering {
    a.arrival_time
        .total_cmp(&b.arrival_time)
        .then_with(|| a.job_id.cmp(&b.job_id))
}

impl Trace {
    /// Builds a trace, sorting jobs by arrival time then job id. No validation
    /// is done here; see [`validate_trace`].
    pub fn new(mut jobs: Vec<Job>, epoch: i64, generator_seed: Option<u64>) -> Self {
        jobs.sort_by(arrival_order);
        Trace {
            jobs,
            epoch,
            generator_seed,
        }
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn epoch(&self) -> i64 {
        self.epoch
    }

    pub fn generator_seed(&self) -> Option<u64> {
        self.generator_seed
    }

    pub fn into_jobs(self) -> Vec<Job> {
        self.jobs
    }

    /// Jobs whose arrival time satisfies `pred`, keeping epoch and seed.
    pub fn filter(&self, mut pred: impl FnMut(&Job) -> bool) -> Trace {
        Trace {
            jobs: self.jobs.iter().filter(|j| pred(j)).cloned().collect(),
            epoch: self.epoch,
            generator_seed: self.generator_seed,
        }
    }

    /// Splits at `t`: jobs arriving strictly before `t` and the rest.
    pub fn split_at(&self, t: f64) -> (Trace, Trace) {
        (
            self.filter(|j| j.arrival_time < t),
            self.filter(|j| j.arrival_time >= t),
        )
    }
}

/// Weekday (0 = Monday) and hour of day for a time offset under `epoch`, UTC.
pub fn calendar_fields(epoch: i64, t: f64) -> (u8, u8) {
    let secs = epoch + t.floor() as i64;
    let days = secs.div_euclid(SECONDS_PER_DAY);
    // 1970-01-01 was a Thursday.
    let weekday = (days + 3).rem_euclid(7) as u8;
    let hour = (secs.rem_euclid(SECONDS_PER_DAY) / 3600) as u8;
    (weekday, hour)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    NonFiniteTime,
    NegativeArrival,
    NonPositiveDuration,
    ZeroFootprint,
    WritePhaseFraction,
    CacheHitFraction,
    WriteBytesMismatch,
    CalendarRange,
    CalendarMismatch,
    DuplicateJobId,
    Unsorted,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NonFiniteTime => "non-finite time",
            Rule::NegativeArrival => "negative arrival time",
            Rule::NonPositiveDuration => "end_time must exceed arrival_time",
            Rule::ZeroFootprint => "peak_bytes must be positive",
            Rule::WritePhaseFraction => "write_phase_fraction must lie in (0, 1]",
            Rule::CacheHitFraction => "cache_hit_fraction must lie in [0, 1]",
            Rule::WriteBytesMismatch => "write_bytes != write_ops * mean_write_op_bytes",
            Rule::CalendarRange => "weekday/hour out of range",
            Rule::CalendarMismatch => "weekday/hour inconsistent with arrival_time",
            Rule::DuplicateJobId => "duplicate job_id",
            Rule::Unsorted => "jobs not sorted by (arrival_time, job_id)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub job_id: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "job {}: {} ({})", self.job_id, self.rule, self.detail)
    }
}

fn job_violations(job: &Job, epoch: i64, out: &mut Vec<Violation>) {
    let mut push = |rule: Rule, detail: String| {
        out.push(Violation {
            job_id: job.job_id.clone(),
            rule,
            detail,
        })
    };
    if !job.arrival_time.is_finite() || !job.end_time.is_finite() {
        push(
            Rule::NonFiniteTime,
            format!("a={} e={}", job.arrival_time, job.end_time),
        );
        return;
    }
    if job.arrival_time < 0.0 {
        push(Rule::NegativeArrival, format!("a={}", job.arrival_time));
    }
    if job.end_time <= job.arrival_time {
        push(
            Rule::NonPositiveDuration,
            format!("a={} e={}", job.arrival_time, job.end_time),
        );
    }
    if job.peak_bytes == 0 {
        push(Rule::ZeroFootprint, "s=0".into());
    }
    let w = job.write_phase_fraction;
    if !(w > 0.0 && w <= 1.0) {
        push(Rule::WritePhaseFraction, format!("w={w}"));
    }
    let io = &job.raw_io;
    if !(0.0..=1.0).contains(&io.cache_hit_fraction) {
        push(
            Rule::CacheHitFraction,
            format!("cache_hit_fraction={}", io.cache_hit_fraction),
        );
    }
    let implied = io.write_ops as f64 * io.mean_write_op_bytes;
    let tolerance = 1.0 + 1e-9 * io.write_bytes as f64;
    if !implied.is_finite() || (implied - io.write_bytes as f64).abs() > tolerance {
        push(
            Rule::WriteBytesMismatch,
            format!(
                "write_ops={} mean_write_op_bytes={} write_bytes={}",
                io.write_ops, io.mean_write_op_bytes, io.write_bytes
            ),
        );
    }
    let r = &job.resources;
    if r.weekday > 6 || r.hour_of_day > 23 {
        push(
            Rule::CalendarRange,
            format!("weekday={} hour={}", r.weekday, r.hour_of_day),
        );
    } else if job.arrival_time >= 0.0 {
        let (wd, hr) = calendar_fields(epoch, job.arrival_time);
        if (wd, hr) != (r.weekday, r.hour_of_day) {
            push(
                Rule::CalendarMismatch,
                format!(
                    "expected weekday={wd} hour={hr}, found weekday={} hour={}",
                    r.weekday, r.hour_of_day
                ),
            );
        }
    }
}

/// Checks every job invariant; an empty result means the trace is valid.
pub fn validate_trace(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashMap<&str, Vec<usize>> = HashMap::new();
    for (idx, job) in trace.jobs.iter().enumerate() {
        job_violations(job, trace.epoch, &mut out);
        seen.entry(job.job_id.as_str()).or_default().push(idx);
        if idx > 0 && arrival_order(&trace.jobs[idx - 1], job) == Ordering::Greater {
            out.push(Violation {
                job_id: job.job_id.clone(),
                rule: Rule::Unsorted,
                detail: format!("position {idx}"),
            });
        }
    }
    let mut dups: Vec<(&str, Vec<usize>)> =
        seen.into_iter().filter(|(_, v)| v.len() > 1).collect();
    dups.sort();
    for (id, positions) in dups {
        out.push(Violation {
            job_id: id.to_string(),
            rule: Rule::DuplicateJobId,
            detail: format!("occurrences at positions {positions:?}"),
        });
    }
    out
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing trace header line")]
    MissingHeader,
    #[error("duplicate job_id {job_id:?} on lines {first} and {second}")]
    DuplicateJobId {
        job_id: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: job {job_id:?} has end_time <= arrival_time")]
    NonPositiveDuration { line: usize, job_id: String },
    #[error("trace violates {} invariant(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop unknown keys with a warning instead of rejecting the record.
    pub lenient: bool,
}

const JOB_KEYS: &[&str] = &[
    "job_id",
    "pipeline_id",
    "user_id",
    "step_name",
    "arrival_time",
    "end_time",
    "peak_bytes",
    "write_phase_fraction",
    "raw_io",
    "resources",
    "metadata_tokens",
];
const RAW_IO_KEYS: &[&str] = &[
    "read_ops",
    "write_ops",
    "read_bytes",
    "write_bytes",
    "cache_hit_fraction",
    "mean_write_op_bytes",
];
const RESOURCE_KEYS: &[&str] = &[
    "num_workers",
    "num_worker_threads",
    "num_buckets",
    "initial_num_buckets",
    "num_shards",
    "records_written",
    "weekday",
    "hour_of_day",
];
const HEADER_KEYS: &[&str] = &["tierlab_trace", "epoch", "generator_seed"];

fn strip_unknown(value: &mut serde_json::Value, known: &[&str], line: usize, what: &str) {
    if let serde_json::Value::Object(map) = value {
        let unknown: Vec<String> = map
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .cloned()
            .collect();
        for key in unknown {
            log::warn!("line {line}: ignoring unknown {what} field {key:?}");
            map.remove(&key);
        }
    }
}

fn parse_line<T: serde::de::DeserializeOwned>(
    text: &str,
    line: usize,
    lenient: bool,
    sanitize: impl FnOnce(&mut serde_json::Value, usize),
) -> Result<T, TraceError> {
    let parse_err = |e: serde_json::Error| TraceError::Parse {
        line,
        message: e.to_string(),
    };
    if lenient {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        sanitize(&mut value, line);
        serde_json::from_value(value).map_err(parse_err)
    } else {
        serde_json::from_str(text).map_err(parse_err)
    }
}

/// Parses trace text. Lines are 1-based in error messages.
pub fn parse_trace(text: &str, opts: LoadOptions) -> Result<Trace, TraceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or(TraceError::MissingHeader)?;
    let header: TraceHeader = parse_line(htext, hline, opts.lenient, |v, l| {
        strip_unknown(v, HEADER_KEYS, l, "header")
    })?;
    if header.tierlab_trace != TRACE_FORMAT_VERSION {
        return Err(TraceError::Parse {
            line: hline,
            message: format!("unsupported trace format version {}", header.tierlab_trace),
        });
    }

    let mut jobs = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (line, text) in lines {
        let job: Job = parse_line(text, line, opts.lenient, |v, l| {
            strip_unknown(v, JOB_KEYS, l, "job");
            if let serde_json::Value::Object(map) = v {
                if let Some(raw) = map.get_mut("raw_io") {
                    strip_unknown(raw, RAW_IO_KEYS, l, "raw_io");
                }
                if let Some(res) = map.get_mut("resources") {
                    strip_unknown(res, RESOURCE_KEYS, l, "resources");
                }
            }
        })?;
        if let Some(&first) = first_line.get(&job.job_id) {
            return Err(TraceError::DuplicateJobId {
                job_id: job.job_id,
                first,
                second: line,
            });
        }
        if !(job.end_time > job.arrival_time) {
            return Err(TraceError::NonPositiveDuration {
                line,
                job_id: job.job_id,
            });
        }
        first_line.insert(job.job_id.clone(), line);
        jobs.push(job);
    }

    let trace = Trace::new(jobs, header.epoch, header.generator_seed);
    let violations = validate_trace(&trace);
    if violations.is_empty() {
        Ok(trace)
    } else {
        Err(TraceError::Invalid(violations))
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    load_trace_with(path, LoadOptions::default())
}

pub fn load_trace_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Trace, TraceError> {
    let text = fs::read_to_string(path)?;
    parse_trace(&text, opts)
}

pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> io::Result<()> {
    let header = TraceHeader {
        tierlab_trace: TRACE_FORMAT_VERSION,
        epoch: trace.epoch,
        generator_seed: trace.generator_seed,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for job in &trace.jobs {
        serde_json::to_writer(&mut out, job)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn save_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let file = fs::File::create(path)?;
    write_trace(trace, BufWriter::new(file))?;
    Ok(())
}

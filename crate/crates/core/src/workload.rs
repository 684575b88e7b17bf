//! Synthetic trace generator.
//!
//! Each archetype is an independent Poisson arrival process with diurnal
//! modulation `λ(t) = base · (1 + amplitude · sin(2πt / 86400))`, sampled by
//! thinning. Randomness comes from ChaCha8 seeded with the config seed; every
//! archetype draws from its own stream selected by the FNV-1a hash of its name,
//! so adding or removing an archetype leaves the others' jobs unchanged.
//!
//! Per-job I/O is driven by `io_density_level`, the target number of
//! disk-reaching operations per MiB of peak footprint. Pipelines and steps carry
//! persistent multipliers so that identity tokens and trailing history are
//! informative about a job's density.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::MIB;
use crate::trace::{calendar_fields, Job, RawIoProfile, ResourceFeatures, Trace};

pub const WEEK_SECONDS: f64 = 7.0 * 86_400.0;
/// Monday 2023-11-13 00:00:00 UTC.
pub const DEFAULT_EPOCH: i64 = 1_699_833_600;

fn default_op_bytes() -> f64 {
    256.0 * 1024.0
}

fn default_write_phase() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeConfig {
    pub name: String,
    /// Mean jobs per hour.
    pub arrival_rate: f64,
    pub diurnal_amplitude: f64,
    /// Log-normal parameters of peak bytes.
    pub size_mu: f64,
    pub size_sigma: f64,
    /// Log-normal parameters of lifetime seconds.
    pub lifetime_mu: f64,
    pub lifetime_sigma: f64,
    /// Target disk-reaching operations per MiB of footprint.
    pub io_density_level: f64,
    /// Share of disk-reaching operations that are writes.
    pub write_fraction: f64,
    pub cache_hit_fraction: f64,
    pub feature_noise: f64,
    pub pipeline_count: u32,
    /// Mean logical operation size in bytes.
    #[serde(default = "default_op_bytes")]
    pub op_bytes: f64,
    /// Mean write-phase fraction of the lifetime.
    #[serde(default = "default_write_phase")]
    pub write_phase_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub duration: f64,
    pub seed: u64,
    #[serde(default = "default_epoch")]
    pub epoch: i64,
    pub archetypes: Vec<ArchetypeConfig>,
}

fn default_epoch() -> i64 {
    DEFAULT_EPOCH
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("generator config: {0}")]
    Config(#[from] toml::de::Error),
}

impl ArchetypeConfig {
    fn validate(&self) -> Result<(), GenError> {
        let bad = |what: &str| Err(GenError::Invalid(format!("archetype {:?}: {what}", self.name)));
        if self.name.is_empty() {
            return bad("empty name");
        }
        if !(self.arrival_rate > 0.0) {
            return bad("arrival_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.diurnal_amplitude) {
            return bad("diurnal_amplitude must lie in [0, 1]");
        }
        if !(self.size_sigma >= 0.0 && self.lifetime_sigma >= 0.0) {
            return bad("sigmas must be non-negative");
        }
        if !(self.io_density_level > 0.0) {
            return bad("io_density_level must be positive");
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return bad("write_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.cache_hit_fraction) {
            return bad("cache_hit_fraction must lie in [0, 1]");
        }
        if !(self.feature_noise >= 0.0) {
            return bad("feature_noise must be non-negative");
        }
        if self.pipeline_count == 0 {
            return bad("pipeline_count must be at least 1");
        }
        if !(self.op_bytes >= 1.0) {
            return bad("op_bytes must be at least 1");
        }
        if !(self.write_phase_fraction > 0.0 && self.write_phase_fraction <= 1.0) {
            return bad("write_phase_fraction must lie in (0, 1]");
        }
        Ok(())
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.archetypes.is_empty() {
            return Err(GenError::Invalid("at least one archetype required".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(GenError::Invalid("duration must be positive".into()));
        }
        for (i, a) in self.archetypes.iter().enumerate() {
            a.validate()?;
            if self.archetypes[..i].iter().any(|b| b.name == a.name) {
                return Err(GenError::Invalid(format!("duplicate archetype {:?}", a.name)));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, GenError> {
        let cfg: GeneratorConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator config always serializes")
    }
}

/// 64-bit FNV-1a; also used for stable hashing elsewhere in the crate.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn archetype_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}

fn alnum_token(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).collect()
}

fn lognormal(sigma: f64) -> LogNormal<f64> {
    LogNormal::new(0.0, sigma).expect("sigma is non-negative and finite")
}

struct Step {
    name: String,
    io_mult: f64,
}

struct Pipeline {
    id: String,
    user: String,
    target: String,
    io_mult: f64,
    size_mult: f64,
    life_mult: f64,
    steps: Vec<Step>,
}

/// Archetype-wide resource shape; features scatter around these.
struct ResourceShape {
    workers: f64,
    threads: f64,
    buckets: f64,
    shards: f64,
    record_bytes: f64,
    team: String,
}

const USER_POOL: u32 = 12;
const STEP_VERBS: &[&str] = &["GroupByKey", "CoGroup", "Combine", "Reshuffle", "Join"];

fn noisy(rng: &mut ChaCha8Rng, base: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        base
    } else {
        base * lognormal(noise.min(3.0)).sample(rng)
    }
}

fn generate_archetype(
    arch: &ArchetypeConfig,
    archetype_names: &[String],
    config: &GeneratorConfig,
) -> Vec<Job> {
    let mut rng = archetype_rng(config.seed, &arch.name);
    let token = alnum_token(&arch.name);

    let shape = ResourceShape {
        workers: rng.random_range(4.0..256.0_f64).round(),
        threads: f64::from(rng.random_range(1u32..=16)),
        buckets: rng.random_range(16.0..4096.0_f64).round(),
        shards: rng.random_range(8.0..1024.0_f64).round(),
        record_bytes: 10f64.powf(rng.random_range(1.5..4.5)),
        team: format!("team{}", rng.random_range(0..6u32)),
    };

    let pipe_io = lognormal(0.6);
    let pipe_size = lognormal(0.5);
    let pipe_life = lognormal(0.4);
    let step_io = lognormal(0.35);
    let pipelines: Vec<Pipeline> = (0..arch.pipeline_count)
        .map(|_| {
            let id = format!("pl-{:08x}", rng.random::<u32>());
            let step_count = rng.random_range(1..=3);
            let steps = (0..step_count)
                .map(|j| Step {
                    name: format!(
                        "{}-{}",
                        STEP_VERBS[rng.random_range(0..STEP_VERBS.len())],
                        j * 7 + rng.random_range(0..7)
                    ),
                    io_mult: step_io.sample(&mut rng),
                })
                .collect();
            Pipeline {
                user: format!("user{}", rng.random_range(0..USER_POOL)),
                target: format!("t{:06x}", rng.random::<u32>() & 0xff_ffff),
                io_mult: pipe_io.sample(&mut rng),
                size_mult: pipe_size.sample(&mut rng),
                life_mult: pipe_life.sample(&mut rng),
                id,
                steps,
            }
        })
        .collect();

    let base_rate = arch.arrival_rate / 3600.0;
    let peak_rate = base_rate * (1.0 + arch.diurnal_amplitude);
    let gap = Exp::new(peak_rate).expect("rate is positive");
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let job_io = lognormal(0.25);
    let swap_probability = arch.feature_noise / (1.0 + arch.feature_noise);

    let mut jobs = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= config.duration {
            break;
        }
        let intensity = base_rate * (1.0 + arch.diurnal_amplitude * (2.0 * PI * t / 86_400.0).sin());
        if rng.random::<f64>() * peak_rate > intensity {
            continue;
        }
        let pipeline = &pipelines[rng.random_range(0..pipelines.len())];
        let step = &pipeline.steps[rng.random_range(0..pipeline.steps.len())];

        let size = (arch.size_mu + pipeline.size_mult.ln() + arch.size_sigma * z.sample(&mut rng))
            .exp()
            .round()
            .max(4096.0);
        let lifetime = (arch.lifetime_mu
            + pipeline.life_mult.ln()
            + arch.lifetime_sigma * z.sample(&mut rng))
        .exp()
        .max(1.0);
        let end = t + lifetime;

        let density = arch.io_density_level * pipeline.io_mult * step.io_mult * job_io.sample(&mut rng);
        let disk_ops = density * size / MIB as f64;
        let disk_write_ops = disk_ops * arch.write_fraction;
        let disk_read_ops = disk_ops - disk_write_ops;
        let cache_hit = (arch.cache_hit_fraction + 0.05 * z.sample(&mut rng)).clamp(0.0, 0.95);

        let write_bytes = (disk_write_ops * MIB as f64).round() as u64;
        let write_ops = if write_bytes == 0 {
            0
        } else {
            ((write_bytes as f64 / arch.op_bytes).round() as u64).max(1)
        };
        let mean_write_op_bytes = if write_ops == 0 {
            0.0
        } else {
            write_bytes as f64 / write_ops as f64
        };
        let read_ops = (disk_read_ops / (1.0 - cache_hit)).round() as u64;
        let read_bytes = (read_ops as f64 * arch.op_bytes).round() as u64;

        let noise = arch.feature_noise;
        let scale = (size / (arch.size_mu.exp())).sqrt();
        let workers = noisy(&mut rng, shape.workers * scale, noise).round().max(1.0);
        let buckets = noisy(&mut rng, shape.buckets, noise).round().max(1.0);
        let (weekday, hour_of_day) = calendar_fields(config.epoch, t);

        let arch_token = if swap_probability > 0.0 && rng.random::<f64>() < swap_probability {
            alnum_token(&archetype_names[rng.random_range(0..archetype_names.len())])
        } else {
            token.clone()
        };

        jobs.push(Job {
            job_id: format!("{}-{:06}", token, jobs.len()),
            pipeline_id: pipeline.id.clone(),
            user_id: pipeline.user.clone(),
            step_name: step.name.clone(),
            arrival_time: t,
            end_time: end,
            peak_bytes: size as u64,
            write_phase_fraction: (arch.write_phase_fraction * lognormal(0.2).sample(&mut rng))
                .clamp(0.05, 1.0),
            raw_io: RawIoProfile {
                read_ops,
                write_ops,
                read_bytes,
                write_bytes,
                cache_hit_fraction: cache_hit,
                mean_write_op_bytes,
            },
            resources: ResourceFeatures {
                num_workers: workers as u64,
                num_worker_threads: noisy(&mut rng, shape.threads, noise).round().max(1.0) as u64,
                num_buckets: buckets as u64,
                initial_num_buckets: noisy(&mut rng, buckets, noise * 0.5).round().max(1.0) as u64,
                num_shards: noisy(&mut rng, shape.shards * scale, noise).round().max(1.0) as u64,
                records_written: noisy(&mut rng, size / shape.record_bytes, noise * 0.5)
                    .round()
                    .max(1.0) as u64,
                weekday,
                hour_of_day,
            },
            metadata_tokens: vec![
                format!("//storage/{}/{}/build_manager:{}", shape.team, arch_token, pipeline.target),
                format!("com.example.{arch_token}.trigger.launcher.Main"),
                format!("{}-open-{}", pipeline.target, step.name.to_lowercase()),
            ],
        });
    }
    jobs
}

/// Generates a trace; identical configs yield identical traces.
pub fn generate(config: &GeneratorConfig) -> Result<Trace, GenError> {
    config.validate()?;
    let names: Vec<String> = config.archetypes.iter().map(|a| a.name.clone()).collect();
    let jobs = config
        .archetypes
        .iter()
        .flat_map(|arch| generate_archetype(arch, &names, config))
        .collect();
    Ok(Trace::new(jobs, config.epoch, Some(config.seed)))
}

/// The five-archetype reference mix used throughout the experiments.
///
/// All constants are invented. Over one week it yields roughly 5,000 jobs.
pub fn default_mix() -> GeneratorConfig {
    let gib = (1u64 << 30) as f64;
    let arch = |name: &str,
                rate: f64,
                size: f64,
                lifetime: f64,
                density: f64,
                write_fraction: f64,
                cache: f64,
                pipelines: u32,
                op_kib: f64| ArchetypeConfig {
        name: name.to_string(),
        arrival_rate: rate,
        diurnal_amplitude: 0.8,
        size_mu: size.ln(),
        size_sigma: 0.8,
        lifetime_mu: lifetime.ln(),
        lifetime_sigma: 0.6,
        io_density_level: density,
        write_fraction,
        cache_hit_fraction: cache,
        feature_noise: 0.15,
        pipeline_count: pipelines,
        op_bytes: op_kib * 1024.0,
        write_phase_fraction: 0.5,
    };
    GeneratorConfig {
        duration: WEEK_SECONDS,
        seed: 1,
        epoch: DEFAULT_EPOCH,
        archetypes: vec![
            arch("hot-short", 9.0, 2.0 * gib, 900.0, 40.0, 0.3, 0.3, 10, 64.0),
            arch("hot-long", 6.0, 12.0 * gib, 4.0 * 3600.0, 20.0, 0.4, 0.2, 8, 128.0),
            arch("cold-short", 8.0, 4.0 * gib, 1200.0, 3.0, 0.5, 0.5, 10, 512.0),
            arch("cold-long", 3.0, 12.0 * gib, 6.0 * 3600.0, 1.5, 0.5, 0.4, 8, 1024.0),
            arch("negative-heavy", 2.0, 16.0 * gib, 8.0 * 3600.0, 0.3, 0.7, 0.6, 6, 1024.0),
        ],
    }
}

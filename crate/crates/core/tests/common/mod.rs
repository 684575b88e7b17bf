#![allow(dead_code)]

use proptest::prelude::*;
use tierlab::trace::{calendar_fields, Job, RawIoProfile, ResourceFeatures, Trace};
use tierlab::workload::DEFAULT_EPOCH;

/// A job with `read_ops` reads and `write_mib` MiB written in 64 KiB ops.
pub fn job(id: &str, pipeline: &str, a: f64, e: f64, size: u64, read_ops: u64, write_mib: u64) -> Job {
    let write_ops = write_mib * 16;
    let (weekday, hour_of_day) = calendar_fields(DEFAULT_EPOCH, a);
    Job {
        job_id: id.into(),
        pipeline_id: pipeline.into(),
        user_id: "u".into(),
        step_name: "Step-1".into(),
        arrival_time: a,
        end_time: e,
        peak_bytes: size,
        write_phase_fraction: 0.5,
        raw_io: RawIoProfile {
            read_ops,
            write_ops,
            read_bytes: read_ops * 4096,
            write_bytes: write_ops * 65536,
            cache_hit_fraction: 0.25,
            mean_write_op_bytes: 65536.0,
        },
        resources: ResourceFeatures {
            num_workers: 8,
            num_worker_threads: 2,
            num_buckets: 64,
            initial_num_buckets: 64,
            num_shards: 16,
            records_written: 1000,
            weekday,
            hour_of_day,
        },
        metadata_tokens: vec![format!("//team/{pipeline}")],
    }
}

/// (arrival offset, duration, size GiB-ish units, read ops, write MiB)
pub type Spec = (f64, f64, u64, u64, u64);

pub fn job_specs(max: usize) -> impl Strategy<Value = Vec<Spec>> {
    prop::collection::vec(
        (0.0..5000.0f64, 1.0..4000.0f64, 1u64..64, 0u64..2_000_000, 0u64..20_000),
        1..max,
    )
}

pub fn trace_from(specs: &[Spec]) -> Trace {
    let jobs = specs
        .iter()
        .enumerate()
        .map(|(i, &(a, d, s, r, w))| {
            let a = a.round();
            job(&format!("j{i:03}"), &format!("p{}", i % 4), a, a + d.round().max(1.0), s << 28, r, w)
        })
        .collect();
    Trace::new(jobs, DEFAULT_EPOCH, None)
}

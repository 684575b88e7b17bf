//! TCIO and TCO accounting for a job placed on SSD or HDD.
//!
//! TCIO is measured in "standard HDDs": 1.0 is the I/O one HDD sustains per
//! second. Reads served from the DRAM cache never reach the disks and writes
//! are coalesced into fixed-size chunks before they do. A job resident on SSD
//! has zero TCIO.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Job;

pub const MIB: u64 = 1 << 20;
pub const GIB: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Hdd,
    Ssd,
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Device::Hdd => "HDD",
            Device::Ssd => "SSD",
        })
    }
}

/// Conversion rates from resource usage to dollars.
///
/// The shipped defaults are invented for synthetic experiments; they keep the
/// SSD/HDD byte-cost ratio at 5 and charge a nonzero wearout per SSD byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRates {
    /// $ per byte-second stored on HDD.
    pub byte_cost_hdd: f64,
    /// $ per byte-second stored on SSD.
    pub byte_cost_ssd: f64,
    /// $ per (byte/s) of throughput per second of duration.
    pub network_cost_rate: f64,
    /// $ per TCIO-second.
    pub server_cost_rate_hdd: f64,
    /// $ per (byte/s) of throughput.
    pub server_cost_rate_ssd: f64,
    /// $ per TCIO-second.
    pub device_cost_rate_hdd: f64,
    /// $ per byte written to SSD.
    pub wearout_cost_rate_ssd: f64,
    /// Disk operations per second that define TCIO = 1.0.
    pub hdd_iops_capacity: f64,
    pub coalesce_chunk_bytes: u64,
    pub dram_cache_enabled: bool,
}

impl Default for CostRates {
    fn default() -> Self {
        // $0.01 per GiB-month on HDD.
        let hdd_byte = 0.01 / (GIB as f64 * 30.0 * 86_400.0);
        CostRates {
            byte_cost_hdd: hdd_byte,
            byte_cost_ssd: 5.0 * hdd_byte,
            network_cost_rate: 1e-13,
            server_cost_rate_hdd: 2e-6,
            server_cost_rate_ssd: 2e-11,
            device_cost_rate_hdd: 2e-6,
            wearout_cost_rate_ssd: 2e-14,
            hdd_iops_capacity: 100.0,
            coalesce_chunk_bytes: MIB,
            dram_cache_enabled: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum CostError {
    #[error("job {0:?} has zero or negative duration")]
    ZeroDuration(String),
    #[error("job {job_id:?}: time {t} precedes arrival {arrival}")]
    BeforeArrival { job_id: String, t: f64, arrival: f64 },
    #[error("job {0:?} has zero footprint")]
    ZeroFootprint(String),
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("rates config: {0}")]
    Config(#[from] toml::de::Error),
}

impl CostRates {
    pub fn all_zero() -> Self {
        CostRates {
            byte_cost_hdd: 0.0,
            byte_cost_ssd: 0.0,
            network_cost_rate: 0.0,
            server_cost_rate_hdd: 0.0,
            server_cost_rate_ssd: 0.0,
            device_cost_rate_hdd: 0.0,
            wearout_cost_rate_ssd: 0.0,
            hdd_iops_capacity: 100.0,
            coalesce_chunk_bytes: MIB,
            dram_cache_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let rates = [
            ("byte_cost_hdd", self.byte_cost_hdd),
            ("byte_cost_ssd", self.byte_cost_ssd),
            ("network_cost_rate", self.network_cost_rate),
            ("server_cost_rate_hdd", self.server_cost_rate_hdd),
            ("server_cost_rate_ssd", self.server_cost_rate_ssd),
            ("device_cost_rate_hdd", self.device_cost_rate_hdd),
            ("wearout_cost_rate_ssd", self.wearout_cost_rate_ssd),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CostError::InvalidRates(format!("{name} = {v}")));
            }
        }
        if !(self.hdd_iops_capacity > 0.0 && self.hdd_iops_capacity.is_finite()) {
            return Err(CostError::InvalidRates(format!(
                "hdd_iops_capacity = {}",
                self.hdd_iops_capacity
            )));
        }
        if self.coalesce_chunk_bytes == 0 {
            return Err(CostError::InvalidRates("coalesce_chunk_bytes = 0".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CostError> {
        let rates: CostRates = toml::from_str(text)?;
        rates.validate()?;
        Ok(rates)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CostError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rates always serialize")
    }
}

/// Disk-level view of a job's I/O after cache and write coalescing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveIoProfile {
    pub disk_read_ops: f64,
    pub disk_write_ops: f64,
    pub tcio_hdd_rate: f64,
    /// Bytes per second moved by the job, reads plus writes.
    pub io_throughput: f64,
    pub total_written_bytes: f64,
    pub duration: f64,
}

pub fn effective_io(job: &Job, rates: &CostRates) -> Result<EffectiveIoProfile, CostError> {
    let duration = job.duration();
    if !(duration > 0.0) {
        return Err(CostError::ZeroDuration(job.job_id.clone()));
    }
    let io = &job.raw_io;
    let disk_read_ops = if rates.dram_cache_enabled {
        io.read_ops as f64 * (1.0 - io.cache_hit_fraction)
    } else {
        io.read_ops as f64
    };
    let disk_write_ops = io.write_bytes.div_ceil(rates.coalesce_chunk_bytes) as f64;
    let tcio_hdd_rate = (disk_read_ops + disk_write_ops) / (duration * rates.hdd_iops_capacity);
    Ok(EffectiveIoProfile {
        disk_read_ops,
        disk_write_ops,
        tcio_hdd_rate,
        io_throughput: (io.read_bytes as f64 + io.write_bytes as f64) / duration,
        total_written_bytes: io.write_bytes as f64,
        duration,
    })
}

/// TCIO-seconds accumulated from arrival up to `until`, capped at the job end.
pub fn tcio_total(
    job: &Job,
    device: Device,
    rates: &CostRates,
    until: f64,
) -> Result<f64, CostError> {
    if until < job.arrival_time {
        return Err(CostError::BeforeArrival {
            job_id: job.job_id.clone(),
            t: until,
            arrival: job.arrival_time,
        });
    }
    match device {
        Device::Ssd => Ok(0.0),
        Device::Hdd => {
            let profile = effective_io(job, rates)?;
            Ok(profile.tcio_hdd_rate * (until.min(job.end_time) - job.arrival_time))
        }
    }
}

/// The four additive TCO terms for one device.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TcoBreakdown {
    pub byte: f64,
    pub network: f64,
    pub server: f64,
    pub specific: f64,
}

impl TcoBreakdown {
    pub fn total(&self) -> f64 {
        self.byte + self.network + self.server + self.specific
    }
}

pub fn tco_breakdown_with(
    job: &Job,
    profile: &EffectiveIoProfile,
    device: Device,
    rates: &CostRates,
) -> TcoBreakdown {
    let size = job.peak_bytes as f64;
    let d = profile.duration;
    let network = rates.network_cost_rate * profile.io_throughput * d;
    match device {
        Device::Hdd => {
            let tcio_seconds = profile.tcio_hdd_rate * d;
            TcoBreakdown {
                byte: rates.byte_cost_hdd * size * d,
                network,
                server: rates.server_cost_rate_hdd * tcio_seconds,
                specific: rates.device_cost_rate_hdd * tcio_seconds,
            }
        }
        Device::Ssd => TcoBreakdown {
            byte: rates.byte_cost_ssd * size * d,
            network,
            // No duration factor on the SSD server term.
            server: rates.server_cost_rate_ssd * profile.io_throughput,
            specific: rates.wearout_cost_rate_ssd * profile.total_written_bytes,
        },
    }
}

pub fn tco_breakdown(
    job: &Job,
    device: Device,
    rates: &CostRates,
) -> Result<TcoBreakdown, CostError> {
    let profile = effective_io(job, rates)?;
    Ok(tco_breakdown_with(job, &profile, device, rates))
}

pub fn tco(job: &Job, device: Device, rates: &CostRates) -> Result<f64, CostError> {
    Ok(tco_breakdown(job, device, rates)?.total())
}

/// HDD cost minus SSD cost; negative when SSD placement loses money.
pub fn tco_savings(job: &Job, rates: &CostRates) -> Result<f64, CostError> {
    let profile = effective_io(job, rates)?;
    Ok(tco_breakdown_with(job, &profile, Device::Hdd, rates).total()
        - tco_breakdown_with(job, &profile, Device::Ssd, rates).total())
}

/// Per-job quantities the simulator and labeler reuse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobCosts {
    pub tco_hdd: f64,
    pub tco_ssd: f64,
    /// TCIO-seconds over the whole lifetime on HDD.
    pub tcio_hdd: f64,
    pub profile: EffectiveIoProfile,
}

impl JobCosts {
    pub fn compute(job: &Job, rates: &CostRates) -> Result<Self, CostError> {
        let profile = effective_io(job, rates)?;
        Ok(JobCosts {
            tco_hdd: tco_breakdown_with(job, &profile, Device::Hdd, rates).total(),
            tco_ssd: tco_breakdown_with(job, &profile, Device::Ssd, rates).total(),
            tcio_hdd: profile.tcio_hdd_rate * profile.duration,
            profile,
        })
    }

    pub fn savings(&self) -> f64 {
        self.tco_hdd - self.tco_ssd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::tests::job;

    fn unit_rates() -> CostRates {
        CostRates {
            byte_cost_hdd: 1.0,
            byte_cost_ssd: 1.0,
            network_cost_rate: 1.0,
            server_cost_rate_hdd: 1.0,
            server_cost_rate_ssd: 1.0,
            device_cost_rate_hdd: 1.0,
            wearout_cost_rate_ssd: 1.0,
            hdd_iops_capacity: 100.0,
            coalesce_chunk_bytes: 10,
            dram_cache_enabled: true,
        }
    }

    /// size 10, duration 100, 200 disk ops (tcio rate 0.02), 500 bytes moved
    /// (throughput 5), 50 bytes written in 10-byte chunks.
    fn unit_job() -> Job {
        let mut j = job("u", 0.0, 100.0, 10);
        j.raw_io.read_ops = 195;
        j.raw_io.read_bytes = 450;
        j.raw_io.write_ops = 5;
        j.raw_io.write_bytes = 50;
        j.raw_io.mean_write_op_bytes = 10.0;
        j
    }

    #[test]
    fn full_cache_hit_no_writes_has_zero_tcio() {
        let mut j = job("a", 0.0, 10.0, 100);
        j.raw_io.read_ops = 1000;
        j.raw_io.cache_hit_fraction = 1.0;
        let p = effective_io(&j, &CostRates::default()).unwrap();
        assert_eq!(p.tcio_hdd_rate, 0.0);
    }

    #[test]
    fn small_writes_coalesce_into_chunks() {
        let mut j = job("a", 0.0, 10.0, 100);
        j.raw_io.write_ops = 1024;
        j.raw_io.write_bytes = MIB;
        j.raw_io.mean_write_op_bytes = 1024.0;
        let p = effective_io(&j, &CostRates::default()).unwrap();
        assert_eq!(p.disk_write_ops, 1.0);
    }

    #[test]
    fn hand_computed_tcio_rate() {
        let mut j = job("a", 0.0, 100.0, 100);
        j.raw_io.read_ops = 200;
        let p = effective_io(&j, &CostRates::default()).unwrap();
        assert!((p.tcio_hdd_rate - 0.02).abs() < 1e-15);
        assert!((tcio_total(&j, Device::Hdd, &CostRates::default(), 100.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cache_disabled_counts_every_read() {
        let mut j = job("a", 0.0, 100.0, 100);
        j.raw_io.read_ops = 200;
        j.raw_io.cache_hit_fraction = 0.5;
        let mut r = CostRates::default();
        assert_eq!(effective_io(&j, &r).unwrap().disk_read_ops, 100.0);
        r.dram_cache_enabled = false;
        assert_eq!(effective_io(&j, &r).unwrap().disk_read_ops, 200.0);
    }

    #[test]
    fn zero_duration_is_an_error() {
        let j = job("a", 5.0, 5.0, 1);
        assert!(matches!(
            effective_io(&j, &CostRates::default()),
            Err(CostError::ZeroDuration(_))
        ));
    }

    #[test]
    fn tcio_total_edges() {
        let j = unit_job();
        let r = unit_rates();
        assert_eq!(tcio_total(&j, Device::Ssd, &r, 50.0).unwrap(), 0.0);
        assert_eq!(tcio_total(&j, Device::Hdd, &r, 0.0).unwrap(), 0.0);
        assert!((tcio_total(&j, Device::Hdd, &r, 1e9).unwrap() - 2.0).abs() < 1e-12);
        assert!(tcio_total(&j, Device::Hdd, &r, -1.0).is_err());
    }

    #[test]
    fn zero_rates_zero_tco() {
        let j = unit_job();
        let r = CostRates::all_zero();
        assert_eq!(tco(&j, Device::Hdd, &r).unwrap(), 0.0);
        assert_eq!(tco(&j, Device::Ssd, &r).unwrap(), 0.0);
    }

    #[test]
    fn zero_io_job_pays_bytes_only() {
        let j = job("a", 0.0, 20.0, 7);
        let r = CostRates::default();
        let expect = r.byte_cost_ssd * 7.0 * 20.0;
        assert!((tco(&j, Device::Ssd, &r).unwrap() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn unit_rate_job_matches_hand_arithmetic() {
        let j = unit_job();
        let r = unit_rates();
        let p = effective_io(&j, &r).unwrap();
        assert!((p.tcio_hdd_rate - 0.02).abs() < 1e-15);
        assert_eq!(p.io_throughput, 5.0);
        assert_eq!(tco(&j, Device::Hdd, &r).unwrap(), 1504.0);
        assert_eq!(tco(&j, Device::Ssd, &r).unwrap(), 1555.0);
        assert_eq!(tco_savings(&j, &r).unwrap(), -51.0);
    }

    #[test]
    fn symmetric_rates_leave_hdd_io_terms() {
        let j = unit_job();
        let mut r = unit_rates();
        r.wearout_cost_rate_ssd = 0.0;
        r.server_cost_rate_ssd = 0.0;
        let s = tco_savings(&j, &r).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_tcio_with_wearout_loses_money() {
        let mut j = job("a", 0.0, 10.0, 100);
        j.raw_io.read_ops = 10;
        j.raw_io.cache_hit_fraction = 1.0;
        j.raw_io.read_bytes = 100;
        let mut r = CostRates::all_zero();
        r.wearout_cost_rate_ssd = 1.0;
        j.raw_io.write_bytes = 0;
        assert_eq!(tco_savings(&j, &r).unwrap(), 0.0);
        j.raw_io.write_ops = 1;
        j.raw_io.write_bytes = 1;
        j.raw_io.mean_write_op_bytes = 1.0;
        r.coalesce_chunk_bytes = u64::MAX;
        // one coalesced chunk still hits the HDD, but with zero HDD rates it is free
        assert!(tco_savings(&j, &r).unwrap() < 0.0);
    }

    #[test]
    fn rates_toml_round_trip() {
        let r = CostRates::default();
        assert_eq!(CostRates::from_toml_str(&r.to_toml()).unwrap(), r);
        assert!(CostRates::from_toml_str("byte_cost_hdd = 1.0").is_err());
    }

    #[test]
    fn negative_rate_rejected() {
        let mut r = CostRates::default();
        r.wearout_cost_rate_ssd = -1.0;
        assert!(r.validate().is_err());
    }
}

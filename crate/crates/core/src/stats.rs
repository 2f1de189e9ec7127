//! Throughput records, percentiles and empirical CDFs.

use serde::Serialize;
use thiserror::Error;

use crate::ids::UeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("percentile of an empty sample")]
    Empty,
    #[error("percentile {0} outside [0, 100]")]
    OutOfRange(f64),
}

/// Inclusive linear-interpolation percentile (the `(n-1)·p` rank rule).
pub fn percentile(values: &[f64], p: f64) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(StatsError::OutOfRange(p));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Empirical CDF: one `(value, fraction <= value)` point per distinct value.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UeThroughputRecord {
    pub run_index: u64,
    pub ue_id: UeId,
    pub delivered_app_bits: u64,
    pub window_s: f64,
    pub throughput_kbps: f64,
}

impl UeThroughputRecord {
    pub fn new(run_index: u64, ue_id: UeId, delivered_app_bits: u64, window_s: f64) -> Self {
        UeThroughputRecord {
            run_index,
            ue_id,
            delivered_app_bits,
            window_s,
            throughput_kbps: delivered_app_bits as f64 / window_s / 1000.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_boundaries_and_interpolation() {
        let v = [40.0, 10.0, 30.0, 20.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 10.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 40.0);
        assert_eq!(percentile(&v, 50.0).unwrap(), 25.0);
        assert_eq!(percentile(&[7.0; 5], 33.0).unwrap(), 7.0);
        assert_eq!(percentile(&[], 5.0), Err(StatsError::Empty));
        assert!(percentile(&v, 101.0).is_err());
    }

    #[test]
    fn cdf_ends_at_one_and_merges_ties() {
        let c = empirical_cdf(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(c, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]);
    }

    #[test]
    fn throughput_from_bits() {
        let r = UeThroughputRecord::new(0, UeId(1), 8_000_000, 2.5);
        assert!((r.throughput_kbps - 3200.0).abs() < 1e-9);
    }
}

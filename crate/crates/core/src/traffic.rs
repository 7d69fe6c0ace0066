//! FTP-style file arrivals: Poisson arrivals of fixed-size files per UE.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{domain, stream};
use crate::spectrum::TICK_US;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficModel {
    /// Mean file arrivals per second per UE.
    pub arrival_rate_per_s: f64,
    pub file_size_bits: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Arrival {
    pub tick: u64,
    pub size_bits: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("arrival rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("file size must be finite and positive, got {0}")]
    InvalidFileSize(f64),
}

impl TrafficModel {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.arrival_rate_per_s >= 0.0 && self.arrival_rate_per_s.is_finite()) {
            return Err(TrafficError::InvalidRate(self.arrival_rate_per_s));
        }
        if !(self.file_size_bits > 0.0 && self.file_size_bits.is_finite()) {
            return Err(TrafficError::InvalidFileSize(self.file_size_bits));
        }
        Ok(())
    }
}

pub fn tick_seconds() -> f64 {
    f64::from(TICK_US) * 1e-6
}

/// Arrival trace of one UE over `horizon_ticks`.
///
/// Inter-arrival times are unit exponentials scaled by the rate, so a
/// higher rate on the same seed only compresses the trace in time.
pub fn ue_arrivals(model: &TrafficModel, ue: u32, horizon_ticks: u64, seed: u64) -> Result<Vec<Arrival>, TrafficError> {
    model.validate()?;
    let mut out = Vec::new();
    if model.arrival_rate_per_s == 0.0 {
        return Ok(out);
    }
    let mut rng = stream(&[domain::TRAFFIC, seed, u64::from(ue)]);
    let horizon_s = horizon_ticks as f64 * tick_seconds();
    let mut t = 0.0;
    loop {
        let e: f64 = Exp1.sample(&mut rng);
        t += e / model.arrival_rate_per_s;
        if t >= horizon_s {
            return Ok(out);
        }
        let tick = ((t / tick_seconds()) as u64).min(horizon_ticks.saturating_sub(1));
        out.push(Arrival { tick, size_bits: model.file_size_bits });
    }
}

/// Independent arrival traces for UEs `0..n_ues`.
pub fn generate_traffic(
    model: &TrafficModel,
    n_ues: u32,
    horizon_ticks: u64,
    seed: u64,
) -> Result<Vec<Vec<Arrival>>, TrafficError> {
    (0..n_ues).map(|ue| ue_arrivals(model, ue, horizon_ticks, seed)).collect()
}

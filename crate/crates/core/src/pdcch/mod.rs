//! PDCCH resource model: DCI sizing for single-cell and multi-cell
//! scheduling, aggregation-level selection, CCE allocation with blocking,
//! and the Monte-Carlo blocking experiment.

mod alloc;
mod experiment;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alloc::{
    allocate, allocate_with_candidates, AllocationRequest, AllocationResult, CandidateKey, CceMask, CoresetModel,
    Placement, DEFAULT_REPACK_BUDGET, MAX_CORESET_CCES,
};
pub use experiment::{
    blocking_experiment, gain_curves, write_gain_csv, ExperimentResult, GainRow, LoadSpec, SchedulingMode,
    GAIN_CSV_HEADER,
};

use crate::ids::{CellId, UeId};

/// Payload of a single-cell DCI, excluding CRC.
pub const SINGLE_CELL_DCI_BITS: u32 = 60;
/// Payload growth for every additional cell scheduled by one DCI.
pub const BITS_PER_EXTRA_CELL: u32 = 12;
/// Largest DCI payload the Polar code carries.
pub const POLAR_MAX_PAYLOAD_BITS: u32 = 140;
/// 6 REGs x 9 data REs x 2 bits (QPSK).
pub const DEFAULT_BITS_PER_CCE: u32 = 108;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdcchError {
    #[error("a DCI schedules at least one cell")]
    NoCells,
    #[error("DCI payload of {bits} bits exceeds the {POLAR_MAX_PAYLOAD_BITS}-bit Polar limit")]
    PolarCapExceeded { bits: u32 },
    #[error("no aggregation level carries {payload_bits} bits at code rate {max_code_rate}")]
    NoFeasibleAl { payload_bits: u32, max_code_rate: f64 },
    #[error("channel quality must lie in (0, 1], got {0}")]
    InvalidQuality(f64),
    #[error("invalid CORESET: {0}")]
    InvalidCoreset(String),
    #[error("scheduled-cell count {0} outside the sweepable range 2..=7")]
    InvalidRange(u32),
    #[error("invalid load: {0}")]
    InvalidLoad(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum AggregationLevel {
    L1,
    L2,
    L4,
    L8,
    L16,
}

impl AggregationLevel {
    pub const ALL: [AggregationLevel; 5] = [Self::L1, Self::L2, Self::L4, Self::L8, Self::L16];

    pub fn cces(self) -> u32 {
        match self {
            Self::L1 => 1,
            Self::L2 => 2,
            Self::L4 => 4,
            Self::L8 => 8,
            Self::L16 => 16,
        }
    }
}

impl TryFrom<u32> for AggregationLevel {
    type Error = String;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Self::ALL.into_iter().find(|l| l.cces() == v).ok_or_else(|| format!("invalid aggregation level {v}"))
    }
}

impl From<AggregationLevel> for u32 {
    fn from(l: AggregationLevel) -> u32 {
        l.cces()
    }
}

impl fmt::Display for AggregationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AL{}", self.cces())
    }
}

/// `60 + 12 x (n_cells - 1)` bits, capped by the Polar payload limit.
pub fn dci_payload_bits(n_cells: u32) -> Result<u32, PdcchError> {
    if n_cells == 0 {
        return Err(PdcchError::NoCells);
    }
    let bits = (n_cells - 1)
        .checked_mul(BITS_PER_EXTRA_CELL)
        .and_then(|b| b.checked_add(SINGLE_CELL_DCI_BITS))
        .unwrap_or(u32::MAX);
    if bits > POLAR_MAX_PAYLOAD_BITS {
        return Err(PdcchError::PolarCapExceeded { bits });
    }
    Ok(bits)
}

/// Channel quality in (0, 1] is read as the highest effective code rate
/// the UE decodes reliably.
pub fn select_aggregation_level(payload_bits: u32, channel_quality: f64) -> Result<AggregationLevel, PdcchError> {
    if !(channel_quality > 0.0 && channel_quality <= 1.0) {
        return Err(PdcchError::InvalidQuality(channel_quality));
    }
    select_aggregation_level_with(payload_bits, channel_quality, DEFAULT_BITS_PER_CCE)
}

/// Smallest level whose code rate `payload / (AL x bits_per_cce)` does not
/// exceed `max_code_rate`.
pub fn select_aggregation_level_with(
    payload_bits: u32,
    max_code_rate: f64,
    bits_per_cce: u32,
) -> Result<AggregationLevel, PdcchError> {
    if payload_bits > POLAR_MAX_PAYLOAD_BITS {
        return Err(PdcchError::PolarCapExceeded { bits: payload_bits });
    }
    AggregationLevel::ALL
        .into_iter()
        .find(|al| f64::from(payload_bits) / f64::from(al.cces() * bits_per_cce) <= max_code_rate)
        .ok_or(PdcchError::NoFeasibleAl { payload_bits, max_code_rate })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DciSpec {
    pub scheduled_cells: Vec<CellId>,
    pub payload_bits: u32,
    pub aggregation_level: AggregationLevel,
    pub owner_ue: UeId,
}

impl DciSpec {
    /// Builds a DCI for `cells`, sizing its payload from the cell count.
    pub fn new(owner_ue: UeId, cells: Vec<CellId>, aggregation_level: AggregationLevel) -> Result<Self, PdcchError> {
        let payload_bits = dci_payload_bits(cells.len() as u32)?;
        Ok(Self { scheduled_cells: cells, payload_bits, aggregation_level, owner_ue })
    }
}

//! UL transmitter switching across two to four bands with two transmit
//! chains.
//!
//! Framework F1 lets every slot pick any legal transmitter placement over
//! all configured bands. Framework F2 confines placements to a pair of
//! bands indicated by the network; the pair itself changes only through an
//! indication that takes effect after a configurable latency.

mod schedule;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schedule::{
    schedule_ul, CarrierUse, DemandTrace, ScheduleTrace, TickOutcome, UeSwitcher,
};

use crate::ids::{BandId, CarrierId};
use crate::spectrum::{Carrier, TickSymbols};

pub const TX_COUNT: usize = 2;
pub const DEFAULT_SWITCH_GAP_US: f64 = 140.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    F1DynamicAll,
    F2IndicatedPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UlMode {
    /// Only one band transmits in any slot.
    SwitchedUl,
    /// Both transmitters may be on different bands at once.
    DualUl,
}

/// Comparison arms used by framework sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameworkVariant {
    /// F2 frozen on the first two configured bands.
    Baseline,
    F1,
    F2,
}

impl FrameworkVariant {
    pub const ALL: [FrameworkVariant; 3] = [Self::Baseline, Self::F1, Self::F2];
}

impl std::str::FromStr for FrameworkVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL.into_iter().find(|v| v.to_string() == s).ok_or_else(|| format!("unknown framework `{s}`"))
    }
}

impl fmt::Display for FrameworkVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::F1 => "f1",
            Self::F2 => "f2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub bands: [BandId; 2],
    pub gap_us: f64,
}

fn default_gap() -> f64 {
    DEFAULT_SWITCH_GAP_US
}
fn default_latency() -> u32 {
    2
}
fn default_margin() -> f64 {
    0.1
}
fn default_window() -> u32 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingConfig {
    pub bands: Vec<BandId>,
    pub framework: Framework,
    pub ul_mode: UlMode,
    /// Gap for band pairs without an explicit entry.
    #[serde(default = "default_gap")]
    pub default_switch_gap_us: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub switch_gap_us: Vec<GapEntry>,
    /// Ticks between a pair indication and its effect (F2 only).
    #[serde(default = "default_latency")]
    pub indication_latency_slots: u32,
    /// Relative lookahead gain a new pair needs before F2 re-indicates.
    #[serde(default = "default_margin")]
    pub hysteresis_margin: f64,
    /// Ticks ahead considered when placing chains and, for F2, when
    /// comparing pairs.
    #[serde(default = "default_window")]
    pub lookahead_slots: u32,
    /// Pair active at start (F2 only); defaults to the first two bands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pair: Option<[BandId; 2]>,
    /// Never re-indicate (F2 only).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub frozen_pair: bool,
    /// Bands limited to one transmitter; others take two.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub max_tx_per_band: BTreeMap<BandId, u32>,
}

impl SwitchingConfig {
    pub fn new(bands: Vec<BandId>, framework: Framework, ul_mode: UlMode) -> Self {
        Self {
            bands,
            framework,
            ul_mode,
            default_switch_gap_us: DEFAULT_SWITCH_GAP_US,
            switch_gap_us: Vec::new(),
            indication_latency_slots: default_latency(),
            hysteresis_margin: default_margin(),
            lookahead_slots: default_window(),
            initial_pair: None,
            frozen_pair: false,
            max_tx_per_band: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SwitchingError> {
        let n = self.bands.len();
        if !(2..=4).contains(&n) {
            return Err(SwitchingError::BandCount(n));
        }
        let distinct: BTreeSet<&BandId> = self.bands.iter().collect();
        if distinct.len() != n {
            return Err(SwitchingError::DuplicateBand);
        }
        if !(self.default_switch_gap_us >= 0.0 && self.default_switch_gap_us.is_finite()) {
            return Err(SwitchingError::InvalidGap(self.default_switch_gap_us));
        }
        for g in &self.switch_gap_us {
            if !(g.gap_us >= 0.0 && g.gap_us.is_finite()) {
                return Err(SwitchingError::InvalidGap(g.gap_us));
            }
            for b in &g.bands {
                if !distinct.contains(b) {
                    return Err(SwitchingError::UnknownBand(b.clone()));
                }
            }
        }
        for (b, &m) in &self.max_tx_per_band {
            if !distinct.contains(b) {
                return Err(SwitchingError::UnknownBand(b.clone()));
            }
            if !(1..=TX_COUNT as u32).contains(&m) {
                return Err(SwitchingError::InvalidMaxTx(b.clone(), m));
            }
        }
        if !(self.hysteresis_margin >= 0.0 && self.hysteresis_margin.is_finite()) {
            return Err(SwitchingError::InvalidPolicy("hysteresis margin must be finite and non-negative"));
        }
        if self.lookahead_slots == 0 {
            return Err(SwitchingError::InvalidPolicy("lookahead window must be positive"));
        }
        if let Some(p) = &self.initial_pair {
            self.pair_indices(p)?;
        }
        Ok(())
    }

    pub fn band_index(&self, band: &BandId) -> Option<usize> {
        self.bands.iter().position(|b| b == band)
    }

    fn pair_indices(&self, pair: &[BandId; 2]) -> Result<[usize; 2], SwitchingError> {
        let not_configured = || SwitchingError::PairNotConfigured(pair[0].clone(), pair[1].clone());
        let a = self.band_index(&pair[0]).ok_or_else(not_configured)?;
        let b = self.band_index(&pair[1]).ok_or_else(not_configured)?;
        if a == b {
            return Err(not_configured());
        }
        Ok([a.min(b), a.max(b)])
    }

    /// Explicit entry for the unordered pair, else the default.
    pub fn gap_us(&self, a: &BandId, b: &BandId) -> f64 {
        if a == b {
            return 0.0;
        }
        self.switch_gap_us
            .iter()
            .find(|g| (&g.bands[0] == a && &g.bands[1] == b) || (&g.bands[0] == b && &g.bands[1] == a))
            .map_or(self.default_switch_gap_us, |g| g.gap_us)
    }

    /// Rewrites this configuration into one comparison arm.
    pub fn variant(&self, v: FrameworkVariant) -> Self {
        let mut c = self.clone();
        match v {
            FrameworkVariant::F1 => {
                c.framework = Framework::F1DynamicAll;
                c.frozen_pair = false;
            }
            FrameworkVariant::F2 => {
                c.framework = Framework::F2IndicatedPair;
                c.frozen_pair = false;
            }
            FrameworkVariant::Baseline => {
                c.framework = Framework::F2IndicatedPair;
                c.frozen_pair = true;
                c.initial_pair = Some([self.bands[0].clone(), self.bands[1].clone()]);
            }
        }
        c
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchingError {
    #[error("switching needs 2 to 4 bands, got {0}")]
    BandCount(usize),
    #[error("switching bands must be distinct")]
    DuplicateBand,
    #[error("switching gap {0} us is not a finite non-negative number")]
    InvalidGap(f64),
    #[error("band {0} is not a configured switching band")]
    UnknownBand(BandId),
    #[error("band {0}: max transmitters {1} outside 1..=2")]
    InvalidMaxTx(BandId, u32),
    #[error("invalid pair policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("carrier {0} is not a UL-capable carrier of a switching band")]
    CarrierOutsideBands(CarrierId),
    #[error("pair indication requires framework F2")]
    NotF2,
    #[error("pair ({0}, {1}) is not two distinct configured bands")]
    PairNotConfigured(BandId, BandId),
}

/// Transmit assignment of both chains in one tick. Entries index
/// [`SwitchingModel::carriers`]; `None` is an idle chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxState {
    pub tx: [Option<usize>; TX_COUNT],
    /// Band indices of the F2 pair in force.
    pub active_pair: Option<[usize; 2]>,
}

impl TxState {
    pub const IDLE: TxState = TxState { tx: [None; TX_COUNT], active_pair: None };

    pub fn is_idle(&self) -> bool {
        self.tx.iter().all(Option::is_none)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UlCarrier {
    pub carrier: Carrier,
    pub band: usize,
    /// Layers the carrier supports; one chain alone reaches half of it.
    pub layers: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub gap_us: f64,
    /// Band indices receiving a chain from another band.
    pub affected_bands: BTreeSet<usize>,
}

/// A pair change waiting for its effective tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingPair {
    pub pair: [usize; 2],
    pub effective_tick: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairState {
    pub active: [usize; 2],
    pub pending: Option<PendingPair>,
}

impl PairState {
    /// Applies a due indication; returns whether the pair changed.
    pub fn advance(&mut self, tick: u64) -> bool {
        match self.pending {
            Some(p) if p.effective_tick <= tick => {
                self.pending = None;
                let changed = self.active != p.pair;
                self.active = p.pair;
                changed
            }
            _ => false,
        }
    }
}

/// Switching configuration resolved against the UL carriers one UE may use.
#[derive(Clone, Debug)]
pub struct SwitchingModel {
    config: SwitchingConfig,
    carriers: Vec<UlCarrier>,
    gaps: Vec<Vec<f64>>,
    max_tx: Vec<u32>,
}

impl SwitchingModel {
    pub fn new(config: SwitchingConfig, carriers: Vec<Carrier>) -> Result<Self, SwitchingError> {
        config.validate()?;
        let max_tx: Vec<u32> =
            config.bands.iter().map(|b| config.max_tx_per_band.get(b).copied().unwrap_or(TX_COUNT as u32)).collect();
        let carriers = carriers
            .into_iter()
            .map(|c| {
                let band = config
                    .band_index(&c.band_id)
                    .filter(|_| c.direction.usable_ul())
                    .ok_or_else(|| SwitchingError::CarrierOutsideBands(c.carrier_id.clone()))?;
                Ok(UlCarrier { layers: max_tx[band].min(2), band, carrier: c })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let gaps = config.bands.iter().map(|a| config.bands.iter().map(|b| config.gap_us(a, b)).collect()).collect();
        Ok(Self { config, carriers, gaps, max_tx })
    }

    pub fn config(&self) -> &SwitchingConfig {
        &self.config
    }

    pub fn carriers(&self) -> &[UlCarrier] {
        &self.carriers
    }

    pub fn band_count(&self) -> usize {
        self.config.bands.len()
    }

    pub fn initial_pair(&self) -> PairState {
        let active = match &self.config.initial_pair {
            Some(p) => self.config.pair_indices(p).unwrap_or([0, 1]),
            None => [0, 1],
        };
        PairState { active, pending: None }
    }

    /// All unordered band pairs, lowest indices first.
    pub fn pairs(&self) -> Vec<[usize; 2]> {
        let n = self.band_count();
        (0..n).flat_map(|a| (a + 1..n).map(move |b| [a, b])).collect()
    }

    pub fn tick_symbols(&self, tick: u64) -> Vec<TickSymbols> {
        self.carriers.iter().map(|c| c.carrier.tick_symbols(tick)).collect()
    }

    /// Every transmitter placement allowed by the UL mode, the per-band
    /// transmitter limit, carrier UL availability and (F2) the active pair.
    /// `available[c]` tells whether carrier `c` has UL symbols this tick.
    pub fn legal_states(&self, available: &[bool], active_pair: Option<[usize; 2]>) -> Vec<TxState> {
        let pair = match self.config.framework {
            Framework::F1DynamicAll => None,
            Framework::F2IndicatedPair => active_pair,
        };
        let options: Vec<Option<usize>> = std::iter::once(None)
            .chain(
                (0..self.carriers.len())
                    .filter(|&c| available.get(c).copied().unwrap_or(false))
                    .filter(|&c| pair.is_none_or(|p| p.contains(&self.carriers[c].band)))
                    .map(Some),
            )
            .collect();
        let mut out = Vec::new();
        for &a in &options {
            for &b in &options {
                let state = TxState { tx: [a, b], active_pair: pair };
                if self.is_legal_shape(&state) {
                    out.push(state);
                }
            }
        }
        out
    }

    fn is_legal_shape(&self, state: &TxState) -> bool {
        let bands: Vec<usize> = state.tx.iter().flatten().map(|&c| self.carriers[c].band).collect();
        if self.config.ul_mode == UlMode::SwitchedUl && bands.windows(2).any(|w| w[0] != w[1]) {
            return false;
        }
        (0..self.band_count()).all(|b| bands.iter().filter(|&&x| x == b).count() as u32 <= self.max_tx[b])
    }

    /// Gap paid when moving from the tuned placement `from` to `to`. Only a
    /// chain that transmits in both states on different bands pays.
    pub fn transition(&self, from: &TxState, to: &TxState) -> Transition {
        let mut gap_us = 0.0f64;
        let mut affected_bands = BTreeSet::new();
        for (old, new) in from.tx.iter().zip(&to.tx) {
            if let (Some(o), Some(n)) = (old, new) {
                let (bo, bn) = (self.carriers[*o].band, self.carriers[*n].band);
                if bo != bn {
                    gap_us = gap_us.max(self.gaps[bo][bn]);
                    affected_bands.insert(bn);
                }
            }
        }
        Transition { gap_us, affected_bands }
    }

    /// Schedules `new_pair` to take over after the indication latency. The
    /// currently effective pair is a no-op and cancels nothing.
    pub fn indicate_pair(
        &self,
        state: &mut PairState,
        new_pair: &[BandId; 2],
        tick: u64,
    ) -> Result<Option<PendingPair>, SwitchingError> {
        if self.config.framework != Framework::F2IndicatedPair {
            return Err(SwitchingError::NotF2);
        }
        let pair = self.config.pair_indices(new_pair)?;
        Ok(self.indicate_indices(state, pair, tick))
    }

    fn indicate_indices(&self, state: &mut PairState, pair: [usize; 2], tick: u64) -> Option<PendingPair> {
        if pair == state.active && state.pending.is_none() {
            return None;
        }
        let p = PendingPair { pair, effective_tick: tick + u64::from(self.config.indication_latency_slots) };
        state.pending = Some(p);
        Some(p)
    }

    /// Band and carrier ids of each chain.
    pub fn describe(&self, state: &TxState) -> [Option<(BandId, CarrierId)>; TX_COUNT] {
        state.tx.map(|t| {
            t.map(|c| (self.config.bands[self.carriers[c].band].clone(), self.carriers[c].carrier.carrier_id.clone()))
        })
    }
}

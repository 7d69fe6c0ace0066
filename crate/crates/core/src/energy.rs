//! Base-station energy: a static part paid whenever the cell is awake, a
//! dynamic part proportional to resource utilisation, and two sleep depths
//! reachable only through runs of idle slots. Periodic SSB transmission
//! forces the cell awake and restarts its idle run.
//!
//! Energy is accounted per simulation tick; SSB periodicity and sleep entry
//! thresholds are expressed in ticks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectrum::{Carrier, SsbMode};
use crate::traffic::{tick_seconds, ue_arrivals, TrafficError, TrafficModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModel {
    pub p_active_static: f64,
    pub p_light_sleep: f64,
    pub p_deep_sleep: f64,
    pub p_dynamic_per_util: f64,
    pub ssb_slot_cost: f64,
    pub light_sleep_entry_slots: u32,
    pub deep_sleep_entry_slots: u32,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            p_active_static: 55.0,
            p_light_sleep: 25.0,
            p_deep_sleep: 1.0,
            p_dynamic_per_util: 100.0,
            ssb_slot_cost: 25.0,
            light_sleep_entry_slots: 10,
            deep_sleep_entry_slots: 4000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("invalid power model: {0}")]
    InvalidPowerModel(&'static str),
    #[error("invalid SSB configuration: {0}")]
    InvalidSsb(&'static str),
    #[error("invalid energy setup: {0}")]
    InvalidSetup(&'static str),
    #[error("utilisation {0} outside [0, 1]")]
    InvalidUtilization(f64),
    #[error("RU target {target} unreachable: closest achieved {achieved}")]
    RuUnreachable { target: f64, achieved: f64 },
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

impl PowerModel {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let powers = [self.p_active_static, self.p_light_sleep, self.p_deep_sleep, self.p_dynamic_per_util, self.ssb_slot_cost];
        if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(EnergyError::InvalidPowerModel("powers must be finite and non-negative"));
        }
        if !(self.p_deep_sleep <= self.p_light_sleep && self.p_light_sleep <= self.p_active_static) {
            return Err(EnergyError::InvalidPowerModel("need deep sleep <= light sleep <= active static"));
        }
        if self.light_sleep_entry_slots > self.deep_sleep_entry_slots {
            return Err(EnergyError::InvalidPowerModel("light sleep must be entered before deep sleep"));
        }
        Ok(())
    }

    /// Same model with every power multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            p_active_static: self.p_active_static * k,
            p_light_sleep: self.p_light_sleep * k,
            p_deep_sleep: self.p_deep_sleep * k,
            p_dynamic_per_util: self.p_dynamic_per_util * k,
            ssb_slot_cost: self.ssb_slot_cost * k,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsbConfig {
    pub periodicity_slots: u32,
    pub ssb_slots_per_burst: u32,
}

impl Default for SsbConfig {
    /// One SSB slot every 20 ms of 0.5 ms ticks.
    fn default() -> Self {
        Self { periodicity_slots: 40, ssb_slots_per_burst: 1 }
    }
}

impl SsbConfig {
    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.periodicity_slots == 0 || self.ssb_slots_per_burst == 0 {
            return Err(EnergyError::InvalidSsb("periodicity and burst length must be positive"));
        }
        if self.ssb_slots_per_burst > self.periodicity_slots {
            return Err(EnergyError::InvalidSsb("burst longer than its period"));
        }
        Ok(())
    }

    pub fn is_ssb_slot(&self, slot: u64) -> bool {
        slot % u64::from(self.periodicity_slots) < u64::from(self.ssb_slots_per_burst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SleepState {
    Active,
    LightSleep,
    DeepSleep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotActivity {
    pub utilization: f64,
    pub ssb: bool,
    pub sleep: SleepState,
}

pub fn slot_power(model: &PowerModel, a: SlotActivity) -> Result<f64, EnergyError> {
    if !(0.0..=1.0).contains(&a.utilization) {
        return Err(EnergyError::InvalidUtilization(a.utilization));
    }
    Ok(match a.sleep {
        SleepState::DeepSleep => model.p_deep_sleep,
        SleepState::LightSleep => model.p_light_sleep,
        SleepState::Active => {
            model.p_active_static
                + a.utilization * model.p_dynamic_per_util
                + if a.ssb { model.ssb_slot_cost } else { 0.0 }
        }
    })
}

/// Streaming sleep-state machine. The idle run starts at zero, as after a
/// busy period.
#[derive(Clone, Debug)]
pub struct SleepTracker {
    idle_run: u64,
    light: u64,
    deep: u64,
}

impl SleepTracker {
    pub fn new(model: &PowerModel) -> Self {
        Self { idle_run: 0, light: u64::from(model.light_sleep_entry_slots), deep: u64::from(model.deep_sleep_entry_slots) }
    }

    pub fn next(&mut self, busy: bool, ssb: bool) -> SleepState {
        if busy || ssb {
            self.idle_run = 0;
            return SleepState::Active;
        }
        let k = self.idle_run;
        self.idle_run += 1;
        if k >= self.deep {
            SleepState::DeepSleep
        } else if k >= self.light {
            SleepState::LightSleep
        } else {
            SleepState::Active
        }
    }
}

/// Sleep state per slot of a utilisation trace.
pub fn sleep_states(model: &PowerModel, utilization: &[f64], ssb: &SsbConfig, mode: SsbMode) -> Vec<SleepState> {
    let mut t = SleepTracker::new(model);
    utilization
        .iter()
        .enumerate()
        .map(|(slot, &u)| t.next(u > 0.0, mode == SsbMode::WithSsb && ssb.is_ssb_slot(slot as u64)))
        .collect()
}

/// Per-slot powers of a utilisation trace.
pub fn trace_powers(
    model: &PowerModel,
    utilization: &[f64],
    ssb: &SsbConfig,
    mode: SsbMode,
) -> Result<Vec<f64>, EnergyError> {
    let states = sleep_states(model, utilization, ssb, mode);
    utilization
        .iter()
        .zip(states)
        .enumerate()
        .map(|(slot, (&u, sleep))| {
            let ssb = mode == SsbMode::WithSsb && ssb.is_ssb_slot(slot as u64);
            slot_power(model, SlotActivity { utilization: u, ssb, sleep })
        })
        .collect()
}

/// Energy of a utilisation trace: sum of slot powers times slot duration.
pub fn trace_energy(
    model: &PowerModel,
    utilization: &[f64],
    ssb: &SsbConfig,
    mode: SsbMode,
    slot_s: f64,
) -> Result<f64, EnergyError> {
    Ok(trace_powers(model, utilization, ssb, mode)?.iter().sum::<f64>() * slot_s)
}

/// `1 - E_ssbless / E_withssb` for one utilisation trace.
pub fn trace_gain(model: &PowerModel, utilization: &[f64], ssb: &SsbConfig) -> Result<f64, EnergyError> {
    let with = trace_energy(model, utilization, ssb, SsbMode::WithSsb, 1.0)?;
    let less = trace_energy(model, utilization, ssb, SsbMode::SsbLess, 1.0)?;
    Ok(if with > 0.0 { 1.0 - less / with } else { 0.0 })
}

fn default_overhead() -> f64 {
    0.25
}

/// Single-SCell DL setup for the SSB-less energy comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySetup {
    /// DL carrier of the SCell under test.
    pub carrier: Carrier,
    pub power: PowerModel,
    pub ssb: SsbConfig,
    pub file_size_bits: f64,
    pub spectral_efficiency: f64,
    /// Share of an SSB slot's DL resources unavailable for data.
    #[serde(default = "default_overhead")]
    pub ssb_overhead: f64,
    pub horizon_ticks: u64,
    /// Other always-on cells counted in the network-wide figure.
    #[serde(default)]
    pub other_cells: u32,
}

impl EnergySetup {
    pub fn validate(&self) -> Result<(), EnergyError> {
        self.power.validate()?;
        self.ssb.validate()?;
        if !self.carrier.direction.usable_dl() {
            return Err(EnergyError::InvalidSetup("SCell carrier must carry DL"));
        }
        if !(self.spectral_efficiency > 0.0 && self.spectral_efficiency.is_finite()) {
            return Err(EnergyError::InvalidSetup("spectral efficiency must be positive"));
        }
        if !(0.0..1.0).contains(&self.ssb_overhead) {
            return Err(EnergyError::InvalidSetup("SSB overhead must lie in [0, 1)"));
        }
        if self.horizon_ticks == 0 {
            return Err(EnergyError::InvalidSetup("horizon must be positive"));
        }
        TrafficModel { arrival_rate_per_s: 0.0, file_size_bits: self.file_size_bits }.validate()?;
        Ok(())
    }

    /// Mean DL bits per tick the carrier offers without SSB overhead.
    fn mean_capacity_per_tick(&self) -> f64 {
        let n = 40u64;
        (0..n).map(|t| self.tick_capacity(t)).sum::<f64>() / n as f64
    }

    fn tick_capacity(&self, tick: u64) -> f64 {
        let s = self.carrier.tick_symbols(tick);
        self.carrier.bandwidth_mhz * self.spectral_efficiency * f64::from(s.dl) * s.symbol_us
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DlRun {
    pub energy: f64,
    /// DL resource share used per tick inside the horizon.
    pub utilization: Vec<f64>,
    pub mean_upt_mbps: f64,
    pub files: usize,
}

/// FIFO DL service of `arrivals` on the SCell. The queue drains past the
/// horizon so every file completes; energy covers the horizon only.
fn simulate_dl(setup: &EnergySetup, arrivals: &[crate::traffic::Arrival], mode: SsbMode) -> Result<DlRun, EnergyError> {
    let h = setup.horizon_ticks;
    let mut utilization = Vec::with_capacity(h as usize);
    let mut queue: std::collections::VecDeque<(u64, f64)> = std::collections::VecDeque::new();
    let mut next = 0;
    let mut upt_sum = 0.0;
    let mut files = 0;
    let mut tick = 0u64;
    while tick < h || !queue.is_empty() {
        while next < arrivals.len() && arrivals[next].tick == tick {
            queue.push_back((tick, arrivals[next].size_bits));
            next += 1;
        }
        let full = setup.tick_capacity(tick);
        let ssb = mode == SsbMode::WithSsb && setup.ssb.is_ssb_slot(tick);
        let cap = if ssb { full * (1.0 - setup.ssb_overhead) } else { full };
        let mut left = cap;
        while left > 0.0 {
            let Some(front) = queue.front_mut() else { break };
            let take = front.1.min(left);
            front.1 -= take;
            left -= take;
            if front.1 <= 1e-9 {
                let (arrived, _) = queue.pop_front().expect("front exists");
                let dur = (tick - arrived + 1) as f64 * tick_seconds();
                upt_sum += setup.file_size_bits / dur / 1e6;
                files += 1;
            }
        }
        if tick < h {
            utilization.push(if full > 0.0 { ((cap - left) / full).clamp(0.0, 1.0) } else { 0.0 });
        }
        tick += 1;
        if tick > h.saturating_mul(100) {
            return Err(EnergyError::InvalidSetup("queue does not drain; offered load exceeds capacity"));
        }
    }
    let energy = trace_energy(&setup.power, &utilization, &setup.ssb, mode, tick_seconds())?;
    Ok(DlRun { energy, utilization, mean_upt_mbps: if files > 0 { upt_sum / files as f64 } else { 0.0 }, files })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyPoint {
    pub ru_target: f64,
    pub ru_achieved: f64,
    pub arrival_rate_per_s: f64,
    pub energy_withssb: f64,
    pub energy_ssbless: f64,
    /// Saving over the SCell alone.
    pub gain: f64,
    /// Saving over the SCell plus the other always-on cells.
    pub network_gain: f64,
    pub mean_upt_withssb: f64,
    pub mean_upt_ssbless: f64,
    /// Relative mean-UPT change from dropping SSB.
    pub upt_delta: f64,
}

pub const RU_TOLERANCE: f64 = 0.01;

fn ru_of(run: &DlRun) -> f64 {
    run.utilization.iter().sum::<f64>() / run.utilization.len() as f64
}

/// Runs one traffic trace through the SCell with and without SSB.
pub fn compare_at_rate(setup: &EnergySetup, rate: f64, seed: u64) -> Result<(DlRun, DlRun), EnergyError> {
    setup.validate()?;
    let model = TrafficModel { arrival_rate_per_s: rate, file_size_bits: setup.file_size_bits };
    let arrivals = ue_arrivals(&model, 0, setup.horizon_ticks, seed)?;
    Ok((simulate_dl(setup, &arrivals, SsbMode::WithSsb)?, simulate_dl(setup, &arrivals, SsbMode::SsbLess)?))
}

/// Energy saving of an SSB-less SCell at resource utilisation `ru_target`.
///
/// The arrival rate is calibrated by bisection until the with-SSB run's
/// utilisation lies within [`RU_TOLERANCE`] of the target.
pub fn energy_saving_gain(setup: &EnergySetup, ru_target: f64, seed: u64) -> Result<EnergyPoint, EnergyError> {
    setup.validate()?;
    if !(ru_target > 0.0 && ru_target < 1.0) {
        return Err(EnergyError::RuUnreachable { target: ru_target, achieved: f64::NAN });
    }
    let per_s = setup.mean_capacity_per_tick() / tick_seconds();
    let guess = ru_target * per_s / setup.file_size_bits;
    let (mut lo, mut hi) = (0.0, 2.0 * guess);
    let mut best: Option<(f64, f64, DlRun, DlRun)> = None;
    for _ in 0..40 {
        let rate = 0.5 * (lo + hi);
        let (with, less) = match compare_at_rate(setup, rate, seed) {
            Ok(r) => r,
            Err(EnergyError::InvalidSetup(_)) => {
                hi = rate;
                continue;
            }
            Err(e) => return Err(e),
        };
        let ru = ru_of(&with);
        let closer = best.as_ref().is_none_or(|b| (ru - ru_target).abs() < (b.1 - ru_target).abs());
        if ru < ru_target {
            lo = rate;
        } else {
            hi = rate;
        }
        if closer {
            best = Some((rate, ru, with, less));
        }
        if (ru - ru_target).abs() < RU_TOLERANCE / 10.0 {
            break;
        }
    }
    let (rate, ru, with, less) = best.expect("at least one bisection step");
    if (ru - ru_target).abs() > RU_TOLERANCE {
        return Err(EnergyError::RuUnreachable { target: ru_target, achieved: ru });
    }
    let idle = vec![0.0; setup.horizon_ticks as usize];
    let other = f64::from(setup.other_cells)
        * trace_energy(&setup.power, &idle, &setup.ssb, SsbMode::WithSsb, tick_seconds())?;
    Ok(EnergyPoint {
        ru_target,
        ru_achieved: ru,
        arrival_rate_per_s: rate,
        energy_withssb: with.energy,
        energy_ssbless: less.energy,
        gain: 1.0 - less.energy / with.energy,
        network_gain: (with.energy - less.energy) / (with.energy + other),
        mean_upt_withssb: with.mean_upt_mbps,
        mean_upt_ssbless: less.mean_upt_mbps,
        upt_delta: if with.mean_upt_mbps > 0.0 { less.mean_upt_mbps / with.mean_upt_mbps - 1.0 } else { 0.0 },
    })
}

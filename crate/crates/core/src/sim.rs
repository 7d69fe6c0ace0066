//! Tick-driven simulation of one scenario.
//!
//! Every 0.5 ms tick runs, in order: due activation-script commands, file
//! arrivals, PDCCH allocation of UL grants, transmitter placement and
//! service in round-robin order, per-cell energy, metric accumulation.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cell_config::{ActivationDirective, CellTable, ConfigError};
use crate::energy::{slot_power, EnergyError, SleepTracker, SlotActivity};
use crate::ids::{CarrierId, CellId};
use crate::pdcch::{
    allocate_with_candidates, dci_payload_bits, select_aggregation_level, AllocationRequest, CandidateKey,
    CoresetModel, SchedulingMode, SINGLE_CELL_DCI_BITS,
};
use crate::rng::{domain, hash_str, stream};
use crate::scenario::{Scenario, ScenarioError, ScriptAction, ScriptEvent, SpectralEfficiency};
use crate::spectrum::{Carrier, SsbMode, TickSymbols};
use crate::traffic::{generate_traffic, tick_seconds, Arrival, TrafficError};
use crate::tx_switching::{FrameworkVariant, SwitchingError, SwitchingModel, UeSwitcher, TX_COUNT};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Switching(#[from] SwitchingError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("script command at tick {tick} on {cell} failed: {source}")]
    Script { tick: u64, cell: CellId, source: ConfigError },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub config_digest: String,
    pub framework: Option<FrameworkVariant>,
    pub mean_upt_mbps: f64,
    pub completed_files: u64,
    pub incomplete_files: u64,
    pub blocking_rate: f64,
    pub cce_saving: f64,
    pub energy_joules: f64,
    pub ru_per_cell: BTreeMap<CellId, f64>,
    pub arrived_bits: f64,
    pub served_bits: f64,
    pub pending_bits: f64,
}

/// One carrier share served to one UE in one tick.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServeRecord {
    pub tick: u64,
    pub ue: u32,
    pub carrier: CarrierId,
    pub bits: f64,
    pub bits_per_symbol: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunTrace {
    pub serves: Vec<ServeRecord>,
    /// Per UE: arrived, served and pending bits.
    pub ue_bits: Vec<(f64, f64, f64)>,
    /// Per carrier: UL symbols offered while its cell was active.
    pub offered_symbols: BTreeMap<CarrierId, f64>,
}

struct File {
    arrival: u64,
    size: f64,
    remaining: f64,
}

struct Ue {
    id: u32,
    switcher: UeSwitcher,
    arrivals: Vec<Arrival>,
    next: usize,
    files: VecDeque<File>,
    quality: f64,
    arrived: f64,
    served: f64,
}

impl Ue {
    fn backlog(&self) -> f64 {
        self.files.iter().fold(0.0, |acc, f| acc + f.remaining)
    }

    /// FIFO service; returns UPT samples (Mbit/s) of completed files.
    fn serve(&mut self, mut bits: f64, tick: u64, upt: &mut Vec<f64>) {
        self.served += bits;
        while bits > 0.0 {
            let Some(f) = self.files.front_mut() else { break };
            let take = f.remaining.min(bits);
            f.remaining -= take;
            bits -= take;
            if f.remaining <= f.size * 1e-12 {
                let f = self.files.pop_front().expect("front exists");
                upt.push(f.size / ((tick - f.arrival + 1) as f64 * tick_seconds()) / 1e6);
            }
        }
    }
}

struct CellEnergy {
    id: CellId,
    dl: Option<Carrier>,
    tracker: SleepTracker,
    energy: f64,
}

fn log_uniform(u: f64, lo: f64, hi: f64) -> f64 {
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// UL carriers of configured cells inside the switching bands, in cell
/// order without repeats.
fn switching_carriers(scenario: &Scenario, bands: &[crate::ids::BandId]) -> Vec<Carrier> {
    let mut out: Vec<Carrier> = Vec::new();
    for cell in &scenario.plan.configured_cells {
        let Some(ul) = &cell.ul_carrier else { continue };
        let Some(c) = scenario.carriers.iter().find(|c| &c.carrier_id == ul) else { continue };
        if bands.contains(&c.band_id) && !out.iter().any(|o| o.carrier_id == c.carrier_id) {
            out.push(c.clone());
        }
    }
    out
}

fn spectral_efficiency(scenario: &Scenario, carriers: &[Carrier], ue: u32, seed: u64) -> Vec<f64> {
    carriers
        .iter()
        .map(|c| match &scenario.ues.spectral_efficiency {
            SpectralEfficiency::LogUniform { min, max } => {
                let u: f64 =
                    stream(&[domain::SPECTRAL_EFFICIENCY, seed, u64::from(ue), hash_str(c.carrier_id.as_str())]).random();
                log_uniform(u, *min, *max)
            }
            SpectralEfficiency::Fixed { values } => values.get(&c.carrier_id).copied().unwrap_or(0.0),
        })
        .collect()
}

/// Runs `scenario` once. `variant` rewrites its switching configuration
/// into a comparison arm.
pub fn run(scenario: &Scenario, seed: u64, variant: Option<FrameworkVariant>) -> Result<MetricsReport, SimError> {
    run_traced(scenario, seed, variant).map(|(m, _)| m)
}

pub fn run_traced(
    scenario: &Scenario,
    seed: u64,
    variant: Option<FrameworkVariant>,
) -> Result<(MetricsReport, RunTrace), SimError> {
    let diagnostics = scenario.diagnostics();
    if !diagnostics.is_empty() {
        return Err(ScenarioError::Invalid(diagnostics).into());
    }
    let catalog = scenario.catalog()?;
    let mut table: CellTable = scenario.initial_table(&catalog)?;
    let sw = scenario.effective_switching(variant);
    let carriers = switching_carriers(scenario, &sw.bands);
    let model = SwitchingModel::new(sw, carriers.clone())?;
    let horizon = scenario.experiment.horizon_ticks;

    let traffic = generate_traffic(&scenario.traffic, scenario.ues.count, horizon, seed)?;
    let [qlo, qhi] = scenario.ues.pdcch_quality;
    let mut ues: Vec<Ue> = traffic
        .into_iter()
        .enumerate()
        .map(|(i, arrivals)| {
            let id = i as u32;
            let q: f64 = stream(&[domain::PDCCH_QUALITY, seed, u64::from(id)]).random();
            Ue {
                id,
                switcher: UeSwitcher::new(&model, spectral_efficiency(scenario, &carriers, id, seed)),
                arrivals,
                next: 0,
                files: VecDeque::new(),
                quality: log_uniform(q, qlo, qhi).min(1.0),
                arrived: 0.0,
                served: 0.0,
            }
        })
        .collect();

    let coreset = CoresetModel::with_total(scenario.pdcch.coreset_cces);
    let mut cells: Vec<CellEnergy> = scenario
        .plan
        .configured_cells
        .iter()
        .map(|c| CellEnergy {
            id: c.cell_id.clone(),
            dl: c.dl_carrier.as_ref().and_then(|d| catalog.carrier(d)).cloned(),
            tracker: SleepTracker::new(&scenario.power),
            energy: 0.0,
        })
        .collect();

    let mut script: Vec<(u64, usize, &ScriptEvent)> = scenario
        .script
        .iter()
        .enumerate()
        .map(|(i, e)| (e.tick + scenario.activation_delay_ticks, i, e))
        .collect();
    script.sort_by_key(|&(t, i, _)| (t, i));
    let mut script = script.into_iter().peekable();

    let mut trace = RunTrace::default();
    let mut upt = Vec::new();
    let (mut dcis, mut blocked, mut cce_demand, mut cce_sc_equivalent) = (0u64, 0u64, 0u64, 0u64);
    let mut used_symbols = vec![0.0f64; carriers.len()];
    let mut offered_symbols = vec![0.0f64; carriers.len()];
    let n_ues = ues.len();

    for tick in 0..horizon {
        // (1) activation script
        while let Some(&(due, _, ev)) = script.peek() {
            if due > tick {
                break;
            }
            script.next();
            let res = match ev.action {
                ScriptAction::Activate => table
                    .activate(&ActivationDirective {
                        cell_id: ev.cell.clone(),
                        shape: ev.shape.expect("validated: activation carries a shape"),
                    })
                    .map(|_| ()),
                ScriptAction::Deactivate => table.deactivate(&ev.cell).map(|_| ()),
                ScriptAction::SsbOff => table.set_ssb_mode(&ev.cell, SsbMode::SsbLess),
                ScriptAction::SsbOn => table.set_ssb_mode(&ev.cell, SsbMode::WithSsb),
            };
            res.map_err(|source| SimError::Script { tick, cell: ev.cell.clone(), source })?;
        }
        let active_ul: Vec<bool> = carriers
            .iter()
            .map(|c| table.active().any(|e| e.active_ul() == Some(&c.carrier_id)))
            .collect();
        let syms: Vec<TickSymbols> = model
            .tick_symbols(tick)
            .into_iter()
            .zip(&active_ul)
            .map(|(s, &a)| if a { s } else { TickSymbols { ul: 0, ..s } })
            .collect();
        for (o, s) in offered_symbols.iter_mut().zip(&syms) {
            *o += f64::from(s.ul);
        }

        // (2) arrivals
        for ue in &mut ues {
            ue.switcher.begin_tick(&model, tick);
            while ue.next < ue.arrivals.len() && ue.arrivals[ue.next].tick == tick {
                let a = ue.arrivals[ue.next];
                ue.files.push_back(File { arrival: tick, size: a.size_bits, remaining: a.size_bits });
                ue.arrived += a.size_bits;
                ue.next += 1;
            }
        }

        // (3) PDCCH grants, in round-robin order
        let order: Vec<usize> = (0..n_ues).map(|k| (k + tick as usize) % n_ues.max(1)).collect();
        let mut requests = Vec::new();
        let mut owners: Vec<usize> = Vec::new();
        let mut wanted = vec![0usize; n_ues];
        for &i in &order {
            let ue = &ues[i];
            if ue.backlog() <= 0.0 {
                continue;
            }
            let n = ue.switcher.usable_carriers(&model, &syms).min(TX_COUNT);
            if n == 0 {
                continue;
            }
            wanted[i] = n;
            let single = select_aggregation_level(SINGLE_CELL_DCI_BITS, ue.quality).ok();
            if let Some(al) = single {
                cce_sc_equivalent += n as u64 * u64::from(al.cces());
            }
            let (count, bits) = match scenario.pdcch.mode {
                SchedulingMode::SingleCell => (n, SINGLE_CELL_DCI_BITS),
                SchedulingMode::MultiCell => (1, dci_payload_bits(n as u32).expect("n <= 2")),
            };
            dcis += count as u64;
            let Ok(al) = select_aggregation_level(bits, ue.quality) else {
                blocked += count as u64;
                continue;
            };
            cce_demand += count as u64 * u64::from(al.cces());
            for k in 0..count {
                let key = CandidateKey { ue: ue.id, cell: k as u32, occasion: tick };
                requests.push(AllocationRequest { level: al, candidates: coreset.candidate_positions(al, key, seed) });
                owners.push(i);
            }
        }
        let alloc = allocate_with_candidates(&requests, coreset.total_cces, coreset.repack_budget);
        blocked += alloc.blocked.len() as u64;
        let mut granted = vec![0usize; n_ues];
        for p in &alloc.placed {
            granted[owners[p.request]] += 1;
        }
        if scenario.pdcch.mode == SchedulingMode::MultiCell {
            for i in 0..n_ues {
                if granted[i] > 0 {
                    granted[i] = wanted[i];
                }
            }
        }

        // (4)+(5) placement and service
        let mut free: Vec<f64> = syms.iter().map(|s| f64::from(s.ul)).collect();
        for &i in &order {
            if granted[i] == 0 {
                continue;
            }
            let ue = &mut ues[i];
            let out = ue.switcher.step(&model, &syms, ue.backlog(), granted[i], &mut free);
            for u in &out.carriers {
                used_symbols[u.carrier] += u.served_symbols;
                if u.served_bits > 0.0 {
                    trace.serves.push(ServeRecord {
                        tick,
                        ue: ue.id,
                        carrier: carriers[u.carrier].carrier_id.clone(),
                        bits: u.served_bits,
                        bits_per_symbol: u.bits_per_symbol,
                    });
                }
            }
            ue.serve(out.served_bits, tick, &mut upt);
        }

        // (6) energy
        for cell in &mut cells {
            let entry = table.get(&cell.id).expect("configured cell");
            let power = if !entry.is_active() {
                scenario.power.p_deep_sleep
            } else {
                let ul_use = entry
                    .active_ul()
                    .and_then(|ul| carriers.iter().position(|c| &c.carrier_id == ul))
                    .map_or(0.0, |c| {
                        let total = f64::from(syms[c].total);
                        let taken = f64::from(syms[c].ul) - free[c];
                        (taken / total).clamp(0.0, 1.0)
                    });
                let ssb = entry.cell.ssb_mode == SsbMode::WithSsb
                    && entry.active_dl().is_some()
                    && cell.dl.as_ref().is_some_and(|_| scenario.ssb.is_ssb_slot(tick));
                let sleep = cell.tracker.next(ul_use > 0.0, ssb);
                slot_power(&scenario.power, SlotActivity { utilization: ul_use, ssb, sleep })?
            };
            cell.energy += power * tick_seconds();
        }
    }

    // (7) metrics
    let mut ru_per_cell = BTreeMap::new();
    let mut attributed = vec![false; carriers.len()];
    for cell in &scenario.plan.configured_cells {
        let c = cell.ul_carrier.as_ref().and_then(|ul| carriers.iter().position(|c| &c.carrier_id == ul));
        let ru = match c {
            Some(c) if !attributed[c] && offered_symbols[c] > 0.0 => {
                attributed[c] = true;
                used_symbols[c] / offered_symbols[c]
            }
            _ => 0.0,
        };
        ru_per_cell.insert(cell.cell_id.clone(), ru);
    }
    trace.offered_symbols =
        carriers.iter().zip(&offered_symbols).map(|(c, &o)| (c.carrier_id.clone(), o)).collect();
    trace.ue_bits = ues.iter().map(|u| (u.arrived, u.served, u.backlog())).collect();

    let arrived: f64 = ues.iter().map(|u| u.arrived).sum();
    let served: f64 = ues.iter().map(|u| u.served).sum();
    let report = MetricsReport {
        scenario: scenario.name.clone(),
        seed,
        config_digest: scenario.digest(),
        framework: variant,
        mean_upt_mbps: if upt.is_empty() { 0.0 } else { upt.iter().sum::<f64>() / upt.len() as f64 },
        completed_files: upt.len() as u64,
        incomplete_files: ues.iter().map(|u| u.files.len() as u64).sum(),
        blocking_rate: if dcis == 0 { 0.0 } else { blocked as f64 / dcis as f64 },
        cce_saving: if cce_sc_equivalent == 0 { 0.0 } else { 1.0 - cce_demand as f64 / cce_sc_equivalent as f64 },
        energy_joules: cells.iter().map(|c| c.energy).sum(),
        ru_per_cell,
        arrived_bits: arrived,
        served_bits: served,
        pending_bits: ues.iter().map(Ue::backlog).sum(),
    };
    Ok((report, trace))
}

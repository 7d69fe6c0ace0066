use std::collections::{BTreeSet, HashMap};

use super::{Framework, PairState, SwitchingModel, TxState};
use crate::ids::BandId;
use crate::spectrum::{TickSymbols, SYMBOLS_PER_SLOT};

/// Longest pattern period (in ticks) for which pair lookahead is tabulated.
const MAX_CACHED_PERIOD: u64 = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct CarrierUse {
    pub carrier: usize,
    pub ul_symbols: u32,
    pub gap_symbols: u32,
    /// Symbol-equivalents of the whole carrier spent on this UE's data.
    pub served_symbols: f64,
    pub served_bits: f64,
    /// Bits one symbol of the whole carrier carries for this UE.
    pub bits_per_symbol: f64,
}

impl CarrierUse {
    /// UL symbols neither carrying this UE's data nor lost to its gap.
    pub fn idle_symbols(&self) -> f64 {
        f64::from(self.ul_symbols) - f64::from(self.gap_symbols) - self.served_symbols
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickOutcome {
    pub state: TxState,
    pub gap_us: f64,
    pub served_bits: f64,
    pub carriers: Vec<CarrierUse>,
}

#[derive(Clone, Debug)]
struct PairCache {
    period: u64,
    /// `caps[pair][tick % period]`
    caps: Vec<Vec<f64>>,
}

struct Candidate {
    state: TxState,
    served: f64,
    gap_us: f64,
    capacity: f64,
    uses: Vec<CarrierUse>,
}

/// `[from][move]`: bits carried and resulting tuned placement index.
type Moves = Vec<Vec<(f64, usize)>>;

/// Gap-aware reach over the planning window, per pattern phase.
#[derive(Clone, Debug)]
struct PlanTable {
    /// `reach[phase][k][tuned_index(state)]`
    reach: Vec<Vec<Vec<f64>>>,
}

fn tuned_states(n: usize) -> Vec<TxState> {
    let opts = || std::iter::once(None).chain((0..n).map(Some));
    opts().flat_map(|a| opts().map(move |b| TxState { tx: [a, b], active_pair: None })).collect()
}

/// `out[k][x]`: most bits a UE tuned at `x` can move in the first `k + 1`
/// ticks of `window`, by backward induction.
fn reach_table(window: &[&Moves]) -> Vec<Vec<f64>> {
    let states = window.first().map_or(0, |m| m.len());
    (0..window.len())
        .map(|k| {
            let mut value = vec![0.0; states];
            for moves in window[..=k].iter().rev() {
                value = moves
                    .iter()
                    .enumerate()
                    .map(|(x, m)| m.iter().map(|&(bits, next)| bits + value[next]).fold(value[x], f64::max))
                    .collect();
            }
            value
        })
        .collect()
}

/// Transmitter placement state of one UE across ticks.
#[derive(Clone, Debug)]
pub struct UeSwitcher {
    /// Last band each chain transmitted on; an idle chain stays tuned.
    tuned: TxState,
    pair: PairState,
    se: Vec<f64>,
    pairs: Vec<[usize; 2]>,
    cache: Option<PairCache>,
    period: Option<u64>,
    /// Keyed by the active pair (F2) or `None` (F1).
    plans: HashMap<Option<[usize; 2]>, PlanTable>,
    now: u64,
}

fn merge_tuned(from: &TxState, to: &TxState) -> TxState {
    TxState { tx: [to.tx[0].or(from.tx[0]), to.tx[1].or(from.tx[1])], active_pair: None }
}

fn tuned_index(s: &TxState, n: usize) -> usize {
    let i = |x: Option<usize>| x.map_or(0, |c| c + 1);
    i(s.tx[0]) * (n + 1) + i(s.tx[1])
}

fn distinct_carriers(s: &TxState) -> usize {
    match s.tx {
        [Some(a), Some(b)] if a != b => 2,
        [None, None] => 0,
        _ => 1,
    }
}

/// Ticks after which every carrier's UL pattern repeats, if short enough
/// to tabulate.
fn pattern_period(model: &SwitchingModel) -> Option<u64> {
    let mut period = 1u64;
    for c in model.carriers() {
        let pattern_symbols =
            c.carrier.slot_pattern.as_ref().map_or(1, |p| p.len() as u64).max(1) * u64::from(SYMBOLS_PER_SLOT);
        let spt = u64::from(c.carrier.scs_khz.symbols_per_tick());
        period = lcm(period, lcm(pattern_symbols, spt) / spt);
        if period > MAX_CACHED_PERIOD {
            return None;
        }
    }
    Some(period)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

impl UeSwitcher {
    /// `se[c]` is the spectral efficiency of carrier `c` in bits/s/Hz; a
    /// carrier with zero efficiency is never used.
    pub fn new(model: &SwitchingModel, se: Vec<f64>) -> Self {
        assert_eq!(se.len(), model.carriers().len(), "one spectral efficiency per carrier");
        let mut s = Self {
            tuned: TxState::IDLE,
            pair: model.initial_pair(),
            se,
            pairs: model.pairs(),
            cache: None,
            period: pattern_period(model),
            plans: HashMap::new(),
            now: 0,
        };
        if model.config().framework == Framework::F2IndicatedPair && !model.config().frozen_pair {
            s.cache = s.build_cache(model);
        }
        s
    }

    pub fn pair(&self) -> PairState {
        self.pair
    }

    fn active_pair(&self, model: &SwitchingModel) -> Option<[usize; 2]> {
        (model.config().framework == Framework::F2IndicatedPair).then_some(self.pair.active)
    }

    fn available(&self, syms: &[TickSymbols]) -> Vec<bool> {
        syms.iter().zip(&self.se).map(|(t, &se)| t.ul > 0 && se > 0.0).collect()
    }

    fn build_cache(&self, model: &SwitchingModel) -> Option<PairCache> {
        let period = self.period?;
        let caps = self
            .pairs
            .iter()
            .map(|&p| (0..period).map(|t| self.pair_capacity(model, t, p)).collect())
            .collect();
        Some(PairCache { period, caps })
    }

    /// Best gap-free capacity inside `pair` at `tick` with the carriers to
    /// itself.
    fn pair_capacity(&self, model: &SwitchingModel, tick: u64, pair: [usize; 2]) -> f64 {
        let syms = model.tick_symbols(tick);
        let free: Vec<f64> = syms.iter().map(|s| f64::from(s.ul)).collect();
        model
            .legal_states(&self.available(&syms), Some(pair))
            .iter()
            .map(|s| self.evaluate(model, &TxState::IDLE, s, &syms, &free, f64::INFINITY, true).capacity)
            .fold(0.0, f64::max)
    }

    fn window_capacity(&self, model: &SwitchingModel, pair_idx: usize, start: u64) -> f64 {
        let window = u64::from(model.config().lookahead_slots);
        match &self.cache {
            Some(c) => (start..start + window).map(|t| c.caps[pair_idx][(t % c.period) as usize]).sum(),
            None => (start..start + window).map(|t| self.pair_capacity(model, t, self.pairs[pair_idx])).sum(),
        }
    }

    /// Start-of-tick bookkeeping: applies a due pair change, then (F2)
    /// re-indicates when another pair's lookahead capacity beats the current
    /// one by the hysteresis margin.
    pub fn begin_tick(&mut self, model: &SwitchingModel, tick: u64) {
        self.now = tick;
        self.pair.advance(tick);
        let cfg = model.config();
        if cfg.framework != Framework::F2IndicatedPair || cfg.frozen_pair || self.pair.pending.is_some() {
            return;
        }
        let start = tick + u64::from(cfg.indication_latency_slots);
        let caps: Vec<f64> = (0..self.pairs.len()).map(|i| self.window_capacity(model, i, start)).collect();
        let current = self.pairs.iter().position(|&p| p == self.pair.active).map_or(0.0, |i| caps[i]);
        let (best, best_cap) =
            caps.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
        if best_cap > current * (1.0 + cfg.hysteresis_margin) && best_cap > current {
            model.indicate_indices(&mut self.pair, self.pairs[best], tick);
            self.pair.advance(tick);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        model: &SwitchingModel,
        from: &TxState,
        state: &TxState,
        syms: &[TickSymbols],
        free: &[f64],
        backlog: f64,
        gap_free: bool,
    ) -> Candidate {
        let tr = model.transition(from, state);
        let gap_us = if gap_free { 0.0 } else { tr.gap_us };
        let mut carriers: Vec<usize> = state.tx.iter().flatten().copied().collect();
        carriers.sort_unstable();
        carriers.dedup();
        let mut uses: Vec<(f64, f64, CarrierUse)> = carriers
            .into_iter()
            .map(|c| {
                let uc = &model.carriers()[c];
                let t = syms[c];
                let chains = state.tx.iter().filter(|&&x| x == Some(c)).count() as u32;
                let factor = f64::from(chains.min(uc.layers)) / f64::from(uc.layers);
                let gap_symbols = if gap_us > 0.0 && tr.affected_bands.contains(&uc.band) {
                    ((gap_us / t.symbol_us - 1e-9).ceil() as u32).min(t.ul)
                } else {
                    0
                };
                let usable = free[c].min(f64::from(t.ul - gap_symbols)).max(0.0);
                let bits_per_symbol = uc.carrier.bandwidth_mhz * self.se[c] * t.symbol_us * factor;
                let cu = CarrierUse {
                    carrier: c,
                    ul_symbols: t.ul,
                    gap_symbols,
                    served_symbols: 0.0,
                    served_bits: 0.0,
                    bits_per_symbol,
                };
                (bits_per_symbol, usable, cu)
            })
            .collect();
        let capacity: f64 = uses.iter().map(|(bps, usable, _)| bps * usable).sum();
        // Most efficient carrier first when the backlog is smaller than capacity.
        let mut order: Vec<usize> = (0..uses.len()).collect();
        order.sort_by(|&a, &b| uses[b].0.total_cmp(&uses[a].0).then(a.cmp(&b)));
        let mut left = backlog;
        for i in order {
            let (bps, usable, cu) = &mut uses[i];
            if left <= 0.0 || *bps <= 0.0 {
                continue;
            }
            let bits = left.min(*bps * *usable);
            cu.served_bits = bits;
            cu.served_symbols = if bits >= *bps * *usable { *usable } else { bits / *bps };
            left -= bits;
        }
        let served = if backlog.is_finite() { backlog - left.max(0.0) } else { capacity };
        Candidate { state: *state, served, gap_us, capacity, uses: uses.into_iter().map(|u| u.2).collect() }
    }

    /// Moves available at `tick` from every tuned placement: the bits each
    /// move carries with the carriers to itself and the placement it leaves.
    fn moves(&self, model: &SwitchingModel, pair: Option<[usize; 2]>, tick: u64) -> Moves {
        let n = model.carriers().len();
        let syms = model.tick_symbols(tick);
        let free: Vec<f64> = syms.iter().map(|s| f64::from(s.ul)).collect();
        let actions = model.legal_states(&self.available(&syms), pair);
        tuned_states(n)
            .iter()
            .map(|from| {
                actions
                    .iter()
                    .map(|a| {
                        let bits = self.evaluate(model, from, a, &syms, &free, f64::INFINITY, false).capacity;
                        (bits, tuned_index(&merge_tuned(from, a), n))
                    })
                    .collect()
            })
            .collect()
    }

    fn ensure_plan(&mut self, model: &SwitchingModel, pair: Option<[usize; 2]>) {
        let window = model.config().lookahead_slots as usize;
        let Some(period) = self.period else { return };
        if window == 0 || self.plans.contains_key(&pair) {
            return;
        }
        let moves: Vec<Moves> = (0..period).map(|t| self.moves(model, pair, t)).collect();
        let reach = (0..period as usize)
            .map(|p| reach_table(&(0..window).map(|j| &moves[(p + j) % period as usize]).collect::<Vec<_>>()))
            .collect();
        self.plans.insert(pair, PlanTable { reach });
    }

    /// `(k, bits)`: the backlog `left` can be cleared within `k` ticks
    /// after this one, or `k` is one past the window and `bits` is the most
    /// that fits inside it.
    fn clear_time(&self, model: &SwitchingModel, pair: Option<[usize; 2]>, tuned: &TxState, left: f64) -> (usize, f64) {
        let window = model.config().lookahead_slots as usize;
        if left <= 0.0 {
            return (0, 0.0);
        }
        if window == 0 {
            return (1, 0.0);
        }
        let x = tuned_index(tuned, model.carriers().len());
        let start = self.now + 1;
        let owned;
        let reach = match (self.period, self.plans.get(&pair)) {
            (Some(period), Some(t)) => &t.reach[(start % period) as usize],
            _ => {
                let moves: Vec<Moves> = (start..start + window as u64).map(|t| self.moves(model, pair, t)).collect();
                owned = reach_table(&moves.iter().collect::<Vec<_>>());
                &owned
            }
        };
        match reach.iter().position(|r| r[x] >= left * (1.0 - 1e-12)) {
            Some(k) => (k + 1, left),
            None => (window + 1, reach[window - 1][x]),
        }
    }

    /// Carriers this UE could transmit on this tick.
    pub fn usable_carriers(&self, model: &SwitchingModel, syms: &[TickSymbols]) -> usize {
        let pair = self.active_pair(model);
        self.available(syms)
            .iter()
            .enumerate()
            .filter(|&(c, &a)| a && pair.is_none_or(|p| p.contains(&model.carriers()[c].band)))
            .count()
    }

    /// Picks this tick's placement and serves up to `backlog_bits` on at
    /// most `max_carriers` distinct carriers. Call after [`Self::begin_tick`].
    ///
    /// `free_symbols[c]` holds the UL symbols of carrier `c` not yet granted
    /// to other UEs this tick and is reduced by what this UE takes. The
    /// choice clears the backlog soonest given the best continuation over
    /// the lookahead window, then moves the most bits inside it, then
    /// maximises bits served now, then minimises the gap, then maximises
    /// capacity; remaining ties keep enumeration order.
    pub fn step(
        &mut self,
        model: &SwitchingModel,
        syms: &[TickSymbols],
        backlog_bits: f64,
        max_carriers: usize,
        free_symbols: &mut [f64],
    ) -> TickOutcome {
        let active_pair = self.active_pair(model);
        let idle = TickOutcome {
            state: TxState { active_pair, ..TxState::IDLE },
            gap_us: 0.0,
            served_bits: 0.0,
            carriers: Vec::new(),
        };
        if backlog_bits <= 0.0 {
            return idle;
        }
        let plan_key = active_pair;
        self.ensure_plan(model, plan_key);
        let mut best: Option<((usize, f64), Candidate)> = None;
        for state in model.legal_states(&self.available(syms), active_pair) {
            if distinct_carriers(&state) > max_carriers {
                continue;
            }
            // Waiting, or retuning inside symbols that carry nothing, competes
            // through the lookahead only.
            let c = self.evaluate(model, &self.tuned, &state, syms, free_symbols, backlog_bits, false);
            let (k, later) =
                self.clear_time(model, plan_key, &merge_tuned(&self.tuned, &state), backlog_bits - c.served);
            let key = (k, c.served + later);
            let better = match &best {
                None => true,
                Some((bk, b)) => {
                    key.0 < bk.0
                        || (key.0 == bk.0
                            && (key.1 > bk.1
                                || (key.1 == bk.1
                                    && (c.served > b.served
                                        || (c.served == b.served
                                            && (c.gap_us < b.gap_us
                                                || (c.gap_us == b.gap_us && c.capacity > b.capacity)))))))
                }
            };
            if better {
                best = Some((key, c));
            }
        }
        let Some((_, best)) = best.filter(|(_, b)| !b.state.is_idle()) else { return idle };
        for u in &best.uses {
            free_symbols[u.carrier] = (free_symbols[u.carrier] - u.served_symbols).max(0.0);
        }
        for (t, s) in self.tuned.tx.iter_mut().zip(best.state.tx) {
            if s.is_some() {
                *t = s;
            }
        }
        TickOutcome { state: best.state, gap_us: best.gap_us, served_bits: best.served, carriers: best.uses }
    }
}

/// Offered UL load of one UE: bits arriving per tick, servable on the
/// eligible bands only (all bands when unset).
#[derive(Clone, Debug, PartialEq)]
pub struct DemandTrace {
    pub arrivals_bits: Vec<f64>,
    pub eligible_bands: Option<BTreeSet<BandId>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleTrace {
    pub ticks: Vec<TickOutcome>,
    pub served_bits: f64,
    pub backlog_bits: f64,
}

/// Single-UE greedy schedule over the demand horizon.
pub fn schedule_ul(model: &SwitchingModel, demand: &DemandTrace, se: &[f64]) -> ScheduleTrace {
    let se: Vec<f64> = model
        .carriers()
        .iter()
        .zip(se)
        .map(|(c, &s)| {
            let band = &model.config().bands[c.band];
            if demand.eligible_bands.as_ref().is_none_or(|e| e.contains(band)) {
                s
            } else {
                0.0
            }
        })
        .collect();
    let mut ue = UeSwitcher::new(model, se);
    let mut backlog = 0.0;
    let mut served = 0.0;
    let mut ticks = Vec::with_capacity(demand.arrivals_bits.len());
    for (tick, &arrival) in demand.arrivals_bits.iter().enumerate() {
        backlog += arrival;
        let syms = model.tick_symbols(tick as u64);
        let mut free: Vec<f64> = syms.iter().map(|s| f64::from(s.ul)).collect();
        ue.begin_tick(model, tick as u64);
        let out = ue.step(model, &syms, backlog, usize::MAX, &mut free);
        backlog -= out.served_bits;
        served += out.served_bits;
        ticks.push(out);
    }
    ScheduleTrace { ticks, served_bits: served, backlog_bits: backlog }
}

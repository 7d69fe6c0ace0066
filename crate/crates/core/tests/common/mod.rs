//! Hand-derived oracles shared by the property and acceptance suites.

#![allow(dead_code)]

use flexca::energy::{PowerModel, SsbConfig};

/// Energy of an idle run of `n` slots starting right after activity:
/// `light` active-static slots, then light sleep until `deep`, then deep.
fn idle_run(p: &PowerModel, n: u64) -> f64 {
    let light = u64::from(p.light_sleep_entry_slots);
    let deep = u64::from(p.deep_sleep_entry_slots);
    let awake = n.min(light);
    let shallow = n.min(deep).saturating_sub(light);
    let asleep = n.saturating_sub(deep);
    awake as f64 * p.p_active_static + shallow as f64 * p.p_light_sleep + asleep as f64 * p.p_deep_sleep
}

/// Closed-form (E_withssb, E_ssbless) per slot-duration unit of a trace
/// holding utilisation `u` for `n` slots.
pub fn constant_trace_energy(p: &PowerModel, ssb: &SsbConfig, u: f64, n: u64) -> (f64, f64) {
    let period = u64::from(ssb.periodicity_slots);
    let burst = u64::from(ssb.ssb_slots_per_burst);
    let ssb_slots = (n / period) * burst + (n % period).min(burst);
    if u > 0.0 {
        let base = n as f64 * (p.p_active_static + u * p.p_dynamic_per_util);
        return (base + ssb_slots as f64 * p.ssb_slot_cost, base);
    }
    // Every burst restarts the idle run.
    let full = n / period;
    let tail = n % period;
    let per_period = burst as f64 * (p.p_active_static + p.ssb_slot_cost) + idle_run(p, period - burst);
    let tail_energy = tail.min(burst) as f64 * (p.p_active_static + p.ssb_slot_cost) + idle_run(p, tail.saturating_sub(burst));
    (full as f64 * per_period + tail_energy, idle_run(p, n))
}

/// `1 - E_ssbless / E_withssb` in closed form.
pub fn constant_trace_gain(p: &PowerModel, ssb: &SsbConfig, u: f64, n: u64) -> f64 {
    let (with, less) = constant_trace_energy(p, ssb, u, n);
    1.0 - less / with
}

mod common;

use flexca::energy::{slot_power, sleep_states, trace_energy, trace_gain, trace_powers, PowerModel, SlotActivity, SsbConfig};
use flexca::spectrum::SsbMode;
use proptest::prelude::*;

pub fn power_model() -> impl Strategy<Value = PowerModel> {
    (0.0f64..5.0, 0.0f64..40.0, 0.0f64..60.0, 0.0f64..150.0, 0.0f64..50.0, 0u32..40, 0u32..400).prop_map(
        |(deep, light_extra, static_extra, dynamic, ssb, l, d_extra)| PowerModel {
            p_deep_sleep: deep,
            p_light_sleep: deep + light_extra,
            p_active_static: deep + light_extra + static_extra,
            p_dynamic_per_util: dynamic,
            ssb_slot_cost: ssb,
            light_sleep_entry_slots: l,
            deep_sleep_entry_slots: l + d_extra,
        },
    )
}

pub fn ssb_config() -> impl Strategy<Value = SsbConfig> {
    (1u32..80).prop_flat_map(|period| (Just(period), 1..=period.min(4)))
        .prop_map(|(periodicity_slots, ssb_slots_per_burst)| SsbConfig { periodicity_slots, ssb_slots_per_burst })
}

fn trace() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![3 => Just(0.0), 1 => 0.0f64..=1.0], 1..1500)
}

fn mode() -> impl Strategy<Value = SsbMode> {
    prop_oneof![Just(SsbMode::WithSsb), Just(SsbMode::SsbLess)]
}

proptest! {
    #[test]
    fn energy_is_the_sum_of_slot_powers(p in power_model(), ssb in ssb_config(), u in trace(), mode in mode(), slot_s in 1e-4f64..1e-3) {
        let states = sleep_states(&p, &u, &ssb, mode);
        let by_hand: f64 = u
            .iter()
            .zip(&states)
            .enumerate()
            .map(|(i, (&u, &sleep))| {
                let ssb = mode == SsbMode::WithSsb && ssb.is_ssb_slot(i as u64);
                slot_power(&p, SlotActivity { utilization: u, ssb, sleep }).unwrap()
            })
            .sum::<f64>()
            * slot_s;
        let e = trace_energy(&p, &u, &ssb, mode, slot_s).unwrap();
        prop_assert!((e - by_hand).abs() <= 1e-9 * by_hand.abs().max(1e-12));
        let powers = trace_powers(&p, &u, &ssb, mode).unwrap();
        prop_assert_eq!(powers.len(), u.len());
    }

    #[test]
    fn removing_ssb_never_adds_energy(p in power_model(), ssb in ssb_config(), u in trace()) {
        let with = trace_energy(&p, &u, &ssb, SsbMode::WithSsb, 1.0).unwrap();
        let less = trace_energy(&p, &u, &ssb, SsbMode::SsbLess, 1.0).unwrap();
        prop_assert!(less <= with * (1.0 + 1e-12));
    }

    #[test]
    fn gain_ignores_power_units(p in power_model(), ssb in ssb_config(), u in trace(), k in 1e-3f64..1e3) {
        let g = trace_gain(&p, &u, &ssb).unwrap();
        let gk = trace_gain(&p.scaled(k), &u, &ssb).unwrap();
        prop_assert!((g - gk).abs() <= 1e-9 * g.abs().max(1e-9), "{} vs {}", g, gk);
    }

    #[test]
    fn constant_traces_match_closed_form(
        p in power_model(),
        ssb in ssb_config(),
        u in prop_oneof![Just(0.0), 0.01f64..=1.0],
        n in 1u64..5000,
    ) {
        let (with, less) = common::constant_trace_energy(&p, &ssb, u, n);
        prop_assume!(with > 0.0);
        let trace = vec![u; n as usize];
        let e_with = trace_energy(&p, &trace, &ssb, SsbMode::WithSsb, 1.0).unwrap();
        let e_less = trace_energy(&p, &trace, &ssb, SsbMode::SsbLess, 1.0).unwrap();
        prop_assert!((e_with - with).abs() <= 1e-9 * with);
        prop_assert!((e_less - less).abs() <= 1e-9 * with);
        let g = trace_gain(&p, &trace, &ssb).unwrap();
        let want = common::constant_trace_gain(&p, &ssb, u, n);
        prop_assert!((g - want).abs() <= 1e-9 * want.abs().max(1e-9), "{} vs {}", g, want);
    }
}

use flexca::pdcch::{
    allocate_with_candidates, blocking_experiment, dci_payload_bits, select_aggregation_level, AggregationLevel,
    AllocationRequest, CoresetModel, LoadSpec, SchedulingMode,
};
use proptest::prelude::*;

fn level() -> impl Strategy<Value = AggregationLevel> {
    prop_oneof![
        Just(AggregationLevel::L1),
        Just(AggregationLevel::L2),
        Just(AggregationLevel::L4),
        Just(AggregationLevel::L8),
    ]
}

fn requests(total: u32) -> impl Strategy<Value = Vec<AllocationRequest>> {
    proptest::collection::vec(
        (level(), proptest::collection::vec(0..total, 0..4))
            .prop_map(|(level, candidates)| AllocationRequest { level, candidates }),
        0..6,
    )
}

fn exists_assignment(reqs: &[AllocationRequest], total: u32, used: &mut Vec<bool>) -> bool {
    let Some((first, rest)) = reqs.split_first() else { return true };
    let l = first.level.cces();
    for &s in &first.candidates {
        if s + l > total || (s..s + l).any(|c| used[c as usize]) {
            continue;
        }
        (s..s + l).for_each(|c| used[c as usize] = true);
        let ok = exists_assignment(rest, total, used);
        (s..s + l).for_each(|c| used[c as usize] = false);
        if ok {
            return true;
        }
    }
    false
}

proptest! {
    #[test]
    fn placements_are_disjoint_and_legal((total, reqs) in (1u32..24).prop_flat_map(|t| (Just(t), requests(t)))) {
        let r = allocate_with_candidates(&reqs, total, 10_000);
        let mut used = vec![false; total as usize];
        for p in &r.placed {
            prop_assert!(reqs[p.request].candidates.contains(&p.start));
            prop_assert_eq!(p.len, reqs[p.request].level.cces());
            prop_assert!(p.start + p.len <= total);
            for c in p.start..p.start + p.len {
                prop_assert!(!used[c as usize], "CCE {} used twice", c);
                used[c as usize] = true;
            }
        }
        let mut all: Vec<usize> = r.placed.iter().map(|p| p.request).chain(r.blocked.iter().copied()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..reqs.len()).collect::<Vec<_>>());
        prop_assert_eq!(r.cces_used(), used.iter().filter(|u| **u).count() as u32);
    }

    #[test]
    fn nothing_blocks_when_a_full_packing_exists((total, reqs) in (1u32..24).prop_flat_map(|t| (Just(t), requests(t)))) {
        let r = allocate_with_candidates(&reqs, total, 100_000);
        let feasible = exists_assignment(&reqs, total, &mut vec![false; total as usize]);
        prop_assert_eq!(r.blocked.is_empty(), feasible);
    }

    #[test]
    fn aggregation_level_is_monotone(bits in 1u32..=140, q1 in 0.01f64..=1.0, q2 in 0.01f64..=1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        if let Ok(at_lo) = select_aggregation_level(bits, lo) {
            prop_assert!(select_aggregation_level(bits, hi).unwrap() <= at_lo);
        }
        if bits < 140 {
            if let Ok(bigger) = select_aggregation_level(bits + 1, hi) {
                prop_assert!(select_aggregation_level(bits, hi).unwrap() <= bigger);
            }
        }
    }

    #[test]
    fn dci_size_is_linear_then_capped(n in 1u32..64) {
        let bits = 60 + 12 * (n - 1);
        match dci_payload_bits(n) {
            Ok(b) => prop_assert!(b == bits && b <= 140),
            Err(_) => prop_assert!(bits > 140),
        }
    }

    #[test]
    fn blocking_rate_is_a_probability(
        n in 1u32..=7,
        n_ues in 1u32..12,
        activity in 0.05f64..=1.0,
        total in prop_oneof![Just(16u32), Just(32), Just(54)],
        seed in any::<u64>(),
        multi in any::<bool>(),
    ) {
        let load = LoadSpec { n_ues, activity, quality_min: 0.05, quality_max: 0.5 };
        let mode = if multi { SchedulingMode::MultiCell } else { SchedulingMode::SingleCell };
        let coreset = CoresetModel::with_total(total);
        let r = blocking_experiment(&load, n, mode, &coreset, 50, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.blocking_rate));
        prop_assert!(r.blocked <= r.dcis);
        prop_assert!(r.mean_cces_used <= f64::from(total));
        let again = blocking_experiment(&load, n, mode, &coreset, 50, seed).unwrap();
        prop_assert_eq!(r, again);
    }
}

use std::collections::BTreeSet;

use flexca::ids::CellId;
use flexca::spectrum::CellRole;
use flexca::ssbless::{
    ssbless_eligibility, CellRadioObservation, EligibilityContext, QclEdge, QclType, SignalId, Thresholds,
};
use proptest::prelude::*;

fn sig(s: &str) -> SignalId {
    s.parse().unwrap()
}

/// An observation whose QCL chain is complete when `chain` is set and
/// missing its TypeC hop otherwise.
fn obs(rtd_ns: f64, rx_power_dbm: f64, co_site: bool, chain: bool) -> CellRadioObservation {
    let mut qcl_edges = vec![QclEdge { source: sig("rs:sc:0"), target: sig("trs:sc:0"), qcl: QclType::TypeA }];
    if chain {
        qcl_edges.push(QclEdge { source: sig("trs:sc:0"), target: sig("ssb:pc"), qcl: QclType::TypeC });
    }
    CellRadioObservation {
        cell_id: "sc".into(),
        rtd_ns,
        rx_power_dbm,
        co_site,
        reference_signals: vec![sig("rs:sc:0")],
        qcl_edges,
    }
}

fn ctx(inter_band: bool, reference_power_dbm: f64) -> EligibilityContext {
    EligibilityContext {
        target_role: CellRole::SCell,
        inter_band,
        reference_power_dbm,
        active_cells_with_ssb: BTreeSet::from([CellId::from("pc")]),
        thresholds: Thresholds::default(),
    }
}

fn eligible(o: &CellRadioObservation, c: &EligibilityContext) -> bool {
    ssbless_eligibility(o, c).unwrap().eligible
}

proptest! {
    #[test]
    fn decision_is_the_conjunction(
        rtd in -600.0f64..600.0,
        power in -100.0f64..-60.0,
        reference in -90.0f64..-70.0,
        co_site in any::<bool>(),
        inter_band in any::<bool>(),
        chain in any::<bool>(),
    ) {
        let expected = rtd.abs() <= 260.0 && (power - reference).abs() <= 6.0 && chain && (co_site || !inter_band);
        let o = obs(rtd, power, co_site, chain);
        let c = ctx(inter_band, reference);
        let r = ssbless_eligibility(&o, &c).unwrap();
        prop_assert_eq!(r.eligible, expected);
        prop_assert_eq!(r.eligible, r.reasons.is_empty());
        prop_assert_eq!(r, ssbless_eligibility(&o, &c).unwrap());
    }

    #[test]
    fn worse_rtd_never_helps(rtd in 0.0f64..600.0, extra in 0.0f64..300.0, co_site in any::<bool>()) {
        let c = ctx(true, -80.0);
        let near = eligible(&obs(rtd, -80.0, co_site, true), &c);
        let far = eligible(&obs(rtd + extra, -80.0, co_site, true), &c);
        prop_assert!(!far || near);
    }

    #[test]
    fn worse_power_delta_never_helps(delta in 0.0f64..12.0, extra in 0.0f64..6.0, sign in any::<bool>()) {
        let s = if sign { 1.0 } else { -1.0 };
        let c = ctx(false, -80.0);
        let near = eligible(&obs(0.0, -80.0 + s * delta, true, true), &c);
        let far = eligible(&obs(0.0, -80.0 + s * (delta + extra), true, true), &c);
        prop_assert!(!far || near);
    }

    #[test]
    fn dropping_an_edge_never_helps(rtd in -260.0f64..=260.0, drop in 0usize..2) {
        let c = ctx(false, -80.0);
        let full = obs(rtd, -80.0, true, true);
        let mut cut = full.clone();
        cut.qcl_edges.remove(drop);
        prop_assert!(eligible(&full, &c));
        prop_assert!(!eligible(&cut, &c));
    }

    #[test]
    fn signal_ids_round_trip(cell in "[a-z][a-z0-9_]{0,8}", index in any::<u32>(), kind in 0u8..3) {
        let s = match kind {
            0 => SignalId::Rs { cell: cell.as_str().into(), index },
            1 => SignalId::Trs { cell: cell.as_str().into(), index },
            _ => SignalId::Ssb { cell: cell.as_str().into() },
        };
        prop_assert_eq!(s.to_string().parse::<SignalId>().unwrap(), s);
    }
}

#[test]
fn thresholds_are_inclusive() {
    let c = ctx(false, -80.0);
    assert!(eligible(&obs(260.0, -80.0, true, true), &c));
    assert!(eligible(&obs(-260.0, -86.0, true, true), &c));
    assert!(eligible(&obs(0.0, -74.0, true, true), &c));
    assert!(!eligible(&obs(260.001, -80.0, true, true), &c));
    assert!(!eligible(&obs(0.0, -73.999, true, true), &c));
}

#[test]
fn pcell_target_is_an_error() {
    let mut c = ctx(false, -80.0);
    c.target_role = CellRole::PCell;
    assert!(ssbless_eligibility(&obs(0.0, -80.0, true, true), &c).is_err());
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero when any fails.

mod common;

use std::collections::{BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use flexca::cell_config::{apply_config, ActivationDirective, ActivationShape, CellTable, ConfigPlan, Setting};
use flexca::energy::{trace_gain, PowerModel, SsbConfig};
use flexca::experiments::{sweep, seed_list, write_report_csv, Axis, SweepTable};
use flexca::ids::{CarrierId, CellId};
use flexca::pdcch::{allocate_with_candidates, dci_payload_bits, AllocationRequest, AggregationLevel, DEFAULT_REPACK_BUDGET};
use flexca::scenario::Scenario;
use flexca::sim::run;
use flexca::spectrum::{
    Band, Carrier, CarrierDirection, Catalog, CellMode, CellRole, CellState, Duplex, RegulatoryRestriction, Scs,
    ServingCell, SsbMode,
};
use flexca::ssbless::{
    ssbless_eligibility, CellRadioObservation, EligibilityContext, QclEdge, QclType, SignalId, Thresholds,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Scenario::load(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn mean_of(table: &SweepTable, point: &str, metric: &str) -> f64 {
    table.aggregate(point).unwrap().mean[table.metric(metric).unwrap()]
}

fn ci_of(table: &SweepTable, point: &str, metric: &str) -> f64 {
    table.aggregate(point).unwrap().ci95[table.metric(metric).unwrap()]
}

fn seed_values(table: &SweepTable, point: &str, metric: &str) -> Vec<(u64, f64)> {
    let i = table.metric(metric).unwrap();
    table.rows.iter().filter(|r| r.point == point).map(|r| (r.seed, r.values[i])).collect()
}

fn csv_bytes(table: &SweepTable) -> Vec<u8> {
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    out
}

// 1
fn dci_sizes() -> Outcome {
    let sizes: Vec<u32> = (1..=7).map(|n| dci_payload_bits(n).unwrap()).collect();
    ensure(sizes == [60, 72, 84, 96, 108, 120, 132], || format!("sizes {sizes:?}"))?;
    ensure(dci_payload_bits(8).is_err(), || "N=8 accepted".into())?;
    Ok(format!("{sizes:?}, N=8 rejected"))
}

// 2
fn pdcch_trends() -> Outcome {
    let s = load("fig4_pdcch_blocking.toml");
    let spec = s.pdcch_experiment.as_ref().unwrap();
    ensure(spec.load.n_ues == 10 && s.pdcch.coreset_cces == 54 && spec.trials >= 10_000, || "fixture".into())?;
    ensure(s.experiment.seeds >= 20, || "fewer than 20 seeds".into())?;
    let t = sweep(&s, Axis::NCells, &seed_list(0, s.experiment.seeds), 1).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for metric in ["blocking_gain", "cce_saving_gain"] {
        let m: Vec<f64> = (2..=7).map(|n| mean_of(&t, &n.to_string(), metric)).collect();
        let ci: Vec<f64> = (2..=7).map(|n| ci_of(&t, &n.to_string(), metric)).collect();
        for k in 1..m.len() {
            ensure(m[k] >= m[k - 1], || format!("{metric} drops at N={}: {:?}", k + 2, m))?;
        }
        let (d23, d67) = (m[1] - m[0], m[5] - m[4]);
        ensure(d67 < d23, || format!("{metric}: d67 {d67} >= d23 {d23}"))?;
        notes.push(format!(
            "{metric} {:.4}..{:.4} (ci {:.4}) d23={d23:.4} d67={d67:.4}",
            m[0],
            m[5],
            ci.iter().cloned().fold(0.0, f64::max)
        ));
    }
    Ok(notes.join("; "))
}

// 3
fn exists_packing(reqs: &[AllocationRequest], used: &mut [bool]) -> bool {
    let Some((first, rest)) = reqs.split_first() else { return true };
    let l = first.level.cces() as usize;
    for &s in &first.candidates {
        let s = s as usize;
        if s + l > used.len() || used[s..s + l].iter().any(|u| *u) {
            continue;
        }
        used[s..s + l].iter_mut().for_each(|u| *u = true);
        let ok = exists_packing(rest, used);
        used[s..s + l].iter_mut().for_each(|u| *u = false);
        if ok {
            return true;
        }
    }
    false
}

fn subsets_up_to_3(items: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for (i, &a) in items.iter().enumerate() {
        out.push(vec![a]);
        for (j, &b) in items.iter().enumerate().skip(i + 1) {
            out.push(vec![a, b]);
            for &c in &items[j + 1..] {
                out.push(vec![a, b, c]);
            }
        }
    }
    out
}

fn allocation_oracle() -> Outcome {
    let levels = [AggregationLevel::L1, AggregationLevel::L2, AggregationLevel::L4, AggregationLevel::L8];
    let mut cases = 0u64;
    for total in 1u32..=8 {
        let options: Vec<AllocationRequest> = levels
            .iter()
            .filter(|l| l.cces() <= total)
            .flat_map(|&level| {
                let starts: Vec<u32> = (0..total).step_by(level.cces() as usize).filter(|s| s + level.cces() <= total).collect();
                subsets_up_to_3(&starts).into_iter().map(move |candidates| AllocationRequest { level, candidates })
            })
            .collect();
        let mut used = vec![false; total as usize];
        let mut check = |reqs: &[AllocationRequest]| -> Result<(), String> {
            let r = allocate_with_candidates(reqs, total, DEFAULT_REPACK_BUDGET);
            let feasible = exists_packing(reqs, &mut used);
            cases += 1;
            ensure(r.blocked.is_empty() == feasible, || format!("total {total}: {reqs:?} greedy {r:?} exhaustive {feasible}"))
        };
        for a in &options {
            check(std::slice::from_ref(a))?;
            for b in &options {
                check(&[a.clone(), b.clone()])?;
                for c in &options {
                    check(&[a.clone(), b.clone(), c.clone()])?;
                }
            }
        }
    }
    Ok(format!("{cases} instances agree"))
}

// 4
fn switching_order() -> Outcome {
    let mut notes = Vec::new();
    for file in ["fig5_ul_switching_5ue.toml", "fig5_ul_switching_10ue.toml"] {
        let s = load(file);
        ensure(s.experiment.seeds >= 20, || format!("{file}: fewer than 20 seeds"))?;
        let t = sweep(&s, Axis::Framework, &seed_list(0, s.experiment.seeds), 1).map_err(|e| e.to_string())?;
        let f1 = seed_values(&t, "f1", "mean_upt_mbps");
        let f2 = seed_values(&t, "f2", "mean_upt_mbps");
        let base = seed_values(&t, "baseline", "mean_upt_mbps");
        for ((a, b), c) in f1.iter().zip(&f2).zip(&base) {
            ensure(a.0 == b.0 && b.0 == c.0, || "seed order".into())?;
            ensure(a.1 >= b.1 && b.1 >= c.1, || {
                format!("{file} seed {}: F1 {:.3} F2 {:.3} baseline {:.3}", a.0, a.1, b.1, c.1)
            })?;
        }
        let g1 = mean_of(&t, "f1", "upt_gain_vs_baseline");
        let g2 = mean_of(&t, "f2", "upt_gain_vs_baseline");
        ensure(g1 > 0.0 && g2 > 0.0, || format!("{file}: gains {g1} {g2}"))?;
        let (m1, m2) = (mean_of(&t, "f1", "mean_upt_mbps"), mean_of(&t, "f2", "mean_upt_mbps"));
        let rel = (m1 - m2).abs() / m1;
        ensure(rel <= 0.05, || format!("{file}: |F1-F2|/F1 = {rel:.4}"))?;
        notes.push(format!("{} UEs: gain F1 {:.1}% F2 {:.1}%, F1-F2 {:.2}%", s.ues.count, g1 * 100.0, g2 * 100.0, rel * 100.0));
    }
    Ok(notes.join("; "))
}

// 5
fn energy_band() -> Outcome {
    let s = load("fig6_ssbless_energy.toml");
    let grid = s.energy.as_ref().unwrap().ru_grid.clone();
    ensure(grid.len() == 4, || format!("grid {grid:?}"))?;
    let t = sweep(&s, Axis::Ru, &seed_list(0, s.experiment.seeds), 1).map_err(|e| e.to_string())?;
    let points: Vec<String> = grid.iter().map(f64::to_string).collect();
    let gains: Vec<f64> = points.iter().map(|p| mean_of(&t, p, "gain")).collect();
    let deltas: Vec<f64> = points.iter().map(|p| mean_of(&t, p, "upt_delta")).collect();
    ensure(gains.iter().all(|g| *g > 0.0), || format!("gains {gains:?}"))?;
    ensure(gains.windows(2).all(|w| w[1] <= w[0]), || format!("not non-increasing: {gains:?}"))?;
    for g in [gains[0], gains[3]] {
        ensure((0.03..=0.30).contains(&g), || format!("endpoint {g} outside [3%, 30%]"))?;
    }
    ensure(deltas.iter().all(|d| *d >= 0.0), || format!("upt deltas {deltas:?}"))?;
    let pct: Vec<String> = gains.iter().map(|g| format!("{:.1}%", g * 100.0)).collect();
    Ok(format!("gains {} over RU {grid:?}", pct.join(" ")))
}

// 6
fn energy_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for set in 0..10 {
        let deep = rng.random_range(0.0..5.0);
        let light = deep + rng.random_range(0.0..40.0);
        let light_entry = rng.random_range(0..50u32);
        let p = PowerModel {
            p_deep_sleep: deep,
            p_light_sleep: light,
            p_active_static: light + rng.random_range(1.0..60.0),
            p_dynamic_per_util: rng.random_range(0.0..150.0),
            ssb_slot_cost: rng.random_range(1.0..50.0),
            light_sleep_entry_slots: light_entry,
            deep_sleep_entry_slots: light_entry + rng.random_range(0..400u32),
        };
        let period = rng.random_range(1..=160u32);
        let ssb = SsbConfig { periodicity_slots: period, ssb_slots_per_burst: rng.random_range(1..=period.min(4)) };
        let u = if set % 2 == 0 { 0.0 } else { rng.random_range(0.01..=1.0) };
        let n = rng.random_range(1..20_000u64);
        let g = trace_gain(&p, &vec![u; n as usize], &ssb).map_err(|e| e.to_string())?;
        let want = common::constant_trace_gain(&p, &ssb, u, n);
        let rel = (g - want).abs() / want.abs();
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || format!("set {set}: simulated {g} analytic {want}"))?;
    }
    Ok(format!("10 sets, worst relative error {worst:.1e}"))
}

// 7
fn ssbless_table() -> Outcome {
    let sig = |s: &str| s.parse::<SignalId>().unwrap();
    let obs = |rtd: f64, power: f64, co_site: bool, qcl: bool| {
        let mut qcl_edges = vec![QclEdge { source: sig("rs:sc:0"), target: sig("trs:sc:0"), qcl: QclType::TypeA }];
        if qcl {
            qcl_edges.push(QclEdge { source: sig("trs:sc:0"), target: sig("ssb:pc"), qcl: QclType::TypeC });
        }
        CellRadioObservation {
            cell_id: "sc".into(),
            rtd_ns: rtd,
            rx_power_dbm: power,
            co_site,
            reference_signals: vec![sig("rs:sc:0")],
            qcl_edges,
        }
    };
    // Inter-band, so co-site is a condition of its own.
    let ctx = EligibilityContext {
        target_role: CellRole::SCell,
        inter_band: true,
        reference_power_dbm: -80.0,
        active_cells_with_ssb: BTreeSet::from([CellId::from("pc")]),
        thresholds: Thresholds::default(),
    };
    let mut rows = 0;
    for rtd_ok in [true, false] {
        for power_ok in [true, false] {
            for qcl_ok in [true, false] {
                for co_site in [true, false] {
                    let o = obs(if rtd_ok { 120.0 } else { 400.0 }, if power_ok { -83.0 } else { -90.0 }, co_site, qcl_ok);
                    let got = ssbless_eligibility(&o, &ctx).unwrap().eligible;
                    let want = rtd_ok && power_ok && qcl_ok && co_site;
                    ensure(got == want, || format!("rtd {rtd_ok} power {power_ok} qcl {qcl_ok} co-site {co_site}: {got}"))?;
                    rows += 1;
                }
            }
        }
    }
    for (rtd, power) in [(260.0, -80.0), (-260.0, -80.0), (0.0, -86.0), (0.0, -74.0), (260.0, -74.0)] {
        ensure(ssbless_eligibility(&obs(rtd, power, true, true), &ctx).unwrap().eligible, || {
            format!("boundary rtd {rtd} power {power} fails")
        })?;
    }
    Ok(format!("{rows} combinations plus 5 boundary cases"))
}

// 8
fn lifecycle_catalog() -> Catalog {
    let carrier = |id: &str, band: &str, direction| Carrier {
        carrier_id: id.into(),
        band_id: band.into(),
        direction,
        center_freq_mhz: 2000.0,
        bandwidth_mhz: 20.0,
        scs_khz: Scs::Khz30,
        slot_pattern: (direction == CarrierDirection::Bidirectional).then(|| "DDDSU/10:2:2".parse().unwrap()),
    };
    let band = |id: &str, duplex, carriers: &[&str]| Band {
        band_id: id.into(),
        duplex,
        carrier_ids: carriers.iter().map(|c| CarrierId::from(*c)).collect(),
        regulatory_restriction: RegulatoryRestriction::None,
    };
    Catalog::new(
        vec![band("a", Duplex::Fdd, &["fa_dl", "fa_ul"]), band("b", Duplex::Tdd, &["fb"]), band("c", Duplex::Tdd, &["fc"])],
        vec![
            carrier("fa_dl", "a", CarrierDirection::Dl),
            carrier("fa_ul", "a", CarrierDirection::Ul),
            carrier("fb", "b", CarrierDirection::Bidirectional),
            carrier("fc", "c", CarrierDirection::Bidirectional),
        ],
    )
    .unwrap()
}

type Shape = (CellMode, Option<&'static str>, Option<&'static str>);

const SHAPES: [Shape; 8] = [
    (CellMode::Legacy, Some("fb"), Some("fb")),
    (CellMode::Legacy, Some("fc"), Some("fc")),
    (CellMode::Legacy, Some("fb"), None),
    (CellMode::Legacy, Some("fa_dl"), Some("fa_ul")),
    (CellMode::Enhanced, None, Some("fb")),
    (CellMode::Enhanced, None, Some("fc")),
    (CellMode::Enhanced, Some("fb"), Some("fc")),
    (CellMode::Enhanced, Some("fc"), Some("fa_ul")),
];

fn key(t: &CellTable) -> String {
    let cells: Vec<_> = t.entries().map(|e| (e.id(), e.state(), &e.exposed_dl, &e.exposed_ul)).collect();
    format!("{cells:?}")
}

fn check_state(t: &CellTable, plan: &ConfigPlan) -> Result<(), String> {
    for e in t.active().filter(|e| e.is_active_ul_only()) {
        let ok = t.active().any(|o| o.id() != e.id() && o.cell.tag_id == e.cell.tag_id && o.active_dl().is_some());
        ensure(ok, || format!("{} active UL-only without a DL-bearing TAG sibling: {:?}", e.id(), key(t)))?;
    }
    for e in t.entries() {
        let c = plan.configured_cells.iter().find(|c| &c.cell_id == e.id()).unwrap();
        ensure(e.cell.dl_carrier == c.dl_carrier && e.cell.ul_carrier == c.ul_carrier, || "configuration altered".into())?;
        if plan.setting == Setting::Setting2 && e.is_active() {
            ensure(e.exposed_dl == c.dl_carrier && e.exposed_ul == c.ul_carrier, || {
                format!("setting2 association changed on {}", e.id())
            })?;
        }
    }
    Ok(())
}

/// Breadth-first search over every state reachable by any ordering of
/// activations and deactivations.
fn explore(plan: &ConfigPlan, catalog: &Catalog) -> Result<Option<usize>, String> {
    let Ok(mut start) = apply_config(plan, catalog) else { return Ok(None) };
    start.activate(&ActivationDirective { cell_id: "p".into(), shape: ActivationShape::Full }).map_err(|e| e.to_string())?;
    let ids: Vec<CellId> = plan.configured_cells.iter().map(|c| c.cell_id.clone()).collect();
    let shapes = [ActivationShape::Full, ActivationShape::DlOnlyPart, ActivationShape::UlOnlyPart];
    let mut seen = BTreeSet::from([key(&start)]);
    let mut queue = VecDeque::from([start]);
    while let Some(t) = queue.pop_front() {
        check_state(&t, plan)?;
        for id in &ids {
            let mut next = Vec::new();
            for shape in shapes {
                let mut n = t.clone();
                if n.activate(&ActivationDirective { cell_id: id.clone(), shape }).is_ok() {
                    next.push(n);
                }
            }
            let mut n = t.clone();
            if n.deactivate(id).is_ok() {
                next.push(n);
            }
            for n in next {
                if seen.insert(key(&n)) {
                    queue.push_back(n);
                }
            }
        }
    }
    Ok(Some(seen.len()))
}

fn lifecycle() -> Outcome {
    let catalog = lifecycle_catalog();
    let (mut plans, mut states) = (0usize, 0usize);
    for setting in [Setting::Setting1, Setting::Setting2] {
        let options: Vec<(Shape, &str)> = SHAPES
            .iter()
            .filter(|s| setting == Setting::Setting2 || s.0 == CellMode::Legacy)
            .flat_map(|&s| [(s, "t0"), (s, "t1")])
            .collect();
        let mut layouts: Vec<Vec<(Shape, &str)>> = vec![vec![]];
        let mut frontier = layouts.clone();
        for _ in 0..3 {
            frontier = frontier
                .iter()
                .flat_map(|l| options.iter().map(move |o| [l.as_slice(), &[*o]].concat()))
                .collect();
            layouts.extend(frontier.iter().cloned());
        }
        for layout in layouts {
            let mut cells = vec![ServingCell {
                cell_id: "p".into(),
                role: CellRole::PCell,
                dl_carrier: Some("fa_dl".into()),
                ul_carrier: Some("fa_ul".into()),
                mode: CellMode::Legacy,
                state: CellState::Configured,
                tag_id: "t0".into(),
                ssb_mode: SsbMode::WithSsb,
            }];
            for (i, ((mode, dl, ul), tag)) in layout.iter().enumerate() {
                cells.push(ServingCell {
                    cell_id: format!("s{i}").into(),
                    role: CellRole::SCell,
                    dl_carrier: dl.map(CarrierId::from),
                    ul_carrier: ul.map(CarrierId::from),
                    mode: *mode,
                    state: CellState::Configured,
                    tag_id: (*tag).into(),
                    ssb_mode: SsbMode::WithSsb,
                });
            }
            let plan = ConfigPlan { setting, configured_cells: cells, activation_directives: vec![] };
            if let Some(n) = explore(&plan, &catalog)? {
                plans += 1;
                states += n;
            }
        }
    }
    let fig1 = load("fig1_flexible_association.toml");
    let table = fig1.initial_table(&fig1.catalog().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check_state(&table, &fig1.plan)?;
    Ok(format!("{plans} plans of up to 4 cells, {states} reachable states"))
}

// 9
fn determinism() -> Outcome {
    let fig1 = load("fig1_flexible_association.toml");
    let csv = |seed| {
        let mut out = Vec::new();
        write_report_csv(&run(&fig1, seed, None).unwrap(), false, &mut out).unwrap();
        out
    };
    ensure(csv(7) == csv(7), || "run output differs".into())?;
    let mut checked = vec!["run".to_string()];
    let mut fig4 = load("fig4_pdcch_blocking.toml");
    fig4.pdcch_experiment.as_mut().unwrap().trials = 2_000;
    let mut fig6 = load("fig6_ssbless_energy.toml");
    fig6.experiment.horizon_ticks = 10_000;
    let fig5 = load("fig5_ul_switching_5ue.toml");
    for (s, axis, seeds) in [(&fig4, Axis::NCells, 4), (&fig5, Axis::Framework, 3), (&fig6, Axis::Ru, 3)] {
        let seeds = seed_list(11, seeds);
        let one = csv_bytes(&sweep(s, axis, &seeds, 1).map_err(|e| e.to_string())?);
        let again = csv_bytes(&sweep(s, axis, &seeds, 1).map_err(|e| e.to_string())?);
        let many = csv_bytes(&sweep(s, axis, &seeds, 4).map_err(|e| e.to_string())?);
        ensure(one == again, || format!("{axis} sweep differs between runs"))?;
        ensure(one == many, || format!("{axis} sweep differs between --jobs 1 and 4"))?;
        checked.push(format!("{axis} sweep"));
    }
    Ok(format!("byte-identical: {}", checked.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("DCI payload sizes", dci_sizes),
        ("PDCCH gain trends", pdcch_trends),
        ("allocation matches exhaustive search", allocation_oracle),
        ("UL switching ordering", switching_order),
        ("SSB-less energy gain band", energy_band),
        ("energy closed form", energy_oracle),
        ("SSB-less truth table", ssbless_table),
        ("cell lifecycle model check", lifecycle),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

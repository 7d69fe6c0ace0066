use std::io;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    allocate, dci_payload_bits, select_aggregation_level, CoresetModel, DciSpec, PdcchError, SINGLE_CELL_DCI_BITS,
};
use crate::ids::{CellId, UeId};
use crate::rng::{domain, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulingMode {
    /// One DCI per scheduled cell.
    SingleCell,
    /// One DCI for all scheduled cells of a UE.
    MultiCell,
}

/// PDCCH load offered per occasion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub n_ues: u32,
    /// Probability that a UE is scheduled in a given occasion.
    pub activity: f64,
    /// PDCCH channel quality is drawn log-uniformly from this range.
    pub quality_min: f64,
    pub quality_max: f64,
}

impl LoadSpec {
    pub fn validate(&self) -> Result<(), PdcchError> {
        let ok = (0.0..=1.0).contains(&self.activity)
            && self.quality_min > 0.0
            && self.quality_min <= self.quality_max
            && self.quality_max <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(PdcchError::InvalidLoad(format!("{self:?}")))
        }
    }

    fn draw(&self, seed: u64, occasion: u64, ue: u32) -> Option<f64> {
        let mut rng = stream(&[domain::PDCCH_LOAD, seed, occasion, u64::from(ue)]);
        let active = rng.random::<f64>() < self.activity;
        let u: f64 = rng.random();
        let (lo, hi) = (self.quality_min.ln(), self.quality_max.ln());
        active.then(|| (lo + u * (hi - lo)).exp().min(1.0))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub blocking_rate: f64,
    pub mean_cces_used: f64,
    pub dcis: u64,
    pub blocked: u64,
}

#[derive(Clone, Copy, Default)]
struct Tally {
    dcis: u64,
    blocked: u64,
    cces: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally { dcis: self.dcis + o.dcis, blocked: self.blocked + o.blocked, cces: self.cces + o.cces }
    }
}

/// Monte-Carlo PDCCH blocking under single-cell or multi-cell scheduling.
///
/// Each trial is one PDCCH occasion. UE activity and channel quality are
/// drawn from streams keyed by `(seed, trial, ue)`, independent of `mode`,
/// so both modes see the same offered load. A DCI whose payload no
/// aggregation level can carry counts as blocked.
pub fn blocking_experiment(
    load: &LoadSpec,
    n_cells_per_ue: u32,
    mode: SchedulingMode,
    coreset: &CoresetModel,
    trials: u64,
    seed: u64,
) -> Result<ExperimentResult, PdcchError> {
    load.validate()?;
    coreset.validate()?;
    if n_cells_per_ue == 0 {
        return Err(PdcchError::NoCells);
    }
    let mc_bits = match mode {
        SchedulingMode::MultiCell => dci_payload_bits(n_cells_per_ue)?,
        SchedulingMode::SingleCell => SINGLE_CELL_DCI_BITS,
    };
    let cells: Vec<CellId> = (0..n_cells_per_ue).map(|k| CellId::new(format!("c{k}"))).collect();
    let index_of = |d: &DciSpec| cells.iter().position(|c| Some(c) == d.scheduled_cells.first()).unwrap_or(0) as u32;

    let tally = (0..trials.max(1))
        .into_par_iter()
        .map(|trial| {
            let mut dcis = Vec::new();
            let mut infeasible = 0u64;
            for ue in 0..load.n_ues {
                let Some(quality) = load.draw(seed, trial, ue) else { continue };
                match mode {
                    SchedulingMode::SingleCell => match select_aggregation_level(SINGLE_CELL_DCI_BITS, quality) {
                        Ok(al) => dcis.extend(cells.iter().map(|c| DciSpec {
                            scheduled_cells: vec![c.clone()],
                            payload_bits: SINGLE_CELL_DCI_BITS,
                            aggregation_level: al,
                            owner_ue: UeId(ue),
                        })),
                        Err(_) => infeasible += u64::from(n_cells_per_ue),
                    },
                    SchedulingMode::MultiCell => match select_aggregation_level(mc_bits, quality) {
                        Ok(al) => dcis.push(DciSpec {
                            scheduled_cells: cells.clone(),
                            payload_bits: mc_bits,
                            aggregation_level: al,
                            owner_ue: UeId(ue),
                        }),
                        Err(_) => infeasible += 1,
                    },
                }
            }
            let r = allocate(&dcis, coreset, trial, seed, index_of);
            Tally {
                dcis: dcis.len() as u64 + infeasible,
                blocked: r.blocked.len() as u64 + infeasible,
                cces: u64::from(r.cces_used()),
            }
        })
        .reduce(Tally::default, |a, b| a + b);

    let trials = trials.max(1) as f64;
    Ok(ExperimentResult {
        blocking_rate: if tally.dcis == 0 { 0.0 } else { tally.blocked as f64 / tally.dcis as f64 },
        mean_cces_used: tally.cces as f64 / trials,
        dcis: tally.dcis,
        blocked: tally.blocked,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GainRow {
    pub n: u32,
    pub blocking_sc: f64,
    pub blocking_mc: f64,
    /// `blocking_sc - blocking_mc`.
    pub blocking_gain: f64,
    /// `blocking_gain / blocking_sc`, zero when nothing blocks.
    pub blocking_gain_relative: f64,
    pub cce_sc: f64,
    pub cce_mc: f64,
    /// `1 - cce_mc / cce_sc`.
    pub cce_saving_gain: f64,
}

pub const GAIN_CSV_HEADER: [&str; 7] =
    ["N", "blocking_sc", "blocking_mc", "blocking_gain", "cce_sc", "cce_mc", "cce_saving_gain"];

/// Blocking and CCE-saving gain of multi-cell over single-cell scheduling
/// for every `n` in `n_values`.
pub fn gain_curves(
    load: &LoadSpec,
    coreset: &CoresetModel,
    n_values: impl IntoIterator<Item = u32>,
    trials: u64,
    seed: u64,
) -> Result<Vec<GainRow>, PdcchError> {
    n_values
        .into_iter()
        .map(|n| {
            if !(2..=7).contains(&n) {
                return Err(PdcchError::InvalidRange(n));
            }
            let sc = blocking_experiment(load, n, SchedulingMode::SingleCell, coreset, trials, seed)?;
            let mc = blocking_experiment(load, n, SchedulingMode::MultiCell, coreset, trials, seed)?;
            let blocking_gain = sc.blocking_rate - mc.blocking_rate;
            Ok(GainRow {
                n,
                blocking_sc: sc.blocking_rate,
                blocking_mc: mc.blocking_rate,
                blocking_gain,
                blocking_gain_relative: if sc.blocking_rate > 0.0 { blocking_gain / sc.blocking_rate } else { 0.0 },
                cce_sc: sc.mean_cces_used,
                cce_mc: mc.mean_cces_used,
                cce_saving_gain: if sc.mean_cces_used > 0.0 { 1.0 - mc.mean_cces_used / sc.mean_cces_used } else { 0.0 },
            })
        })
        .collect()
}

pub fn write_gain_csv<W: io::Write>(rows: &[GainRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAIN_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.blocking_sc.to_string(),
            r.blocking_mc.to_string(),
            r.blocking_gain.to_string(),
            r.cce_sc.to_string(),
            r.cce_mc.to_string(),
            r.cce_saving_gain.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(n_ues: u32) -> LoadSpec {
        LoadSpec { n_ues, activity: 1.0, quality_min: 0.08, quality_max: 0.64 }
    }

    #[test]
    fn single_cell_equals_multi_cell_at_n1() {
        let c = CoresetModel::with_total(54);
        let sc = blocking_experiment(&load(10), 1, SchedulingMode::SingleCell, &c, 500, 3).unwrap();
        let mc = blocking_experiment(&load(10), 1, SchedulingMode::MultiCell, &c, 500, 3).unwrap();
        assert_eq!(sc, mc);
    }

    #[test]
    fn deterministic_and_bounded() {
        let c = CoresetModel::with_total(54);
        let a = blocking_experiment(&load(10), 4, SchedulingMode::SingleCell, &c, 300, 11).unwrap();
        let b = blocking_experiment(&load(10), 4, SchedulingMode::SingleCell, &c, 300, 11).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.blocking_rate));
        assert!(a.mean_cces_used <= 54.0);
    }

    #[test]
    fn multi_cell_beyond_polar_cap_is_rejected() {
        let c = CoresetModel::with_total(54);
        let err = blocking_experiment(&load(10), 8, SchedulingMode::MultiCell, &c, 10, 0).unwrap_err();
        assert_eq!(err, PdcchError::PolarCapExceeded { bits: 144 });
    }

    #[test]
    fn gain_curves_edge_cases() {
        let c = CoresetModel::with_total(54);
        assert!(gain_curves(&load(10), &c, std::iter::empty(), 10, 0).unwrap().is_empty());
        assert_eq!(gain_curves(&load(10), &c, [8], 10, 0), Err(PdcchError::InvalidRange(8)));
    }

    #[test]
    fn csv_layout() {
        let c = CoresetModel::with_total(54);
        let rows = gain_curves(&load(4), &c, [2, 3], 20, 1).unwrap();
        let mut buf = Vec::new();
        write_gain_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "N,blocking_sc,blocking_mc,blocking_gain,cce_sc,cce_mc,cce_saving_gain");
        assert_eq!(lines.count(), 2);
    }
}

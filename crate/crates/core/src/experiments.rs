//! Sweep drivers behind the `sweep` command: one row per (axis value, seed)
//! plus one aggregate row per axis value.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::energy::{energy_saving_gain, EnergyError};
use crate::pdcch::{gain_curves, CoresetModel, PdcchError};
use crate::scenario::{ExperimentKind, Scenario};
use crate::sim::{run, MetricsReport, SimError};
use crate::tx_switching::FrameworkVariant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NCells,
    Ru,
    Framework,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::NCells, Axis::Ru, Axis::Framework];

    pub fn name(self) -> &'static str {
        match self {
            Axis::NCells => "n_cells",
            Axis::Ru => "ru",
            Axis::Framework => "framework",
        }
    }

    /// The experiment kind this axis sweeps.
    pub fn kind(self) -> ExperimentKind {
        match self {
            Axis::NCells => ExperimentKind::PdcchBlocking,
            Axis::Ru => ExperimentKind::EnergySaving,
            Axis::Framework => ExperimentKind::UlSwitching,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Axis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown axis `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("axis {axis} needs a `{expected:?}` experiment with its section, scenario has `{found:?}`")]
    AxisMismatch { axis: Axis, expected: ExperimentKind, found: ExperimentKind },
    #[error("seed count must be positive")]
    NoSeeds,
    #[error("cannot build thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pdcch(#[from] PdcchError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// Axis value as printed.
    pub point: String,
    pub seed: u64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub point: String,
    pub seeds: usize,
    pub mean: Vec<f64>,
    /// Half-width of the 95% Student-t interval of the mean.
    pub ci95: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axis: Axis,
    pub metrics: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepTable {
    pub fn aggregate(&self, point: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.point == point)
    }

    pub fn metric(&self, name: &str) -> Option<usize> {
        self.metrics.iter().position(|m| *m == name)
    }

    /// Header `row,<axis>,seed,<m>,<m>_ci95,...`; per-seed rows leave the
    /// interval columns empty, aggregate rows leave `seed` empty.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string(), self.axis.name().to_string(), "seed".to_string()];
        for m in &self.metrics {
            header.push((*m).to_string());
            header.push(format!("{m}_ci95"));
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec!["seed".to_string(), r.point.clone(), r.seed.to_string()];
            for v in &r.values {
                rec.push(v.to_string());
                rec.push(String::new());
            }
            w.write_record(&rec)?;
        }
        for a in &self.aggregates {
            let mut rec = vec!["mean".to_string(), a.point.clone(), String::new()];
            for (m, c) in a.mean.iter().zip(&a.ci95) {
                rec.push(m.to_string());
                rec.push(c.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0).expect("positive dof").inverse_cdf(0.975);
    (mean, t * (var / n).sqrt())
}

fn aggregate(points: &[String], rows: &[SweepRow], width: usize) -> Vec<Aggregate> {
    points
        .iter()
        .map(|p| {
            let of: Vec<&SweepRow> = rows.iter().filter(|r| &r.point == p).collect();
            let (mean, ci) = (0..width)
                .map(|i| ci95(&of.iter().map(|r| r.values[i]).collect::<Vec<_>>()))
                .unzip();
            Aggregate { point: p.clone(), seeds: of.len(), mean, ci95: ci }
        })
        .collect()
}

pub const N_CELLS_METRICS: [&str; 7] =
    ["blocking_sc", "blocking_mc", "blocking_gain", "blocking_gain_relative", "cce_sc", "cce_mc", "cce_saving_gain"];
pub const RU_METRICS: [&str; 9] = [
    "ru_target",
    "ru_achieved",
    "arrival_rate_per_s",
    "gain",
    "network_gain",
    "mean_upt_withssb_mbps",
    "mean_upt_ssbless_mbps",
    "upt_delta",
    "energy_withssb_j",
];
pub const FRAMEWORK_METRICS: [&str; 8] = [
    "mean_upt_mbps",
    "upt_gain_vs_baseline",
    "completed_files",
    "incomplete_files",
    "blocking_rate",
    "cce_saving",
    "served_bits",
    "energy_joules",
];

/// Seeds `first..first + count`.
pub fn seed_list(first: u64, count: u32) -> Vec<u64> {
    (0..u64::from(count)).map(|i| first + i).collect()
}

fn check_axis(scenario: &Scenario, axis: Axis) -> Result<(), SweepError> {
    let present = match axis {
        Axis::NCells => scenario.pdcch_experiment.is_some(),
        Axis::Ru => scenario.energy.is_some(),
        Axis::Framework => true,
    };
    if scenario.experiment.kind != axis.kind() || !present {
        return Err(SweepError::AxisMismatch { axis, expected: axis.kind(), found: scenario.experiment.kind });
    }
    Ok(())
}

/// Runs the sweep on a pool of `jobs` threads. Work items are collected in
/// a fixed order, so the table does not depend on `jobs`.
pub fn sweep(scenario: &Scenario, axis: Axis, seeds: &[u64], jobs: usize) -> Result<SweepTable, SweepError> {
    check_axis(scenario, axis)?;
    if seeds.is_empty() {
        return Err(SweepError::NoSeeds);
    }
    let diagnostics = scenario.diagnostics();
    if !diagnostics.is_empty() {
        return Err(SimError::Scenario(crate::scenario::ScenarioError::Invalid(diagnostics)).into());
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| SweepError::Pool(e.to_string()))?;
    pool.install(|| match axis {
        Axis::NCells => n_cells_sweep(scenario, seeds),
        Axis::Ru => ru_sweep(scenario, seeds),
        Axis::Framework => framework_sweep(scenario, seeds),
    })
}

fn n_cells_sweep(scenario: &Scenario, seeds: &[u64]) -> Result<SweepTable, SweepError> {
    let spec = scenario.pdcch_experiment.as_ref().expect("checked by check_axis");
    let coreset = CoresetModel::with_total(scenario.pdcch.coreset_cces);
    let per_seed: Vec<Vec<SweepRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let rows = gain_curves(&spec.load, &coreset, spec.n_cells.iter().copied(), spec.trials, seed)?;
            Ok(rows
                .into_iter()
                .map(|g| SweepRow {
                    point: g.n.to_string(),
                    seed,
                    values: vec![
                        g.blocking_sc,
                        g.blocking_mc,
                        g.blocking_gain,
                        g.blocking_gain_relative,
                        g.cce_sc,
                        g.cce_mc,
                        g.cce_saving_gain,
                    ],
                })
                .collect())
        })
        .collect::<Result<_, SweepError>>()?;
    let points: Vec<String> = spec.n_cells.iter().map(u32::to_string).collect();
    finish(Axis::NCells, N_CELLS_METRICS.to_vec(), &points, per_seed.into_iter().flatten().collect())
}

fn ru_sweep(scenario: &Scenario, seeds: &[u64]) -> Result<SweepTable, SweepError> {
    let spec = scenario.energy.as_ref().expect("checked by check_axis");
    let setup = scenario.energy_setup().map_err(|v| {
        SimError::Scenario(crate::scenario::ScenarioError::Invalid(vec![v]))
    })?;
    let work: Vec<(f64, u64)> = spec.ru_grid.iter().flat_map(|&ru| seeds.iter().map(move |&s| (ru, s))).collect();
    let rows: Vec<SweepRow> = work
        .par_iter()
        .map(|&(ru, seed)| {
            let p = energy_saving_gain(&setup, ru, seed)?;
            Ok(SweepRow {
                point: ru.to_string(),
                seed,
                values: vec![
                    p.ru_target,
                    p.ru_achieved,
                    p.arrival_rate_per_s,
                    p.gain,
                    p.network_gain,
                    p.mean_upt_withssb,
                    p.mean_upt_ssbless,
                    p.upt_delta,
                    p.energy_withssb,
                ],
            })
        })
        .collect::<Result<_, SweepError>>()?;
    let points: Vec<String> = spec.ru_grid.iter().map(f64::to_string).collect();
    finish(Axis::Ru, RU_METRICS.to_vec(), &points, rows)
}

fn framework_sweep(scenario: &Scenario, seeds: &[u64]) -> Result<SweepTable, SweepError> {
    let work: Vec<(FrameworkVariant, u64)> =
        FrameworkVariant::ALL.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let reports: Vec<MetricsReport> =
        work.par_iter().map(|&(v, seed)| run(scenario, seed, Some(v))).collect::<Result<_, SimError>>()?;
    let baseline = |seed: u64| {
        reports
            .iter()
            .find(|r| r.seed == seed && r.framework == Some(FrameworkVariant::Baseline))
            .map_or(0.0, |r| r.mean_upt_mbps)
    };
    let rows = reports
        .iter()
        .map(|r| {
            let b = baseline(r.seed);
            SweepRow {
                point: r.framework.expect("sweep sets a variant").to_string(),
                seed: r.seed,
                values: vec![
                    r.mean_upt_mbps,
                    if b > 0.0 { r.mean_upt_mbps / b - 1.0 } else { 0.0 },
                    r.completed_files as f64,
                    r.incomplete_files as f64,
                    r.blocking_rate,
                    r.cce_saving,
                    r.served_bits,
                    r.energy_joules,
                ],
            }
        })
        .collect();
    let points: Vec<String> = FrameworkVariant::ALL.iter().map(ToString::to_string).collect();
    finish(Axis::Framework, FRAMEWORK_METRICS.to_vec(), &points, rows)
}

fn finish(axis: Axis, metrics: Vec<&'static str>, points: &[String], rows: Vec<SweepRow>) -> Result<SweepTable, SweepError> {
    let aggregates = aggregate(points, &rows, metrics.len());
    Ok(SweepTable { axis, metrics, rows, aggregates })
}

/// Single-run report as a one-row CSV; per-cell RU becomes `ru_<cell>`
/// columns.
pub fn write_report_csv<W: Write>(report: &MetricsReport, seed_defaulted: bool, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "scenario",
        "seed",
        "seed_source",
        "config_digest",
        "framework",
        "mean_upt_mbps",
        "completed_files",
        "incomplete_files",
        "blocking_rate",
        "cce_saving",
        "energy_joules",
        "arrived_bits",
        "served_bits",
        "pending_bits",
    ]
    .map(String::from)
    .to_vec();
    header.extend(report.ru_per_cell.keys().map(|c| format!("ru_{c}")));
    w.write_record(&header)?;
    let mut rec = vec![
        report.scenario.clone(),
        report.seed.to_string(),
        if seed_defaulted { "default" } else { "flag" }.to_string(),
        report.config_digest.clone(),
        report.framework.map_or_else(|| "scenario".to_string(), |v| v.to_string()),
        report.mean_upt_mbps.to_string(),
        report.completed_files.to_string(),
        report.incomplete_files.to_string(),
        report.blocking_rate.to_string(),
        report.cce_saving.to_string(),
        report.energy_joules.to_string(),
        report.arrived_bits.to_string(),
        report.served_bits.to_string(),
        report.pending_bits.to_string(),
    ];
    rec.extend(report.ru_per_cell.values().map(f64::to_string));
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

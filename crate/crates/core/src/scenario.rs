//! Scenario files: the TOML description of a simulated deployment and the
//! experiment to run on it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cell_config::{apply_config, ActivationShape, CellTable, ConfigError, ConfigPlan};
use crate::energy::{EnergySetup, PowerModel, SsbConfig};
use crate::ids::{BandId, CarrierId, CellId};
use crate::pdcch::{CoresetModel, LoadSpec, SchedulingMode};
use crate::spectrum::{validate_cell, Band, Carrier, Catalog, CellRole, SsbMode, Violation};
use crate::traffic::TrafficModel;
use crate::tx_switching::{FrameworkVariant, SwitchingConfig, UlMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// A plain simulation run.
    Run,
    PdcchBlocking,
    UlSwitching,
    EnergySaving,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub horizon_ticks: u64,
    /// Seeds a sweep runs when none are given on the command line.
    #[serde(default = "one")]
    pub seeds: u32,
}

fn default_se_min() -> f64 {
    0.5
}
fn default_se_max() -> f64 {
    6.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralEfficiency {
    /// Drawn once per (UE, carrier), log-uniform in bits/s/Hz.
    LogUniform {
        #[serde(default = "default_se_min")]
        min: f64,
        #[serde(default = "default_se_max")]
        max: f64,
    },
    /// Same value for every UE.
    Fixed { values: BTreeMap<CarrierId, f64> },
}

impl Default for SpectralEfficiency {
    fn default() -> Self {
        Self::LogUniform { min: default_se_min(), max: default_se_max() }
    }
}

fn default_quality() -> [f64; 2] {
    [0.1, 0.6]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub count: u32,
    #[serde(default)]
    pub spectral_efficiency: SpectralEfficiency,
    /// Log-uniform range of the PDCCH code-rate threshold per UE.
    #[serde(default = "default_quality")]
    pub pdcch_quality: [f64; 2],
}

fn default_cces() -> u32 {
    54
}
fn default_mode() -> SchedulingMode {
    SchedulingMode::MultiCell
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdcchSpec {
    #[serde(default = "default_cces")]
    pub coreset_cces: u32,
    #[serde(default = "default_mode")]
    pub mode: SchedulingMode,
}

impl Default for PdcchSpec {
    fn default() -> Self {
        Self { coreset_cces: default_cces(), mode: default_mode() }
    }
}

fn default_n_cells() -> Vec<u32> {
    (2..=7).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdcchExperimentSpec {
    pub load: LoadSpec,
    #[serde(default = "default_n_cells")]
    pub n_cells: Vec<u32>,
    pub trials: u64,
}

fn default_overhead() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    /// SSB-less candidate SCell; its DL carrier carries the traffic.
    pub scell: CellId,
    pub spectral_efficiency: f64,
    pub file_size_bits: f64,
    #[serde(default = "default_overhead")]
    pub ssb_overhead: f64,
    pub ru_grid: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptAction {
    Activate,
    Deactivate,
    /// Stop SSB transmission on the cell.
    SsbOff,
    /// Wake-up fallback: resume SSB transmission.
    SsbOn,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEvent {
    /// Tick the command is sent; it takes effect after the activation delay.
    pub tick: u64,
    pub cell: CellId,
    pub action: ScriptAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ActivationShape>,
}

fn default_delay() -> u64 {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Modelling assumptions, kept with the scenario for reference.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assumptions: Vec<String>,
    pub experiment: ExperimentSpec,
    pub bands: Vec<Band>,
    pub carriers: Vec<Carrier>,
    pub plan: ConfigPlan,
    /// Ticks between a MAC-CE command and its effect.
    #[serde(default = "default_delay")]
    pub activation_delay_ticks: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<ScriptEvent>,
    pub ues: UeSpec,
    pub traffic: TrafficModel,
    #[serde(default)]
    pub pdcch: PdcchSpec,
    #[serde(default)]
    pub power: PowerModel,
    #[serde(default)]
    pub ssb: SsbConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switching: Option<SwitchingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdcch_experiment: Option<PdcchExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergySpec>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("scenario is invalid:\n{}", render_diagnostics(.0))]
    Invalid(Vec<Violation>),
}

pub fn render_diagnostics(d: &[Violation]) -> String {
    d.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n")
}

pub mod rules {
    pub const PLAN_SETTING: &str = "plan.setting";
    pub const PLAN_DUPLICATE: &str = "plan.duplicate_cell";
    pub const PLAN_UNKNOWN_CELL: &str = "plan.unknown_cell";
    pub const PLAN_TAG: &str = "plan.tag";
    pub const PLAN_TRANSITION: &str = "plan.transition";
    pub const PLAN_SHAPE: &str = "plan.shape";
    pub const PLAN_PCELL: &str = "plan.pcell";
    pub const PLAN_SCHEDULER: &str = "plan.scheduler";
    pub const SCRIPT_CELL: &str = "script.cell";
    pub const SCRIPT_SHAPE: &str = "script.shape";
    pub const EXPERIMENT_HORIZON: &str = "experiment.horizon";
    pub const EXPERIMENT_SEEDS: &str = "experiment.seeds";
    pub const EXPERIMENT_SECTION: &str = "experiment.section";
    pub const UES_COUNT: &str = "ues.count";
    pub const UES_SE: &str = "ues.spectral_efficiency";
    pub const UES_QUALITY: &str = "ues.pdcch_quality";
    pub const TRAFFIC: &str = "traffic.model";
    pub const PDCCH_CORESET: &str = "pdcch.coreset";
    pub const PDCCH_LOAD: &str = "pdcch_experiment.load";
    pub const PDCCH_RANGE: &str = "pdcch_experiment.n_cells";
    pub const PDCCH_TRIALS: &str = "pdcch_experiment.trials";
    pub const POWER: &str = "power.model";
    pub const SSB: &str = "ssb.config";
    pub const SWITCHING: &str = "switching.config";
    pub const SWITCHING_BAND: &str = "switching.band";
    pub const ENERGY_SCELL: &str = "energy.scell";
    pub const ENERGY_SETUP: &str = "energy.setup";
    pub const ENERGY_GRID: &str = "energy.ru_grid";
}

fn config_error_rule(e: &ConfigError) -> &'static str {
    match e {
        ConfigError::SettingViolation { .. } => rules::PLAN_SETTING,
        ConfigError::InvalidCell { .. } | ConfigError::Spectrum(_) => "cell.invalid",
        ConfigError::UnknownCell(_) => rules::PLAN_UNKNOWN_CELL,
        ConfigError::DuplicateCell(_) => rules::PLAN_DUPLICATE,
        ConfigError::TagConstraintViolation { .. } => rules::PLAN_TAG,
        ConfigError::InvalidTransition { .. } => rules::PLAN_TRANSITION,
        ConfigError::ShapeUnavailable { .. } => rules::PLAN_SHAPE,
        ConfigError::PCellDeactivation => rules::PLAN_PCELL,
        ConfigError::NoSchedulerAvailable(_) => rules::PLAN_SCHEDULER,
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("scenario types always serialize")
    }

    /// Hex SHA-256 of the rendered scenario.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    pub fn catalog(&self) -> Result<Catalog, ScenarioError> {
        let (catalog, violations) = Catalog::build(self.bands.clone(), self.carriers.clone());
        if violations.is_empty() {
            Ok(catalog)
        } else {
            Err(ScenarioError::Invalid(violations))
        }
    }

    /// Cell table after configuration and the initial activations. The
    /// PCell is activated first.
    pub fn initial_table(&self, catalog: &Catalog) -> Result<CellTable, ConfigError> {
        let mut table = apply_config(&self.plan, catalog)?;
        let pcells: Vec<CellId> =
            self.plan.configured_cells.iter().filter(|c| c.role == CellRole::PCell).map(|c| c.cell_id.clone()).collect();
        for id in &pcells {
            table.activate(&crate::cell_config::ActivationDirective { cell_id: id.clone(), shape: ActivationShape::Full })?;
        }
        for d in &self.plan.activation_directives {
            if !pcells.contains(&d.cell_id) {
                table.activate(d)?;
            }
        }
        table.cross_carrier_links()?;
        Ok(table)
    }

    /// Switching configuration in force: the scenario's own, else F1 over
    /// the bands of all UL-capable carriers.
    pub fn effective_switching(&self, variant: Option<FrameworkVariant>) -> SwitchingConfig {
        let base = self.switching.clone().unwrap_or_else(|| {
            let mut bands: Vec<BandId> = Vec::new();
            for c in &self.carriers {
                if c.direction.usable_ul() && !bands.contains(&c.band_id) {
                    bands.push(c.band_id.clone());
                }
            }
            if bands.len() == 1 {
                bands.push(BandId::new(format!("{}~", bands[0])));
            }
            SwitchingConfig::new(bands, crate::tx_switching::Framework::F1DynamicAll, UlMode::DualUl)
        });
        match variant {
            Some(v) => base.variant(v),
            None => base,
        }
    }

    pub fn energy_setup(&self) -> Result<EnergySetup, Violation> {
        let spec = self
            .energy
            .as_ref()
            .ok_or_else(|| Violation::new(rules::EXPERIMENT_SECTION, &self.name, "energy section missing"))?;
        let cell = self
            .plan
            .configured_cells
            .iter()
            .find(|c| c.cell_id == spec.scell)
            .ok_or_else(|| Violation::new(rules::ENERGY_SCELL, &spec.scell, "not a configured cell"))?;
        let carrier = cell
            .dl_carrier
            .as_ref()
            .and_then(|d| self.carriers.iter().find(|c| &c.carrier_id == d))
            .ok_or_else(|| Violation::new(rules::ENERGY_SCELL, &spec.scell, "cell has no DL carrier"))?;
        Ok(EnergySetup {
            carrier: carrier.clone(),
            power: self.power.clone(),
            ssb: self.ssb.clone(),
            file_size_bits: spec.file_size_bits,
            spectral_efficiency: spec.spectral_efficiency,
            ssb_overhead: spec.ssb_overhead,
            horizon_ticks: self.experiment.horizon_ticks,
            other_cells: (self.plan.configured_cells.len() as u32).saturating_sub(1),
        })
    }

    /// Every violation found, each tagged with a rule identifier.
    pub fn diagnostics(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (catalog, violations) = Catalog::build(self.bands.clone(), self.carriers.clone());
        out.extend(violations);

        let mut cells_ok = true;
        for cell in &self.plan.configured_cells {
            match validate_cell(cell, &catalog) {
                Ok(r) => {
                    cells_ok &= r.is_ok();
                    out.extend(r.violations);
                }
                Err(e) => {
                    cells_ok = false;
                    out.push(Violation::new("cell.reference", &cell.cell_id, e.to_string()));
                }
            }
        }
        if cells_ok {
            if let Err(e) = self.initial_table(&catalog) {
                let subject = match &e {
                    ConfigError::SettingViolation { cell, .. }
                    | ConfigError::TagConstraintViolation { cell, .. }
                    | ConfigError::InvalidTransition { cell, .. }
                    | ConfigError::ShapeUnavailable { cell, .. }
                    | ConfigError::InvalidCell { cell, .. } => cell.to_string(),
                    ConfigError::UnknownCell(c) | ConfigError::DuplicateCell(c) | ConfigError::NoSchedulerAvailable(c) => {
                        c.to_string()
                    }
                    _ => "plan".to_string(),
                };
                out.push(Violation::new(config_error_rule(&e), subject, e.to_string()));
            }
        }
        if !self.plan.configured_cells.iter().any(|c| c.role == CellRole::PCell) {
            out.push(Violation::new(rules::PLAN_PCELL, "plan", "no PCell configured"));
        }
        for ev in &self.script {
            if !self.plan.configured_cells.iter().any(|c| c.cell_id == ev.cell) {
                out.push(Violation::new(rules::SCRIPT_CELL, &ev.cell, "script names an unconfigured cell"));
            }
            if (ev.action == ScriptAction::Activate) != ev.shape.is_some() {
                out.push(Violation::new(rules::SCRIPT_SHAPE, &ev.cell, "activation needs a shape and only activation"));
            }
        }

        self.check_experiment(&mut out);
        self.check_models(&mut out, &catalog);
        out
    }

    fn check_experiment(&self, out: &mut Vec<Violation>) {
        let e = &self.experiment;
        if e.horizon_ticks == 0 {
            out.push(Violation::new(rules::EXPERIMENT_HORIZON, &self.name, "horizon must be positive"));
        }
        if e.seeds == 0 {
            out.push(Violation::new(rules::EXPERIMENT_SEEDS, &self.name, "at least one seed"));
        }
        match e.kind {
            ExperimentKind::PdcchBlocking => match &self.pdcch_experiment {
                None => out.push(Violation::new(rules::EXPERIMENT_SECTION, &self.name, "pdcch_experiment section missing")),
                Some(p) => {
                    if let Err(err) = p.load.validate() {
                        out.push(Violation::new(rules::PDCCH_LOAD, &self.name, err.to_string()));
                    }
                    if let Some(&n) = p.n_cells.iter().find(|n| !(2..=7).contains(*n)) {
                        out.push(Violation::new(rules::PDCCH_RANGE, &self.name, format!("{n} outside 2..=7")));
                    }
                    if p.trials == 0 {
                        out.push(Violation::new(rules::PDCCH_TRIALS, &self.name, "at least one trial"));
                    }
                }
            },
            ExperimentKind::EnergySaving => match self.energy_setup() {
                Err(v) => out.push(v),
                Ok(setup) => {
                    if let Err(err) = setup.validate() {
                        out.push(Violation::new(rules::ENERGY_SETUP, &self.name, err.to_string()));
                    }
                    let grid = &self.energy.as_ref().expect("checked by energy_setup").ru_grid;
                    if grid.is_empty() || grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                        out.push(Violation::new(rules::ENERGY_GRID, &self.name, "RU grid values must lie in (0, 1)"));
                    }
                }
            },
            ExperimentKind::UlSwitching | ExperimentKind::Run => {}
        }
    }

    fn check_models(&self, out: &mut Vec<Violation>, catalog: &Catalog) {
        let needs_ues = matches!(self.experiment.kind, ExperimentKind::Run | ExperimentKind::UlSwitching);
        if needs_ues && self.ues.count == 0 {
            out.push(Violation::new(rules::UES_COUNT, &self.name, "at least one UE"));
        }
        match &self.ues.spectral_efficiency {
            SpectralEfficiency::LogUniform { min, max } => {
                if !(*min > 0.0 && min <= max && max.is_finite()) {
                    out.push(Violation::new(rules::UES_SE, &self.name, "need 0 < min <= max"));
                }
            }
            SpectralEfficiency::Fixed { values } => {
                for (c, v) in values {
                    if catalog.carrier(c).is_none() || !(*v >= 0.0 && v.is_finite()) {
                        out.push(Violation::new(rules::UES_SE, c, "unknown carrier or invalid value"));
                    }
                }
            }
        }
        let [qlo, qhi] = self.ues.pdcch_quality;
        if !(qlo > 0.0 && qlo <= qhi && qhi <= 1.0) {
            out.push(Violation::new(rules::UES_QUALITY, &self.name, "need 0 < min <= max <= 1"));
        }
        if let Err(e) = self.traffic.validate() {
            out.push(Violation::new(rules::TRAFFIC, &self.name, e.to_string()));
        }
        if let Err(e) = CoresetModel::with_total(self.pdcch.coreset_cces).validate() {
            out.push(Violation::new(rules::PDCCH_CORESET, &self.name, e.to_string()));
        }
        if let Err(e) = self.power.validate() {
            out.push(Violation::new(rules::POWER, &self.name, e.to_string()));
        }
        if let Err(e) = self.ssb.validate() {
            out.push(Violation::new(rules::SSB, &self.name, e.to_string()));
        }
        if let Some(sw) = &self.switching {
            if let Err(e) = sw.validate() {
                out.push(Violation::new(rules::SWITCHING, &self.name, e.to_string()));
            }
            for b in &sw.bands {
                if catalog.band(b).is_none() {
                    out.push(Violation::new(rules::SWITCHING_BAND, b, "switching band not in the catalog"));
                }
            }
        } else if needs_ues {
            let n = self.effective_switching(None).bands.len();
            if n > 4 {
                out.push(Violation::new(rules::SWITCHING, &self.name, format!("{n} UL bands need an explicit switching section")));
            }
        }
    }

    /// Parses and validates in one step.
    pub fn load(text: &str) -> Result<Self, ScenarioError> {
        let s = Self::parse(text)?;
        let d = s.diagnostics();
        if d.is_empty() {
            Ok(s)
        } else {
            Err(ScenarioError::Invalid(d))
        }
    }

    /// Whether a cell starts without SSB.
    pub fn initial_ssb_mode(&self, cell: &CellId) -> Option<SsbMode> {
        self.plan.configured_cells.iter().find(|c| &c.cell_id == cell).map(|c| c.ssb_mode)
    }
}

//! Cell configuration and activation.
//!
//! Setting #1 configures legacy cells only and lets activation expose a
//! DL-only or UL-only part of a configured cell. Setting #2 configures
//! flexible cells directly and activation never changes a cell's carriers.
//! A cell exposing only a UL carrier can be activated only while another
//! activated cell with a DL carrier sits in the same timing-advance group.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CarrierId, CellId, TagId};
use crate::spectrum::{
    validate_cell, Catalog, CellMode, CellRole, CellState, ServingCell, SpectrumError, SsbMode, Violation,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Setting1,
    Setting2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationShape {
    Full,
    DlOnlyPart,
    UlOnlyPart,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationDirective {
    pub cell_id: CellId,
    pub shape: ActivationShape,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigPlan {
    pub setting: Setting,
    pub configured_cells: Vec<ServingCell>,
    #[serde(default)]
    pub activation_directives: Vec<ActivationDirective>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagGroup {
    pub tag_id: TagId,
    pub member_cells: BTreeSet<CellId>,
}

impl TagGroup {
    /// Groups cells by their `tag_id`.
    pub fn from_cells<'a>(cells: impl IntoIterator<Item = &'a ServingCell>) -> Vec<TagGroup> {
        let mut by_tag: BTreeMap<TagId, BTreeSet<CellId>> = BTreeMap::new();
        for c in cells {
            by_tag.entry(c.tag_id.clone()).or_default().insert(c.cell_id.clone());
        }
        by_tag.into_iter().map(|(tag_id, member_cells)| TagGroup { tag_id, member_cells }).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("setting violation on {cell}: {reason}")]
    SettingViolation { cell: CellId, reason: &'static str },
    #[error("cell {cell} is invalid: {violations:?}")]
    InvalidCell { cell: CellId, violations: Vec<Violation> },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("unknown cell {0}")]
    UnknownCell(CellId),
    #[error("cell {0} configured twice")]
    DuplicateCell(CellId),
    #[error("cell {cell} needs an activated DL-bearing cell in TAG {tag}")]
    TagConstraintViolation { cell: CellId, tag: TagId },
    #[error("cell {cell} cannot {action} from state {from:?}")]
    InvalidTransition { cell: CellId, from: CellState, action: &'static str },
    #[error("cell {cell} has no carrier for shape {shape:?}")]
    ShapeUnavailable { cell: CellId, shape: ActivationShape },
    #[error("the PCell cannot be deactivated")]
    PCellDeactivation,
    #[error("no activated DL-bearing cell can schedule {0}")]
    NoSchedulerAvailable(CellId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TaSignal {
    Srs,
    Prach,
}

/// Abstract procedure records consumed by the simulation loop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ActivationEvent {
    MacCeActivation { cell: CellId },
    /// Uplink transmission for timing-advance adjustment of a UL-only cell.
    TaSounding { cell: CellId, signal: TaSignal },
    Deactivation { cell: CellId },
}

/// A configured cell together with the carriers activation exposed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellEntry {
    pub cell: ServingCell,
    pub exposed_dl: Option<CarrierId>,
    pub exposed_ul: Option<CarrierId>,
}

impl CellEntry {
    pub fn configured(cell: ServingCell) -> Self {
        Self { cell: ServingCell { state: CellState::Configured, ..cell }, exposed_dl: None, exposed_ul: None }
    }

    pub fn id(&self) -> &CellId {
        &self.cell.cell_id
    }

    pub fn state(&self) -> CellState {
        self.cell.state
    }

    pub fn is_active(&self) -> bool {
        self.cell.state == CellState::Activated
    }

    pub fn active_dl(&self) -> Option<&CarrierId> {
        self.exposed_dl.as_ref().filter(|_| self.is_active())
    }

    pub fn active_ul(&self) -> Option<&CarrierId> {
        self.exposed_ul.as_ref().filter(|_| self.is_active())
    }

    pub fn is_active_ul_only(&self) -> bool {
        self.is_active() && self.exposed_dl.is_none() && self.exposed_ul.is_some()
    }

    /// Configured carriers the current activation does not expose.
    pub fn reserved_carriers(&self) -> Vec<&CarrierId> {
        if !self.is_active() {
            return Vec::new();
        }
        let mut out = Vec::new();
        if let Some(d) = &self.cell.dl_carrier {
            if self.exposed_dl.is_none() {
                out.push(d);
            }
        }
        if let Some(u) = &self.cell.ul_carrier {
            if self.exposed_ul.is_none() && Some(u) != self.cell.dl_carrier.as_ref() {
                out.push(u);
            }
        }
        out
    }
}

/// The cell-state table owned by the simulation loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellTable {
    setting: Setting,
    entries: BTreeMap<CellId, CellEntry>,
    tags: Vec<TagGroup>,
}

/// Configures the cells of `plan`.
///
/// Under setting #1 only legacy cells may be configured; under setting #2
/// every activation directive must be `full`.
pub fn apply_config(plan: &ConfigPlan, catalog: &Catalog) -> Result<CellTable, ConfigError> {
    let mut entries = BTreeMap::new();
    for cell in &plan.configured_cells {
        if plan.setting == Setting::Setting1 {
            if cell.mode == CellMode::Enhanced {
                return Err(ConfigError::SettingViolation {
                    cell: cell.cell_id.clone(),
                    reason: "setting1 configures legacy cells only",
                });
            }
            if cell.is_ul_only() {
                return Err(ConfigError::SettingViolation {
                    cell: cell.cell_id.clone(),
                    reason: "setting1 cannot configure a UL-only cell",
                });
            }
        }
        let report = validate_cell(cell, catalog)?;
        if !report.is_ok() {
            return Err(ConfigError::InvalidCell { cell: cell.cell_id.clone(), violations: report.violations });
        }
        if entries.insert(cell.cell_id.clone(), CellEntry::configured(cell.clone())).is_some() {
            return Err(ConfigError::DuplicateCell(cell.cell_id.clone()));
        }
    }
    for d in &plan.activation_directives {
        if !entries.contains_key(&d.cell_id) {
            return Err(ConfigError::UnknownCell(d.cell_id.clone()));
        }
        if plan.setting == Setting::Setting2 && d.shape != ActivationShape::Full {
            return Err(ConfigError::SettingViolation {
                cell: d.cell_id.clone(),
                reason: "setting2 activation cannot change carrier association",
            });
        }
    }
    let tags = TagGroup::from_cells(&plan.configured_cells);
    Ok(CellTable { setting: plan.setting, entries, tags })
}

impl CellTable {
    /// Builds a table from entries in arbitrary states; TAGs follow the
    /// cells' `tag_id`.
    pub fn from_entries(setting: Setting, entries: impl IntoIterator<Item = CellEntry>) -> Self {
        let entries: BTreeMap<_, _> = entries.into_iter().map(|e| (e.id().clone(), e)).collect();
        let tags = TagGroup::from_cells(entries.values().map(|e| &e.cell));
        Self { setting, entries, tags }
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn tags(&self) -> &[TagGroup] {
        &self.tags
    }

    pub fn get(&self, id: &CellId) -> Option<&CellEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CellEntry> {
        self.entries.values()
    }

    pub fn active(&self) -> impl Iterator<Item = &CellEntry> {
        self.entries.values().filter(|e| e.is_active())
    }

    /// Activates using the table's own TAGs.
    pub fn activate(&mut self, directive: &ActivationDirective) -> Result<Vec<ActivationEvent>, ConfigError> {
        let tags = self.tags.clone();
        self.activate_with_tags(directive, &tags)
    }

    pub fn activate_with_tags(
        &mut self,
        directive: &ActivationDirective,
        tags: &[TagGroup],
    ) -> Result<Vec<ActivationEvent>, ConfigError> {
        let id = &directive.cell_id;
        let entry = self.entries.get(id).ok_or_else(|| ConfigError::UnknownCell(id.clone()))?;
        if entry.state() == CellState::Activated {
            return Err(ConfigError::InvalidTransition { cell: id.clone(), from: entry.state(), action: "activate" });
        }
        if self.setting == Setting::Setting2 && directive.shape != ActivationShape::Full {
            return Err(ConfigError::SettingViolation {
                cell: id.clone(),
                reason: "setting2 activation cannot change carrier association",
            });
        }
        let cell = &entry.cell;
        let (dl, ul) = match directive.shape {
            ActivationShape::Full => (cell.dl_carrier.clone(), cell.ul_carrier.clone()),
            ActivationShape::DlOnlyPart => (cell.dl_carrier.clone(), None),
            ActivationShape::UlOnlyPart => (None, cell.ul_carrier.clone()),
        };
        if dl.is_none() && ul.is_none() {
            return Err(ConfigError::ShapeUnavailable { cell: id.clone(), shape: directive.shape });
        }

        let mut events = vec![ActivationEvent::MacCeActivation { cell: id.clone() }];
        if dl.is_none() {
            let tag = cell.tag_id.clone();
            let group = tags
                .iter()
                .find(|g| g.tag_id == tag && g.member_cells.contains(id))
                .ok_or_else(|| ConfigError::TagConstraintViolation { cell: id.clone(), tag: tag.clone() })?;
            let siblings: Vec<&CellEntry> =
                group.member_cells.iter().filter(|m| *m != id).filter_map(|m| self.entries.get(m)).collect();
            if !siblings.iter().any(|s| s.active_dl().is_some()) {
                return Err(ConfigError::TagConstraintViolation { cell: id.clone(), tag });
            }
            // TA is already known when some TAG member transmits UL.
            let signal = if siblings.iter().any(|s| s.active_ul().is_some()) { TaSignal::Srs } else { TaSignal::Prach };
            events.push(ActivationEvent::TaSounding { cell: id.clone(), signal });
        }

        let entry = self.entries.get_mut(id).expect("checked above");
        entry.exposed_dl = dl;
        entry.exposed_ul = ul;
        entry.cell.state = CellState::Activated;
        Ok(events)
    }

    /// Deactivates an SCell. Refused when it would leave an activated
    /// UL-only cell without a DL-bearing TAG sibling.
    pub fn deactivate(&mut self, id: &CellId) -> Result<Vec<ActivationEvent>, ConfigError> {
        let entry = self.entries.get(id).ok_or_else(|| ConfigError::UnknownCell(id.clone()))?;
        if entry.cell.role == CellRole::PCell {
            return Err(ConfigError::PCellDeactivation);
        }
        if !entry.is_active() {
            return Err(ConfigError::InvalidTransition { cell: id.clone(), from: entry.state(), action: "deactivate" });
        }
        if entry.active_dl().is_some() {
            let tag = entry.cell.tag_id.clone();
            let same_tag = |e: &&CellEntry| e.cell.tag_id == tag && e.id() != id;
            let other_dl = self.entries.values().filter(same_tag).any(|e| e.active_dl().is_some());
            let dependent = self.entries.values().filter(same_tag).any(|e| e.is_active_ul_only());
            if dependent && !other_dl {
                return Err(ConfigError::TagConstraintViolation { cell: id.clone(), tag });
            }
        }
        let entry = self.entries.get_mut(id).expect("checked above");
        entry.cell.state = CellState::Deactivated;
        entry.exposed_dl = None;
        entry.exposed_ul = None;
        Ok(vec![ActivationEvent::Deactivation { cell: id.clone() }])
    }

    pub fn cross_carrier_links(&self) -> Result<BTreeMap<CellId, CellId>, ConfigError> {
        cross_carrier_links(self.entries.values())
    }

    /// The (DL carriers, UL carriers) exposed by activated cells.
    pub fn active_topology(&self) -> (BTreeSet<CarrierId>, BTreeSet<CarrierId>) {
        let dl = self.active().filter_map(|e| e.exposed_dl.clone()).collect();
        let ul = self.active().filter_map(|e| e.exposed_ul.clone()).collect();
        (dl, ul)
    }

    pub fn ssb_mode(&self, id: &CellId) -> Option<SsbMode> {
        self.entries.get(id).map(|e| e.cell.ssb_mode)
    }

    pub fn set_ssb_mode(&mut self, id: &CellId, mode: SsbMode) -> Result<(), ConfigError> {
        let e = self.entries.get_mut(id).ok_or_else(|| ConfigError::UnknownCell(id.clone()))?;
        e.cell.ssb_mode = mode;
        Ok(())
    }
}

/// Maps every activated cell to the cell carrying its scheduling DCI.
///
/// Cells with their own DL and SSB schedule themselves. UL-only and SSB-less
/// cells are cross-carrier scheduled by an activated SSB-bearing cell with
/// DL, preferring the same TAG, then the PCell, then the lowest cell id.
pub fn cross_carrier_links<'a>(
    cells: impl IntoIterator<Item = &'a CellEntry>,
) -> Result<BTreeMap<CellId, CellId>, ConfigError> {
    let active: Vec<&CellEntry> = cells.into_iter().filter(|e| e.is_active()).collect();
    let can_schedule = |e: &CellEntry| e.active_dl().is_some() && e.cell.ssb_mode == SsbMode::WithSsb;
    let mut links = BTreeMap::new();
    for cell in &active {
        if can_schedule(cell) {
            links.insert(cell.id().clone(), cell.id().clone());
            continue;
        }
        let scheduler = active
            .iter()
            .filter(|o| o.id() != cell.id() && can_schedule(o))
            .min_by_key(|o| (o.cell.tag_id != cell.cell.tag_id, o.cell.role != CellRole::PCell, o.id().clone()))
            .ok_or_else(|| ConfigError::NoSchedulerAvailable(cell.id().clone()))?;
        links.insert(cell.id().clone(), scheduler.id().clone());
    }
    Ok(links)
}

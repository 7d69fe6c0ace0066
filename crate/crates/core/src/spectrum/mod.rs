//! Bands, carriers and serving cells, plus the legality rules for flexible
//! DL/UL carrier association.
//!
//! A legacy cell takes its carriers from one band: an FDD DL/UL pair, or a
//! single bidirectional TDD carrier. An enhanced cell may pair a DL carrier
//! and a UL carrier from different bands, and may be UL-only. Carriers carry
//! no propagation semantics here.

mod slot_pattern;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use slot_pattern::{parse_slot_pattern, SlotPattern, SlotType, SymbolSplit, SYMBOLS_PER_SLOT};

use crate::ids::{BandId, CarrierId, CellId, TagId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("slot pattern is empty")]
    EmptyPattern,
    #[error("invalid slot character {character:?} at position {position}")]
    InvalidCharacter { character: char, position: usize },
    #[error("special slot split {split} does not sum to 14 symbols")]
    InvalidSplit { split: SymbolSplit },
    #[error("malformed slot pattern, expected SLOTS/dl:gap:ul")]
    MalformedPattern,
    #[error("unknown carrier {0}")]
    UnknownCarrier(CarrierId),
    #[error("catalog is inconsistent: {0:?}")]
    Catalog(Vec<Violation>),
}

/// A single rule violation with a stable rule identifier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub subject: String,
    pub detail: String,
}

impl Violation {
    pub fn new(rule: &'static str, subject: impl fmt::Display, detail: impl Into<String>) -> Self {
        Self { rule, subject: subject.to_string(), detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.subject, self.detail)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Duplex {
    Fdd,
    Tdd,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegulatoryRestriction {
    #[default]
    None,
    UlOnly,
    DlOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub band_id: BandId,
    pub duplex: Duplex,
    pub carrier_ids: Vec<CarrierId>,
    #[serde(default)]
    pub regulatory_restriction: RegulatoryRestriction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierDirection {
    Dl,
    Ul,
    Bidirectional,
}

impl CarrierDirection {
    pub fn usable_dl(self) -> bool {
        matches!(self, Self::Dl | Self::Bidirectional)
    }

    pub fn usable_ul(self) -> bool {
        matches!(self, Self::Ul | Self::Bidirectional)
    }
}

/// Subcarrier spacing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Scs {
    Khz15,
    Khz30,
    Khz60,
}

impl Scs {
    pub fn khz(self) -> u32 {
        match self {
            Self::Khz15 => 15,
            Self::Khz30 => 30,
            Self::Khz60 => 60,
        }
    }

    /// Slots per millisecond.
    pub fn slots_per_ms(self) -> u32 {
        self.khz() / 15
    }

    pub fn slot_duration_s(self) -> f64 {
        1e-3 / f64::from(self.slots_per_ms())
    }

    pub fn symbol_duration_us(self) -> f64 {
        self.slot_duration_s() * 1e6 / f64::from(SYMBOLS_PER_SLOT)
    }

    /// Symbols of this numerology inside one simulation tick.
    pub fn symbols_per_tick(self) -> u32 {
        SYMBOLS_PER_SLOT * self.slots_per_ms() * TICK_US / 1000
    }
}

/// Common simulation time step, one 30 kHz slot.
pub const TICK_US: u32 = 500;

/// Symbol budget of one carrier during one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickSymbols {
    pub dl: u32,
    pub ul: u32,
    pub total: u32,
    pub symbol_us: f64,
}

impl TryFrom<u32> for Scs {
    type Error = String;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        match v {
            15 => Ok(Self::Khz15),
            30 => Ok(Self::Khz30),
            60 => Ok(Self::Khz60),
            other => Err(format!("unsupported subcarrier spacing {other} kHz")),
        }
    }
}

impl From<Scs> for u32 {
    fn from(s: Scs) -> u32 {
        s.khz()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Carrier {
    pub carrier_id: CarrierId,
    pub band_id: BandId,
    pub direction: CarrierDirection,
    pub center_freq_mhz: f64,
    pub bandwidth_mhz: f64,
    pub scs_khz: Scs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_pattern: Option<SlotPattern>,
}

impl Carrier {
    /// Symbol split of this carrier in its own slot `slot_index`.
    /// Paired-spectrum carriers are all-DL or all-UL in every slot.
    pub fn symbols(&self, slot_index: u64) -> SymbolSplit {
        match (self.direction, &self.slot_pattern) {
            (CarrierDirection::Dl, _) => SymbolSplit::ALL_DL,
            (CarrierDirection::Ul, _) => SymbolSplit::ALL_UL,
            (CarrierDirection::Bidirectional, Some(p)) => p.slot_direction(slot_index),
            // Catalog construction rejects a bidirectional carrier without a pattern.
            (CarrierDirection::Bidirectional, None) => SymbolSplit::new(7, 0, 7),
        }
    }

    /// DL and UL symbols falling inside simulation tick `tick`. A 15 kHz
    /// slot spans two ticks; a 60 kHz tick spans two slots.
    pub fn tick_symbols(&self, tick: u64) -> TickSymbols {
        let per_tick = self.scs_khz.symbols_per_tick();
        let first = tick * u64::from(per_tick);
        let (mut dl, mut ul) = (0, 0);
        let mut slot = u64::MAX;
        let mut split = SymbolSplit::ALL_DL;
        for idx in first..first + u64::from(per_tick) {
            let s = idx / u64::from(SYMBOLS_PER_SLOT);
            if s != slot {
                slot = s;
                split = self.symbols(s);
            }
            let pos = (idx % u64::from(SYMBOLS_PER_SLOT)) as u32;
            if pos < split.dl {
                dl += 1;
            } else if pos >= SYMBOLS_PER_SLOT - split.ul {
                ul += 1;
            }
        }
        TickSymbols { dl, ul, total: per_tick, symbol_us: self.scs_khz.symbol_duration_us() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellRole {
    PCell,
    SCell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    Legacy,
    Enhanced,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    #[default]
    Configured,
    Activated,
    Deactivated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsbMode {
    #[default]
    WithSsb,
    SsbLess,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServingCell {
    pub cell_id: CellId,
    pub role: CellRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_carrier: Option<CarrierId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ul_carrier: Option<CarrierId>,
    pub mode: CellMode,
    #[serde(default)]
    pub state: CellState,
    pub tag_id: TagId,
    #[serde(default)]
    pub ssb_mode: SsbMode,
}

impl ServingCell {
    pub fn is_ul_only(&self) -> bool {
        self.dl_carrier.is_none() && self.ul_carrier.is_some()
    }

    pub fn is_dl_only(&self) -> bool {
        self.dl_carrier.is_some() && self.ul_carrier.is_none()
    }
}

/// Bands and carriers indexed by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    bands: BTreeMap<BandId, Band>,
    carriers: BTreeMap<CarrierId, Carrier>,
}

impl Catalog {
    /// Builds a catalog, rejecting it if any band or carrier invariant fails.
    pub fn new(bands: Vec<Band>, carriers: Vec<Carrier>) -> Result<Self, SpectrumError> {
        let (catalog, violations) = Self::build(bands, carriers);
        if violations.is_empty() {
            Ok(catalog)
        } else {
            Err(SpectrumError::Catalog(violations))
        }
    }

    /// Builds a catalog and reports every band/carrier violation found.
    pub fn build(bands: Vec<Band>, carriers: Vec<Carrier>) -> (Self, Vec<Violation>) {
        let mut violations = Vec::new();
        let mut catalog = Catalog::default();
        for band in bands {
            if catalog.bands.contains_key(&band.band_id) {
                violations.push(Violation::new("band.duplicate", &band.band_id, "band id used twice"));
            }
            catalog.bands.insert(band.band_id.clone(), band);
        }
        for carrier in carriers {
            if catalog.carriers.contains_key(&carrier.carrier_id) {
                violations.push(Violation::new("carrier.duplicate", &carrier.carrier_id, "carrier id used twice"));
            }
            catalog.carriers.insert(carrier.carrier_id.clone(), carrier);
        }
        violations.extend(catalog.check());
        (catalog, violations)
    }

    fn check(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for carrier in self.carriers.values() {
            let id = &carrier.carrier_id;
            if !(carrier.center_freq_mhz > 0.0 && carrier.center_freq_mhz.is_finite()) {
                out.push(Violation::new("carrier.freq", id, "center frequency must be positive"));
            }
            if !(carrier.bandwidth_mhz > 0.0 && carrier.bandwidth_mhz.is_finite()) {
                out.push(Violation::new("carrier.bandwidth", id, "bandwidth must be positive"));
            }
            let bidir = carrier.direction == CarrierDirection::Bidirectional;
            if bidir != carrier.slot_pattern.is_some() {
                out.push(Violation::new(
                    "carrier.slot_pattern",
                    id,
                    "slot pattern is required exactly for bidirectional carriers",
                ));
            }
            match self.bands.get(&carrier.band_id) {
                None => out.push(Violation::new("carrier.band", id, format!("unknown band {}", carrier.band_id))),
                Some(band) => {
                    if !band.carrier_ids.contains(id) {
                        out.push(Violation::new(
                            "carrier.band",
                            id,
                            format!("band {} does not list this carrier", band.band_id),
                        ));
                    }
                    if bidir != (band.duplex == Duplex::Tdd) {
                        out.push(Violation::new(
                            "carrier.duplex",
                            id,
                            "carriers are bidirectional exactly when their band is TDD",
                        ));
                    }
                }
            }
        }
        for band in self.bands.values() {
            let id = &band.band_id;
            let mut members = Vec::new();
            for cid in &band.carrier_ids {
                match self.carriers.get(cid) {
                    Some(c) if c.band_id == band.band_id => members.push(c),
                    Some(_) => out.push(Violation::new("band.carrier", id, format!("{cid} belongs to another band"))),
                    None => out.push(Violation::new("band.carrier", id, format!("unknown carrier {cid}"))),
                }
            }
            let count = |d: CarrierDirection| members.iter().filter(|c| c.direction == d).count();
            let restriction = band.regulatory_restriction;
            match band.duplex {
                Duplex::Fdd => {
                    let needs_dl = restriction != RegulatoryRestriction::UlOnly;
                    let needs_ul = restriction != RegulatoryRestriction::DlOnly;
                    if needs_dl && count(CarrierDirection::Dl) == 0 {
                        out.push(Violation::new("band.fdd_pair", id, "FDD band needs at least one DL carrier"));
                    }
                    if needs_ul && count(CarrierDirection::Ul) == 0 {
                        out.push(Violation::new("band.fdd_pair", id, "FDD band needs at least one UL carrier"));
                    }
                }
                Duplex::Tdd => {
                    if count(CarrierDirection::Bidirectional) == 0 {
                        out.push(Violation::new("band.tdd_carrier", id, "TDD band needs a bidirectional carrier"));
                    }
                }
            }
            if restriction == RegulatoryRestriction::UlOnly && count(CarrierDirection::Dl) > 0 {
                out.push(Violation::new("band.ul_only", id, "UL-only band holds a DL carrier"));
            }
            if restriction == RegulatoryRestriction::DlOnly && count(CarrierDirection::Ul) > 0 {
                out.push(Violation::new("band.dl_only", id, "DL-only band holds a UL carrier"));
            }
        }
        out
    }

    pub fn band(&self, id: &BandId) -> Option<&Band> {
        self.bands.get(id)
    }

    pub fn carrier(&self, id: &CarrierId) -> Option<&Carrier> {
        self.carriers.get(id)
    }

    pub fn bands(&self) -> impl Iterator<Item = &Band> {
        self.bands.values()
    }

    pub fn carriers(&self) -> impl Iterator<Item = &Carrier> {
        self.carriers.values()
    }

    pub fn band_of(&self, carrier: &CarrierId) -> Option<&Band> {
        self.carriers.get(carrier).and_then(|c| self.bands.get(&c.band_id))
    }

    fn resolve(&self, id: &CarrierId) -> Result<&Carrier, SpectrumError> {
        self.carriers.get(id).ok_or_else(|| SpectrumError::UnknownCarrier(id.clone()))
    }
}

/// Outcome of [`validate_cell`]. An empty violation list means the cell is legal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

pub mod rules {
    pub const NO_CARRIER: &str = "cell.no_carrier";
    pub const DL_DIRECTION: &str = "cell.dl_direction";
    pub const UL_DIRECTION: &str = "cell.ul_direction";
    pub const LEGACY_UL_ONLY: &str = "cell.legacy_ul_only";
    pub const LEGACY_CROSS_BAND: &str = "cell.legacy_cross_band";
    pub const LEGACY_TDD_SPLIT: &str = "cell.legacy_tdd_carrier";
    pub const PCELL_CARRIERS: &str = "cell.pcell_carriers";
    pub const PCELL_SSB: &str = "cell.pcell_ssb";
    pub const REG_DL_IN_UL_ONLY: &str = "cell.regulatory_dl";
    pub const REG_UL_IN_DL_ONLY: &str = "cell.regulatory_ul";
}

/// Checks one serving cell against the association rules.
///
/// Every violated rule is reported; a dangling carrier reference is an error.
pub fn validate_cell(cell: &ServingCell, catalog: &Catalog) -> Result<ValidationReport, SpectrumError> {
    let dl = cell.dl_carrier.as_ref().map(|id| catalog.resolve(id)).transpose()?;
    let ul = cell.ul_carrier.as_ref().map(|id| catalog.resolve(id)).transpose()?;
    let id = &cell.cell_id;
    let mut v = Vec::new();

    if dl.is_none() && ul.is_none() {
        v.push(Violation::new(rules::NO_CARRIER, id, "cell has neither a DL nor a UL carrier"));
    }
    if let Some(c) = dl {
        if !c.direction.usable_dl() {
            v.push(Violation::new(rules::DL_DIRECTION, id, format!("{} cannot carry DL", c.carrier_id)));
        }
        if catalog.band(&c.band_id).map(|b| b.regulatory_restriction) == Some(RegulatoryRestriction::UlOnly) {
            v.push(Violation::new(
                rules::REG_DL_IN_UL_ONLY,
                id,
                format!("{} is in UL-only band {}", c.carrier_id, c.band_id),
            ));
        }
    }
    if let Some(c) = ul {
        if !c.direction.usable_ul() {
            v.push(Violation::new(rules::UL_DIRECTION, id, format!("{} cannot carry UL", c.carrier_id)));
        }
        if catalog.band(&c.band_id).map(|b| b.regulatory_restriction) == Some(RegulatoryRestriction::DlOnly) {
            v.push(Violation::new(
                rules::REG_UL_IN_DL_ONLY,
                id,
                format!("{} is in DL-only band {}", c.carrier_id, c.band_id),
            ));
        }
    }

    if cell.mode == CellMode::Legacy {
        if cell.is_ul_only() {
            v.push(Violation::new(rules::LEGACY_UL_ONLY, id, "legacy UL-only forbidden"));
        }
        if let (Some(d), Some(u)) = (dl, ul) {
            if d.band_id != u.band_id {
                v.push(Violation::new(
                    rules::LEGACY_CROSS_BAND,
                    id,
                    format!("legacy cell pairs band {} with band {}", d.band_id, u.band_id),
                ));
            } else if (d.direction == CarrierDirection::Bidirectional || u.direction == CarrierDirection::Bidirectional)
                && d.carrier_id != u.carrier_id
            {
                v.push(Violation::new(
                    rules::LEGACY_TDD_SPLIT,
                    id,
                    "legacy TDD cell must use one bidirectional carrier for both directions",
                ));
            }
        }
    }

    if cell.role == CellRole::PCell {
        if dl.is_none() || ul.is_none() {
            v.push(Violation::new(rules::PCELL_CARRIERS, id, "PCell needs both a DL and a UL carrier"));
        }
        if cell.ssb_mode != SsbMode::WithSsb {
            v.push(Violation::new(rules::PCELL_SSB, id, "PCell always transmits SSB"));
        }
    }

    Ok(ValidationReport { violations: v })
}

/// DL→UL carrier pairing across a set of cells, with its inverse.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AssociationMatrix {
    pub forward: BTreeMap<CarrierId, BTreeSet<CarrierId>>,
    pub inverse: BTreeMap<CarrierId, BTreeSet<CarrierId>>,
}

impl AssociationMatrix {
    pub fn ul_for(&self, dl: &CarrierId) -> Option<&BTreeSet<CarrierId>> {
        self.forward.get(dl)
    }

    pub fn dl_for(&self, ul: &CarrierId) -> Option<&BTreeSet<CarrierId>> {
        self.inverse.get(ul)
    }
}

/// DL-only and UL-only cells appear as keys with empty sets.
pub fn association_matrix<'a>(cells: impl IntoIterator<Item = &'a ServingCell>) -> AssociationMatrix {
    let mut m = AssociationMatrix::default();
    for cell in cells {
        if let Some(d) = &cell.dl_carrier {
            let set = m.forward.entry(d.clone()).or_default();
            if let Some(u) = &cell.ul_carrier {
                set.insert(u.clone());
            }
        }
        if let Some(u) = &cell.ul_carrier {
            let set = m.inverse.entry(u.clone()).or_default();
            if let Some(d) = &cell.dl_carrier {
                set.insert(d.clone());
            }
        }
    }
    m
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SpectrumError;

/// Number of OFDM symbols in a normal-CP slot.
pub const SYMBOLS_PER_SLOT: u32 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotType {
    D,
    S,
    U,
}

impl SlotType {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'D' => Some(Self::D),
            'S' => Some(Self::S),
            'U' => Some(Self::U),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Self::D => 'D',
            Self::S => 'S',
            Self::U => 'U',
        }
    }
}

/// Symbol split of one slot: DL symbols, guard symbols, UL symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct SymbolSplit {
    pub dl: u32,
    pub gap: u32,
    pub ul: u32,
}

impl SymbolSplit {
    pub const ALL_DL: Self = Self { dl: SYMBOLS_PER_SLOT, gap: 0, ul: 0 };
    pub const ALL_UL: Self = Self { dl: 0, gap: 0, ul: SYMBOLS_PER_SLOT };

    pub fn new(dl: u32, gap: u32, ul: u32) -> Self {
        Self { dl, gap, ul }
    }

    pub fn total(&self) -> u64 {
        u64::from(self.dl) + u64::from(self.gap) + u64::from(self.ul)
    }

    pub fn ul_fraction(&self) -> f64 {
        f64::from(self.ul) / f64::from(SYMBOLS_PER_SLOT)
    }

    pub fn dl_fraction(&self) -> f64 {
        f64::from(self.dl) / f64::from(SYMBOLS_PER_SLOT)
    }
}

impl From<[u32; 3]> for SymbolSplit {
    fn from(v: [u32; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<SymbolSplit> for [u32; 3] {
    fn from(s: SymbolSplit) -> Self {
        [s.dl, s.gap, s.ul]
    }
}

impl fmt::Display for SymbolSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.dl, self.gap, self.ul)
    }
}

/// A TDD frame pattern such as `DDDSUDDSUU` with the symbol split used by
/// its special slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSlotPattern", into = "RawSlotPattern")]
pub struct SlotPattern {
    slots: Vec<SlotType>,
    special_split: SymbolSplit,
}

#[derive(Serialize, Deserialize)]
struct RawSlotPattern {
    slots: String,
    split: [u32; 3],
}

impl TryFrom<RawSlotPattern> for SlotPattern {
    type Error = SpectrumError;

    fn try_from(raw: RawSlotPattern) -> Result<Self, Self::Error> {
        parse_slot_pattern(&raw.slots, SymbolSplit::from(raw.split))
    }
}

impl From<SlotPattern> for RawSlotPattern {
    fn from(p: SlotPattern) -> Self {
        RawSlotPattern { slots: p.render_slots(), split: p.special_split.into() }
    }
}

/// Parses a pattern string over `{D, S, U}` with the given special-slot
/// split.
pub fn parse_slot_pattern(text: &str, split: SymbolSplit) -> Result<SlotPattern, SpectrumError> {
    if text.is_empty() {
        return Err(SpectrumError::EmptyPattern);
    }
    let slots = text
        .chars()
        .enumerate()
        .map(|(position, c)| {
            SlotType::from_char(c).ok_or(SpectrumError::InvalidCharacter { character: c, position })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if split.total() != u64::from(SYMBOLS_PER_SLOT) {
        return Err(SpectrumError::InvalidSplit { split });
    }
    Ok(SlotPattern { slots, special_split: split })
}

impl SlotPattern {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[SlotType] {
        &self.slots
    }

    pub fn special_split(&self) -> SymbolSplit {
        self.special_split
    }

    pub fn slot_type(&self, slot_index: u64) -> SlotType {
        self.slots[(slot_index % self.slots.len() as u64) as usize]
    }

    /// Symbol counts of the slot at `slot_index`, wrapping modulo the
    /// pattern length.
    pub fn slot_direction(&self, slot_index: u64) -> SymbolSplit {
        match self.slot_type(slot_index) {
            SlotType::D => SymbolSplit::ALL_DL,
            SlotType::U => SymbolSplit::ALL_UL,
            SlotType::S => self.special_split,
        }
    }

    pub fn render_slots(&self) -> String {
        self.slots.iter().map(|s| s.as_char()).collect()
    }
}

/// Renders as `DDDSUDDSUU/10:2:2`.
impl fmt::Display for SlotPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.render_slots(), self.special_split)
    }
}

/// Parses the compact `SLOTS/dl:gap:ul` form produced by `Display`.
impl FromStr for SlotPattern {
    type Err = SpectrumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (slots, split) = s.split_once('/').ok_or(SpectrumError::MalformedPattern)?;
        let mut parts = split.split(':').map(|p| p.trim().parse::<u32>());
        let mut next = || -> Result<u32, SpectrumError> {
            parts.next().and_then(|r| r.ok()).ok_or(SpectrumError::MalformedPattern)
        };
        let (dl, gap, ul) = (next()?, next()?, next()?);
        if parts.next().is_some() {
            return Err(SpectrumError::MalformedPattern);
        }
        parse_slot_pattern(slots, SymbolSplit::new(dl, gap, ul))
    }
}

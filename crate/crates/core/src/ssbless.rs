//! Eligibility of an SCell for operation without SSB.
//!
//! Three checks against the reference cell: received time difference,
//! received-power difference, and a QCL chain from the SCell's reference
//! signals through its TRS to the SSB of an active serving cell. Inter-band
//! targets must additionally be co-sited.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::CellId;
use crate::spectrum::CellRole;

pub const DEFAULT_MAX_RTD_NS: f64 = 260.0;
pub const DEFAULT_MAX_POWER_DELTA_DB: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub max_rtd_ns: f64,
    pub max_power_delta_db: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { max_rtd_ns: DEFAULT_MAX_RTD_NS, max_power_delta_db: DEFAULT_MAX_POWER_DELTA_DB }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QclType {
    TypeA,
    TypeC,
}

/// A reference signal of a cell. Text form: `rs:<cell>:<index>`,
/// `trs:<cell>:<index>` or `ssb:<cell>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SignalId {
    Rs { cell: CellId, index: u32 },
    Trs { cell: CellId, index: u32 },
    Ssb { cell: CellId },
}

impl SignalId {
    pub fn cell(&self) -> &CellId {
        match self {
            Self::Rs { cell, .. } | Self::Trs { cell, .. } | Self::Ssb { cell } => cell,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed signal id {0:?}")]
pub struct SignalParseError(pub String);

impl FromStr for SignalId {
    type Err = SignalParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SignalParseError(s.to_owned());
        let mut parts = s.split(':');
        let kind = parts.next().ok_or_else(err)?;
        let cell = parts.next().filter(|c| !c.is_empty()).ok_or_else(err)?;
        let cell = CellId::from(cell);
        let index = parts.next().map(|i| i.parse::<u32>().map_err(|_| err())).transpose()?;
        if parts.next().is_some() {
            return Err(err());
        }
        match (kind, index) {
            ("rs", Some(index)) => Ok(Self::Rs { cell, index }),
            ("trs", Some(index)) => Ok(Self::Trs { cell, index }),
            ("ssb", None) => Ok(Self::Ssb { cell }),
            _ => Err(err()),
        }
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rs { cell, index } => write!(f, "rs:{cell}:{index}"),
            Self::Trs { cell, index } => write!(f, "trs:{cell}:{index}"),
            Self::Ssb { cell } => write!(f, "ssb:{cell}"),
        }
    }
}

impl TryFrom<String> for SignalId {
    type Error = SignalParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SignalId> for String {
    fn from(s: SignalId) -> String {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QclEdge {
    pub source: SignalId,
    pub target: SignalId,
    pub qcl: QclType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRadioObservation {
    pub cell_id: CellId,
    pub rtd_ns: f64,
    pub rx_power_dbm: f64,
    pub co_site: bool,
    /// Reference signals of the target SCell that must reach an active SSB.
    pub reference_signals: Vec<SignalId>,
    #[serde(default)]
    pub qcl_edges: Vec<QclEdge>,
}

/// Pass/fail with the remaining headroom (negative when failing).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub margin: f64,
}

pub fn check_rtd(obs: &CellRadioObservation, thresholds: &Thresholds) -> CheckResult {
    let margin = thresholds.max_rtd_ns - obs.rtd_ns.abs();
    CheckResult { pass: margin >= 0.0, margin }
}

pub fn check_power_delta(obs: &CellRadioObservation, reference_power_dbm: f64, thresholds: &Thresholds) -> CheckResult {
    let margin = thresholds.max_power_delta_db - (obs.rx_power_dbm - reference_power_dbm).abs();
    CheckResult { pass: margin >= 0.0, margin }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum QclGap {
    /// (a) the SCell has no reference signal to check.
    NoReferenceSignals,
    /// (a) a reference signal lacks a TypeA edge to a TRS of the same SCell.
    MissingTypeA(SignalId),
    /// (b) none of the TRS reached from this reference signal has a TypeC
    /// edge to the SSB of an active serving cell.
    MissingTypeC(SignalId),
}

impl QclGap {
    pub fn part(&self) -> char {
        match self {
            Self::NoReferenceSignals | Self::MissingTypeA(_) => 'a',
            Self::MissingTypeC(_) => 'b',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QclCheck {
    pub gaps: Vec<QclGap>,
}

impl QclCheck {
    pub fn pass(&self) -> bool {
        self.gaps.is_empty()
    }
}

pub fn check_qcl_chain(obs: &CellRadioObservation, active_cells_with_ssb: &BTreeSet<CellId>) -> QclCheck {
    let target = &obs.cell_id;
    let mut gaps = Vec::new();
    if obs.reference_signals.is_empty() {
        gaps.push(QclGap::NoReferenceSignals);
    }
    for rs in &obs.reference_signals {
        let trs: Vec<&SignalId> = obs
            .qcl_edges
            .iter()
            .filter(|e| e.qcl == QclType::TypeA && &e.source == rs)
            .map(|e| &e.target)
            .filter(|t| matches!(t, SignalId::Trs { cell, .. } if cell == target))
            .collect();
        if trs.is_empty() {
            gaps.push(QclGap::MissingTypeA(rs.clone()));
            continue;
        }
        let anchored = trs.iter().any(|t| {
            obs.qcl_edges.iter().any(|e| {
                e.qcl == QclType::TypeC
                    && &&e.source == t
                    && matches!(&e.target, SignalId::Ssb { cell } if active_cells_with_ssb.contains(cell))
            })
        });
        if !anchored {
            gaps.push(QclGap::MissingTypeC(rs.clone()));
        }
    }
    QclCheck { gaps }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EligibilityContext {
    pub target_role: CellRole,
    /// The target is in a different band from the reference cell.
    pub inter_band: bool,
    pub reference_power_dbm: f64,
    pub active_cells_with_ssb: BTreeSet<CellId>,
    pub thresholds: Thresholds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum IneligibleReason {
    CoSiteRequired,
    RtdExceeded,
    PowerDeltaExceeded,
    QclChain(Vec<QclGap>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EligibilityReport {
    pub eligible: bool,
    pub reasons: Vec<IneligibleReason>,
    pub rtd: CheckResult,
    pub power: CheckResult,
    pub qcl: QclCheck,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SsbLessError {
    #[error("the PCell always transmits SSB")]
    PCellTarget,
}

pub fn ssbless_eligibility(
    obs: &CellRadioObservation,
    ctx: &EligibilityContext,
) -> Result<EligibilityReport, SsbLessError> {
    if ctx.target_role == CellRole::PCell {
        return Err(SsbLessError::PCellTarget);
    }
    let rtd = check_rtd(obs, &ctx.thresholds);
    let power = check_power_delta(obs, ctx.reference_power_dbm, &ctx.thresholds);
    let qcl = check_qcl_chain(obs, &ctx.active_cells_with_ssb);
    let mut reasons = Vec::new();
    if ctx.inter_band && !obs.co_site {
        reasons.push(IneligibleReason::CoSiteRequired);
    }
    if !rtd.pass {
        reasons.push(IneligibleReason::RtdExceeded);
    }
    if !power.pass {
        reasons.push(IneligibleReason::PowerDeltaExceeded);
    }
    if !qcl.pass() {
        reasons.push(IneligibleReason::QclChain(qcl.gaps.clone()));
    }
    Ok(EligibilityReport { eligible: reasons.is_empty(), reasons, rtd, power, qcl })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn chain_obs(rtd_ns: f64, rx_power_dbm: f64, co_site: bool) -> CellRadioObservation {
        let rs: SignalId = "rs:scell:0".parse().unwrap();
        let trs: SignalId = "trs:scell:0".parse().unwrap();
        CellRadioObservation {
            cell_id: "scell".into(),
            rtd_ns,
            rx_power_dbm,
            co_site,
            reference_signals: vec![rs.clone()],
            qcl_edges: vec![
                QclEdge { source: rs, target: trs.clone(), qcl: QclType::TypeA },
                QclEdge { source: trs, target: "ssb:pcell".parse().unwrap(), qcl: QclType::TypeC },
            ],
        }
    }

    fn active_pcell() -> BTreeSet<CellId> {
        [CellId::from("pcell")].into_iter().collect()
    }

    fn ctx(inter_band: bool) -> EligibilityContext {
        EligibilityContext {
            target_role: CellRole::SCell,
            inter_band,
            reference_power_dbm: -80.0,
            active_cells_with_ssb: active_pcell(),
            thresholds: Thresholds::default(),
        }
    }

    #[test]
    fn rtd_examples() {
        let t = Thresholds::default();
        let r = check_rtd(&chain_obs(200.0, -80.0, true), &t);
        assert!(r.pass);
        assert_eq!(r.margin, 60.0);
        assert!(check_rtd(&chain_obs(-260.0, -80.0, true), &t).pass);
        assert!(!check_rtd(&chain_obs(300.0, -80.0, true), &t).pass);
    }

    #[test]
    fn power_examples() {
        let t = Thresholds::default();
        assert!(check_power_delta(&chain_obs(0.0, -80.0, true), -85.0, &t).pass);
        assert!(check_power_delta(&chain_obs(0.0, -80.0, true), -86.0, &t).pass);
        assert!(!check_power_delta(&chain_obs(0.0, -80.0, true), -90.0, &t).pass);
    }

    #[test]
    fn qcl_chain_examples() {
        let obs = chain_obs(0.0, -80.0, true);
        assert!(check_qcl_chain(&obs, &active_pcell()).pass());

        let mut broken = obs.clone();
        broken.qcl_edges.retain(|e| e.qcl != QclType::TypeC);
        let c = check_qcl_chain(&broken, &active_pcell());
        assert_eq!(c.gaps.iter().map(QclGap::part).collect::<Vec<_>>(), vec!['b']);

        // SSB of a cell that is no longer active.
        let c = check_qcl_chain(&obs, &BTreeSet::new());
        assert_eq!(c.gaps, vec![QclGap::MissingTypeC("rs:scell:0".parse().unwrap())]);

        let mut no_type_a = obs.clone();
        no_type_a.qcl_edges.retain(|e| e.qcl != QclType::TypeA);
        assert_eq!(check_qcl_chain(&no_type_a, &active_pcell()).gaps[0].part(), 'a');

        // TRS of another cell does not count.
        let mut foreign = obs;
        foreign.qcl_edges[0].target = "trs:other:0".parse().unwrap();
        assert_eq!(check_qcl_chain(&foreign, &active_pcell()).gaps[0].part(), 'a');
    }

    #[test]
    fn eligibility_examples() {
        // Power delta 2 dB against a -80 dBm reference.
        let r = ssbless_eligibility(&chain_obs(50.0, -78.0, true), &ctx(true)).unwrap();
        assert!(r.eligible, "{r:?}");

        let r = ssbless_eligibility(&chain_obs(50.0, -78.0, false), &ctx(true)).unwrap();
        assert_eq!(r.reasons, vec![IneligibleReason::CoSiteRequired]);

        // Intra-band targets skip the co-site gate.
        assert!(ssbless_eligibility(&chain_obs(50.0, -78.0, false), &ctx(false)).unwrap().eligible);

        let mut pc = ctx(true);
        pc.target_role = CellRole::PCell;
        assert_eq!(ssbless_eligibility(&chain_obs(0.0, -80.0, true), &pc), Err(SsbLessError::PCellTarget));
    }

    #[test]
    fn signal_id_text_form() {
        for s in ["rs:c1:0", "trs:c1:3", "ssb:pcell"] {
            assert_eq!(s.parse::<SignalId>().unwrap().to_string(), s);
        }
        for bad in ["", "rs:c1", "ssb:c1:0", "foo:c:1", "rs::1", "rs:c:x", "rs:c:1:2"] {
            assert!(bad.parse::<SignalId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn thresholds_are_overridable() {
        let t = Thresholds { max_rtd_ns: 100.0, max_power_delta_db: 3.0 };
        assert!(!check_rtd(&chain_obs(200.0, -80.0, true), &t).pass);
        assert!(!check_power_delta(&chain_obs(0.0, -80.0, true), -85.0, &t).pass);
    }
}

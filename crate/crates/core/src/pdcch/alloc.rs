use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AggregationLevel, DciSpec, PdcchError};
use crate::rng::{domain, stream};

pub const MAX_CORESET_CCES: u32 = 256;
/// Search nodes spent re-packing earlier DCIs before a new DCI is declared
/// blocked.
pub const DEFAULT_REPACK_BUDGET: u32 = 512;

/// Occupancy bitmap over up to 256 CCEs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CceMask([u64; 4]);

impl CceMask {
    pub fn range(start: u32, len: u32) -> Self {
        let mut m = [0u64; 4];
        for i in start..start + len {
            m[(i / 64) as usize] |= 1 << (i % 64);
        }
        Self(m)
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.0.iter().zip(other.0.iter()).any(|(a, b)| a & b != 0)
    }

    pub fn insert(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a |= b;
        }
    }

    pub fn remove(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a &= !b;
        }
    }

    pub fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

/// Control resource set: CCE pool and per-level candidate counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoresetModel {
    pub total_cces: u32,
    /// Number of PDCCH candidates a UE monitors per aggregation level.
    pub candidates_per_level: BTreeMap<AggregationLevel, u32>,
    #[serde(default = "default_budget")]
    pub blind_decode_budget: u32,
    #[serde(default = "default_repack")]
    pub repack_budget: u32,
}

fn default_budget() -> u32 {
    44
}

fn default_repack() -> u32 {
    DEFAULT_REPACK_BUDGET
}

/// Identifies whose search space a candidate set belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CandidateKey {
    pub ue: u32,
    /// Index of the first scheduled cell within the UE's cell list.
    pub cell: u32,
    /// Slot or trial index.
    pub occasion: u64,
}

impl CoresetModel {
    /// Typical UE-specific search space: 6/6/2/2/1 candidates for AL 1..16.
    pub fn with_total(total_cces: u32) -> Self {
        let candidates_per_level =
            AggregationLevel::ALL.into_iter().zip([6, 6, 2, 2, 1]).collect::<BTreeMap<_, _>>();
        Self { total_cces, candidates_per_level, blind_decode_budget: 44, repack_budget: DEFAULT_REPACK_BUDGET }
    }

    pub fn validate(&self) -> Result<(), PdcchError> {
        if self.total_cces == 0 || self.total_cces > MAX_CORESET_CCES {
            return Err(PdcchError::InvalidCoreset(format!(
                "total CCEs must be in 1..={MAX_CORESET_CCES}, got {}",
                self.total_cces
            )));
        }
        let monitored: u64 = self.candidates_per_level.values().map(|&c| u64::from(c)).sum();
        if monitored > u64::from(self.blind_decode_budget) {
            return Err(PdcchError::InvalidCoreset(format!(
                "{monitored} candidates exceed the blind-decode budget {}",
                self.blind_decode_budget
            )));
        }
        Ok(())
    }

    /// CCE-aligned starts where a candidate of `level` fits.
    pub fn feasible_starts(&self, level: AggregationLevel) -> impl Iterator<Item = u32> {
        let (l, total) = (level.cces(), self.total_cces);
        (0..total).step_by(l as usize).filter(move |s| s + l <= total)
    }

    /// Candidate starts of one search space, drawn uniformly without
    /// replacement from the feasible starts by a stream keyed on
    /// `(seed, key, level)`.
    pub fn candidate_positions(&self, level: AggregationLevel, key: CandidateKey, seed: u64) -> Vec<u32> {
        let mut starts: Vec<u32> = self.feasible_starts(level).collect();
        let wanted = (self.candidates_per_level.get(&level).copied().unwrap_or(0) as usize).min(starts.len());
        let mut rng = stream(&[
            domain::CANDIDATES,
            seed,
            u64::from(key.ue),
            u64::from(key.cell),
            key.occasion,
            u64::from(level.cces()),
        ]);
        for i in 0..wanted {
            let j = rng.random_range(i..starts.len());
            starts.swap(i, j);
        }
        starts.truncate(wanted);
        starts
    }
}

/// One DCI to place: its size in CCEs and where it may go.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationRequest {
    pub level: AggregationLevel,
    pub candidates: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    /// Index into the request list.
    pub request: usize,
    pub start: u32,
    pub len: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AllocationResult {
    pub placed: Vec<Placement>,
    pub blocked: Vec<usize>,
}

impl AllocationResult {
    pub fn cces_used(&self) -> u32 {
        self.placed.iter().map(|p| p.len).sum()
    }
}

/// Places requests in the given order.
///
/// A request takes its first free candidate. When none is free the earlier
/// placements are re-packed by a bounded depth-first search; if no packing
/// of the earlier DCIs plus this one exists (or the budget runs out) the
/// request is blocked and earlier placements stand. Whenever the requests
/// admit a non-blocking placement within the search budget, none is blocked.
pub fn allocate_with_candidates(requests: &[AllocationRequest], total_cces: u32, repack_budget: u32) -> AllocationResult {
    let masks: Vec<Vec<(u32, CceMask)>> = requests
        .iter()
        .map(|r| {
            let l = r.level.cces();
            r.candidates
                .iter()
                .filter(|&&s| s.checked_add(l).is_some_and(|end| end <= total_cces.min(MAX_CORESET_CCES)))
                .map(|&s| (s, CceMask::range(s, l)))
                .collect()
        })
        .collect();

    let mut occupied = CceMask::default();
    // (request index, chosen candidate index)
    let mut placed: Vec<(usize, usize)> = Vec::new();
    let mut blocked = Vec::new();

    for (i, cands) in masks.iter().enumerate() {
        if let Some(c) = cands.iter().position(|(_, m)| !m.overlaps(&occupied)) {
            occupied.insert(&cands[c].1);
            placed.push((i, c));
            continue;
        }
        if cands.is_empty() {
            blocked.push(i);
            continue;
        }
        let demand: u32 = placed.iter().map(|&(r, _)| requests[r].level.cces()).sum::<u32>() + requests[i].level.cces();
        if demand > total_cces {
            blocked.push(i);
            continue;
        }
        let mut vars: Vec<usize> = placed.iter().map(|&(r, _)| r).collect();
        vars.push(i);
        match repack(&vars, &masks, repack_budget) {
            Some(choice) => {
                occupied = CceMask::default();
                placed = vars.iter().zip(choice).map(|(&r, c)| (r, c)).collect();
                for &(r, c) in &placed {
                    occupied.insert(&masks[r][c].1);
                }
            }
            None => blocked.push(i),
        }
    }

    placed.sort_by_key(|&(r, _)| r);
    AllocationResult {
        placed: placed
            .into_iter()
            .map(|(r, c)| Placement { request: r, start: masks[r][c].0, len: requests[r].level.cces() })
            .collect(),
        blocked,
    }
}

/// Finds candidate indices for every request in `vars` with no overlap.
fn repack(vars: &[usize], masks: &[Vec<(u32, CceMask)>], budget: u32) -> Option<Vec<usize>> {
    // Most constrained first.
    let mut order: Vec<usize> = (0..vars.len()).collect();
    order.sort_by_key(|&k| (masks[vars[k]].len(), k));
    let mut choice = vec![0usize; vars.len()];
    let mut nodes = 0u32;

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        depth: usize,
        order: &[usize],
        vars: &[usize],
        masks: &[Vec<(u32, CceMask)>],
        occupied: &mut CceMask,
        choice: &mut [usize],
        nodes: &mut u32,
        budget: u32,
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let k = order[depth];
        for (c, (_, m)) in masks[vars[k]].iter().enumerate() {
            if *nodes >= budget {
                return false;
            }
            *nodes += 1;
            if m.overlaps(occupied) {
                continue;
            }
            occupied.insert(m);
            choice[k] = c;
            if dfs(depth + 1, order, vars, masks, occupied, choice, nodes, budget) {
                return true;
            }
            occupied.remove(m);
        }
        false
    }

    let mut occupied = CceMask::default();
    dfs(0, &order, vars, masks, &mut occupied, &mut choice, &mut nodes, budget).then_some(choice)
}

/// Places `dcis` on `coreset`, ordered by owning UE (stable within a UE).
///
/// Each DCI searches the space keyed by its owner, the index of its first
/// scheduled cell within `cell_index`, and `occasion`. The result indexes
/// refer to positions in `dcis`.
pub fn allocate(
    dcis: &[DciSpec],
    coreset: &CoresetModel,
    occasion: u64,
    seed: u64,
    cell_index: impl Fn(&DciSpec) -> u32,
) -> AllocationResult {
    let mut order: Vec<usize> = (0..dcis.len()).collect();
    order.sort_by_key(|&i| dcis[i].owner_ue);
    let requests: Vec<AllocationRequest> = order
        .iter()
        .map(|&i| {
            let d = &dcis[i];
            let key = CandidateKey { ue: d.owner_ue.0, cell: cell_index(d), occasion };
            AllocationRequest {
                level: d.aggregation_level,
                candidates: coreset.candidate_positions(d.aggregation_level, key, seed),
            }
        })
        .collect();
    let mut result = allocate_with_candidates(&requests, coreset.total_cces, coreset.repack_budget);
    for p in &mut result.placed {
        p.request = order[p.request];
    }
    for b in &mut result.blocked {
        *b = order[*b];
    }
    result.placed.sort_by_key(|p| p.request);
    result.blocked.sort_unstable();
    result
}

//! Local search over quality assignments guided by the sickness migration
//! indicator (SMI).
//!
//! For an assignment, `SMI = sum over members of qs_prev * (f(t+1) - f(t)) + VLI`.
//! The search moves from a centre assignment to its best neighbour not held
//! in a bounded tabu list (the neighbour search list), even when that
//! neighbour is worse, and keeps the best centre seen as the incumbent.

use std::collections::{HashMap, VecDeque};
use std::hash::{BuildHasherDefault, Hasher};

use crate::error::{Error, Result};
use crate::model::{ChunkMeta, Intervention};
use crate::tqa::{compute_vli, Assignment, QualityProblem, TileWeights};

const SMI_TIE_TOL: f64 = 1e-12;

/// Per-(tile, level) SMI terms and unit costs for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SmiContext {
    /// `contribution[n][j - 1]`: SMI term of tile `n` at level `j`.
    contribution: Vec<Vec<f64>>,
    units: Vec<Vec<u64>>,
}

impl SmiContext {
    /// `next` is the chunk after `chunk`; pass `chunk` again at end of video.
    pub fn new(
        problem: &QualityProblem,
        chunk: &ChunkMeta,
        next: &ChunkMeta,
        weights: &TileWeights,
        qs_prev: f64,
        intervention: Intervention,
        k_dof: f64,
    ) -> Result<Self> {
        let shrink = intervention.factor(k_dof);
        let contribution = (0..weights.len())
            .map(|n| {
                let tile = weights.tiles[n];
                (1..=chunk.levels())
                    .map(|j| {
                        let delta = next.get(tile, j).flow - chunk.get(tile, j).flow;
                        let vli = compute_vli(
                            chunk.get(tile, j).distortion,
                            shrink,
                            weights.p[n],
                            weights.sum_p,
                        )?;
                        Ok(qs_prev * delta + vli)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let units = problem.tiles.iter().map(|t| t.units.clone()).collect();
        Self::from_parts(contribution, units)
    }

    pub fn from_parts(contribution: Vec<Vec<f64>>, units: Vec<Vec<u64>>) -> Result<Self> {
        let levels = contribution.first().map(Vec::len).unwrap_or(0);
        let ragged = contribution.len() != units.len()
            || contribution
                .iter()
                .zip(&units)
                .any(|(c, u)| c.len() != levels || u.len() != levels);
        if ragged {
            return Err(Error::InvalidInput(
                "SMI tables must be rectangular and aligned".into(),
            ));
        }
        Ok(Self {
            contribution,
            units,
        })
    }

    pub fn levels(&self) -> usize {
        self.contribution.first().map(Vec::len).unwrap_or(0)
    }

    pub fn smi(&self, levels: &[usize]) -> f64 {
        levels
            .iter()
            .enumerate()
            .map(|(n, &j)| self.contribution[n][j - 1])
            .sum()
    }

    pub fn units(&self, levels: &[usize]) -> u64 {
        levels
            .iter()
            .enumerate()
            .map(|(n, &j)| self.units[n][j - 1])
            .sum()
    }
}

/// Order-independent fingerprint of a level vector: a wrapping sum of
/// per-(position, level) mixes, so a one-tile move updates it in O(1).
fn mix(n: usize, level: usize) -> u64 {
    let mut z = ((n as u64) << 32 | level as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fingerprint(levels: &[usize]) -> u64 {
    levels
        .iter()
        .enumerate()
        .fold(0u64, |h, (n, &j)| h.wrapping_add(mix(n, j)))
}

fn moved(h: u64, n: usize, from: usize, to: usize) -> u64 {
    h.wrapping_sub(mix(n, from)).wrapping_add(mix(n, to))
}

/// `stored == center` with position `n` set to `level`.
fn equals_move(stored: &[usize], center: &[usize], n: usize, level: usize) -> bool {
    stored[n] == level && stored[..n] == center[..n] && stored[n + 1..] == center[n + 1..]
}

/// Hasher for keys that are already well mixed.
#[derive(Default)]
struct PassThrough(u64);

impl Hasher for PassThrough {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(b);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

type FingerprintMap<V> = HashMap<u64, V, BuildHasherDefault<PassThrough>>;

/// Bounded FIFO of recently visited level vectors.
#[derive(Debug, Clone)]
pub struct NeighborSearchList {
    order: VecDeque<(u64, Vec<usize>)>,
    /// Multiplicity of each fingerprint in `order`.
    fingerprints: FingerprintMap<u32>,
    capacity: usize,
}

impl NeighborSearchList {
    pub fn new(capacity: usize) -> Self {
        Self {
            order: VecDeque::with_capacity(capacity + 1),
            fingerprints: FingerprintMap::default(),
            capacity: capacity.max(1),
        }
    }

    pub fn contains(&self, levels: &[usize]) -> bool {
        self.contains_where(fingerprint(levels), |v| v == levels)
    }

    fn contains_where(&self, h: u64, eq: impl Fn(&[usize]) -> bool) -> bool {
        self.fingerprints.contains_key(&h) && self.order.iter().any(|(k, v)| *k == h && eq(v))
    }

    /// Insert, evicting the oldest entry past capacity. Re-inserting a
    /// present entry does nothing.
    pub fn insert(&mut self, levels: Vec<usize>) {
        self.insert_with(fingerprint(&levels), levels);
    }

    fn insert_with(&mut self, h: u64, levels: Vec<usize>) {
        if self.contains_where(h, |v| v == levels) {
            return;
        }
        *self.fingerprints.entry(h).or_insert(0) += 1;
        self.order.push_back((h, levels));
        if self.order.len() > self.capacity {
            let (old, _) = self.order.pop_front().expect("non-empty");
            if let Some(c) = self.fingerprints.get_mut(&old) {
                *c -= 1;
                if *c == 0 {
                    self.fingerprints.remove(&old);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Examination counts per level vector, stored in one flat arena.
struct ExamCounts {
    width: usize,
    /// Concatenated level vectors, `width` entries each.
    arena: Vec<usize>,
    counts: Vec<u32>,
    /// Next entry with the same fingerprint, `u32::MAX` ends the chain.
    chain: Vec<u32>,
    heads: FingerprintMap<u32>,
}

impl ExamCounts {
    fn with_capacity(width: usize, entries: usize) -> Self {
        Self {
            width,
            arena: Vec::with_capacity(width * entries),
            counts: Vec::with_capacity(entries),
            chain: Vec::with_capacity(entries),
            heads: FingerprintMap::with_capacity_and_hasher(entries, Default::default()),
        }
    }

    fn levels(&self, e: u32) -> &[usize] {
        let at = e as usize * self.width;
        &self.arena[at..at + self.width]
    }

    fn push(&mut self, h: u64, levels: &[usize]) -> u32 {
        let e = self.counts.len() as u32;
        self.arena.extend_from_slice(levels);
        self.counts.push(1);
        let head = self.heads.entry(h).or_insert(u32::MAX);
        self.chain.push(*head);
        *head = e;
        e
    }

    /// Record the starting centre as examined once.
    fn seed(&mut self, h: u64, levels: &[usize]) {
        self.push(h, levels);
    }

    /// Count one examination of `center` moved at `n` to `level`; returns the new count.
    fn bump(&mut self, h: u64, center: &[usize], n: usize, level: usize) -> u32 {
        let mut e = self.heads.get(&h).copied().unwrap_or(u32::MAX);
        while e != u32::MAX {
            if equals_move(self.levels(e), center, n, level) {
                self.counts[e as usize] += 1;
                return self.counts[e as usize];
            }
            e = self.chain[e as usize];
        }
        let e = self.push(h, center);
        self.arena[e as usize * self.width + n] = level;
        1
    }
}

/// Single-tile moves `(tile position, new level)` that fit `budget`.
fn moves(levels: &[usize], units: &[Vec<u64>], budget: u64) -> Vec<(usize, usize)> {
    let used: u64 = levels
        .iter()
        .enumerate()
        .map(|(n, &j)| units[n][j - 1])
        .sum();
    let mut out = Vec::new();
    for (n, &j) in levels.iter().enumerate() {
        let max_level = units[n].len();
        for next in [j.wrapping_sub(1), j + 1] {
            if next == 0 || next > max_level {
                continue;
            }
            if used - units[n][j - 1] + units[n][next - 1] <= budget {
                out.push((n, next));
            }
        }
    }
    out
}

/// Assignments one level step away on a single tile that fit `budget`,
/// ordered by tile, `-1` before `+1`.
pub fn neighbors(levels: &[usize], units: &[Vec<u64>], budget: u64) -> Vec<Vec<usize>> {
    moves(levels, units, budget)
        .into_iter()
        .map(|(n, j)| {
            let mut v = levels.to_vec();
            v[n] = j;
            v
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub alpha: u32,
    pub nsl_capacity: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Examined,
    NoNeighbor,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub levels: Vec<usize>,
    pub smi: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Local search from `initial`; returns the best centre visited.
pub fn refine_levels(
    ctx: &SmiContext,
    initial: &[usize],
    budget: u64,
    limits: SearchLimits,
) -> RefineOutcome {
    let mut best = initial.to_vec();
    let mut best_smi = ctx.smi(initial);
    let mut center = initial.to_vec();
    let mut center_hash = fingerprint(&center);
    let mut nsl = NeighborSearchList::new(limits.nsl_capacity);
    nsl.insert_with(center_hash, center.clone());
    // each iteration examines at most two moves per tile
    let expected = (limits.max_iterations * 2 * center.len()).min(1 << 16) + 1;
    let mut examined = ExamCounts::with_capacity(center.len(), expected);
    examined.seed(center_hash, &center);

    let mut iterations = 0;
    let stop = loop {
        if iterations >= limits.max_iterations {
            break StopReason::IterationCap;
        }
        iterations += 1;
        let center_smi = ctx.smi(&center);
        let mut pick: Option<(usize, usize, u64, f64)> = None;
        let mut saturated = false;
        for (n, j) in moves(&center, &ctx.units, budget) {
            let h = moved(center_hash, n, center[n], j);
            if nsl.contains_where(h, |v| equals_move(v, &center, n, j)) {
                continue;
            }
            let s = center_smi - ctx.contribution[n][center[n] - 1] + ctx.contribution[n][j - 1];
            saturated |= examined.bump(h, &center, n, j) >= limits.alpha;
            if pick.is_none_or(|(_, _, _, ps)| s < ps - SMI_TIE_TOL) {
                pick = Some((n, j, h, s));
            }
        }
        let Some((n, j, h, _)) = pick else {
            break StopReason::NoNeighbor;
        };
        center[n] = j;
        center_hash = h;
        // recompute in full so float drift never accumulates
        let s = ctx.smi(&center);
        if s < best_smi - SMI_TIE_TOL {
            best.clone_from(&center);
            best_smi = s;
        }
        nsl.insert_with(center_hash, center.clone());
        if saturated {
            break StopReason::Examined;
        }
    };
    RefineOutcome {
        levels: best,
        smi: best_smi,
        iterations,
        stop,
    }
}

/// Refine a DP assignment; the result carries `problem`'s costs and units.
pub fn refine(
    problem: &QualityProblem,
    ctx: &SmiContext,
    initial: &Assignment,
    budget: u64,
    limits: SearchLimits,
) -> Assignment {
    let out = refine_levels(ctx, &initial.levels, budget, limits);
    problem.assignment(out.levels)
}

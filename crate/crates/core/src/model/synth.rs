//! Deterministic synthetic metadata standing in for an encoder pipeline.
//!
//! Each tile gets a spatial complexity and motion level (both larger near the
//! equator, where 360° content tends to concentrate action) that drift over
//! time as a log-AR(1) process. Per level:
//!
//! * bitrate: the top level is `TOP_BITRATE_MBIT * complexity`; each step down
//!   divides it by a per-tile ratio in `[STEP_RATIO_MIN, STEP_RATIO_MAX]`,
//!   mirroring the rule of thumb that 5 CRF points roughly double the size.
//!   With five levels the top/bottom ratio lands in `[10.5, 23.4]`.
//! * SSIM loss decays geometrically from `SSIM_LOSS_BOTTOM` to `SSIM_LOSS_TOP`
//!   (scaled by complexity), so quality saturates at the upper levels.
//! * flow is `motion * (FLOW_FLOOR + (1 - FLOW_FLOOR) * u^FLOW_EXP)` with `u`
//!   the normalised level: sharper encodes carry disproportionately more
//!   visible motion detail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::TileGrid;
use super::meta::{ChunkMeta, TileMeta, VideoMeta};
use crate::error::{Error, Result};

pub const TOP_BITRATE_MBIT: f64 = 1.0;
pub const STEP_RATIO_MIN: f64 = 1.8;
pub const STEP_RATIO_MAX: f64 = 2.2;
pub const SSIM_LOSS_BOTTOM: f64 = 0.12;
pub const SSIM_LOSS_TOP: f64 = 0.008;
pub const FLOW_FLOOR: f64 = 0.4;
pub const FLOW_EXP: f64 = 2.0;
const DRIFT_PERSISTENCE: f64 = 0.8;
const DRIFT_SIGMA: f64 = 0.15;
const MAX_MOTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataSpec {
    pub chunks: usize,
    pub rows: usize,
    pub cols: usize,
    pub levels: usize,
    pub seed: u64,
}

impl Default for MetadataSpec {
    fn default() -> Self {
        Self {
            chunks: 60,
            rows: 6,
            cols: 8,
            levels: 5,
            seed: 1,
        }
    }
}

struct TileProfile {
    complexity: f64,
    motion: f64,
    step_ratio: Vec<f64>,
    drift_c: f64,
    drift_m: f64,
}

pub fn synthesize_metadata(spec: &MetadataSpec) -> Result<VideoMeta> {
    if spec.chunks == 0 || spec.levels == 0 {
        return Err(Error::InvalidInput(
            "chunks and levels must be positive".into(),
        ));
    }
    let grid = TileGrid::new(spec.rows, spec.cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let drift = Normal::new(0.0, DRIFT_SIGMA * (1.0 - DRIFT_PERSISTENCE.powi(2)).sqrt())
        .expect("finite sigma");

    let mut profiles: Vec<TileProfile> = (1..=grid.tile_count())
        .map(|tile| {
            let (row, _) = grid.position(tile);
            let (lo, hi) = grid.pitch_span(row);
            let equator = ((lo + hi) / 2.0).to_radians().cos();
            TileProfile {
                complexity: 0.6 + 0.6 * equator * rng.random_range(0.7..1.0),
                motion: 0.15 + 0.55 * equator * rng.random_range(0.6..1.0),
                step_ratio: (1..spec.levels)
                    .map(|_| rng.random_range(STEP_RATIO_MIN..STEP_RATIO_MAX))
                    .collect(),
                drift_c: 0.0,
                drift_m: 0.0,
            }
        })
        .collect();

    let mut chunks = Vec::with_capacity(spec.chunks);
    for _ in 0..spec.chunks {
        let tiles = profiles
            .iter_mut()
            .map(|p| {
                p.drift_c = DRIFT_PERSISTENCE * p.drift_c + drift.sample(&mut rng);
                p.drift_m = DRIFT_PERSISTENCE * p.drift_m + drift.sample(&mut rng);
                let complexity = p.complexity * p.drift_c.exp();
                let motion = (p.motion * p.drift_m.exp()).min(MAX_MOTION);
                tile_ladder(spec.levels, complexity, motion, &p.step_ratio)
            })
            .collect();
        chunks.push(ChunkMeta::new(tiles)?);
    }
    VideoMeta::new(grid, 1.0, chunks)
}

fn tile_ladder(levels: usize, complexity: f64, motion: f64, step_ratio: &[f64]) -> Vec<TileMeta> {
    let mut bitrates = vec![TOP_BITRATE_MBIT * complexity; levels];
    for j in (0..levels - 1).rev() {
        bitrates[j] = bitrates[j + 1] / step_ratio[j];
    }
    let loss_scale = complexity.clamp(0.5, 1.5);
    (0..levels)
        .map(|j| {
            let u = if levels == 1 {
                1.0
            } else {
                j as f64 / (levels - 1) as f64
            };
            let loss = SSIM_LOSS_BOTTOM * (SSIM_LOSS_TOP / SSIM_LOSS_BOTTOM).powf(u) * loss_scale;
            TileMeta {
                bitrate: bitrates[j],
                distortion: 1.0 / (1.0 - loss),
                flow: motion * (FLOW_FLOOR + (1.0 - FLOW_FLOOR) * u.powf(FLOW_EXP)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let spec = MetadataSpec {
            chunks: 1,
            rows: 6,
            cols: 8,
            levels: 5,
            seed: 7,
        };
        assert_eq!(
            synthesize_metadata(&spec).unwrap(),
            synthesize_metadata(&spec).unwrap()
        );
        let other = MetadataSpec { seed: 8, ..spec };
        assert_ne!(
            synthesize_metadata(&spec).unwrap(),
            synthesize_metadata(&other).unwrap()
        );
    }

    #[test]
    fn zero_dimensions_rejected() {
        for spec in [
            MetadataSpec {
                chunks: 0,
                ..Default::default()
            },
            MetadataSpec {
                rows: 0,
                ..Default::default()
            },
            MetadataSpec {
                cols: 0,
                ..Default::default()
            },
            MetadataSpec {
                levels: 0,
                ..Default::default()
            },
        ] {
            assert!(synthesize_metadata(&spec).is_err());
        }
    }

    #[test]
    fn five_level_bitrate_span() {
        let meta = synthesize_metadata(&MetadataSpec {
            chunks: 5,
            ..Default::default()
        })
        .unwrap();
        for chunk in meta.chunks() {
            for tile in 1..=chunk.tile_count() {
                let ladder = chunk.tile(tile);
                let ratio = ladder[4].bitrate / ladder[0].bitrate;
                assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
            }
        }
    }

    #[test]
    fn equator_carries_more_flow() {
        let meta = synthesize_metadata(&MetadataSpec {
            chunks: 3,
            ..Default::default()
        })
        .unwrap();
        let grid = *meta.grid();
        let mean_flow = |row: usize| {
            let mut s = 0.0;
            for chunk in meta.chunks() {
                for col in 1..=grid.cols() {
                    s += chunk.get(grid.index(row, col), 5).flow;
                }
            }
            s / (grid.cols() * meta.chunk_count()) as f64
        };
        assert!(mean_flow(3) > mean_flow(1));
        assert!(mean_flow(4) > mean_flow(6));
    }

    #[test]
    fn single_level_is_valid() {
        let spec = MetadataSpec {
            levels: 1,
            chunks: 2,
            ..Default::default()
        };
        assert_eq!(synthesize_metadata(&spec).unwrap().levels(), 1);
    }
}

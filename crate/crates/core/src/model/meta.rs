//! Per-tile video metadata and its JSON file format.
//!
//! The on-disk format is a header plus a flat array of records, all indices
//! 1-based:
//!
//! ```json
//! {
//!   "chunk_duration_s": 1.0,
//!   "rows": 6, "cols": 8, "levels": 5,
//!   "records": [
//!     {"chunk": 1, "tile": 1, "level": 1, "bitrate_mbit": 0.06, "distortion": 1.14, "flow": 0.21}
//!   ]
//! }
//! ```
//!
//! Every (chunk, tile, level) triple must appear exactly once.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::TileGrid;
use crate::error::{Error, Result};

/// Encoding properties of one tile at one quality level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileMeta {
    /// Megabits per chunk.
    pub bitrate: f64,
    /// Reciprocal of SSIM, so always `>= 1`.
    pub distortion: f64,
    /// Normalised optical-flow magnitude in `[0, 1]`.
    pub flow: f64,
}

impl TileMeta {
    pub fn ssim(&self) -> f64 {
        1.0 / self.distortion
    }
}

/// One chunk: an `N x L` table indexed by (tile, level), both 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkMeta {
    levels: usize,
    tiles: Vec<TileMeta>,
}

impl ChunkMeta {
    /// Build from a row per tile, each holding `levels` entries.
    pub fn new(tiles: Vec<Vec<TileMeta>>) -> Result<Self> {
        let levels = tiles.first().map(Vec::len).unwrap_or(0);
        if levels == 0 {
            return Err(Error::MetadataFormat(
                "chunk has no tiles or no levels".into(),
            ));
        }
        if let Some((i, row)) = tiles.iter().enumerate().find(|(_, r)| r.len() != levels) {
            return Err(Error::MetadataFormat(format!(
                "tile {} has {} levels, expected {levels}",
                i + 1,
                row.len()
            )));
        }
        Ok(Self {
            levels,
            tiles: tiles.into_iter().flatten().collect(),
        })
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len() / self.levels
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, tile: usize, level: usize) -> &TileMeta {
        &self.tiles[(tile - 1) * self.levels + (level - 1)]
    }

    /// All levels of one tile, lowest quality first.
    pub fn tile(&self, tile: usize) -> &[TileMeta] {
        let start = (tile - 1) * self.levels;
        &self.tiles[start..start + self.levels]
    }

    /// Check the per-tile monotonicity and range invariants. `chunk` is only
    /// used to label errors.
    pub fn validate(&self, chunk: usize) -> Result<()> {
        let err = |tile: usize, level: usize, reason: String| Error::MetadataInvariant {
            chunk,
            tile,
            level,
            reason,
        };
        for tile in 1..=self.tile_count() {
            let row = self.tile(tile);
            for (j, m) in row.iter().enumerate() {
                let level = j + 1;
                if !(m.bitrate.is_finite() && m.bitrate >= 0.0) {
                    return Err(err(
                        tile,
                        level,
                        format!("bitrate {} is not a nonnegative number", m.bitrate),
                    ));
                }
                if !(m.distortion.is_finite() && m.distortion >= 1.0) {
                    return Err(err(
                        tile,
                        level,
                        format!("distortion {} is below 1", m.distortion),
                    ));
                }
                if !(0.0..=1.0).contains(&m.flow) {
                    return Err(err(tile, level, format!("flow {} outside [0, 1]", m.flow)));
                }
                if j == 0 {
                    continue;
                }
                let prev = &row[j - 1];
                if m.bitrate <= prev.bitrate {
                    return Err(err(
                        tile,
                        level,
                        format!(
                            "bitrate {} not above level {} bitrate {}",
                            m.bitrate, j, prev.bitrate
                        ),
                    ));
                }
                if m.distortion >= prev.distortion {
                    return Err(err(
                        tile,
                        level,
                        format!(
                            "distortion {} not below level {} distortion {}",
                            m.distortion, j, prev.distortion
                        ),
                    ));
                }
                if m.flow < prev.flow {
                    return Err(err(
                        tile,
                        level,
                        format!("flow {} below level {} flow {}", m.flow, j, prev.flow),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoMeta {
    grid: TileGrid,
    chunk_duration: f64,
    chunks: Vec<ChunkMeta>,
}

impl VideoMeta {
    pub fn new(grid: TileGrid, chunk_duration: f64, chunks: Vec<ChunkMeta>) -> Result<Self> {
        if !(chunk_duration.is_finite() && chunk_duration > 0.0) {
            return Err(Error::MetadataFormat(format!(
                "chunk duration must be positive, got {chunk_duration}"
            )));
        }
        let Some(first) = chunks.first() else {
            return Err(Error::MetadataFormat("video has no chunks".into()));
        };
        let levels = first.levels();
        for (c, chunk) in chunks.iter().enumerate() {
            if chunk.tile_count() != grid.tile_count() || chunk.levels() != levels {
                return Err(Error::MetadataFormat(format!(
                    "chunk {} is {}x{}, expected {}x{levels}",
                    c + 1,
                    chunk.tile_count(),
                    chunk.levels(),
                    grid.tile_count()
                )));
            }
            chunk.validate(c + 1)?;
        }
        Ok(Self {
            grid,
            chunk_duration,
            chunks,
        })
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn chunk_duration(&self) -> f64 {
        self.chunk_duration
    }

    pub fn levels(&self) -> usize {
        self.chunks[0].levels()
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// Chunk by 0-based position.
    pub fn chunk(&self, index: usize) -> &ChunkMeta {
        &self.chunks[index]
    }

    pub fn chunks(&self) -> &[ChunkMeta] {
        &self.chunks
    }

    pub fn to_file_format(&self) -> MetadataFile {
        let mut records =
            Vec::with_capacity(self.chunks.len() * self.grid.tile_count() * self.levels());
        for (c, chunk) in self.chunks.iter().enumerate() {
            for tile in 1..=chunk.tile_count() {
                for (j, m) in chunk.tile(tile).iter().enumerate() {
                    records.push(MetadataRecord {
                        chunk: c + 1,
                        tile,
                        level: j + 1,
                        bitrate_mbit: m.bitrate,
                        distortion: m.distortion,
                        flow: m.flow,
                    });
                }
            }
        }
        MetadataFile {
            chunk_duration_s: self.chunk_duration,
            rows: self.grid.rows(),
            cols: self.grid.cols(),
            levels: self.levels(),
            records,
        }
    }

    pub fn from_file_format(file: MetadataFile) -> Result<Self> {
        let grid = TileGrid::new(file.rows, file.cols)?;
        if file.levels == 0 {
            return Err(Error::MetadataFormat("levels must be positive".into()));
        }
        let n = grid.tile_count();
        let l = file.levels;
        let chunk_count = file.records.iter().map(|r| r.chunk).max().unwrap_or(0);
        if chunk_count == 0 {
            return Err(Error::MetadataFormat("no records".into()));
        }
        let mut slots: Vec<Option<TileMeta>> = vec![None; chunk_count * n * l];
        for r in &file.records {
            if r.chunk == 0 || r.tile == 0 || r.tile > n || r.level == 0 || r.level > l {
                return Err(Error::MetadataFormat(format!(
                    "record (chunk {}, tile {}, level {}) out of range for {n} tiles and {l} levels",
                    r.chunk, r.tile, r.level
                )));
            }
            let slot = &mut slots[((r.chunk - 1) * n + (r.tile - 1)) * l + (r.level - 1)];
            if slot.is_some() {
                return Err(Error::MetadataFormat(format!(
                    "duplicate record (chunk {}, tile {}, level {})",
                    r.chunk, r.tile, r.level
                )));
            }
            *slot = Some(TileMeta {
                bitrate: r.bitrate_mbit,
                distortion: r.distortion,
                flow: r.flow,
            });
        }
        let mut chunks = Vec::with_capacity(chunk_count);
        for c in 0..chunk_count {
            let mut tiles = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(l);
                for j in 0..l {
                    let m = slots[(c * n + i) * l + j].ok_or_else(|| {
                        Error::MetadataFormat(format!(
                            "missing record (chunk {}, tile {}, level {})",
                            c + 1,
                            i + 1,
                            j + 1
                        ))
                    })?;
                    row.push(m);
                }
                tiles.push(row);
            }
            chunks.push(ChunkMeta::new(tiles)?);
        }
        Self::new(grid, file.chunk_duration_s, chunks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataFile {
    pub chunk_duration_s: f64,
    pub rows: usize,
    pub cols: usize,
    pub levels: usize,
    pub records: Vec<MetadataRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub chunk: usize,
    pub tile: usize,
    pub level: usize,
    pub bitrate_mbit: f64,
    pub distortion: f64,
    pub flow: f64,
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<VideoMeta> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_metadata(&text)
}

pub fn parse_metadata(text: &str) -> Result<VideoMeta> {
    let file: MetadataFile =
        serde_json::from_str(text).map_err(|e| Error::MetadataFormat(e.to_string()))?;
    VideoMeta::from_file_format(file)
}

pub fn save_metadata(meta: &VideoMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(&meta.to_file_format())
        .map_err(|e| Error::MetadataFormat(e.to_string()))?;
    fs::write(path, json).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

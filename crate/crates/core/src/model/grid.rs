//! Equirectangular tile grid and viewport/tile overlap geometry.
//!
//! Tiles are numbered from 1 in column-major order, top to bottom within a
//! column: tile `i = (col - 1) * rows + row`. On a 6-row grid tiles 1, 7 and 13
//! therefore sit side by side in the top row. Column `c` spans yaw
//! `[(c-1)·w, c·w)` and row `r` spans pitch `[90 - r·h, 90 - (r-1)·h]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    rows: usize,
    cols: usize,
}

impl TileGrid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "tile grid needs positive dimensions, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tile_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn tile_width_deg(&self) -> f64 {
        360.0 / self.cols as f64
    }

    pub fn tile_height_deg(&self) -> f64 {
        180.0 / self.rows as f64
    }

    /// 1-based (row, col) to 1-based tile index.
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!((1..=self.rows).contains(&row) && (1..=self.cols).contains(&col));
        (col - 1) * self.rows + row
    }

    /// 1-based tile index to 1-based (row, col).
    pub fn position(&self, tile: usize) -> (usize, usize) {
        debug_assert!((1..=self.tile_count()).contains(&tile));
        let zero = tile - 1;
        (zero % self.rows + 1, zero / self.rows + 1)
    }

    pub fn yaw_span(&self, col: usize) -> (f64, f64) {
        let w = self.tile_width_deg();
        ((col - 1) as f64 * w, col as f64 * w)
    }

    pub fn pitch_span(&self, row: usize) -> (f64, f64) {
        let h = self.tile_height_deg();
        (90.0 - row as f64 * h, 90.0 - (row - 1) as f64 * h)
    }

    /// Tile whose angular rectangle contains the point. Points on a shared edge
    /// belong to the tile to the right (yaw) and below (pitch).
    pub fn tile_at(&self, yaw_deg: f64, pitch_deg: f64) -> usize {
        self.index(self.row_at(pitch_deg), self.col_at(yaw_deg))
    }

    fn col_at(&self, yaw_deg: f64) -> usize {
        let yaw = wrap_yaw(yaw_deg);
        ((yaw / self.tile_width_deg()).floor() as usize).min(self.cols - 1) + 1
    }

    fn row_at(&self, pitch_deg: f64) -> usize {
        let pitch = pitch_deg.clamp(-90.0, 90.0);
        (((90.0 - pitch) / self.tile_height_deg()).floor() as usize).min(self.rows - 1) + 1
    }

    /// Columns with positive-width overlap with the yaw interval centred at
    /// `center` of width `width`, in ascending order. Wraps modulo 360.
    pub fn cols_overlapping(&self, center: f64, width: f64) -> Vec<usize> {
        if width >= 360.0 {
            return (1..=self.cols).collect();
        }
        if width <= 0.0 {
            return vec![self.col_at(center)];
        }
        let lo = wrap_yaw(center) - width / 2.0;
        let hi = lo + width;
        (1..=self.cols)
            .filter(|&c| {
                let (c0, c1) = self.yaw_span(c);
                [-360.0, 0.0, 360.0]
                    .iter()
                    .any(|shift| lo.max(c0 + shift) < hi.min(c1 + shift))
            })
            .collect()
    }

    /// Rows with positive-height overlap with the pitch interval centred at
    /// `center`, clamped at the poles.
    pub fn rows_overlapping(&self, center: f64, height: f64) -> Vec<usize> {
        let center = center.clamp(-90.0, 90.0);
        if height <= 0.0 {
            return vec![self.row_at(center)];
        }
        let lo = (center - height / 2.0).max(-90.0);
        let hi = (center + height / 2.0).min(90.0);
        (1..=self.rows)
            .filter(|&r| {
                let (r0, r1) = self.pitch_span(r);
                lo.max(r0) < hi.min(r1)
            })
            .collect()
    }
}

/// Normalise a yaw angle into `[0, 360)`.
pub fn wrap_yaw(yaw_deg: f64) -> f64 {
    let y = yaw_deg.rem_euclid(360.0);
    if y >= 360.0 {
        0.0
    } else {
        y
    }
}

/// Tiles whose rectangles intersect a `width x height` viewport centred at
/// `(yaw, pitch)`. The result is sorted by tile index.
pub fn tiles_overlapping_viewport(
    center: (f64, f64),
    viewport: (f64, f64),
    grid: &TileGrid,
) -> Vec<usize> {
    let cols = grid.cols_overlapping(center.0, viewport.0);
    let rows = grid.rows_overlapping(center.1, viewport.1);
    let mut tiles: Vec<usize> = cols
        .iter()
        .flat_map(|&c| rows.iter().map(move |&r| grid.index(r, c)))
        .collect();
    tiles.sort_unstable();
    tiles
}

//! Viewport prediction and tile selection.
//!
//! The next viewport centre is extrapolated from the current pose and angular
//! speed. Prediction error is modelled as independent Gaussians on yaw and
//! pitch, discretised on a fixed lattice of candidate centres. A tile's
//! viewing probability is the total weight of the candidates whose viewport
//! overlaps it. The fetch set starts as the bounding rectangle of all tiles
//! with positive probability and is then trimmed one boundary row or column at
//! a time while every tile on that boundary falls below `epsilon`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tiles_overlapping_viewport, wrap_yaw, TileGrid};

/// Spacing of the candidate lattice, degrees.
pub const LATTICE_STEP_DEG: f64 = 5.0;
/// Candidates are kept within this many standard deviations of the centre.
pub const TRUNCATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    yaw_deg: f64,
    pitch_deg: f64,
}

impl Pose {
    pub fn new(yaw_deg: f64, pitch_deg: f64) -> Self {
        Self {
            yaw_deg: wrap_yaw(yaw_deg),
            pitch_deg: pitch_deg.clamp(-90.0, 90.0),
        }
    }

    pub fn yaw(&self) -> f64 {
        self.yaw_deg
    }

    pub fn pitch(&self) -> f64 {
        self.pitch_deg
    }
}

/// Signed angular speeds, degrees per second.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rotation {
    pub omega_y: f64,
    pub omega_p: f64,
}

pub fn predict_center(pose: Pose, rotation: Rotation, horizon: f64) -> Pose {
    Pose::new(
        pose.yaw() + rotation.omega_y * horizon,
        pose.pitch() + rotation.omega_p * horizon,
    )
}

/// Per-tile viewing probabilities over a grid, indexed by 1-based tile id.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    grid: TileGrid,
    p: Vec<f64>,
}

impl ProbabilityField {
    pub fn new(grid: TileGrid, p: Vec<f64>) -> Result<Self> {
        if p.len() != grid.tile_count() {
            return Err(Error::InvalidInput(format!(
                "probability field has {} entries for {} tiles",
                p.len(),
                grid.tile_count()
            )));
        }
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "probability {v} outside [0, 1]"
            )));
        }
        Ok(Self { grid, p })
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn get(&self, tile: usize) -> f64 {
        self.p[tile - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    /// Tile with the highest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.p.iter().enumerate() {
            if v > self.p[best] {
                best = i;
            }
        }
        best + 1
    }
}

/// One candidate viewport centre and its normalised Gaussian weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub center: Pose,
    pub weight: f64,
}

fn lattice_offsets(sigma: f64) -> Vec<f64> {
    let reach = (TRUNCATION_SIGMAS * sigma / LATTICE_STEP_DEG).floor() as i64;
    (-reach..=reach)
        .map(|k| k as f64 * LATTICE_STEP_DEG)
        .collect()
}

/// Candidate centres around `center`, weights summing to one.
pub fn candidate_centers(center: Pose, sigma_y: f64, sigma_p: f64) -> Vec<Candidate> {
    let ys = lattice_offsets(sigma_y);
    let ps = lattice_offsets(sigma_p);
    let mut out = Vec::with_capacity(ys.len() * ps.len());
    for &dy in &ys {
        let wy = (-dy * dy / (2.0 * sigma_y * sigma_y)).exp();
        for &dp in &ps {
            let wp = (-dp * dp / (2.0 * sigma_p * sigma_p)).exp();
            out.push(Candidate {
                center: Pose::new(center.yaw() + dy, center.pitch() + dp),
                weight: wy * wp,
            });
        }
    }
    let total: f64 = out.iter().map(|c| c.weight).sum();
    for c in &mut out {
        c.weight /= total;
    }
    out
}

pub fn viewing_probabilities(
    center: Pose,
    sigma_y: f64,
    sigma_p: f64,
    viewport: (f64, f64),
    grid: &TileGrid,
) -> Result<ProbabilityField> {
    if !(sigma_y > 0.0 && sigma_p > 0.0) {
        return Err(Error::InvalidInput(format!(
            "standard deviations must be positive, got ({sigma_y}, {sigma_p})"
        )));
    }
    let candidates = candidate_centers(center, sigma_y, sigma_p);
    let mut p = vec![0.0; grid.tile_count()];
    let mut hits = vec![0usize; grid.tile_count()];
    for c in &candidates {
        for tile in tiles_overlapping_viewport((c.center.yaw(), c.center.pitch()), viewport, grid) {
            p[tile - 1] += c.weight;
            hits[tile - 1] += 1;
        }
    }
    for (v, &h) in p.iter_mut().zip(&hits) {
        // exact one when every candidate covers the tile
        *v = if h == candidates.len() {
            1.0
        } else {
            v.min(1.0)
        };
    }
    ProbabilityField::new(*grid, p)
}

/// Rectangular fetch set on the grid, wrapping in yaw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchSet {
    /// Member tiles, ascending.
    pub tiles: Vec<usize>,
    pub row_first: usize,
    pub row_last: usize,
    /// First column of the rectangle; columns continue rightwards, wrapping.
    pub col_first: usize,
    pub col_count: usize,
}

impl FetchSet {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn contains(&self, tile: usize) -> bool {
        self.tiles.binary_search(&tile).is_ok()
    }

    pub fn columns(&self, grid: &TileGrid) -> Vec<usize> {
        (0..self.col_count)
            .map(|k| (self.col_first - 1 + k) % grid.cols() + 1)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    row_first: usize,
    row_last: usize,
    col_first: usize,
    col_count: usize,
}

impl Rect {
    fn col(&self, k: usize, cols: usize) -> usize {
        (self.col_first - 1 + k) % cols + 1
    }

    fn contains(&self, row: usize, col: usize, cols: usize) -> bool {
        let k = (col + cols - self.col_first) % cols;
        (self.row_first..=self.row_last).contains(&row) && k < self.col_count
    }

    fn into_fetch_set(self, grid: &TileGrid) -> FetchSet {
        let mut tiles: Vec<usize> = (0..self.col_count)
            .flat_map(|k| {
                let c = self.col(k, grid.cols());
                (self.row_first..=self.row_last).map(move |r| grid.index(r, c))
            })
            .collect();
        tiles.sort_unstable();
        FetchSet {
            tiles,
            row_first: self.row_first,
            row_last: self.row_last,
            col_first: self.col_first,
            col_count: self.col_count,
        }
    }
}

/// Smallest wrapping column arc covering every occupied column.
fn column_arc(occupied: &[bool]) -> (usize, usize) {
    let cols = occupied.len();
    if occupied.iter().all(|&o| o) {
        return (1, cols);
    }
    // the arc starts right after the longest circular run of empty columns
    let mut best_gap = 0;
    let mut best_start = 0;
    for start in 0..cols {
        if occupied[start] || !occupied[(start + cols - 1) % cols] {
            continue;
        }
        let mut len = 0;
        while len < cols && !occupied[(start + len) % cols] {
            len += 1;
        }
        if len > best_gap {
            best_gap = len;
            best_start = start;
        }
    }
    let first = (best_start + best_gap) % cols;
    (first + 1, cols - best_gap)
}

/// Select the fetch set, never removing the highest-probability tile.
pub fn select_tiles(p: &ProbabilityField, epsilon: f64) -> Result<FetchSet> {
    select_tiles_anchored(p, epsilon, p.argmax())
}

/// Select the fetch set, never removing the row or column holding `anchor`.
pub fn select_tiles_anchored(
    p: &ProbabilityField,
    epsilon: f64,
    anchor: usize,
) -> Result<FetchSet> {
    let grid = p.grid();
    if !p.values().iter().any(|&v| v > 0.0) {
        return Err(Error::InvalidInput(
            "all viewing probabilities are zero".into(),
        ));
    }
    let support: Vec<usize> = (1..=grid.tile_count())
        .filter(|&t| p.get(t) > 0.0)
        .collect();
    let (anchor_row, anchor_col) = grid.position(anchor);
    let rows = support.iter().map(|&t| grid.position(t).0);
    let row_first = rows.clone().min().unwrap().min(anchor_row);
    let row_last = rows.max().unwrap().max(anchor_row);
    let mut occupied = vec![false; grid.cols()];
    for &t in &support {
        occupied[grid.position(t).1 - 1] = true;
    }
    occupied[anchor_col - 1] = true;
    let (col_first, col_count) = column_arc(&occupied);
    let mut rect = Rect {
        row_first,
        row_last,
        col_first,
        col_count,
    };

    let below = |tiles: &mut dyn Iterator<Item = usize>| {
        let mut all = true;
        for t in tiles {
            all &= p.get(t) < epsilon;
        }
        all
    };
    loop {
        let mut changed = false;
        if rect.row_first < rect.row_last && rect.row_first != anchor_row {
            let r = rect.row_first;
            let mut line = (0..rect.col_count).map(|k| grid.index(r, rect.col(k, grid.cols())));
            if below(&mut line) {
                rect.row_first += 1;
                changed = true;
            }
        }
        if rect.row_first < rect.row_last && rect.row_last != anchor_row {
            let r = rect.row_last;
            let mut line = (0..rect.col_count).map(|k| grid.index(r, rect.col(k, grid.cols())));
            if below(&mut line) {
                rect.row_last -= 1;
                changed = true;
            }
        }
        if rect.col_count > 1 && rect.col_first != anchor_col {
            let c = rect.col_first;
            let mut line = (rect.row_first..=rect.row_last).map(|r| grid.index(r, c));
            if below(&mut line) {
                rect.col_first = rect.col(1, grid.cols());
                rect.col_count -= 1;
                changed = true;
            }
        }
        if rect.col_count > 1 {
            let c = rect.col(rect.col_count - 1, grid.cols());
            let mut line = (rect.row_first..=rect.row_last).map(|r| grid.index(r, c));
            if c != anchor_col && below(&mut line) {
                rect.col_count -= 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    debug_assert!(rect.contains(anchor_row, anchor_col, grid.cols()));
    Ok(rect.into_fetch_set(grid))
}

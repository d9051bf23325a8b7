//! Per-tile cost indicators and the knapsack-style quality assignment.
//!
//! Each fetched tile must receive exactly one quality level. A level costs
//! `tau = xi * VLI + rho * CI` and consumes its bitrate, quantised up to whole
//! budget units. [`assign_quality_dp`] returns a minimum-cost assignment whose
//! units fit the slot budget.
//!
//! Ties between equal-cost assignments go to the one with the higher level on
//! the lowest-indexed tile, then the next tile, and so on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Infeasible, Result};
use crate::model::{ChunkMeta, Intervention};
use crate::vpts::{FetchSet, ProbabilityField};

/// Relative slack under which two DP costs count as equal.
const COST_TIE_TOL: f64 = 1e-12;

fn check_mass(sum_p: f64) -> Result<()> {
    if sum_p > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "probability mass over the fetch set must be positive, got {sum_p}"
        )))
    }
}

/// Cybersickness indicator of one tile at one level.
pub fn compute_ci(flow: f64, shrink: f64, p: f64, sum_p: f64) -> Result<f64> {
    check_mass(sum_p)?;
    Ok(flow * shrink * p / sum_p)
}

/// Video loss indicator of one tile at one level.
pub fn compute_vli(distortion: f64, shrink: f64, p: f64, sum_p: f64) -> Result<f64> {
    check_mass(sum_p)?;
    if !(shrink > 0.0) {
        return Err(Error::InvalidInput(format!(
            "shrink factor must be positive, got {shrink}"
        )));
    }
    Ok(p * distortion / (shrink * sum_p))
}

/// Bitrate in whole budget units, rounded up.
pub fn quantize(bitrate: f64, bw_unit: f64) -> u64 {
    // absorb float noise such as 1.1 / 0.1 = 11.000000000000002
    let units = (bitrate / bw_unit - 1e-9).ceil();
    if units > 0.0 {
        units as u64
    } else {
        0
    }
}

/// Fetched tiles with their viewing probabilities for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TileWeights {
    pub tiles: Vec<usize>,
    pub p: Vec<f64>,
    pub sum_p: f64,
}

impl TileWeights {
    pub fn new(tiles: Vec<usize>, p: Vec<f64>) -> Result<Self> {
        if tiles.len() != p.len() {
            return Err(Error::InvalidInput(
                "tile and probability lists differ in length".into(),
            ));
        }
        let sum_p = p.iter().sum();
        if !tiles.is_empty() {
            check_mass(sum_p)?;
        }
        Ok(Self { tiles, p, sum_p })
    }

    pub fn from_fetch_set(fetch: &FetchSet, field: &ProbabilityField) -> Result<Self> {
        let p = fetch.tiles.iter().map(|&t| field.get(t)).collect();
        Self::new(fetch.tiles.clone(), p)
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

/// Weights of the two terms of `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub xi: f64,
    pub rho: f64,
}

/// `tau` for tile `n` of `weights` (0-based position) at `level`.
pub fn tile_cost_tau(
    chunk: &ChunkMeta,
    weights: &TileWeights,
    n: usize,
    level: usize,
    intervention: Intervention,
    k_dof: f64,
    cost: CostWeights,
) -> Result<f64> {
    let m = chunk.get(weights.tiles[n], level);
    let shrink = intervention.factor(k_dof);
    let vli = compute_vli(m.distortion, shrink, weights.p[n], weights.sum_p)?;
    let ci = compute_ci(m.flow, shrink, weights.p[n], weights.sum_p)?;
    Ok(cost.xi * vli + cost.rho * ci)
}

/// Per-level options of one tile, index 0 is level 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TileChoices {
    pub tile: usize,
    pub cost: Vec<f64>,
    pub units: Vec<u64>,
    pub bitrate: Vec<f64>,
}

/// Input to the quality assignment: tiles in ascending index order.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityProblem {
    pub tiles: Vec<TileChoices>,
}

impl QualityProblem {
    pub fn build(
        chunk: &ChunkMeta,
        weights: &TileWeights,
        intervention: Intervention,
        k_dof: f64,
        cost: CostWeights,
        bw_unit: f64,
    ) -> Result<Self> {
        let tiles = (0..weights.len())
            .map(|n| {
                let tile = weights.tiles[n];
                let levels = 1..=chunk.levels();
                Ok(TileChoices {
                    tile,
                    cost: levels
                        .clone()
                        .map(|j| tile_cost_tau(chunk, weights, n, j, intervention, k_dof, cost))
                        .collect::<Result<_>>()?,
                    units: levels
                        .clone()
                        .map(|j| quantize(chunk.get(tile, j).bitrate, bw_unit))
                        .collect(),
                    bitrate: levels.map(|j| chunk.get(tile, j).bitrate).collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { tiles })
    }

    /// Same ladder `(cost, units)` on every tile; bitrate equals units.
    pub fn uniform(tiles: &[usize], ladder: &[(f64, u64)]) -> Self {
        Self {
            tiles: tiles
                .iter()
                .map(|&tile| TileChoices {
                    tile,
                    cost: ladder.iter().map(|l| l.0).collect(),
                    units: ladder.iter().map(|l| l.1).collect(),
                    bitrate: ladder.iter().map(|l| l.1 as f64).collect(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Fail unless every tile at level 1 fits in `budget` together.
    pub fn check_feasible(&self, budget: u64) -> std::result::Result<(), Infeasible> {
        let required: u64 = self.tiles.iter().map(|t| t.units[0]).sum();
        if required <= budget {
            return Ok(());
        }
        let mut blocking: Vec<usize> = self
            .tiles
            .iter()
            .filter(|t| t.units[0] > budget)
            .map(|t| t.tile)
            .collect();
        if blocking.is_empty() {
            blocking = self.tiles.iter().map(|t| t.tile).collect();
        }
        Err(Infeasible {
            blocking,
            required,
            budget,
        })
    }

    /// Assemble an [`Assignment`] from 1-based levels, one per tile.
    pub fn assignment(&self, levels: Vec<usize>) -> Assignment {
        let mut a = Assignment {
            tiles: self.tiles.iter().map(|t| t.tile).collect(),
            levels,
            total_units: 0,
            total_bitrate: 0.0,
            total_cost: 0.0,
        };
        for (t, &j) in self.tiles.iter().zip(&a.levels) {
            a.total_units += t.units[j - 1];
            a.total_bitrate += t.bitrate[j - 1];
            a.total_cost += t.cost[j - 1];
        }
        a
    }
}

/// One level per fetched tile, aligned with `tiles`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub tiles: Vec<usize>,
    pub levels: Vec<usize>,
    pub total_units: u64,
    /// Megabits.
    pub total_bitrate: f64,
    pub total_cost: f64,
}

impl Assignment {
    pub fn level_of(&self, tile: usize) -> Option<usize> {
        self.tiles
            .iter()
            .position(|&t| t == tile)
            .map(|n| self.levels[n])
    }
}

fn better(candidate: f64, incumbent: f64) -> bool {
    incumbent.is_infinite() || candidate < incumbent - COST_TIE_TOL * incumbent.abs().max(1.0)
}

/// Minimum-cost assignment within `budget` units.
pub fn assign_quality_dp(
    problem: &QualityProblem,
    budget: u64,
) -> std::result::Result<Assignment, Infeasible> {
    problem.check_feasible(budget)?;
    let n_tiles = problem.len();
    let ceiling: u64 = problem
        .tiles
        .iter()
        .map(|t| *t.units.iter().max().unwrap())
        .sum();
    let width = budget.min(ceiling) as usize + 1;

    // Stage n covers the last n tiles, so backtracking from stage N fixes
    // tile 0 first and the tie rule applies in ascending tile order.
    let mut best = vec![0.0f64; width];
    let mut choice = vec![0u32; n_tiles * width];
    for n in 1..=n_tiles {
        let t = &problem.tiles[n_tiles - n];
        let mut next = vec![f64::INFINITY; width];
        for beta in 0..width {
            let row = &mut choice[(n - 1) * width..n * width];
            for j in (0..t.cost.len()).rev() {
                let b = t.units[j] as usize;
                if b > beta || !best[beta - b].is_finite() {
                    continue;
                }
                let c = best[beta - b] + t.cost[j];
                if better(c, next[beta]) {
                    next[beta] = c;
                    row[beta] = j as u32 + 1;
                }
            }
        }
        best = next;
    }

    let mut levels = Vec::with_capacity(n_tiles);
    let mut beta = width - 1;
    for n in (1..=n_tiles).rev() {
        let j = choice[(n - 1) * width + beta] as usize;
        debug_assert!(
            j > 0,
            "feasible problem has a choice at every reachable state"
        );
        levels.push(j);
        beta -= problem.tiles[n_tiles - n].units[j - 1] as usize;
    }
    Ok(problem.assignment(levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE_LADDER: [(f64, u64); 4] = [(8.0, 1), (4.0, 2), (2.0, 3), (1.0, 4)];

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn indicator_values() {
        assert_eq!(compute_ci(0.8, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(close(compute_ci(0.8, 1.0, 0.5, 1.0).unwrap(), 0.4));
        assert!(close(compute_ci(0.8, 0.63, 0.5, 1.0).unwrap(), 0.252));
        assert_eq!(compute_vli(1.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(close(compute_vli(2.0, 1.0, 0.5, 1.0).unwrap(), 1.0));
        assert!(close(compute_vli(2.0, 0.63, 0.5, 1.0).unwrap(), 1.0 / 0.63));
        assert!(close(1.0 * 1.0 + 2.5 * 0.4, 2.0));
    }

    #[test]
    fn indicator_errors() {
        assert!(compute_ci(0.5, 1.0, 0.5, 0.0).is_err());
        assert!(compute_vli(1.5, 0.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn quantize_rounds_up() {
        assert_eq!(quantize(1.1, 0.1), 11);
        assert_eq!(quantize(0.3, 0.1), 3);
        assert_eq!(quantize(0.31, 0.1), 4);
        assert_eq!(quantize(0.0, 0.1), 0);
        assert_eq!(quantize(4.0, 1.0), 4);
    }

    #[test]
    fn example_budgets() {
        let problem = QualityProblem::uniform(&[10, 11, 16, 17], &EXAMPLE_LADDER);
        let expect = [
            (13, vec![4, 3, 3, 3], 7.0),
            (14, vec![4, 4, 3, 3], 6.0),
            (18, vec![4, 4, 4, 4], 4.0),
            (20, vec![4, 4, 4, 4], 4.0),
        ];
        for (budget, levels, cost) in expect {
            let a = assign_quality_dp(&problem, budget).unwrap();
            assert_eq!(a.levels, levels, "budget {budget}");
            assert_eq!(a.total_cost, cost);
            assert!(a.total_units <= budget);
        }
    }

    #[test]
    fn empty_set() {
        let a = assign_quality_dp(&QualityProblem { tiles: vec![] }, 0).unwrap();
        assert!(a.levels.is_empty());
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn infeasible_reports_blocking_tiles() {
        let problem = QualityProblem::uniform(&[3, 4], &EXAMPLE_LADDER);
        let err = assign_quality_dp(&problem, 0).unwrap_err();
        assert_eq!(err.blocking, vec![3, 4]);
        assert_eq!((err.required, err.budget), (2, 0));
        let mut problem = problem;
        problem.tiles[1].units = vec![5, 6, 7, 8];
        let err = assign_quality_dp(&problem, 4).unwrap_err();
        assert_eq!(err.blocking, vec![4]);
    }

    #[test]
    fn free_level_fits_zero_budget() {
        let problem = QualityProblem::uniform(&[1, 2], &[(3.0, 0), (1.0, 1)]);
        assert_eq!(assign_quality_dp(&problem, 0).unwrap().levels, vec![1, 1]);
    }

    fn problem_strategy() -> impl Strategy<Value = QualityProblem> {
        (1usize..=5, 1usize..=4).prop_flat_map(|(n, l)| {
            prop::collection::vec(
                (
                    prop::collection::vec(0.0..10.0f64, l),
                    prop::collection::vec(0u64..8, l),
                ),
                n,
            )
            .prop_map(|tiles| QualityProblem {
                tiles: tiles
                    .into_iter()
                    .enumerate()
                    .map(|(i, (cost, units))| TileChoices {
                        tile: i + 1,
                        bitrate: units.iter().map(|&u| u as f64).collect(),
                        cost,
                        units,
                    })
                    .collect(),
            })
        })
    }

    proptest! {
        #[test]
        fn cost_non_increasing_in_budget(problem in problem_strategy(), budget in 0u64..30) {
            if let Ok(a) = assign_quality_dp(&problem, budget) {
                prop_assert!(a.total_units <= budget);
                let b = assign_quality_dp(&problem, budget + 1).unwrap();
                prop_assert!(b.total_cost <= a.total_cost + 1e-9);
            }
        }
    }
}

//! Brute-force reference solvers and the randomized suites that compare them
//! with the fast path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{etscaa_step, plan_fetch, slot_budget, SlotContext, SystemState};
use crate::error::{Error, Infeasible, Result};
use crate::model::{ChunkMeta, Config, Intervention, TileGrid, TileMeta};
use crate::queues::update_sickness_queue;
use crate::tqa::{assign_quality_dp, quantize, Assignment, QualityProblem, TileChoices};
use crate::vpts::{Pose, Rotation};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

const TIE_TOL: f64 = 1e-12;

fn combinations(levels: usize, tiles: usize, cap: u128) -> Result<u128> {
    let mut total: u128 = 1;
    for _ in 0..tiles {
        total = total.saturating_mul(levels as u128);
        if total > cap {
            return Err(Error::EnumerationCap {
                required: total,
                cap,
            });
        }
    }
    Ok(total)
}

/// Odometer over all level vectors in `[1, levels]^tiles`.
fn for_each_vector(tiles: usize, levels: usize, mut visit: impl FnMut(&[usize])) {
    let mut v = vec![1; tiles];
    loop {
        visit(&v);
        let mut k = tiles;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if v[k] < levels {
                v[k] += 1;
                break;
            }
            v[k] = 1;
        }
    }
}

/// Prefer lower cost; on a tie prefer the lexicographically larger vector.
fn improves(cost: f64, levels: &[usize], best: &Option<(f64, Vec<usize>)>) -> bool {
    match best {
        None => true,
        Some((bc, bl)) => {
            let tol = TIE_TOL * bc.abs().max(1.0);
            cost < bc - tol || (cost <= bc + tol && levels > bl.as_slice())
        }
    }
}

/// Global minimum-cost feasible assignment by full enumeration.
pub fn exhaustive_assignment(
    problem: &QualityProblem,
    budget: u64,
    cap: u128,
) -> Result<Assignment> {
    let levels = problem.tiles.first().map(|t| t.cost.len()).unwrap_or(1);
    combinations(levels, problem.len(), cap)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_vector(problem.len(), levels, |v| {
        let units: u64 = v
            .iter()
            .zip(&problem.tiles)
            .map(|(&j, t)| t.units[j - 1])
            .sum();
        if units > budget {
            return;
        }
        let cost: f64 = v
            .iter()
            .zip(&problem.tiles)
            .map(|(&j, t)| t.cost[j - 1])
            .sum();
        if improves(cost, v, &best) {
            best = Some((cost, v.to_vec()));
        }
    });
    match best {
        Some((_, levels)) => Ok(problem.assignment(levels)),
        None => Err(problem
            .check_feasible(budget)
            .expect_err("no feasible vector")
            .into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_assignment: Assignment,
    pub best_config: Intervention,
    pub best_objective: f64,
    pub enumeration_count: u128,
}

/// True per-slot minimum of `xi * Phi + rho * Q^S` over every configuration
/// and every feasible assignment of the same fetch set.
pub fn exhaustive_step(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
    cap: u128,
) -> Result<OracleResult> {
    config.validate()?;
    let plan = plan_fetch(state, ctx, config)?;
    let w = &plan.weights;
    let levels = ctx.chunk.levels();
    let configs: Vec<Intervention> = config
        .sfov_ladder
        .iter()
        .flat_map(|&s| {
            config
                .dof_options()
                .iter()
                .map(move |&y| Intervention::new(s, y))
        })
        .collect();
    let per_config = combinations(levels, w.len(), cap)?;
    let enumeration_count = per_config * configs.len() as u128;
    if enumeration_count > cap {
        return Err(Error::EnumerationCap {
            required: enumeration_count,
            cap,
        });
    }

    let table = |f: &dyn Fn(&TileMeta) -> f64| -> Vec<Vec<f64>> {
        (0..w.len())
            .map(|n| {
                (1..=levels)
                    .map(|j| w.p[n] * f(ctx.chunk.get(w.tiles[n], j)))
                    .collect()
            })
            .collect()
    };
    let pd = table(&|m| m.distortion);
    let pf = table(&|m| m.flow);
    let unit_table: Vec<Vec<u64>> = (0..w.len())
        .map(|n| {
            (1..=levels)
                .map(|j| quantize(ctx.chunk.get(w.tiles[n], j).bitrate, config.bw_unit))
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Intervention, Vec<usize>)> = None;
    let mut failure: Option<Error> = None;
    for &iv in &configs {
        let budget = slot_budget(state, ctx, config, iv)?;
        let shrink = iv.factor(config.k_dof);
        for_each_vector(w.len(), levels, |v| {
            if failure.is_some() {
                return;
            }
            let u: u64 = v
                .iter()
                .enumerate()
                .map(|(n, &j)| unit_table[n][j - 1])
                .sum();
            if u > budget {
                return;
            }
            let d: f64 = v
                .iter()
                .enumerate()
                .map(|(n, &j)| pd[n][j - 1])
                .sum::<f64>()
                / w.sum_p;
            let f: f64 = v
                .iter()
                .enumerate()
                .map(|(n, &j)| pf[n][j - 1])
                .sum::<f64>()
                / w.sum_p;
            let qs = match update_sickness_queue(
                state.qs,
                state.rotation.omega_y,
                state.rotation.omega_p,
                f,
                iv.s_fov,
                iv.y_dof,
                config.k_dof,
                config.cs,
                config.omega,
            ) {
                Ok(q) => q.value,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let objective = config.xi * d / shrink + config.rho * qs;
            if best.as_ref().is_none_or(|(b, _, _)| objective < *b) {
                best = Some((objective, iv, v.to_vec()));
            }
        });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let Some((best_objective, best_config, best_levels)) = best else {
        let required = unit_table.iter().map(|r| r[0]).sum();
        let budget = configs
            .iter()
            .map(|&iv| slot_budget(state, ctx, config, iv))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(0);
        return Err(Infeasible {
            blocking: w.tiles.clone(),
            required,
            budget,
        }
        .into());
    };
    let problem = QualityProblem {
        tiles: (0..w.len())
            .map(|n| TileChoices {
                tile: w.tiles[n],
                cost: vec![0.0; levels],
                units: unit_table[n].clone(),
                bitrate: (1..=levels)
                    .map(|j| ctx.chunk.get(w.tiles[n], j).bitrate)
                    .collect(),
            })
            .collect(),
    };
    Ok(OracleResult {
        best_assignment: problem.assignment(best_levels),
        best_config,
        best_objective,
        enumeration_count,
    })
}

/// Outcome of a randomized comparison suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    /// Instances skipped because no configuration was feasible.
    pub skipped: usize,
    pub failures: usize,
    /// Largest observed ratio, or ratio-to-bound for the competitive suite.
    pub worst: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Random problem with `|V| <= 6`, `L <= 4` and budget `<= 30` units.
pub fn random_quality_problem(rng: &mut impl Rng) -> (QualityProblem, u64) {
    let n = rng.random_range(1..=6);
    let levels = rng.random_range(1..=4);
    let tiles = (1..=n)
        .map(|tile| {
            let mut units: Vec<u64> = (0..levels).map(|_| rng.random_range(0..=8)).collect();
            units.sort_unstable();
            TileChoices {
                tile,
                cost: (0..levels)
                    .map(|_| (rng.random_range(0.0..10.0f64) * 4.0).round() / 4.0)
                    .collect(),
                bitrate: units.iter().map(|&u| u as f64).collect(),
                units,
            }
        })
        .collect();
    (QualityProblem { tiles }, rng.random_range(0..=30))
}

/// Compare the dynamic program with full enumeration on random problems.
pub fn dp_agreement_suite(instances: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "dp-vs-exhaustive".into(),
        instances,
        skipped: 0,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..instances {
        let (problem, budget) = random_quality_problem(&mut rng);
        let fast = assign_quality_dp(&problem, budget);
        let slow = exhaustive_assignment(&problem, budget, DEFAULT_ENUMERATION_CAP);
        match (fast, slow) {
            (Ok(a), Ok(b)) => {
                let gap = (a.total_cost - b.total_cost).abs();
                report.worst = report.worst.max(gap);
                if gap > 1e-9 || a.levels != b.levels || a.total_units > budget {
                    report.failures += 1;
                }
            }
            (Err(_), Err(_)) => report.skipped += 1,
            _ => report.failures += 1,
        }
    }
    report
}

/// Random ladder per tile: increasing bitrate, decreasing distortion,
/// non-decreasing flow.
fn random_chunk(rng: &mut impl Rng, tiles: usize, levels: usize) -> ChunkMeta {
    let rows = (0..tiles)
        .map(|_| {
            let mut b = rng.random_range(0.05..0.6);
            let mut d = rng.random_range(1.05..2.5);
            let mut f = rng.random_range(0.0..0.4);
            (0..levels)
                .map(|_| {
                    let m = TileMeta {
                        bitrate: b,
                        distortion: d,
                        flow: f,
                    };
                    b *= rng.random_range(1.3..2.5);
                    d = 1.0 + (d - 1.0) * rng.random_range(0.2..0.9);
                    f = (f + rng.random_range(0.0..0.2)).min(1.0);
                    m
                })
                .collect()
        })
        .collect();
    ChunkMeta::new(rows).expect("rectangular")
}

/// Small random slot: 3x4 grid, 60x60 viewport and a single prediction
/// candidate, so at most four tiles are fetched.
pub struct SmallInstance {
    pub grid: TileGrid,
    pub chunk: ChunkMeta,
    pub next: ChunkMeta,
    pub state: SystemState,
    pub bandwidth: f64,
    pub config: Config,
}

impl SmallInstance {
    pub fn random(rng: &mut impl Rng) -> Self {
        let grid = TileGrid::new(3, 4).expect("fixed grid");
        let levels = rng.random_range(2..=4);
        let config = Config {
            sigma_y_deg: 1.0,
            sigma_p_deg: 1.0,
            viewport_w_deg: 60.0,
            viewport_h_deg: 60.0,
            bw_unit: 0.05,
            qs_init: 0.0,
            ..Config::default()
        };
        let state = SystemState {
            qp: rng.random_range(0.3..1.0),
            qs: rng.random_range(0.0..1.0),
            gamma: 0.0,
            pose: Pose::new(rng.random_range(0.0..360.0), rng.random_range(-60.0..60.0)),
            rotation: Rotation {
                omega_y: rng.random_range(-40.0..40.0),
                omega_p: rng.random_range(-10.0..10.0),
            },
        };
        Self {
            grid,
            chunk: random_chunk(rng, grid.tile_count(), levels),
            next: random_chunk(rng, grid.tile_count(), levels),
            state,
            bandwidth: rng.random_range(0.5..6.0),
            config,
        }
    }

    pub fn context(&self) -> SlotContext<'_> {
        SlotContext {
            grid: &self.grid,
            chunk_duration: 1.0,
            chunk: &self.chunk,
            next: &self.next,
            bandwidth: self.bandwidth,
        }
    }

    /// `1 / (s_min (1 - k_dof) r)` with `r` the lowest SSIM over the fetched tiles.
    pub fn competitive_bound(&self, tiles: &[usize]) -> f64 {
        let worst_d = tiles
            .iter()
            .flat_map(|&t| self.chunk.tile(t).iter().map(|m| m.distortion))
            .fold(1.0, f64::max);
        worst_d / (self.config.smallest_sfov() * (1.0 - self.config.k_dof))
    }
}

/// Check the heuristic against the per-slot optimum and its competitive bound.
pub fn competitive_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "competitive-bound".into(),
        instances,
        skipped: 0,
        failures: 0,
        worst: 0.0,
    };
    for _ in 0..instances {
        let inst = SmallInstance::random(&mut rng);
        let ctx = inst.context();
        let oracle = match exhaustive_step(&inst.state, &ctx, &inst.config, DEFAULT_ENUMERATION_CAP)
        {
            Ok(o) => o,
            Err(Error::Infeasible(_)) => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let heuristic = etscaa_step(&inst.state, &ctx, &inst.config)?;
        let ratio = heuristic.objective_value / oracle.best_objective;
        let bound = inst.competitive_bound(&heuristic.fetch_set.tiles);
        report.worst = report.worst.max(ratio / bound);
        if ratio > bound || oracle.best_objective > heuristic.objective_value + 1e-9 {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{etscaa_step_detailed, SlotContext};

    const EXAMPLE_LADDER: [(f64, u64); 4] = [(8.0, 1), (4.0, 2), (2.0, 3), (1.0, 4)];

    #[test]
    fn example_fixture_agrees_with_dp() {
        let problem = QualityProblem::uniform(&[10, 11, 16, 17], &EXAMPLE_LADDER);
        let a = exhaustive_assignment(&problem, 13, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(a.levels, vec![4, 3, 3, 3]);
        assert_eq!(a.total_cost, 7.0);
    }

    #[test]
    fn single_tile_picks_cheapest_level() {
        let problem = QualityProblem::uniform(&[1], &[(3.0, 1), (0.5, 2), (2.0, 3)]);
        assert_eq!(
            exhaustive_assignment(&problem, 3, DEFAULT_ENUMERATION_CAP)
                .unwrap()
                .levels,
            vec![2]
        );
    }

    #[test]
    fn cap_and_infeasibility() {
        let problem =
            QualityProblem::uniform(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], &EXAMPLE_LADDER);
        assert!(matches!(
            exhaustive_assignment(&problem, 100, 1000),
            Err(Error::EnumerationCap { .. })
        ));
        let problem = QualityProblem::uniform(&[1, 2], &EXAMPLE_LADDER);
        assert!(matches!(
            exhaustive_assignment(&problem, 1, DEFAULT_ENUMERATION_CAP),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn odometer_visits_every_vector_once() {
        let mut seen = Vec::new();
        for_each_vector(3, 2, |v| seen.push(v.to_vec()));
        assert_eq!(seen.len(), 8);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn end_to_end_fixture_is_exact() {
        use crate::controller::fixture;
        let (grid, now, next) = fixture::chunks();
        let ctx = SlotContext {
            grid: &grid,
            chunk_duration: 1.0,
            chunk: &now,
            next: &next,
            bandwidth: 8.0,
        };
        let config = fixture::config();
        let o = exhaustive_step(&fixture::state(), &ctx, &config, DEFAULT_ENUMERATION_CAP).unwrap();
        let (d, _) = etscaa_step_detailed(&fixture::state(), &ctx, &config).unwrap();
        assert_eq!(o.enumeration_count, 2 * 2 * 4u128.pow(4));
        assert_eq!(o.best_assignment.levels, vec![4, 4, 4, 4]);
        assert_eq!(o.best_config, Intervention::new(0.7, false));
        assert!((o.best_objective - d.objective_value).abs() < 1e-12);
    }

    #[test]
    fn suites_pass_on_a_small_sample() {
        assert!(dp_agreement_suite(100, 3).passed());
        let r = competitive_suite(30, 4).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}

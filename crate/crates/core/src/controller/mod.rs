//! Per-slot decision making.
//!
//! [`etscaa_step`] predicts the viewport, selects the fetch set once, then for
//! every FoV ratio and DoF flag computes the slot budget, solves the quality
//! assignment, refines it by local search and scores it with
//! `xi * Phi + rho * Q^S`, where `Q^S` is the sickness occupancy predicted
//! with the current head rotation. The lowest score wins; ties keep the
//! earlier configuration, that is the larger FoV and DoF off.
//!
//! The three baselines in [`baselines`] share phase 1 and scoring but always
//! stream at full FoV without DoF.

mod baselines;

use log::warn;
use serde::{Deserialize, Serialize};

pub use baselines::{baseline_greedy_step, baseline_probdash_step, baseline_uniform_step};

use crate::ctqc::{refine, SearchLimits, SmiContext};
use crate::error::{Error, Result};
use crate::model::{ChunkMeta, Config, Intervention, TileGrid};
use crate::queues::{bandwidth_budget, update_packet_queue, update_sickness_queue};
use crate::tqa::{assign_quality_dp, Assignment, CostWeights, QualityProblem, TileWeights};
use crate::vpts::{
    predict_center, select_tiles_anchored, viewing_probabilities, FetchSet, Pose, ProbabilityField,
    Rotation,
};

/// Controller view of the session at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub qp: f64,
    pub qs: f64,
    /// Bitrate committed in the previous slot, megabits.
    pub gamma: f64,
    pub pose: Pose,
    pub rotation: Rotation,
}

impl SystemState {
    pub fn initial(config: &Config, pose: Pose, rotation: Rotation) -> Self {
        Self {
            qp: config.qp_init,
            qs: config.qs_init,
            gamma: config.gamma_init,
            pose,
            rotation,
        }
    }
}

/// Per-slot inputs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub grid: &'a TileGrid,
    pub chunk_duration: f64,
    /// Chunk to fetch.
    pub chunk: &'a ChunkMeta,
    /// Chunk after it, or the same chunk at end of video.
    pub next: &'a ChunkMeta,
    /// Available bandwidth, Mbps.
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Etscaa,
    Greedy,
    Uniform,
    Probdash,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Etscaa,
        Algorithm::Greedy,
        Algorithm::Uniform,
        Algorithm::Probdash,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Etscaa => "etscaa",
            Algorithm::Greedy => "greedy",
            Algorithm::Uniform => "uniform",
            Algorithm::Probdash => "probdash",
        }
    }

    /// Output label; baselines are simplified stand-ins.
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Etscaa => "etscaa",
            Algorithm::Greedy => "greedy (simplified)",
            Algorithm::Uniform => "uniform (simplified)",
            Algorithm::Probdash => "probdash (simplified)",
        }
    }

    pub fn step(
        &self,
        state: &SystemState,
        ctx: &SlotContext,
        config: &Config,
    ) -> Result<Decision> {
        match self {
            Algorithm::Etscaa => etscaa_step(state, ctx, config),
            Algorithm::Greedy => baseline_greedy_step(state, ctx, config),
            Algorithm::Uniform => baseline_uniform_step(state, ctx, config),
            Algorithm::Probdash => baseline_probdash_step(state, ctx, config),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Committed choice for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub fetch_set: FetchSet,
    /// Viewing probability of each fetched tile, aligned with `assignment.tiles`.
    pub probabilities: Vec<f64>,
    pub assignment: Assignment,
    pub intervention: Intervention,
    pub budget_units: u64,
    pub expected_distortion: f64,
    pub quality_loss: f64,
    pub expected_flow: f64,
    pub weighted_ssim: f64,
    pub predicted_qs_next: f64,
    pub predicted_qp_next: f64,
    pub objective_value: f64,
    /// Every configuration was infeasible and a fallback was committed.
    pub degraded: bool,
}

fn weighted_mean(values: impl Iterator<Item = f64>, p: &[f64]) -> Result<f64> {
    let mass: f64 = p.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::InvalidInput(
            "assignment carries no probability mass".into(),
        ));
    }
    Ok(values.zip(p).map(|(v, w)| v * w).sum::<f64>() / mass)
}

/// Probability-weighted mean distortion of the assigned levels.
pub fn expected_distortion(chunk: &ChunkMeta, assignment: &Assignment, p: &[f64]) -> Result<f64> {
    let d = assignment
        .tiles
        .iter()
        .zip(&assignment.levels)
        .map(|(&t, &j)| chunk.get(t, j).distortion);
    weighted_mean(d, p)
}

/// Probability-weighted mean optical flow of the assigned levels.
pub fn expected_flow(chunk: &ChunkMeta, assignment: &Assignment, p: &[f64]) -> Result<f64> {
    let f = assignment
        .tiles
        .iter()
        .zip(&assignment.levels)
        .map(|(&t, &j)| chunk.get(t, j).flow);
    weighted_mean(f, p)
}

/// Probability-weighted mean SSIM, with no FoV or DoF penalty.
pub fn weighted_ssim(chunk: &ChunkMeta, assignment: &Assignment, p: &[f64]) -> Result<f64> {
    let s = assignment
        .tiles
        .iter()
        .zip(&assignment.levels)
        .map(|(&t, &j)| chunk.get(t, j).ssim());
    weighted_mean(s, p)
}

pub fn quality_loss(distortion: f64, intervention: Intervention, k_dof: f64) -> Result<f64> {
    let shrink = intervention.factor(k_dof);
    if !(shrink > 0.0) {
        return Err(Error::InvalidInput(format!(
            "shrink factor must be positive, got {shrink}"
        )));
    }
    Ok(distortion / shrink)
}

/// Phase 1 output shared by all configurations of a slot.
#[derive(Debug, Clone)]
pub struct FetchPlan {
    pub center: Pose,
    pub field: ProbabilityField,
    pub fetch_set: FetchSet,
    pub weights: TileWeights,
}

pub fn plan_fetch(state: &SystemState, ctx: &SlotContext, config: &Config) -> Result<FetchPlan> {
    let center = predict_center(state.pose, state.rotation, ctx.chunk_duration);
    let field = viewing_probabilities(
        center,
        config.sigma_y_deg,
        config.sigma_p_deg,
        (config.viewport_w_deg, config.viewport_h_deg),
        ctx.grid,
    )?;
    let anchor = ctx.grid.tile_at(center.yaw(), center.pitch());
    let fetch_set = select_tiles_anchored(&field, config.epsilon, anchor)?;
    let weights = TileWeights::from_fetch_set(&fetch_set, &field)?;
    Ok(FetchPlan {
        center,
        field,
        fetch_set,
        weights,
    })
}

pub fn slot_budget(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
    iv: Intervention,
) -> Result<u64> {
    bandwidth_budget(
        state.qp,
        ctx.bandwidth,
        ctx.chunk_duration,
        config.cp_seconds,
        config.lambda_target,
        iv.s_fov,
        iv.y_dof,
        config.k_dof,
        config.bw_unit,
    )
}

/// Score `assignment` under `iv` and package it as a decision.
pub fn score(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
    plan: &FetchPlan,
    assignment: Assignment,
    iv: Intervention,
    budget_units: u64,
) -> Result<Decision> {
    let p = &plan.weights.p;
    let d = expected_distortion(ctx.chunk, &assignment, p)?;
    let phi = quality_loss(d, iv, config.k_dof)?;
    let flow = expected_flow(ctx.chunk, &assignment, p)?;
    let qs = update_sickness_queue(
        state.qs,
        state.rotation.omega_y,
        state.rotation.omega_p,
        flow,
        iv.s_fov,
        iv.y_dof,
        config.k_dof,
        config.cs,
        config.omega,
    )?;
    let qp = update_packet_queue(
        state.qp,
        ctx.chunk_duration,
        config.cp_seconds,
        iv.s_fov,
        iv.y_dof,
        config.k_dof,
        assignment.total_bitrate,
        ctx.bandwidth,
    )?;
    Ok(Decision {
        fetch_set: plan.fetch_set.clone(),
        probabilities: p.clone(),
        weighted_ssim: weighted_ssim(ctx.chunk, &assignment, p)?,
        assignment,
        intervention: iv,
        budget_units,
        expected_distortion: d,
        quality_loss: phi,
        expected_flow: flow,
        predicted_qs_next: qs.value,
        predicted_qp_next: qp.value,
        objective_value: config.xi * phi + config.rho * qs.value,
        degraded: false,
    })
}

/// All tiles at level 1 under `iv`, flagged as degraded.
pub fn degraded_decision(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
    plan: &FetchPlan,
    iv: Intervention,
) -> Result<Decision> {
    let problem = QualityProblem::build(
        ctx.chunk,
        &plan.weights,
        iv,
        config.k_dof,
        CostWeights {
            xi: config.xi,
            rho: config.rho,
        },
        config.bw_unit,
    )?;
    let budget = slot_budget(state, ctx, config, iv)?;
    let assignment = problem.assignment(vec![1; problem.len()]);
    let mut d = score(state, ctx, config, plan, assignment, iv, budget)?;
    d.degraded = true;
    warn!(
        "no feasible assignment at bandwidth {:.3} Mbps and qp {:.3}; fetching all tiles at level 1",
        ctx.bandwidth, state.qp
    );
    Ok(d)
}

/// One configuration evaluated during the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub intervention: Intervention,
    pub budget_units: u64,
    /// `None` when the configuration is infeasible.
    pub initial: Option<Assignment>,
    pub decision: Option<Decision>,
}

/// Full ETSCAA sweep; returns the committed decision and every evaluated configuration.
pub fn etscaa_step_detailed(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
) -> Result<(Decision, Vec<Evaluated>)> {
    check_inputs(ctx, config)?;
    let plan = plan_fetch(state, ctx, config)?;
    let limits = SearchLimits {
        alpha: config.alpha,
        nsl_capacity: config.nsl_capacity,
        max_iterations: config.max_iterations,
    };
    let cost = CostWeights {
        xi: config.xi,
        rho: config.rho,
    };
    let mut evaluated = Vec::with_capacity(config.sfov_ladder.len() * 2);
    let mut best: Option<Decision> = None;
    for &s_fov in &config.sfov_ladder {
        for &y_dof in config.dof_options() {
            let iv = Intervention::new(s_fov, y_dof);
            let budget = slot_budget(state, ctx, config, iv)?;
            let problem = QualityProblem::build(
                ctx.chunk,
                &plan.weights,
                iv,
                config.k_dof,
                cost,
                config.bw_unit,
            )?;
            let Ok(initial) = assign_quality_dp(&problem, budget) else {
                evaluated.push(Evaluated {
                    intervention: iv,
                    budget_units: budget,
                    initial: None,
                    decision: None,
                });
                continue;
            };
            let smi = SmiContext::new(
                &problem,
                ctx.chunk,
                ctx.next,
                &plan.weights,
                state.qs,
                iv,
                config.k_dof,
            )?;
            let refined = refine(&problem, &smi, &initial, budget, limits);
            let decision = score(state, ctx, config, &plan, refined, iv, budget)?;
            if best
                .as_ref()
                .is_none_or(|b| decision.objective_value < b.objective_value)
            {
                best = Some(decision.clone());
            }
            evaluated.push(Evaluated {
                intervention: iv,
                budget_units: budget,
                initial: Some(initial),
                decision: Some(decision),
            });
        }
    }
    let decision = match best {
        Some(d) => d,
        None => {
            let iv = Intervention::new(config.smallest_sfov(), config.dof_enabled);
            degraded_decision(state, ctx, config, &plan, iv)?
        }
    };
    Ok((decision, evaluated))
}

pub fn etscaa_step(state: &SystemState, ctx: &SlotContext, config: &Config) -> Result<Decision> {
    etscaa_step_detailed(state, ctx, config).map(|(d, _)| d)
}

pub(crate) fn check_inputs(ctx: &SlotContext, config: &Config) -> Result<()> {
    config.validate()?;
    if !(ctx.bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {}",
            ctx.bandwidth
        )));
    }
    if ctx.chunk.tile_count() != ctx.grid.tile_count()
        || ctx.next.tile_count() != ctx.grid.tile_count()
    {
        return Err(Error::InvalidInput(
            "chunk metadata does not match the tile grid".into(),
        ));
    }
    if ctx.next.levels() != ctx.chunk.levels() {
        return Err(Error::InvalidInput(
            "consecutive chunks differ in level count".into(),
        ));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    fn assignment(tiles: Vec<usize>, levels: Vec<usize>) -> Assignment {
        Assignment {
            tiles,
            levels,
            total_units: 0,
            total_bitrate: 0.0,
            total_cost: 0.0,
        }
    }

    #[test]
    fn weighted_means() {
        use crate::model::TileMeta;
        let tm = |d: f64, f: f64| TileMeta {
            bitrate: 1.0,
            distortion: d,
            flow: f,
        };
        let chunk = ChunkMeta::new(vec![
            vec![tm(1.0, 0.2)],
            vec![tm(2.0, 0.6)],
            vec![tm(1.25, 0.3)],
        ])
        .unwrap();
        let a = assignment(vec![1, 2], vec![1, 1]);
        assert!((expected_distortion(&chunk, &a, &[0.75, 0.25]).unwrap() - 1.25).abs() < 1e-12);
        assert!((expected_flow(&chunk, &a, &[0.5, 0.5]).unwrap() - 0.4).abs() < 1e-12);
        let single = assignment(vec![3], vec![1]);
        assert_eq!(expected_distortion(&chunk, &single, &[0.2]).unwrap(), 1.25);
        assert_eq!(expected_flow(&chunk, &single, &[0.2]).unwrap(), 0.3);
        assert!(expected_flow(&chunk, &single, &[0.0]).is_err());
    }

    #[test]
    fn quality_loss_values() {
        let k = 0.1;
        assert_eq!(quality_loss(1.25, Intervention::NONE, k).unwrap(), 1.25);
        assert!(
            (quality_loss(1.25, Intervention::new(0.7, false), k).unwrap() - 1.25 / 0.7).abs()
                < 1e-12
        );
        assert!(
            (quality_loss(1.25, Intervention::new(0.7, true), k).unwrap() - 1.25 / 0.63).abs()
                < 1e-12
        );
        assert!(quality_loss(1.25, Intervention::new(0.0, false), k).is_err());
    }

    #[test]
    fn end_to_end_fixture() {
        let (grid, now, next) = fixture::chunks();
        let ctx = SlotContext {
            grid: &grid,
            chunk_duration: 1.0,
            chunk: &now,
            next: &next,
            bandwidth: 8.0,
        };
        let (d, evaluated) =
            etscaa_step_detailed(&fixture::state(), &ctx, &fixture::config()).unwrap();
        assert_eq!(d.fetch_set.tiles, vec![10, 11, 16, 17]);
        let budgets: Vec<u64> = evaluated.iter().map(|e| e.budget_units).collect();
        assert_eq!(budgets, vec![13, 14, 18, 20]);
        let initial: Vec<Vec<usize>> = evaluated
            .iter()
            .map(|e| e.initial.clone().unwrap().levels)
            .collect();
        assert_eq!(
            initial,
            vec![
                vec![4, 3, 3, 3],
                vec![4, 4, 3, 3],
                vec![4, 4, 4, 4],
                vec![4, 4, 4, 4]
            ]
        );
        let refined = evaluated[0].decision.as_ref().unwrap();
        assert_eq!(refined.assignment.levels, vec![3, 3, 3, 3]);
        assert_eq!(d.assignment.levels, vec![4, 4, 4, 4]);
        assert_eq!(d.intervention, Intervention::new(0.7, false));
        for e in &evaluated {
            assert!(d.objective_value <= e.decision.as_ref().unwrap().objective_value);
        }
    }

    #[test]
    fn objective_scale_invariance() {
        let (grid, now, next) = fixture::chunks();
        let ctx = SlotContext {
            grid: &grid,
            chunk_duration: 1.0,
            chunk: &now,
            next: &next,
            bandwidth: 8.0,
        };
        let base = etscaa_step(&fixture::state(), &ctx, &fixture::config()).unwrap();
        let mut scaled = fixture::config();
        scaled.xi *= 3.5;
        scaled.rho *= 3.5;
        let other = etscaa_step(&fixture::state(), &ctx, &scaled).unwrap();
        assert_eq!(base.assignment.levels, other.assignment.levels);
        assert_eq!(base.intervention, other.intervention);
    }

    #[test]
    fn all_infeasible_degrades() {
        let (grid, now, next) = fixture::chunks();
        let ctx = SlotContext {
            grid: &grid,
            chunk_duration: 1.0,
            chunk: &now,
            next: &next,
            bandwidth: 0.5,
        };
        let mut state = fixture::state();
        state.qp = 0.0;
        let d = etscaa_step(&state, &ctx, &fixture::config()).unwrap();
        assert!(d.degraded);
        assert_eq!(d.assignment.levels, vec![1; 4]);
        assert_eq!(d.intervention, Intervention::new(0.7, true));
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let (grid, now, next) = fixture::chunks();
        let ctx = SlotContext {
            grid: &grid,
            chunk_duration: 1.0,
            chunk: &now,
            next: &next,
            bandwidth: 0.0,
        };
        assert!(etscaa_step(&fixture::state(), &ctx, &fixture::config()).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("flare".parse::<Algorithm>().is_err());
    }
}

//! Simplified comparison schemes. Each keeps full FoV and DoF off and only
//! follows the core selection rule of the scheme it is named after.

use super::{
    check_inputs, degraded_decision, plan_fetch, score, slot_budget, Decision, FetchPlan,
    SlotContext, SystemState,
};
use crate::error::Result;
use crate::model::{Config, Intervention};
use crate::tqa::{assign_quality_dp, CostWeights, QualityProblem};

fn setup(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
    cost: CostWeights,
) -> Result<(FetchPlan, QualityProblem, u64)> {
    check_inputs(ctx, config)?;
    let plan = plan_fetch(state, ctx, config)?;
    let problem = QualityProblem::build(
        ctx.chunk,
        &plan.weights,
        Intervention::NONE,
        config.k_dof,
        cost,
        config.bw_unit,
    )?;
    let budget = slot_budget(state, ctx, config, Intervention::NONE)?;
    Ok((plan, problem, budget))
}

fn objective_weights(config: &Config) -> CostWeights {
    CostWeights {
        xi: config.xi,
        rho: config.rho,
    }
}

/// Visit tiles by descending viewing probability and raise each as far as
/// the remaining budget allows.
pub fn baseline_greedy_step(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
) -> Result<Decision> {
    let (plan, problem, budget) = setup(state, ctx, config, objective_weights(config))?;
    if problem.check_feasible(budget).is_err() {
        return degraded_decision(state, ctx, config, &plan, Intervention::NONE);
    }
    let mut levels = vec![1; problem.len()];
    let mut used: u64 = problem.tiles.iter().map(|t| t.units[0]).sum();
    let mut order: Vec<usize> = (0..problem.len()).collect();
    // stable sort keeps ascending tile index among equal probabilities
    order.sort_by(|&a, &b| plan.weights.p[b].total_cmp(&plan.weights.p[a]));
    for n in order {
        let units = &problem.tiles[n].units;
        while levels[n] < units.len() {
            let extra = units[levels[n]] - units[levels[n] - 1];
            if used + extra > budget {
                break;
            }
            used += extra;
            levels[n] += 1;
        }
    }
    score(
        state,
        ctx,
        config,
        &plan,
        problem.assignment(levels),
        Intervention::NONE,
        budget,
    )
}

/// Highest single level that fits every fetched tile.
pub fn baseline_uniform_step(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
) -> Result<Decision> {
    let (plan, problem, budget) = setup(state, ctx, config, objective_weights(config))?;
    let fits = |j: usize| problem.tiles.iter().map(|t| t.units[j - 1]).sum::<u64>() <= budget;
    let Some(level) = (1..=ctx.chunk.levels()).rev().find(|&j| fits(j)) else {
        return degraded_decision(state, ctx, config, &plan, Intervention::NONE);
    };
    let levels = vec![level; problem.len()];
    score(
        state,
        ctx,
        config,
        &plan,
        problem.assignment(levels),
        Intervention::NONE,
        budget,
    )
}

/// The exact assignment with cost equal to the video loss indicator alone.
pub fn baseline_probdash_step(
    state: &SystemState,
    ctx: &SlotContext,
    config: &Config,
) -> Result<Decision> {
    let (plan, problem, budget) = setup(state, ctx, config, CostWeights { xi: 1.0, rho: 0.0 })?;
    match assign_quality_dp(&problem, budget) {
        Ok(a) => score(state, ctx, config, &plan, a, Intervention::NONE, budget),
        Err(_) => degraded_decision(state, ctx, config, &plan, Intervention::NONE),
    }
}

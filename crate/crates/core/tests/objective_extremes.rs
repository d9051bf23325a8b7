//! Behaviour at the extremes of the quality/sickness weighting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tscc::controller::{etscaa_step, plan_fetch, slot_budget};
use tscc::model::{ChunkMeta, Config, Intervention, TileMeta};
use tscc::oracle::{exhaustive_step, SmallInstance};
use tscc::tqa::{assign_quality_dp, CostWeights, QualityProblem};

/// Same ladders with flow made strictly increasing in level.
fn strict_flow(chunk: &ChunkMeta) -> ChunkMeta {
    let tiles = (1..=chunk.tile_count())
        .map(|t| {
            chunk
                .tile(t)
                .iter()
                .enumerate()
                .map(|(j, m)| TileMeta {
                    flow: (m.flow + 0.01 * j as f64).min(1.0),
                    ..*m
                })
                .collect()
        })
        .collect();
    ChunkMeta::new(tiles).unwrap()
}

fn instances(count: usize, seed: u64) -> Vec<SmallInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut inst = SmallInstance::random(&mut rng);
            inst.chunk = strict_flow(&inst.chunk);
            inst.next = strict_flow(&inst.next);
            inst
        })
        .collect()
}

fn weighted(config: &Config, xi: f64, rho: f64) -> Config {
    Config {
        xi,
        rho,
        ..config.clone()
    }
}

fn pointwise_le(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x <= y)
}

#[test]
fn xi_zero_optimum_is_pointwise_below_rho_zero_optimum() {
    let mut compared = 0;
    for inst in instances(300, 41) {
        let ctx = inst.context();
        let sick = exhaustive_step(
            &inst.state,
            &ctx,
            &weighted(&inst.config, 0.0, 2.5),
            1 << 20,
        );
        let quality = exhaustive_step(
            &inst.state,
            &ctx,
            &weighted(&inst.config, 1.0, 0.0),
            1 << 20,
        );
        let (Ok(sick), Ok(quality)) = (sick, quality) else {
            continue;
        };
        compared += 1;
        assert!(
            pointwise_le(
                &sick.best_assignment.levels,
                &quality.best_assignment.levels
            ),
            "{:?} vs {:?}",
            sick.best_assignment.levels,
            quality.best_assignment.levels
        );
    }
    assert!(compared > 200);
}

#[test]
fn xi_zero_dp_stage_takes_lowest_levels() {
    for inst in instances(200, 42) {
        let ctx = inst.context();
        let config = weighted(&inst.config, 0.0, 2.5);
        let plan = plan_fetch(&inst.state, &ctx, &config).unwrap();
        for iv in [Intervention::NONE, Intervention::new(0.7, true)] {
            let problem = QualityProblem::build(
                &inst.chunk,
                &plan.weights,
                iv,
                config.k_dof,
                CostWeights { xi: 0.0, rho: 2.5 },
                config.bw_unit,
            )
            .unwrap();
            let budget = slot_budget(&inst.state, &ctx, &config, iv).unwrap();
            if let Ok(a) = assign_quality_dp(&problem, budget) {
                assert!(a.levels.iter().all(|&j| j == 1), "{:?}", a.levels);
            }
        }
    }
}

#[test]
fn refinement_can_raise_levels_when_xi_is_zero() {
    // the local search ranks by SMI, whose distortion term is not scaled by xi
    let mut raised = 0;
    for inst in instances(300, 43) {
        let ctx = inst.context();
        let sick = etscaa_step(&inst.state, &ctx, &weighted(&inst.config, 0.0, 2.5)).unwrap();
        let quality = etscaa_step(&inst.state, &ctx, &weighted(&inst.config, 1.0, 0.0)).unwrap();
        if !sick.degraded
            && !quality.degraded
            && !pointwise_le(&sick.assignment.levels, &quality.assignment.levels)
        {
            raised += 1;
        }
    }
    assert!(raised > 0);
}

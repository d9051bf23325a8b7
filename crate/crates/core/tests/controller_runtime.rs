//! Measured per-slot cost of the full ETSCAA sweep on default settings.

use std::time::Instant;

use tscc::controller::{etscaa_step_detailed, SlotContext, SystemState};
use tscc::model::{synthesize_metadata, Config, MetadataSpec};
use tscc::vpts::{Pose, Rotation};

#[test]
fn per_slot_runtime() {
    let meta = synthesize_metadata(&MetadataSpec::default()).unwrap();
    let config = Config::default();
    let mut times = Vec::new();
    let mut budgets = Vec::new();
    for t in 0..60 {
        let state = SystemState {
            qp: 0.5 + 0.004 * (t % 20) as f64,
            qs: 0.01 * t as f64,
            gamma: 0.0,
            pose: Pose::new(6.0 * t as f64, 20.0 * ((t as f64) / 9.0).sin()),
            rotation: Rotation {
                omega_y: 12.0,
                omega_p: -3.0,
            },
        };
        let ctx = SlotContext {
            grid: meta.grid(),
            chunk_duration: meta.chunk_duration(),
            chunk: meta.chunk(t % meta.chunk_count()),
            next: meta.chunk((t + 1) % meta.chunk_count()),
            bandwidth: 3.0 + (t % 9) as f64,
        };
        let start = Instant::now();
        let (decision, evaluated) = etscaa_step_detailed(&state, &ctx, &config).unwrap();
        times.push(start.elapsed().as_secs_f64() * 1e3);
        budgets.push(decision.budget_units);

        assert_eq!(evaluated.len(), config.sfov_ladder.len() * 2);
        assert!(decision.degraded || decision.assignment.total_units <= decision.budget_units);
        for e in evaluated.iter().filter_map(|e| e.decision.as_ref()) {
            assert!(decision.objective_value <= e.objective_value);
        }
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let worst = times.iter().cloned().fold(0.0, f64::max);
    let mean_budget = budgets.iter().sum::<u64>() as f64 / budgets.len() as f64;
    println!("etscaa per slot: mean {mean:.2} ms, worst {worst:.2} ms, mean budget {mean_budget:.0} units");
    assert!(mean < 50.0, "mean per-slot time {mean:.2} ms");
}

//! Whole-run properties of the trace-driven simulator.

use tscc::controller::Algorithm;
use tscc::model::{
    synthesize_metadata, ChunkMeta, Config, MetadataSpec, TileGrid, TileMeta, VideoMeta,
};
use tscc::queues::bandwidth_budget;
use tscc::sim::{
    run_simulation, synthesize_bandwidth, synthesize_head_trace, BandwidthTrace, HeadParams,
    HeadTrace, RunReport,
};
use tscc::vpts::Pose;

fn fixture_meta() -> VideoMeta {
    let ladder = |f4: f64| {
        [
            (1.0, 6.0, 0.1),
            (2.0, 3.0, 0.15),
            (3.0, 1.6, 0.2),
            (4.0, 1.0, f4),
        ]
        .map(|(bitrate, distortion, flow)| TileMeta {
            bitrate,
            distortion,
            flow,
        })
        .to_vec()
    };
    let now = ChunkMeta::new(vec![ladder(0.3); 48]).unwrap();
    let next = ChunkMeta::new(vec![ladder(0.62); 48]).unwrap();
    VideoMeta::new(TileGrid::new(6, 8).unwrap(), 1.0, vec![now, next]).unwrap()
}

#[test]
fn one_slot_fixture_run_commits_top_levels_at_reduced_fov() {
    let config = Config {
        sfov_ladder: vec![1.0, 0.7],
        sigma_y_deg: 1.0,
        sigma_p_deg: 1.0,
        viewport_w_deg: 90.0,
        viewport_h_deg: 60.0,
        bw_unit: 1.0,
        qp_init: 0.65,
        qs_init: 0.5,
        ..Config::default()
    };
    let head = HeadTrace::new(vec![Pose::new(90.0, -30.0)]).unwrap();
    let bandwidth = BandwidthTrace::new(vec![8.0]).unwrap();
    let report = run_simulation(
        &fixture_meta(),
        &bandwidth,
        &head,
        &config,
        Algorithm::Etscaa,
        1,
        0,
    )
    .unwrap();
    let slot = &report.slots[0];
    assert_eq!(slot.level_histogram, vec![0, 0, 0, 4]);
    assert_eq!((slot.s_fov, slot.y_dof), (0.7, false));
    assert_eq!(slot.budget_units, 18);
}

fn synthetic_run(algorithm: Algorithm, config: &Config, seed: u64) -> RunReport {
    let meta = synthesize_metadata(&MetadataSpec {
        chunks: 30,
        seed,
        ..Default::default()
    })
    .unwrap();
    let bandwidth = synthesize_bandwidth(5.0, 40, 0.4, seed).unwrap();
    let head = synthesize_head_trace(&HeadParams::default(), seed, 40).unwrap();
    run_simulation(&meta, &bandwidth, &head, config, algorithm, 40, seed).unwrap()
}

#[test]
fn echoed_configuration_replays_exactly() {
    let config = Config {
        rho: 40.0,
        sfov_ladder: vec![1.0, 0.85, 0.7],
        ..Config::default()
    };
    let first = synthetic_run(Algorithm::Etscaa, &config, 5);
    let echoed: Config =
        serde_json::from_str(&serde_json::to_string(&first.config).unwrap()).unwrap();
    assert_eq!(synthetic_run(Algorithm::Etscaa, &echoed, 5), first);
}

#[test]
fn every_slot_respects_its_own_budget() {
    let config = Config::default();
    for algorithm in Algorithm::ALL {
        let report = synthetic_run(algorithm, &config, 9);
        let mut qp = config.qp_init;
        for slot in &report.slots {
            let budget = bandwidth_budget(
                qp,
                slot.bandwidth_mbps,
                1.0,
                config.cp_seconds,
                config.lambda_target,
                slot.s_fov,
                slot.y_dof,
                config.k_dof,
                config.bw_unit,
            )
            .unwrap();
            assert_eq!(slot.budget_units, budget);
            if !slot.infeasible {
                // bitrates are quantised up, so the raw sum can only be smaller
                assert!(slot.bitrate_mbit <= budget as f64 * config.bw_unit + 1e-9);
            }
            let expected_cost = config.xi * slot.quality_loss + config.rho * slot.qs;
            assert!((slot.total_cost - expected_cost).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&slot.qp) && (0.0..=1.0).contains(&slot.qs));
            qp = slot.qp;
        }
        let total: f64 = report.slots.iter().map(|s| s.total_cost).sum();
        assert!((report.aggregates.total_cost - total).abs() < 1e-9);
    }
}

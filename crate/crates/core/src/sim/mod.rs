//! Discrete-time simulation loop, per-slot reports and output files.
//!
//! Slot `t` fetches chunk `t mod n` using the bandwidth and head pose of
//! second `t`. After the decision is committed the packet queue drains by
//! the committed bitrate and the sickness queue absorbs the head rotation of
//! slot `t` plus the committed expected flow.

mod sweep;
mod traces;

use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

pub use sweep::{
    run_sweep, summarize_sweep, BandwidthSource, MetadataSource, SweepCell, SweepRow, SweepSpec,
};
pub use traces::{
    load_bandwidth_trace, load_head_trace, parse_bandwidth_csv, parse_head_csv, shortest_arc,
    synthesize_bandwidth, synthesize_head_trace, BandwidthTrace, HeadModel, HeadParams, HeadTrace,
    DEFAULT_BANDWIDTH_SIGMA,
};

use crate::controller::{Algorithm, SlotContext, SystemState};
use crate::error::{Error, Result};
use crate::model::{Config, VideoMeta};
use crate::queues::{update_packet_queue, update_sickness_queue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotReport {
    pub t: usize,
    /// 1-based chunk index.
    pub chunk: usize,
    pub bandwidth_mbps: f64,
    pub budget_units: u64,
    pub fetched_tiles: usize,
    /// Number of fetched tiles at each level, index 0 is level 1.
    pub level_histogram: Vec<usize>,
    pub s_fov: f64,
    pub y_dof: bool,
    pub bitrate_mbit: f64,
    pub quality_loss: f64,
    pub expected_flow: f64,
    pub weighted_ssim: f64,
    pub qp: f64,
    pub qs: f64,
    pub total_cost: f64,
    pub stall: bool,
    pub sickness_overflow: bool,
    pub infeasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub slots: usize,
    pub total_cost: f64,
    pub mean_total_cost: f64,
    pub mean_quality_loss: f64,
    pub mean_weighted_ssim: f64,
    pub mean_qp: f64,
    pub mean_qs: f64,
    pub final_qs: f64,
    pub mean_s_fov: f64,
    pub dof_fraction: f64,
    pub stalls: usize,
    pub sickness_overflows: usize,
    pub infeasible_slots: usize,
}

impl Aggregates {
    pub fn from_slots(slots: &[SlotReport]) -> Self {
        let n = slots.len().max(1) as f64;
        let mean = |f: fn(&SlotReport) -> f64| slots.iter().map(f).sum::<f64>() / n;
        let count = |f: fn(&SlotReport) -> bool| slots.iter().filter(|s| f(s)).count();
        Self {
            slots: slots.len(),
            total_cost: slots.iter().map(|s| s.total_cost).sum(),
            mean_total_cost: mean(|s| s.total_cost),
            mean_quality_loss: mean(|s| s.quality_loss),
            mean_weighted_ssim: mean(|s| s.weighted_ssim),
            mean_qp: mean(|s| s.qp),
            mean_qs: mean(|s| s.qs),
            final_qs: slots.last().map_or(0.0, |s| s.qs),
            mean_s_fov: mean(|s| s.s_fov),
            dof_fraction: mean(|s| if s.y_dof { 1.0 } else { 0.0 }),
            stalls: count(|s| s.stall),
            sickness_overflows: count(|s| s.sickness_overflow),
            infeasible_slots: count(|s| s.infeasible),
        }
    }
}

/// What a run was fed, enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub metadata: String,
    pub bandwidth: String,
    pub head: String,
    pub scale_bandwidth_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub label: String,
    pub seed: u64,
    pub inputs: Option<RunInputs>,
    pub config: Config,
    pub aggregates: Aggregates,
    pub slots: Vec<SlotReport>,
}

/// `summary.json`: the report without its per-slot rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub label: String,
    pub seed: u64,
    pub inputs: Option<RunInputs>,
    pub config: Config,
    pub aggregates: Aggregates,
}

impl RunReport {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            algorithm: self.algorithm,
            label: self.label.clone(),
            seed: self.seed,
            inputs: self.inputs.clone(),
            config: self.config.clone(),
            aggregates: self.aggregates.clone(),
        }
    }
}

pub fn run_simulation(
    meta: &VideoMeta,
    bandwidth: &BandwidthTrace,
    head: &HeadTrace,
    config: &Config,
    algorithm: Algorithm,
    slots: usize,
    seed: u64,
) -> Result<RunReport> {
    config.validate()?;
    for available in [bandwidth.len(), head.len()] {
        if available < slots {
            return Err(Error::TraceUnderrun {
                needed: slots,
                available,
            });
        }
    }
    let n = meta.chunk_count();
    if slots > n {
        warn!("{slots} slots over {n} chunks; chunks will repeat");
    }
    let t_chunk = meta.chunk_duration();
    let mut state = SystemState::initial(config, head.pose(0), head.rotation(0));
    let mut reports = Vec::with_capacity(slots);
    for t in 0..slots {
        state.pose = head.pose(t);
        state.rotation = head.rotation(t);
        let idx = t % n;
        let ctx = SlotContext {
            grid: meta.grid(),
            chunk_duration: t_chunk,
            chunk: meta.chunk(idx),
            next: meta.chunk(if idx + 1 < n { idx + 1 } else { idx }),
            bandwidth: bandwidth.at(t),
        };
        let d = algorithm.step(&state, &ctx, config)?;
        let iv = d.intervention;
        let qp = update_packet_queue(
            state.qp,
            t_chunk,
            config.cp_seconds,
            iv.s_fov,
            iv.y_dof,
            config.k_dof,
            d.assignment.total_bitrate,
            ctx.bandwidth,
        )?;
        let qs = update_sickness_queue(
            state.qs,
            state.rotation.omega_y,
            state.rotation.omega_p,
            d.expected_flow,
            iv.s_fov,
            iv.y_dof,
            config.k_dof,
            config.cs,
            config.omega,
        )?;
        let mut histogram = vec![0; meta.levels()];
        for &j in &d.assignment.levels {
            histogram[j - 1] += 1;
        }
        reports.push(SlotReport {
            t,
            chunk: idx + 1,
            bandwidth_mbps: ctx.bandwidth,
            budget_units: d.budget_units,
            fetched_tiles: d.assignment.tiles.len(),
            level_histogram: histogram,
            s_fov: iv.s_fov,
            y_dof: iv.y_dof,
            bitrate_mbit: d.assignment.total_bitrate,
            quality_loss: d.quality_loss,
            expected_flow: d.expected_flow,
            weighted_ssim: d.weighted_ssim,
            qp: qp.value,
            qs: qs.value,
            total_cost: config.xi * d.quality_loss + config.rho * qs.value,
            stall: qp.event,
            sickness_overflow: qs.event,
            infeasible: d.degraded,
        });
        state.qp = qp.value;
        state.qs = qs.value;
        state.gamma = d.assignment.total_bitrate;
    }
    Ok(RunReport {
        algorithm,
        label: algorithm.label().to_string(),
        seed,
        inputs: None,
        config: config.clone(),
        aggregates: Aggregates::from_slots(&reports),
        slots: reports,
    })
}

/// Flat row of `slots.csv`.
#[derive(Serialize)]
struct SlotRow<'a> {
    t: usize,
    chunk: usize,
    bandwidth_mbps: f64,
    budget_units: u64,
    fetched_tiles: usize,
    level_histogram: &'a str,
    s_fov: f64,
    y_dof: u8,
    bitrate_mbit: f64,
    quality_loss: f64,
    expected_flow: f64,
    weighted_ssim: f64,
    qp: f64,
    qs: f64,
    total_cost: f64,
    stall: u8,
    sickness_overflow: u8,
    infeasible: u8,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e.into(),
    }
}

pub fn write_slots_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for s in &report.slots {
        let hist = s
            .level_histogram
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.serialize(SlotRow {
            t: s.t,
            chunk: s.chunk,
            bandwidth_mbps: s.bandwidth_mbps,
            budget_units: s.budget_units,
            fetched_tiles: s.fetched_tiles,
            level_histogram: &hist,
            s_fov: s.s_fov,
            y_dof: s.y_dof as u8,
            bitrate_mbit: s.bitrate_mbit,
            quality_loss: s.quality_loss,
            expected_flow: s.expected_flow,
            weighted_ssim: s.weighted_ssim,
            qp: s.qp,
            qs: s.qs,
            total_cost: s.total_cost,
            stall: s.stall as u8,
            sickness_overflow: s.sickness_overflow as u8,
            infeasible: s.infeasible as u8,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Write `slots.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_run_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_slots_csv(report, &dir.join("slots.csv"))?;
    write_json(&report.summary(), &dir.join("summary.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synthesize_metadata, MetadataSpec};
    use crate::vpts::Pose;

    fn small_meta() -> VideoMeta {
        synthesize_metadata(&MetadataSpec {
            chunks: 5,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn underrun_rejected() {
        let meta = small_meta();
        let bw = BandwidthTrace::new(vec![5.0; 3]).unwrap();
        let head = HeadTrace::new(vec![Pose::new(0.0, 0.0); 10]).unwrap();
        let err = run_simulation(
            &meta,
            &bw,
            &head,
            &Config::default(),
            Algorithm::Greedy,
            4,
            0,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::TraceUnderrun {
                needed: 4,
                available: 3
            }
        ));
    }

    #[test]
    fn aggregates_recompute_from_slots() {
        let meta = small_meta();
        let bw = synthesize_bandwidth(6.0, 12, 0.3, 1).unwrap();
        let head = synthesize_head_trace(&HeadParams::default(), 1, 12).unwrap();
        let config = Config::default();
        let r = run_simulation(&meta, &bw, &head, &config, Algorithm::Etscaa, 12, 1).unwrap();
        assert_eq!(r.aggregates, Aggregates::from_slots(&r.slots));
        let sum: f64 = r
            .slots
            .iter()
            .map(|s| config.xi * s.quality_loss + config.rho * s.qs)
            .sum();
        assert!((r.aggregates.total_cost - sum).abs() < 1e-9);
        assert_eq!(r.slots.last().unwrap().chunk, 12 % 5);
    }

    #[test]
    fn greedy_without_tools_accumulates_sickness() {
        let meta = small_meta();
        let bw = BandwidthTrace::new(vec![6.0; 30]).unwrap();
        let params = HeadParams {
            model: HeadModel::Sinusoid {
                amplitude_deg: 40.0,
                period_s: 20.0,
            },
            ..Default::default()
        };
        let head = synthesize_head_trace(&params, 0, 30).unwrap();
        let config = Config {
            sfov_ladder: vec![1.0],
            dof_enabled: false,
            omega: 0.0,
            ..Config::default()
        };
        let r = run_simulation(&meta, &bw, &head, &config, Algorithm::Greedy, 30, 0).unwrap();
        for w in r.slots.windows(2) {
            assert!(w[1].qs >= w[0].qs);
        }
        assert!(r.aggregates.final_qs > 0.0);
    }

    #[test]
    fn outputs_written() {
        let meta = small_meta();
        let bw = BandwidthTrace::new(vec![4.0; 3]).unwrap();
        let head = HeadTrace::new(vec![Pose::new(10.0, 0.0); 3]).unwrap();
        let r = run_simulation(
            &meta,
            &bw,
            &head,
            &Config::default(),
            Algorithm::Uniform,
            3,
            0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run_outputs(&r, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("slots.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        let summary: RunSummary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary, r.summary());
    }
}

//! Batch runs over algorithms, bandwidth means and seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::traces::{synthesize_bandwidth, synthesize_head_trace, BandwidthTrace, HeadParams};
use super::{run_simulation, Aggregates};
use crate::controller::Algorithm;
use crate::error::Result;
use crate::model::{synthesize_metadata, Config, MetadataSpec, VideoMeta};

#[derive(Debug, Clone)]
pub enum BandwidthSource {
    /// One recorded trace, rescaled to each mean.
    Trace(BandwidthTrace),
    /// Fresh synthetic trace per seed with this log-scale deviation.
    Synthetic { sigma: f64 },
}

#[derive(Debug, Clone)]
pub enum MetadataSource {
    Fixed(VideoMeta),
    /// Synthesised per seed; the seed inside the `MetadataSpec` is ignored.
    Synthetic(MetadataSpec),
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub algorithms: Vec<Algorithm>,
    pub bandwidth_means: Vec<f64>,
    pub seeds: Vec<u64>,
    pub slots: usize,
    pub config: Config,
    pub metadata: MetadataSource,
    pub bandwidth: BandwidthSource,
    pub head: HeadParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub bandwidth_mean: f64,
    pub seed: u64,
    pub aggregates: Aggregates,
}

/// Mean over seeds for one (algorithm, bandwidth mean) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub algorithm: Algorithm,
    pub bandwidth_mean: f64,
    pub runs: usize,
    pub mean_total_cost: f64,
    pub mean_quality_loss: f64,
    pub mean_qs: f64,
    pub mean_final_qs: f64,
    pub mean_weighted_ssim: f64,
    pub stalls: usize,
}

fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let metas: Vec<VideoMeta> = match &spec.metadata {
        MetadataSource::Fixed(m) => vec![m.clone()],
        MetadataSource::Synthetic(ms) => spec
            .seeds
            .iter()
            .map(|&s| {
                synthesize_metadata(&MetadataSpec {
                    seed: stream_seed(s, 1),
                    ..*ms
                })
            })
            .collect::<Result<_>>()?,
    };
    let mut jobs = Vec::new();
    for (si, &seed) in spec.seeds.iter().enumerate() {
        for &mean in &spec.bandwidth_means {
            for &algo in &spec.algorithms {
                jobs.push((si, seed, mean, algo));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(si, seed, mean, algo)| {
            let meta = &metas[si.min(metas.len() - 1)];
            let bandwidth = match &spec.bandwidth {
                BandwidthSource::Trace(t) => t.scaled_to_mean(mean)?,
                BandwidthSource::Synthetic { sigma } => {
                    synthesize_bandwidth(mean, spec.slots, *sigma, stream_seed(seed, 2))?
                }
            };
            let head = synthesize_head_trace(&spec.head, stream_seed(seed, 3), spec.slots)?;
            let report = run_simulation(
                meta,
                &bandwidth,
                &head,
                &spec.config,
                algo,
                spec.slots,
                seed,
            )?;
            Ok(SweepRow {
                algorithm: algo,
                bandwidth_mean: mean,
                seed,
                aggregates: report.aggregates,
            })
        })
        .collect()
}

pub fn summarize_sweep(rows: &[SweepRow]) -> Vec<SweepCell> {
    let mut keys: Vec<(Algorithm, f64)> = Vec::new();
    for r in rows {
        if !keys
            .iter()
            .any(|k| k.0 == r.algorithm && k.1 == r.bandwidth_mean)
        {
            keys.push((r.algorithm, r.bandwidth_mean));
        }
    }
    keys.sort_by(|a, b| (a.0 as u8).cmp(&(b.0 as u8)).then(a.1.total_cmp(&b.1)));
    keys.into_iter()
        .map(|(algorithm, bandwidth_mean)| {
            let mut group: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.algorithm == algorithm && r.bandwidth_mean == bandwidth_mean)
                .collect();
            group.sort_by_key(|r| r.seed);
            let n = group.len() as f64;
            let mean =
                |f: fn(&Aggregates) -> f64| group.iter().map(|r| f(&r.aggregates)).sum::<f64>() / n;
            SweepCell {
                algorithm,
                bandwidth_mean,
                runs: group.len(),
                mean_total_cost: mean(|a| a.mean_total_cost),
                mean_quality_loss: mean(|a| a.mean_quality_loss),
                mean_qs: mean(|a| a.mean_qs),
                mean_final_qs: mean(|a| a.final_qs),
                mean_weighted_ssim: mean(|a| a.mean_weighted_ssim),
                stalls: group.iter().map(|r| r.aggregates.stalls).sum(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_is_order_independent_and_complete() {
        let spec = SweepSpec {
            algorithms: vec![Algorithm::Greedy, Algorithm::Uniform],
            bandwidth_means: vec![3.0, 9.0],
            seeds: vec![1, 2],
            slots: 8,
            config: Config::default(),
            metadata: MetadataSource::Synthetic(MetadataSpec {
                chunks: 4,
                ..Default::default()
            }),
            bandwidth: BandwidthSource::Synthetic { sigma: 0.3 },
            head: HeadParams::default(),
        };
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 8);
        let cells = summarize_sweep(&rows);
        let mut reversed = rows.clone();
        reversed.reverse();
        assert_eq!(cells, summarize_sweep(&reversed));
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.runs == 2));
    }
}

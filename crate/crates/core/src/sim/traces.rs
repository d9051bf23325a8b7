//! Bandwidth and head-motion traces, loaded from CSV or synthesised.
//!
//! Bandwidth CSV has the header `second,mbps`; head CSV has
//! `second,yaw_deg,pitch_deg`. Rows are one second apart and the `second`
//! column is checked to be `0, 1, 2, ...`.
//!
//! Raw HSDPA logs report bytes received per interval; convert them with
//! `mbps = bytes * 8 / 1e6 / interval_seconds`, resampled to one row per
//! second, before loading.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::wrap_yaw;
use crate::vpts::{Pose, Rotation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTrace {
    mbps: Vec<f64>,
}

impl BandwidthTrace {
    pub fn new(mbps: Vec<f64>) -> Result<Self> {
        if mbps.is_empty() {
            return Err(Error::Trace {
                row: 0,
                reason: "bandwidth trace is empty".into(),
            });
        }
        if let Some((i, v)) = mbps
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Trace {
                row: i + 1,
                reason: format!("bandwidth must be positive, got {v}"),
            });
        }
        Ok(Self { mbps })
    }

    pub fn len(&self) -> usize {
        self.mbps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mbps.is_empty()
    }

    pub fn at(&self, second: usize) -> f64 {
        self.mbps[second]
    }

    pub fn values(&self) -> &[f64] {
        &self.mbps
    }

    pub fn mean(&self) -> f64 {
        self.mbps.iter().sum::<f64>() / self.mbps.len() as f64
    }

    /// Multiply every entry so the mean becomes `target`.
    pub fn scaled_to_mean(&self, target: f64) -> Result<Self> {
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::InvalidInput(format!(
                "target mean must be positive, got {target}"
            )));
        }
        let k = target / self.mean();
        Self::new(self.mbps.iter().map(|v| v * k).collect())
    }
}

#[derive(Deserialize)]
struct BandwidthRow {
    second: u64,
    mbps: f64,
}

#[derive(Deserialize)]
struct HeadRow {
    second: u64,
    yaw_deg: f64,
    pitch_deg: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(u64, T)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<T>()
        .enumerate()
        .map(|(i, r)| {
            r.map(|row| (i as u64, row)).map_err(|e| Error::Trace {
                row: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_second(row: usize, expected: u64, got: u64) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Trace {
            row,
            reason: format!("expected second {expected}, got {got}"),
        })
    }
}

pub fn parse_bandwidth_csv(text: &str) -> Result<BandwidthTrace> {
    let rows = read_rows::<BandwidthRow>(text)?;
    let mut mbps = Vec::with_capacity(rows.len());
    for (i, row) in rows {
        check_second(i as usize + 1, i, row.second)?;
        mbps.push(row.mbps);
    }
    BandwidthTrace::new(mbps)
}

pub fn load_bandwidth_trace(
    path: impl AsRef<Path>,
    scale_to_mean: Option<f64>,
) -> Result<BandwidthTrace> {
    let trace = parse_bandwidth_csv(&read_file(path.as_ref())?)?;
    match scale_to_mean {
        Some(m) => trace.scaled_to_mean(m),
        None => Ok(trace),
    }
}

/// Default log-scale deviation of synthetic throughput.
pub const DEFAULT_BANDWIDTH_SIGMA: f64 = 0.3;

/// Log-normal AR(1) throughput around `mean`, rescaled to hit it exactly.
pub fn synthesize_bandwidth(
    mean: f64,
    length: usize,
    sigma: f64,
    seed: u64,
) -> Result<BandwidthTrace> {
    if length == 0 {
        return Err(Error::InvalidInput("trace length must be positive".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    const PERSISTENCE: f64 = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise =
        Normal::new(0.0, sigma * (1.0 - PERSISTENCE * PERSISTENCE).sqrt()).expect("finite sigma");
    let mut x = Normal::new(0.0, sigma)
        .expect("finite sigma")
        .sample(&mut rng);
    let mut mbps = Vec::with_capacity(length);
    for _ in 0..length {
        mbps.push(x.exp());
        x = PERSISTENCE * x + noise.sample(&mut rng);
    }
    BandwidthTrace::new(mbps)?.scaled_to_mean(mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadTrace {
    poses: Vec<Pose>,
}

/// Signed yaw change along the shorter arc, in `(-180, 180]`.
pub fn shortest_arc(from: f64, to: f64) -> f64 {
    let d = wrap_yaw(to - from);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

impl HeadTrace {
    pub fn new(poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::Trace {
                row: 0,
                reason: "head trace is empty".into(),
            });
        }
        Ok(Self { poses })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn pose(&self, second: usize) -> Pose {
        self.poses[second]
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    /// Backward difference over the previous second; zero at the start.
    pub fn rotation(&self, second: usize) -> Rotation {
        if second == 0 {
            return Rotation::default();
        }
        let (a, b) = (self.poses[second - 1], self.poses[second]);
        Rotation {
            omega_y: shortest_arc(a.yaw(), b.yaw()),
            omega_p: b.pitch() - a.pitch(),
        }
    }
}

pub fn parse_head_csv(text: &str) -> Result<HeadTrace> {
    let rows = read_rows::<HeadRow>(text)?;
    let mut poses = Vec::with_capacity(rows.len());
    for (i, row) in rows {
        let line = i as usize + 1;
        check_second(line, i, row.second)?;
        if !(-90.0..=90.0).contains(&row.pitch_deg) || !row.yaw_deg.is_finite() {
            return Err(Error::Trace {
                row: line,
                reason: format!("pose ({}, {}) out of range", row.yaw_deg, row.pitch_deg),
            });
        }
        poses.push(Pose::new(row.yaw_deg, row.pitch_deg));
    }
    HeadTrace::new(poses)
}

pub fn load_head_trace(path: impl AsRef<Path>) -> Result<HeadTrace> {
    parse_head_csv(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum HeadModel {
    Static,
    /// Yaw oscillation `A sin(2 pi t / P)` around the start pose.
    Sinusoid {
        amplitude_deg: f64,
        period_s: f64,
    },
    /// Mean-reverting angular speed with Gaussian kicks of `sigma_deg_s`.
    RandomWalk {
        sigma_deg_s: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub model: HeadModel,
    /// Per-axis speed limit, deg/s.
    pub max_speed: f64,
    pub start: Pose,
}

impl Default for HeadParams {
    fn default() -> Self {
        Self {
            model: HeadModel::RandomWalk { sigma_deg_s: 15.0 },
            max_speed: 100.0,
            start: Pose::new(180.0, 0.0),
        }
    }
}

pub fn synthesize_head_trace(params: &HeadParams, seed: u64, length: usize) -> Result<HeadTrace> {
    if length == 0 {
        return Err(Error::InvalidInput("trace length must be positive".into()));
    }
    if !(params.max_speed >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "max speed must be nonnegative, got {}",
            params.max_speed
        )));
    }
    let limit = |v: f64| v.clamp(-params.max_speed, params.max_speed);
    let start = params.start;
    let mut poses = Vec::with_capacity(length);
    poses.push(start);
    match params.model {
        HeadModel::Static => poses.resize(length, start),
        HeadModel::Sinusoid {
            amplitude_deg,
            period_s,
        } => {
            if !(period_s > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "period must be positive, got {period_s}"
                )));
            }
            let offset = |t: f64| amplitude_deg * (std::f64::consts::TAU * t / period_s).sin();
            let mut yaw = start.yaw();
            for t in 1..length {
                yaw += limit(offset(t as f64) - offset(t as f64 - 1.0));
                poses.push(Pose::new(yaw, start.pitch()));
            }
        }
        HeadModel::RandomWalk { sigma_deg_s } => {
            const DAMPING: f64 = 0.7;
            const PITCH_PULL: f64 = 0.1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kick = Normal::new(0.0, sigma_deg_s.max(0.0)).expect("finite sigma");
            let (mut wy, mut wp) = (0.0, 0.0);
            let mut pose = start;
            for _ in 1..length {
                wy = limit(DAMPING * wy + kick.sample(&mut rng));
                wp = limit(DAMPING * wp + kick.sample(&mut rng) / 3.0 - PITCH_PULL * pose.pitch());
                if rng.random_bool(0.02) {
                    // occasional glance reversal
                    wy = -wy;
                }
                pose = Pose::new(pose.yaw() + wy, pose.pitch() + wp);
                poses.push(pose);
            }
        }
    }
    HeadTrace::new(poses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_csv_and_scaling() {
        let t = parse_bandwidth_csv("second,mbps\n0,2\n1,6\n2,4\n").unwrap();
        assert_eq!(t.values(), &[2.0, 6.0, 4.0]);
        let s = t.scaled_to_mean(8.0).unwrap();
        assert_eq!(s.values(), &[4.0, 12.0, 8.0]);
        assert!((s.mean() - 8.0).abs() < 1e-9);
    }

    #[test]
    fn bandwidth_rejects_zero_with_row() {
        match parse_bandwidth_csv("second,mbps\n0,2\n1,0\n") {
            Err(Error::Trace { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_bandwidth_csv("second,mbps\n0,2\n2,3\n").is_err());
        assert!(parse_bandwidth_csv("second,mbps\n0,abc\n").is_err());
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bw.csv");
        fs::write(&path, "second,mbps\n0,1\n1,3\n").unwrap();
        assert_eq!(
            load_bandwidth_trace(&path, None).unwrap().values(),
            &[1.0, 3.0]
        );
        assert_eq!(
            load_bandwidth_trace(&path, Some(4.0)).unwrap().values(),
            &[2.0, 6.0]
        );
        assert!(load_bandwidth_trace(dir.path().join("missing.csv"), None).is_err());
    }

    #[test]
    fn synthetic_bandwidth_hits_mean() {
        let t = synthesize_bandwidth(6.5, 300, 0.4, 9).unwrap();
        assert!((t.mean() - 6.5).abs() < 1e-9);
        assert_eq!(t, synthesize_bandwidth(6.5, 300, 0.4, 9).unwrap());
    }

    #[test]
    fn head_csv_and_rotation() {
        let t = parse_head_csv("second,yaw_deg,pitch_deg\n0,350,0\n1,10,5\n2,0,-5\n").unwrap();
        assert_eq!(t.rotation(0), Rotation::default());
        assert_eq!(
            t.rotation(1),
            Rotation {
                omega_y: 20.0,
                omega_p: 5.0
            }
        );
        assert_eq!(
            t.rotation(2),
            Rotation {
                omega_y: -10.0,
                omega_p: -10.0
            }
        );
        assert!(parse_head_csv("second,yaw_deg,pitch_deg\n0,0,95\n").is_err());
    }

    #[test]
    fn static_model_has_no_rotation() {
        let params = HeadParams {
            model: HeadModel::Static,
            ..Default::default()
        };
        let t = synthesize_head_trace(&params, 1, 50).unwrap();
        assert!((0..50).all(|s| t.rotation(s) == Rotation::default()));
    }

    #[test]
    fn sinusoid_peak_speed() {
        let (a, p) = (30.0, 40.0);
        let params = HeadParams {
            model: HeadModel::Sinusoid {
                amplitude_deg: a,
                period_s: p,
            },
            ..Default::default()
        };
        let t = synthesize_head_trace(&params, 1, 200).unwrap();
        let peak = (0..200)
            .map(|s| t.rotation(s).omega_y.abs())
            .fold(0.0, f64::max);
        let analytic = std::f64::consts::TAU * a / p;
        assert!(
            (peak - analytic).abs() / analytic < 0.05,
            "{peak} vs {analytic}"
        );
    }

    #[test]
    fn random_walk_deterministic_and_bounded() {
        let params = HeadParams {
            model: HeadModel::RandomWalk { sigma_deg_s: 80.0 },
            max_speed: 100.0,
            ..Default::default()
        };
        let a = synthesize_head_trace(&params, 5, 500).unwrap();
        assert_eq!(a, synthesize_head_trace(&params, 5, 500).unwrap());
        assert_ne!(a, synthesize_head_trace(&params, 6, 500).unwrap());
        for s in 0..500 {
            let r = a.rotation(s);
            assert!(r.omega_y.abs() <= 100.0 + 1e-9 && r.omega_p.abs() <= 100.0 + 1e-9);
        }
    }

    #[test]
    fn shortest_arc_signs() {
        assert_eq!(shortest_arc(350.0, 10.0), 20.0);
        assert_eq!(shortest_arc(10.0, 350.0), -20.0);
        assert_eq!(shortest_arc(0.0, 180.0), 180.0);
    }
}

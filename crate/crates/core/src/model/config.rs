use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FoV ratios examined per slot, largest first.
pub const DEFAULT_SFOV_LADDER: [f64; 7] = [1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7];

/// Tunables shared by the controller, the baselines and the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Packet queue capacity in seconds of video.
    pub cp_seconds: f64,
    /// Sickness queue capacity.
    pub cs: f64,
    /// Target packet queue occupancy.
    pub lambda_target: f64,
    /// Sickness drain per slot (user adaptation).
    pub omega: f64,
    /// Fraction of bandwidth and flow removed by DoF blur.
    pub k_dof: f64,
    /// Weight of video quality loss.
    pub xi: f64,
    /// Weight of sickness.
    pub rho: f64,
    /// Boundary-trimming probability threshold.
    pub epsilon: f64,
    /// Local search stops once one assignment has been examined this often.
    pub alpha: u32,
    pub nsl_capacity: usize,
    /// Hard cap on local-search iterations.
    pub max_iterations: usize,
    pub sfov_ladder: Vec<f64>,
    /// When false only `y_dof = 0` is considered.
    pub dof_enabled: bool,
    pub sigma_y_deg: f64,
    pub sigma_p_deg: f64,
    /// Viewport bitrate assumed before the first decision, megabits.
    pub gamma_init: f64,
    /// Granularity of the DP budget axis, megabits.
    pub bw_unit: f64,
    pub viewport_w_deg: f64,
    pub viewport_h_deg: f64,
    pub qp_init: f64,
    pub qs_init: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cp_seconds: 4.0,
            cs: 1000.0,
            lambda_target: 0.5,
            omega: 0.05,
            k_dof: 0.1,
            xi: 1.0,
            rho: 2.5,
            epsilon: 0.05,
            alpha: 10,
            nsl_capacity: 20,
            max_iterations: 200,
            sfov_ladder: DEFAULT_SFOV_LADDER.to_vec(),
            dof_enabled: true,
            sigma_y_deg: 10.0,
            sigma_p_deg: 10.0,
            gamma_init: 0.0,
            bw_unit: 0.1,
            viewport_w_deg: 100.0,
            viewport_h_deg: 100.0,
            qp_init: 0.5,
            qs_init: 0.0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let positive = [
            ("cp", self.cp_seconds),
            ("cs", self.cs),
            ("bw_unit", self.bw_unit),
            ("sigma_y", self.sigma_y_deg),
            ("sigma_p", self.sigma_p_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        let nonneg = [
            ("omega", self.omega),
            ("xi", self.xi),
            ("rho", self.rho),
            ("gamma_init", self.gamma_init),
            ("viewport_w", self.viewport_w_deg),
            ("viewport_h", self.viewport_h_deg),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.lambda_target) {
            return fail(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda_target
            ));
        }
        if !(0.0..1.0).contains(&self.k_dof) {
            return fail(format!("k_dof must lie in [0, 1), got {}", self.k_dof));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.alpha == 0 {
            return fail("alpha must be at least 1".into());
        }
        if self.nsl_capacity == 0 {
            return fail("NSL capacity must be at least 1".into());
        }
        if self.sfov_ladder.is_empty() {
            return fail("s_fov ladder is empty".into());
        }
        if let Some(s) = self.sfov_ladder.iter().find(|s| !(0.7..=1.0).contains(*s)) {
            return fail(format!("s_fov {s} outside [0.7, 1]"));
        }
        if self.sfov_ladder.windows(2).any(|w| w[0] <= w[1]) {
            return fail("s_fov ladder must be strictly descending".into());
        }
        if !(0.0..=1.0).contains(&self.qp_init) || !(0.0..=1.0).contains(&self.qs_init) {
            return fail("initial queue occupancies must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// DoF flags to examine per slot.
    pub fn dof_options(&self) -> &'static [bool] {
        if self.dof_enabled {
            &[false, true]
        } else {
            &[false]
        }
    }

    pub fn smallest_sfov(&self) -> f64 {
        *self
            .sfov_ladder
            .last()
            .expect("validated ladder is non-empty")
    }
}

/// One FoV-shrinking / DoF-simulation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub s_fov: f64,
    pub y_dof: bool,
}

impl Intervention {
    pub const NONE: Intervention = Intervention {
        s_fov: 1.0,
        y_dof: false,
    };

    pub fn new(s_fov: f64, y_dof: bool) -> Self {
        Self { s_fov, y_dof }
    }

    pub fn factor(&self, k_dof: f64) -> f64 {
        shrink_factor(self.s_fov, self.y_dof, k_dof)
    }
}

/// Combined shrink factor `s_fov * (1 - k_dof * y_dof)`.
pub fn shrink_factor(s_fov: f64, y_dof: bool, k_dof: f64) -> f64 {
    s_fov * (1.0 - if y_dof { k_dof } else { 0.0 })
}

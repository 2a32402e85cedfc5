//! Thresholds file: every tunable constant of the monitors and the simulator.
//!
//! ```toml
//! [contact]
//! debounce_frames = 2        # frames a pair must touch/separate before an edge is confirmed
//! eps_v = 0.05               # m/s, supported-by relative vertical speed bound
//! support_cone_deg = 45.0    # contact normal must lie within this cone around +z
//!
//! [grasp]
//! g_min = 0.1                # analog grasp input above which the detector is active
//! sensor_sets = ["thumb", "fingers", "palm"]
//! min_sets = 2
//!
//! [segmenter]
//! reach_roi_radius = 0.25
//! reach_roi_offset = 0.15    # m along the palm-forward (+x) axis of the hand
//! reach_hysteresis = 0.005
//! pickup_roi_radius = 0.15
//! putdown_roi_radius = 0.15
//! decay_horizon = 2.0        # s
//! slide_distance = 0.02
//! still_tolerance = 1e-7     # m per frame below which an object counts as still
//! approach_tolerance = 1e-6
//! from_above_min_speed = 0.02
//! from_above_cone_deg = 60.0
//! from_above_frames = 5
//! direct_transport_after_slide = false
//!
//! [sim]
//! eps_pen = 0.005            # surface gap counted as touching
//! n_sleep = 30
//! fall_speed = 1.0
//! wake_radius = 0.4          # entities this close to a hand center never fall asleep
//! ```
//!
//! Missing keys take the defaults above; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracegen::Pid3Config;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub contact: ContactConfig,
    pub grasp: GraspConfig,
    pub segmenter: SegmenterConfig,
    pub sim: SimConfig,
    pub query: QueryConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    pub debounce_frames: u32,
    pub eps_v: f64,
    pub support_cone_deg: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            debounce_frames: 2,
            eps_v: 0.05,
            support_cone_deg: 45.0,
        }
    }
}

impl ContactConfig {
    pub fn support_cos(&self) -> f64 {
        self.support_cone_deg.to_radians().cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspConfig {
    pub g_min: f64,
    pub sensor_sets: Vec<String>,
    pub min_sets: usize,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig {
            g_min: 0.1,
            sensor_sets: vec!["thumb".into(), "fingers".into(), "palm".into()],
            min_sets: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    pub reach_roi_radius: f64,
    pub reach_roi_offset: f64,
    pub reach_hysteresis: f64,
    pub pickup_roi_radius: f64,
    pub putdown_roi_radius: f64,
    pub decay_horizon: f64,
    pub slide_distance: f64,
    pub still_tolerance: f64,
    pub approach_tolerance: f64,
    pub from_above_min_speed: f64,
    pub from_above_cone_deg: f64,
    pub from_above_frames: usize,
    pub direct_transport_after_slide: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            reach_roi_radius: 0.25,
            reach_roi_offset: 0.15,
            reach_hysteresis: 0.005,
            pickup_roi_radius: 0.15,
            putdown_roi_radius: 0.15,
            decay_horizon: 2.0,
            slide_distance: 0.02,
            still_tolerance: 1e-7,
            approach_tolerance: 1e-6,
            from_above_min_speed: 0.02,
            from_above_cone_deg: 60.0,
            from_above_frames: 5,
            direct_transport_after_slide: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub eps_pen: f64,
    pub n_sleep: u32,
    pub fall_speed: f64,
    pub wake_radius: f64,
    /// Effective mass of a tracked hand, kg.
    pub hand_mass: f64,
    pub hand_pid: Pid3Config,
    pub rotation_pid: Pid3Config,
    pub finger_stiffness: f64,
    pub finger_damping: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            eps_pen: 0.005,
            n_sleep: 30,
            fall_speed: 1.0,
            wake_radius: 0.4,
            hand_mass: 1.0,
            hand_pid: Pid3Config {
                kp: 400.0,
                ki: 0.0,
                kd: 40.0,
                max_output: 500.0,
                integral_clamp: 1.0,
            },
            rotation_pid: Pid3Config {
                kp: 400.0,
                ki: 0.0,
                kd: 40.0,
                max_output: 500.0,
                integral_clamp: 1.0,
            },
            finger_stiffness: 400.0,
            finger_damping: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    /// Allen boundary tolerance in seconds; one frame period when unset.
    pub delta_t: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| toml_error(origin, text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("contact.eps_v", self.contact.eps_v),
            ("segmenter.reach_roi_radius", self.segmenter.reach_roi_radius),
            ("segmenter.pickup_roi_radius", self.segmenter.pickup_roi_radius),
            ("segmenter.putdown_roi_radius", self.segmenter.putdown_roi_radius),
            ("segmenter.decay_horizon", self.segmenter.decay_horizon),
            ("segmenter.slide_distance", self.segmenter.slide_distance),
            ("sim.fall_speed", self.sim.fall_speed),
            ("sim.hand_mass", self.sim.hand_mass),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("segmenter.reach_hysteresis", self.segmenter.reach_hysteresis),
            ("segmenter.still_tolerance", self.segmenter.still_tolerance),
            ("segmenter.approach_tolerance", self.segmenter.approach_tolerance),
            ("segmenter.from_above_min_speed", self.segmenter.from_above_min_speed),
            ("sim.eps_pen", self.sim.eps_pen),
            ("sim.wake_radius", self.sim.wake_radius),
            ("sim.finger_stiffness", self.sim.finger_stiffness),
            ("sim.finger_damping", self.sim.finger_damping),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.grasp.g_min) {
            return Err(Error::validation("grasp.g_min must lie in [0, 1]"));
        }
        if self.grasp.sensor_sets.is_empty() || self.grasp.min_sets == 0 {
            return Err(Error::validation("grasp needs at least one sensor set and min_sets >= 1"));
        }
        if self.contact.debounce_frames == 0 {
            return Err(Error::validation("contact.debounce_frames must be >= 1"));
        }
        if self.segmenter.from_above_frames == 0 {
            return Err(Error::validation("segmenter.from_above_frames must be >= 1"));
        }
        if let Some(d) = self.query.delta_t {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::validation("query.delta_t must be non-negative"));
            }
        }
        self.sim.hand_pid.validate()?;
        self.sim.rotation_pid.validate()?;
        Ok(())
    }
}

/// Converts a TOML error into a positioned parse error.
pub(crate) fn toml_error(origin: &str, text: &str, e: &toml::de::Error) -> Error {
    let (line, column) = e
        .span()
        .map(|s| line_col(text, s.start))
        .unwrap_or((0, 0));
    Error::Parse {
        path: origin.to_string(),
        line,
        column,
        message: e.message().to_string(),
    }
}

pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_partial_files_merge() {
        Config::default().validate().unwrap();
        let cfg = Config::from_toml_str("[contact]\neps_v = 0.1\n", "t.toml").unwrap();
        assert_eq!(cfg.contact.eps_v, 0.1);
        assert_eq!(cfg.contact.debounce_frames, 2);
        assert_eq!(cfg.segmenter, SegmenterConfig::default());
    }

    #[test]
    fn unknown_keys_report_position() {
        let err = Config::from_toml_str("[contact]\nbogus = 1\n", "t.toml").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start().to_string() + "\n")
            .collect();
        let cfg = Config::from_toml_str(&doc, "doc").unwrap();
        assert_eq!(cfg.contact, ContactConfig::default());
        assert_eq!(cfg.segmenter, SegmenterConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml_str("[grasp]\ng_min = 2.0\n", "x").is_err());
        assert!(Config::from_toml_str("[segmenter]\nslide_distance = -1.0\n", "x").is_err());
    }
}

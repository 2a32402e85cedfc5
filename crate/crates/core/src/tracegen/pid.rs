use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Vec3;

/// Gains and limits of a three-axis PID controller. Gains apply uniformly
/// to every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pid3Config {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the output vector norm (N or N·m).
    pub max_output: f64,
    /// Bound on each component of the accumulated error integral.
    pub integral_clamp: f64,
}

impl Pid3Config {
    pub fn validate(&self) -> Result<()> {
        let gains_ok = [self.kp, self.ki, self.kd]
            .iter()
            .all(|g| *g >= 0.0 && g.is_finite());
        if !gains_ok || !(self.max_output > 0.0) || !(self.integral_clamp >= 0.0) {
            return Err(Error::validation(format!("invalid PID configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pid3State {
    pub integral: Vec3,
    pub prev_error: Vec3,
    pub initialized: bool,
}

/// One controller update. Derivative acts on the error and is zero on the
/// first call.
pub fn pid3_step(cfg: &Pid3Config, state: &Pid3State, error: Vec3, dt: f64) -> Result<(Vec3, Pid3State)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    if !error.iter().all(|e| e.is_finite()) {
        return Err(Error::validation(format!("non-finite PID error {error:?}")));
    }
    let clamp = cfg.integral_clamp;
    let integral = (state.integral + error * dt).map(|v| v.clamp(-clamp, clamp));
    let derivative = if state.initialized {
        (error - state.prev_error) / dt
    } else {
        Vec3::zeros()
    };
    let mut out = error * cfg.kp + integral * cfg.ki + derivative * cfg.kd;
    let n = out.norm();
    if n > cfg.max_output {
        out *= cfg.max_output / n;
    }
    Ok((
        out,
        Pid3State {
            integral,
            prev_error: error,
            initialized: true,
        },
    ))
}

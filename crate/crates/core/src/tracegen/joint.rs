use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PD drive on one finger joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDriver {
    /// N·m/rad
    pub stiffness: f64,
    /// N·m·s/rad
    pub damping: f64,
    pub target_angle: f64,
    pub target_velocity: f64,
}

impl JointDriver {
    pub fn validate(&self) -> Result<()> {
        if self.stiffness >= 0.0
            && self.damping >= 0.0
            && self.target_angle.is_finite()
            && self.target_velocity.is_finite()
        {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid joint driver {self:?}")))
        }
    }
}

pub fn joint_driver_torque(d: &JointDriver, angle: f64, velocity: f64) -> Result<f64> {
    d.validate()?;
    if !angle.is_finite() || !velocity.is_finite() {
        return Err(Error::validation("joint state must be finite"));
    }
    Ok(d.stiffness * (d.target_angle - angle) + d.damping * (d.target_velocity - velocity))
}

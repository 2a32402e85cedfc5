use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GraspStyle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    /// Normalized animation parameter in [0, 1].
    pub u: f64,
    pub angles: BTreeMap<String, f64>,
}

/// Joint-angle waypoints of one grasp style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspAnimation {
    pub style: GraspStyle,
    pub keyframes: Vec<Keyframe>,
}

impl GraspAnimation {
    pub fn new(style: GraspStyle, keyframes: Vec<Keyframe>) -> Result<Self> {
        let a = GraspAnimation { style, keyframes };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let kf = &self.keyframes;
        if kf.len() < 2 || kf[0].u != 0.0 || kf[kf.len() - 1].u != 1.0 {
            return Err(Error::validation(format!(
                "{} animation: keyframes must start at u=0 and end at u=1",
                self.style
            )));
        }
        if kf.windows(2).any(|w| !(w[0].u < w[1].u)) {
            return Err(Error::validation(format!(
                "{} animation: keyframe parameters must strictly increase",
                self.style
            )));
        }
        let joints: Vec<&String> = kf[0].angles.keys().collect();
        if kf.iter().any(|k| k.angles.keys().collect::<Vec<_>>() != joints) {
            return Err(Error::validation(format!(
                "{} animation: every keyframe must define the same joints",
                self.style
            )));
        }
        Ok(())
    }

    pub fn joints(&self) -> impl Iterator<Item = &str> {
        self.keyframes[0].angles.keys().map(String::as_str)
    }

    /// Built-in hand animation for `style` (angles in rad).
    pub fn builtin(style: GraspStyle) -> GraspAnimation {
        // thumb, index, middle, ring/little flexion at the closed pose
        let closed: [f64; 4] = match style {
            GraspStyle::Pinch => [0.9, 1.1, 0.3, 0.2],
            GraspStyle::Wrap => [1.0, 1.4, 1.4, 1.4],
            GraspStyle::Tripod => [0.9, 1.0, 1.0, 0.3],
            GraspStyle::Lateral => [0.6, 1.5, 1.5, 1.5],
        };
        let names = ["thumb", "index", "middle", "ring"];
        let frame = |u: f64, scale: f64| Keyframe {
            u,
            angles: names
                .iter()
                .zip(closed)
                .map(|(n, a)| (n.to_string(), a * scale))
                .collect(),
        };
        GraspAnimation::new(style, vec![frame(0.0, 0.0), frame(0.4, 0.55), frame(1.0, 1.0)])
            .expect("builtin animation is well formed")
    }
}

/// Piecewise-linear joint targets at parameter `u`; out-of-range values are
/// clamped with a warning.
pub fn grasp_interpolate(anim: &GraspAnimation, u: f64) -> BTreeMap<String, f64> {
    let u = if u.is_nan() {
        log::warn!("grasp parameter is NaN; using 0");
        0.0
    } else if !(0.0..=1.0).contains(&u) {
        log::warn!("grasp parameter {u} outside [0, 1]; clamped");
        u.clamp(0.0, 1.0)
    } else {
        u
    };
    let kf = &anim.keyframes;
    let hi = kf.iter().position(|k| k.u >= u).unwrap_or(kf.len() - 1);
    if hi == 0 || kf[hi].u == u {
        return kf[hi].angles.clone();
    }
    let (a, b) = (&kf[hi - 1], &kf[hi]);
    let w = (u - a.u) / (b.u - a.u);
    a.angles
        .iter()
        .map(|(j, va)| (j.clone(), va + (b.angles[j] - va) * w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_frame() -> GraspAnimation {
        GraspAnimation::new(
            GraspStyle::Pinch,
            vec![
                Keyframe {
                    u: 0.0,
                    angles: [("j1".to_string(), 0.0)].into(),
                },
                Keyframe {
                    u: 1.0,
                    angles: [("j1".to_string(), 1.0)].into(),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn examples() {
        let a = two_frame();
        assert_eq!(grasp_interpolate(&a, 0.0)["j1"], 0.0);
        assert_eq!(grasp_interpolate(&a, 1.0)["j1"], 1.0);
        assert_eq!(grasp_interpolate(&a, 0.25)["j1"], 0.25);
        assert_eq!(grasp_interpolate(&a, 1.7)["j1"], 1.0);
        assert_eq!(grasp_interpolate(&a, -0.2)["j1"], 0.0);
    }

    #[test]
    fn builtin_endpoints_are_exact() {
        for style in GraspStyle::ALL {
            let a = GraspAnimation::builtin(style);
            assert_eq!(grasp_interpolate(&a, 0.0), a.keyframes[0].angles);
            assert_eq!(grasp_interpolate(&a, 1.0), a.keyframes[2].angles);
        }
    }

    #[test]
    fn malformed_animations_rejected() {
        let mut kf = two_frame().keyframes;
        kf[1].u = 0.9;
        assert!(GraspAnimation::new(GraspStyle::Wrap, kf.clone()).is_err());
        kf[1].u = 1.0;
        kf[1].angles.insert("j2".into(), 0.0);
        assert!(GraspAnimation::new(GraspStyle::Wrap, kf).is_err());
    }
}

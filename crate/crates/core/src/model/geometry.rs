use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_TOL: f64 = 1e-6;

/// World pose. Z-up, right-handed; quaternion stored as (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    /// Builds a pose, normalizing the quaternion.
    pub fn new(position: Vec3, wxyz: [f64; 4]) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 || !position.iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!("invalid pose {position:?} {wxyz:?}")));
        }
        Ok(Pose {
            position,
            orientation: UnitQuaternion::from_quaternion(q),
        })
    }

    pub fn from_translation(position: Vec3) -> Self {
        Pose {
            position,
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn identity() -> Self {
        Self::from_translation(Vec3::zeros())
    }

    /// Wire form `[px, py, pz, qw, qx, qy, qz]`. The quaternion is accepted
    /// as-is when within tolerance of unit norm so that values round-trip
    /// bit-exactly.
    pub fn from_array(a: [f64; 7]) -> Result<Self> {
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!("non-finite pose {a:?}")));
        }
        let q = Quaternion::new(a[3], a[4], a[5], a[6]);
        if (q.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::validation(format!(
                "pose quaternion norm {} is not unit",
                q.norm()
            )));
        }
        Ok(Pose {
            position: Vec3::new(a[0], a[1], a[2]),
            orientation: UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn to_array(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        *self.orientation.to_rotation_matrix().matrix()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation * p + self.position
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse() * (p - self.position)
    }

    pub fn inverse_transform_vector(&self, v: &Vec3) -> Vec3 {
        self.orientation.inverse() * v
    }

    /// `self * other`: express `other` (given in this pose's frame) in world.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.transform_point(&other.position),
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: -(inv * self.position),
            orientation: inv,
        }
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 7]>::deserialize(d)?;
        Pose::from_array(a).map_err(D::Error::custom)
    }
}

/// Linear (m/s) and angular (rad/s) velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn new(linear: Vec3, angular: Vec3) -> Result<Self> {
        let t = Twist { linear, angular };
        t.validate()?;
        Ok(t)
    }

    pub fn zero() -> Self {
        Twist::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.linear.iter().chain(self.angular.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::validation(format!("non-finite twist {self:?}")))
        }
    }

    /// Backward finite difference between two poses `dt` apart.
    pub fn between(prev: &Pose, next: &Pose, dt: f64) -> Twist {
        let linear = (next.position - prev.position) / dt;
        let delta = next.orientation * prev.orientation.inverse();
        let angular = delta.scaled_axis() / dt;
        Twist { linear, angular }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        ]
    }
}

impl Serialize for Twist {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Twist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; 6]>::deserialize(d)?;
        Twist::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5])).map_err(D::Error::custom)
    }
}

/// Primitive collision geometry, expressed in the entity frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    /// Axis along local z.
    Cylinder { radius: f64, half_height: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0 && h.is_finite()),
            Shape::Sphere { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Cylinder {
                radius,
                half_height,
            } => radius > 0.0 && half_height > 0.0 && radius.is_finite() && half_height.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("shape extents must be positive: {self:?}")))
        }
    }

    /// Local-frame half extents of the bounding box.
    pub fn local_half_extents(&self) -> Vec3 {
        match *self {
            Shape::Box { half_extents: h } => Vec3::new(h[0], h[1], h[2]),
            Shape::Sphere { radius } => Vec3::repeat(radius),
            Shape::Cylinder {
                radius,
                half_height,
            } => Vec3::new(radius, radius, half_height),
        }
    }

    /// World-axis-aligned half extents at `pose`.
    pub fn world_half_extents(&self, pose: &Pose) -> Vec3 {
        match self {
            Shape::Sphere { radius } => Vec3::repeat(*radius),
            _ => pose.rotation().abs() * self.local_half_extents(),
        }
    }

    /// Nearest non-negative ray parameter hitting the surface; `origin` and
    /// `dir` in the shape's local frame.
    pub fn local_ray_hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match *self {
            Shape::Sphere { radius } => ray_sphere(origin, dir, radius),
            Shape::Box { half_extents: h } => ray_box(origin, dir, &Vec3::new(h[0], h[1], h[2])),
            Shape::Cylinder {
                radius,
                half_height,
            } => ray_cylinder(origin, dir, radius, half_height),
        }
    }

    /// Closest point of the solid to `p`, local frame.
    pub fn local_closest_point(&self, p: &Vec3) -> Vec3 {
        match *self {
            Shape::Sphere { radius } => {
                let n = p.norm();
                if n <= radius {
                    *p
                } else {
                    p * (radius / n)
                }
            }
            Shape::Box { .. } | Shape::Cylinder { .. } => {
                let h = self.local_half_extents();
                Vec3::new(
                    p.x.clamp(-h.x, h.x),
                    p.y.clamp(-h.y, h.y),
                    p.z.clamp(-h.z, h.z),
                )
            }
        }
    }
}

fn smallest_non_negative(ts: impl IntoIterator<Item = f64>) -> Option<f64> {
    ts.into_iter()
        .filter(|t| *t >= 0.0 && t.is_finite())
        .min_by(|a, b| a.total_cmp(b))
}

fn ray_sphere(o: &Vec3, d: &Vec3, r: f64) -> Option<f64> {
    let a = d.norm_squared();
    let b = o.dot(d);
    let c = o.norm_squared() - r * r;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    smallest_non_negative([(-b - s) / a, (-b + s) / a])
}

fn ray_box(o: &Vec3, d: &Vec3, h: &Vec3) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i].abs() > h[i] {
                return None;
            }
            continue;
        }
        let t1 = (-h[i] - o[i]) / d[i];
        let t2 = (h[i] - o[i]) / d[i];
        t_enter = t_enter.max(t1.min(t2));
        t_exit = t_exit.min(t1.max(t2));
    }
    if t_enter > t_exit || t_exit < 0.0 {
        return None;
    }
    smallest_non_negative([t_enter, t_exit])
}

fn ray_cylinder(o: &Vec3, d: &Vec3, r: f64, hh: f64) -> Option<f64> {
    let mut candidates = Vec::with_capacity(4);
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-15 {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / a, (-b + s) / a] {
                if (o.z + t * d.z).abs() <= hh {
                    candidates.push(t);
                }
            }
        }
    }
    if d.z.abs() > 1e-15 {
        for cap in [-hh, hh] {
            let t = (cap - o.z) / d.z;
            let x = o.x + t * d.x;
            let y = o.y + t * d.y;
            if x * x + y * y <= r * r {
                candidates.push(t);
            }
        }
    }
    smallest_non_negative(candidates)
}

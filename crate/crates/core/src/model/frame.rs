use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::{Pose, Twist, Vec3};
use super::ids::EntityId;
use crate::error::{Error, Result};

pub(crate) mod vec3_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        if !a.iter().all(|v| v.is_finite()) {
            return Err(serde::de::Error::custom("non-finite vector component"));
        }
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspStyle {
    Pinch,
    Wrap,
    Tripod,
    Lateral,
}

impl GraspStyle {
    pub const ALL: [GraspStyle; 4] = [
        GraspStyle::Pinch,
        GraspStyle::Wrap,
        GraspStyle::Tripod,
        GraspStyle::Lateral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraspStyle::Pinch => "pinch",
            GraspStyle::Wrap => "wrap",
            GraspStyle::Tripod => "tripod",
            GraspStyle::Lateral => "lateral",
        }
    }

    /// Sensor sets that touch a held object for each style.
    pub fn sensor_sets(self) -> &'static [&'static str] {
        match self {
            GraspStyle::Wrap => &["thumb", "fingers", "palm"],
            GraspStyle::Pinch | GraspStyle::Tripod | GraspStyle::Lateral => &["thumb", "fingers"],
        }
    }
}

impl fmt::Display for GraspStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraspStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GraspStyle::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown grasp style {s:?}")))
    }
}

/// Collision between `a` and `b`, stored with `a < b`; `normal` points from
/// `b` toward `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub a: EntityId,
    pub b: EntityId,
    #[serde(rename = "n", with = "vec3_serde")]
    pub normal: Vec3,
    #[serde(rename = "p", with = "vec3_serde")]
    pub point: Vec3,
}

impl ContactRecord {
    /// Orders the pair canonically, flipping the normal when swapping.
    pub fn canonical(x: EntityId, y: EntityId, normal_y_to_x: Vec3, point: Vec3) -> Self {
        if x < y {
            ContactRecord {
                a: x,
                b: y,
                normal: normal_y_to_x,
                point,
            }
        } else {
            ContactRecord {
                a: y,
                b: x,
                normal: -normal_y_to_x,
                point,
            }
        }
    }

    /// Contact normal pointing from the other entity toward `id`.
    pub fn normal_toward(&self, id: &EntityId) -> Option<Vec3> {
        if *id == self.a {
            Some(self.normal)
        } else if *id == self.b {
            Some(-self.normal)
        } else {
            None
        }
    }

    pub fn other(&self, id: &EntityId) -> Option<EntityId> {
        if *id == self.a {
            Some(self.b)
        } else if *id == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub hand_id: EntityId,
    pub grasp_style: GraspStyle,
    /// Analog grasp trigger in [0, 1].
    pub grasp_input: f64,
    /// Sensor-set name to the entities currently touching it.
    pub sensor_contacts: BTreeMap<String, BTreeSet<EntityId>>,
}

impl HandState {
    pub fn touching(&self) -> BTreeSet<EntityId> {
        self.sensor_contacts.values().flatten().copied().collect()
    }

    /// Number of distinct sensor sets in contact with `object`.
    pub fn sets_touching(&self, object: &EntityId) -> usize {
        self.sensor_contacts
            .values()
            .filter(|s| s.contains(object))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaze {
    #[serde(rename = "o", with = "vec3_serde")]
    pub origin: Vec3,
    #[serde(rename = "d", with = "vec3_serde")]
    pub direction: Vec3,
}

impl Default for Gaze {
    fn default() -> Self {
        Gaze {
            origin: Vec3::zeros(),
            direction: Vec3::new(1.0, 0.0, 0.0),
        }
    }
}

/// One timestamped world snapshot. Serialized field order is part of the
/// trace format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "frame")]
pub struct Frame {
    pub t: f64,
    pub poses: BTreeMap<EntityId, Pose>,
    pub twists: BTreeMap<EntityId, Twist>,
    pub contacts: Vec<ContactRecord>,
    pub hands: Vec<HandState>,
    pub gaze: Gaze,
    pub sleeping: BTreeSet<EntityId>,
}

impl Frame {
    pub fn empty(t: f64) -> Self {
        Frame {
            t,
            poses: BTreeMap::new(),
            twists: BTreeMap::new(),
            contacts: Vec::new(),
            hands: Vec::new(),
            gaze: Gaze::default(),
            sleeping: BTreeSet::new(),
        }
    }

    pub fn hand(&self, id: &EntityId) -> Option<&HandState> {
        self.hands.iter().find(|h| h.hand_id == *id)
    }

    pub fn position(&self, id: &EntityId) -> Option<Vec3> {
        self.poses.get(id).map(|p| p.position)
    }

    /// Every entity id the frame mentions.
    pub fn referenced_ids(&self) -> BTreeSet<EntityId> {
        let mut ids: BTreeSet<EntityId> = self.poses.keys().copied().collect();
        ids.extend(self.twists.keys().copied());
        for c in &self.contacts {
            ids.insert(c.a);
            ids.insert(c.b);
        }
        for h in &self.hands {
            ids.insert(h.hand_id);
            ids.extend(h.touching());
        }
        ids.extend(self.sleeping.iter().copied());
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_field_order() {
        let id = EntityId::random();
        let mut f = Frame::empty(0.5);
        f.poses.insert(id, Pose::identity());
        f.twists.insert(id, Twist::zero());
        let s = serde_json::to_string(&f).unwrap();
        let order = ["\"type\":\"frame\"", "\"t\"", "\"poses\"", "\"twists\"", "\"contacts\"", "\"hands\"", "\"gaze\"", "\"sleeping\""];
        let mut last = 0;
        for key in order {
            let pos = s.find(key).unwrap_or_else(|| panic!("{key} missing in {s}"));
            assert!(pos >= last, "{key} out of order in {s}");
            last = pos;
        }
        let back: Frame = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn canonical_contact_flips_normal() {
        let x = EntityId::random();
        let y = EntityId::random();
        let n = Vec3::new(0.0, 0.0, 1.0);
        let c1 = ContactRecord::canonical(x, y, n, Vec3::zeros());
        let c2 = ContactRecord::canonical(y, x, -n, Vec3::zeros());
        assert_eq!(c1, c2);
        assert_eq!(c1.normal_toward(&x), Some(n));
        assert_eq!(c1.normal_toward(&y), Some(-n));
    }
}

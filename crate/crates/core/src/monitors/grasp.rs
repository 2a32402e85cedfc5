use std::collections::{BTreeMap, BTreeSet};

use crate::config::GraspConfig;
use crate::error::{Error, Result};
use crate::model::{EntityId, Frame, GraspStyle, HandState};

/// The grasp grammar: active input and contact on at least `min_sets`
/// distinct sensor sets.
pub fn grasp_predicate<'a>(
    config: &GraspConfig,
    input: f64,
    sets: impl IntoIterator<Item = &'a str>,
) -> Result<bool> {
    let mut distinct = BTreeSet::new();
    for s in sets {
        if !config.sensor_sets.iter().any(|k| k == s) {
            return Err(Error::validation(format!(
                "unknown sensor set {s:?}; known: {}",
                config.sensor_sets.join(", ")
            )));
        }
        distinct.insert(s);
    }
    Ok(input > config.g_min && distinct.len() >= config.min_sets)
}

/// Open or close of a Grasping interval.
#[derive(Debug, Clone, PartialEq)]
pub enum GraspChange {
    Opened { hand: EntityId, object: EntityId, t: f64, style: GraspStyle },
    Closed { hand: EntityId, object: EntityId, t: f64, start: f64, style: GraspStyle },
}

#[derive(Debug, Clone)]
pub struct GraspMonitor {
    config: GraspConfig,
    open: BTreeMap<(EntityId, EntityId), (f64, GraspStyle)>,
}

impl GraspMonitor {
    pub fn new(config: &GraspConfig) -> Self {
        GraspMonitor {
            config: config.clone(),
            open: BTreeMap::new(),
        }
    }

    fn grasped(&self, h: &HandState) -> Result<BTreeSet<EntityId>> {
        let mut objects: BTreeMap<EntityId, Vec<&str>> = BTreeMap::new();
        for (set, ids) in &h.sensor_contacts {
            if !self.config.sensor_sets.contains(set) {
                return Err(Error::validation(format!("unknown sensor set {set:?}")));
            }
            for id in ids {
                objects.entry(*id).or_default().push(set);
            }
        }
        let mut out = BTreeSet::new();
        for (id, sets) in objects {
            if grasp_predicate(&self.config, h.grasp_input, sets)? {
                out.insert(id);
            }
        }
        Ok(out)
    }

    pub fn step(&mut self, frame: &Frame) -> Result<Vec<GraspChange>> {
        let mut now: BTreeMap<(EntityId, EntityId), GraspStyle> = BTreeMap::new();
        for h in &frame.hands {
            for o in self.grasped(h)? {
                now.insert((h.hand_id, o), h.grasp_style);
            }
        }
        let mut out = Vec::new();
        let closed: Vec<_> = self.open.keys().filter(|k| !now.contains_key(k)).copied().collect();
        for key in closed {
            let (start, style) = self.open.remove(&key).expect("listed grasp");
            out.push(GraspChange::Closed {
                hand: key.0,
                object: key.1,
                t: frame.t,
                start,
                style,
            });
        }
        for (key, style) in now {
            if let std::collections::btree_map::Entry::Vacant(v) = self.open.entry(key) {
                v.insert((frame.t, style));
                out.push(GraspChange::Opened {
                    hand: key.0,
                    object: key.1,
                    t: frame.t,
                    style,
                });
            }
        }
        Ok(out)
    }

    pub fn is_grasping(&self, hand: &EntityId) -> bool {
        self.open.keys().any(|(h, _)| h == hand)
    }

    /// Open grasps as (hand, object, start, style).
    pub fn open(&self) -> impl Iterator<Item = (EntityId, EntityId, f64, GraspStyle)> + '_ {
        self.open.iter().map(|(&(h, o), &(t, s))| (h, o, t, s))
    }
}

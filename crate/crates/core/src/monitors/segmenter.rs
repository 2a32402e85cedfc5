use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::contact::{ContactMonitor, Transition};
use super::grasp::{GraspChange, GraspMonitor};
use super::OpenEvent;
use crate::config::{Config, SegmenterConfig};
use crate::model::{EntityId, EntitySet, Event, EventKind, Frame, Participants, Pose, Shape, Vec3};
use crate::tracegen::separation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiKind {
    Reach,
    Pickup,
    Putdown,
}

/// Spherical trigger volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOfInterest {
    pub kind: RoiKind,
    pub center: Vec3,
    pub radius: f64,
}

impl RegionOfInterest {
    /// Reach region in front of a hand: `offset` along its palm-forward axis.
    pub fn reach(hand: &Pose, offset: f64, radius: f64) -> Self {
        RegionOfInterest {
            kind: RoiKind::Reach,
            center: hand.transform_point(&Vec3::new(offset, 0.0, 0.0)),
            radius,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.center).norm() <= self.radius
    }

    /// Whether any point of the shape lies inside the region.
    pub fn overlaps(&self, shape: &Shape, pose: &Pose) -> bool {
        let ball = Shape::Sphere { radius: self.radius };
        separation(&ball, &Pose::from_translation(self.center), shape, pose).separation <= 0.0
    }
}

/// Bounded-horizon trajectory of the grasped object.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCache {
    horizon: f64,
    samples: VecDeque<(f64, Pose)>,
}

impl DecayCache {
    pub fn new(horizon: f64) -> Self {
        DecayCache {
            horizon,
            samples: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: f64, pose: Pose) {
        self.samples.push_back((t, pose));
        while self.samples.front().is_some_and(|(s, _)| t - s > self.horizon + 1e-9) {
            self.samples.pop_front();
        }
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl DoubleEndedIterator<Item = &(f64, Pose)> + ExactSizeIterator {
        self.samples.iter()
    }

    pub fn oldest(&self) -> Option<f64> {
        self.samples.front().map(|s| s.0)
    }

    fn index_of(&self, t: f64) -> Option<usize> {
        self.samples.iter().rposition(|(s, _)| (s - t).abs() < 1e-9)
    }

    fn pos(&self, i: usize) -> Vec3 {
        self.samples[i].1.position
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachCandidate {
    pub object: EntityId,
    pub reach_start: f64,
    pub prev_distance: f64,
    min_distance: f64,
    away: bool,
}

/// Coarse per-hand phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandPhase {
    Idle,
    Reaching,
    Fixation,
    Grasped,
    Sliding,
    PickingUp,
    Transporting,
    PuttingDown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Grasped { onset: f64, path: f64 },
    Sliding { start: f64 },
    PickingUp { start: f64, roi: RegionOfInterest },
    Transporting { start: f64 },
}

#[derive(Debug, Clone)]
struct Chain {
    phase: Phase,
    recent: VecDeque<(f64, Pose)>,
    cache: DecayCache,
}

#[derive(Debug, Clone)]
struct HandSeg {
    hand: EntityId,
    candidates: BTreeMap<EntityId, ReachCandidate>,
    touching: BTreeSet<EntityId>,
    fixation_onsets: BTreeMap<EntityId, f64>,
    chains: BTreeMap<EntityId, Chain>,
}

enum ChainCue {
    Break(f64),
    Regain(f64),
    Land(f64, Vec3),
}

impl ChainCue {
    fn t(&self) -> f64 {
        match self {
            ChainCue::Break(t) | ChainCue::Regain(t) | ChainCue::Land(t, _) => *t,
        }
    }
}

/// Extended pick-and-place segmenter; one chain per grasped movable object.
#[derive(Debug, Clone)]
pub struct Segmenter {
    config: SegmenterConfig,
    support_cos: f64,
    history: usize,
    entities: EntitySet,
    hands: Vec<HandSeg>,
}

fn emit(kind: EventKind, start: f64, end: f64, hand: EntityId, object: EntityId) -> Event {
    OpenEvent::new(kind, start, who(hand, object)).close(end)
}

fn who(hand: EntityId, object: EntityId) -> Participants {
    Participants {
        performer: Some(hand),
        object: Some(object),
        ..Default::default()
    }
}

impl Segmenter {
    pub fn new(entities: &EntitySet, config: &Config) -> Self {
        Segmenter {
            config: config.segmenter.clone(),
            support_cos: config.contact.support_cos(),
            history: config.contact.debounce_frames as usize + 2,
            entities: entities.clone(),
            hands: entities
                .iter()
                .filter(|d| d.is_hand())
                .map(|d| HandSeg {
                    hand: d.id,
                    candidates: BTreeMap::new(),
                    touching: BTreeSet::new(),
                    fixation_onsets: BTreeMap::new(),
                    chains: BTreeMap::new(),
                })
                .collect(),
        }
    }

    fn movable(&self, id: &EntityId) -> bool {
        self.entities.get(id).is_some_and(|d| !d.is_static && !d.is_hand())
    }

    pub fn phase(&self, hand: &EntityId) -> HandPhase {
        let Some(h) = self.hands.iter().find(|h| h.hand == *hand) else {
            return HandPhase::Idle;
        };
        if let Some(c) = h.chains.values().next() {
            return match c.phase {
                Phase::Grasped { .. } => HandPhase::Grasped,
                Phase::Sliding { .. } => HandPhase::Sliding,
                Phase::PickingUp { .. } => HandPhase::PickingUp,
                Phase::Transporting { .. } => HandPhase::Transporting,
            };
        }
        if !h.fixation_onsets.is_empty() {
            HandPhase::Fixation
        } else if !h.candidates.is_empty() {
            HandPhase::Reaching
        } else {
            HandPhase::Idle
        }
    }

    pub fn candidates(&self, hand: &EntityId) -> Vec<ReachCandidate> {
        self.hands
            .iter()
            .filter(|h| h.hand == *hand)
            .flat_map(|h| h.candidates.values().copied())
            .collect()
    }

    /// Decay cache of the chain on `object`, if one is open.
    pub fn cache(&self, object: &EntityId) -> Option<&DecayCache> {
        self.hands.iter().find_map(|h| h.chains.get(object)).map(|c| &c.cache)
    }

    pub fn step(
        &mut self,
        frame: &Frame,
        transitions: &[Transition],
        grasps: &[GraspChange],
        contacts: &ContactMonitor,
        grasp_state: &GraspMonitor,
    ) -> Vec<Event> {
        let t = frame.t;
        let mut out = Vec::new();
        let mut hands = std::mem::take(&mut self.hands);
        for h in &mut hands {
            let Some(hand_pose) = frame.poses.get(&h.hand) else {
                continue;
            };
            let released: BTreeMap<EntityId, f64> = grasps
                .iter()
                .filter_map(|g| match g {
                    GraspChange::Closed { hand, object, t, .. } if *hand == h.hand => Some((*object, *t)),
                    _ => None,
                })
                .collect();

            let objects: Vec<EntityId> = h.chains.keys().copied().collect();
            for o in objects {
                let chain = h.chains.get_mut(&o).expect("listed chain");
                let pose = frame.poses[&o];
                chain.recent.push_back((t, pose));
                while chain.recent.len() > self.history {
                    chain.recent.pop_front();
                }
                let release = released.get(&o).copied();
                let mut cues = self.cues(&o, transitions, contacts);
                cues.retain(|c| release.is_none_or(|r| c.t() < r));
                let before = chain.phase;
                for cue in cues {
                    self.apply_cue(h.hand, o, chain, cue, t, &mut out);
                }
                if let Some(r) = release {
                    close_phase(h.hand, o, chain.phase, r, &mut out);
                    h.chains.remove(&o);
                    continue;
                }
                if chain.phase == before {
                    self.advance(h.hand, o, chain, contacts.is_supported(&o), t, &mut out);
                }
            }

            let now: BTreeSet<EntityId> = frame.hand(&h.hand).map(|s| s.touching()).unwrap_or_default();
            for o in h.touching.difference(&now) {
                h.fixation_onsets.remove(o);
            }
            for o in now.difference(&h.touching) {
                if !self.movable(o) {
                    continue;
                }
                h.fixation_onsets.insert(*o, t);
                if let Some(c) = h.candidates.remove(o) {
                    out.push(emit(EventKind::Reaching, c.reach_start, t, h.hand, *o));
                }
            }
            h.touching = now;

            for g in grasps {
                if let GraspChange::Opened { hand, object, t, .. } = g {
                    if *hand != h.hand {
                        continue;
                    }
                    h.candidates.clear();
                    let onset = h.fixation_onsets.remove(object);
                    if !self.movable(object) {
                        continue;
                    }
                    if let Some(onset) = onset.filter(|on| on < t) {
                        out.push(emit(EventKind::Fixation, onset, *t, h.hand, *object));
                    }
                    let pose = frame.poses[object];
                    h.chains.insert(
                        *object,
                        Chain {
                            phase: Phase::Grasped { onset: *t, path: 0.0 },
                            recent: VecDeque::from([(*t, pose)]),
                            cache: DecayCache::new(self.config.decay_horizon),
                        },
                    );
                }
            }

            if !grasp_state.is_grasping(&h.hand) {
                self.track_candidates(h, frame, hand_pose);
            }
        }
        self.hands = hands;
        out
    }

    fn cues(&self, o: &EntityId, transitions: &[Transition], contacts: &ContactMonitor) -> Vec<ChainCue> {
        let mut cues = Vec::new();
        let last_break = transitions
            .iter()
            .filter_map(|tr| match tr {
                Transition::SupportClosed { object, t, .. } if object == o => Some(*t),
                _ => None,
            })
            .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))));
        if let Some(tb) = last_break.filter(|_| !contacts.is_supported(o)) {
            cues.push(ChainCue::Break(tb));
        }
        for tr in transitions {
            match tr {
                Transition::SupportOpened { object, t, .. } if object == o => cues.push(ChainCue::Regain(*t)),
                Transition::ContactOpened { a, b, t, record } if a == o || b == o => {
                    let other = record.other(o).expect("pair member");
                    if contacts.is_hand(&other) {
                        continue;
                    }
                    if record.normal_toward(o).is_some_and(|n| n.z >= self.support_cos) {
                        cues.push(ChainCue::Land(*t, record.point));
                    }
                }
                _ => {}
            }
        }
        cues.sort_by(|x, y| x.t().total_cmp(&y.t()));
        cues
    }

    fn apply_cue(&self, hand: EntityId, o: EntityId, chain: &mut Chain, cue: ChainCue, t: f64, out: &mut Vec<Event>) {
        match (chain.phase, cue) {
            (Phase::Grasped { .. }, ChainCue::Break(tb)) => self.start_pickup(hand, o, chain, tb, t, out),
            (Phase::Sliding { start }, ChainCue::Break(tb)) => {
                out.push(emit(EventKind::Sliding, start, tb, hand, o));
                if self.config.direct_transport_after_slide {
                    self.start_transport(chain, tb);
                } else {
                    self.start_pickup(hand, o, chain, tb, t, out);
                }
            }
            (Phase::PickingUp { start, .. }, ChainCue::Regain(ts)) if ts > start => {
                chain.phase = Phase::Grasped { onset: ts, path: 0.0 };
            }
            (Phase::Transporting { start }, ChainCue::Land(tl, point)) if tl > start => {
                match self.landing(&chain.cache, start, tl, point) {
                    Some(cut) => {
                        out.push(emit(EventKind::Transporting, start, cut, hand, o));
                        out.push(emit(EventKind::PuttingDown, cut, tl, hand, o));
                        chain.phase = Phase::Grasped { onset: tl, path: 0.0 };
                    }
                    None => {
                        out.push(emit(EventKind::Transporting, start, tl, hand, o));
                        chain.phase = Phase::Sliding { start: tl };
                    }
                }
                chain.cache.clear();
            }
            _ => {}
        }
    }

    fn start_pickup(&self, hand: EntityId, o: EntityId, chain: &mut Chain, tb: f64, _t: f64, out: &mut Vec<Event>) {
        let center = chain
            .recent
            .iter()
            .find(|(s, _)| (s - tb).abs() < 1e-9)
            .or(chain.recent.front())
            .map(|(_, p)| p.position)
            .expect("recent samples");
        let roi = RegionOfInterest {
            kind: RoiKind::Pickup,
            center,
            radius: self.config.pickup_roi_radius,
        };
        chain.phase = Phase::PickingUp { start: tb, roi };
        let exit = chain.recent.iter().find(|(s, p)| *s > tb && !roi.contains(&p.position)).map(|s| s.0);
        if let Some(te) = exit {
            out.push(emit(EventKind::PickingUp, tb, te, hand, o));
            self.start_transport(chain, te);
        }
    }

    fn start_transport(&self, chain: &mut Chain, start: f64) {
        chain.phase = Phase::Transporting { start };
        chain.cache.clear();
        for (s, p) in &chain.recent {
            if *s >= start {
                chain.cache.push(*s, *p);
            }
        }
    }

    /// Put-down start for a landing at `tl`, or `None` when the approach was
    /// not from above.
    fn landing(&self, cache: &DecayCache, start: f64, tl: f64, point: Vec3) -> Option<f64> {
        let seg = &self.config;
        let k = cache.index_of(tl)?;
        let floor = cache.index_of(start).unwrap_or(0);
        let j = k.saturating_sub(seg.from_above_frames).max(floor);
        if j >= k {
            return None;
        }
        let span = cache.samples[k].0 - cache.samples[j].0;
        let v = (cache.pos(k) - cache.pos(j)) / span;
        let down = -v.z;
        if !(down >= seg.from_above_min_speed && down >= seg.from_above_cone_deg.to_radians().cos() * v.norm()) {
            return None;
        }
        let d = |i: usize| (cache.pos(i) - point).norm();
        let mut roi = k;
        while roi > floor && d(roi - 1) <= seg.putdown_roi_radius {
            roi -= 1;
        }
        let mut mono = k;
        while mono > floor && d(mono - 1) >= d(mono) - seg.approach_tolerance {
            mono -= 1;
        }
        Some(cache.samples[roi.max(mono)].0)
    }

    fn advance(&self, hand: EntityId, o: EntityId, chain: &mut Chain, supported: bool, t: f64, out: &mut Vec<Event>) {
        let pose = chain.recent.back().expect("current sample").1;
        match chain.phase {
            Phase::Grasped { onset, path } => {
                let prev = chain.recent.iter().rev().nth(1).map(|s| s.1.position);
                chain.phase = match (supported, prev) {
                    (true, Some(prev)) => {
                        let step = pose.position - prev;
                        if step.norm() < self.config.still_tolerance {
                            Phase::Grasped { onset: t, path: 0.0 }
                        } else {
                            let path = path + step.xy().norm();
                            if path > self.config.slide_distance {
                                Phase::Sliding { start: onset }
                            } else {
                                Phase::Grasped { onset, path }
                            }
                        }
                    }
                    _ => Phase::Grasped { onset: t, path: 0.0 },
                };
            }
            Phase::PickingUp { start, roi } => {
                if !roi.contains(&pose.position) {
                    out.push(emit(EventKind::PickingUp, start, t, hand, o));
                    self.start_transport(chain, t);
                }
            }
            Phase::Transporting { .. } => chain.cache.push(t, pose),
            Phase::Sliding { .. } => {}
        }
    }

    fn track_candidates(&self, h: &mut HandSeg, frame: &Frame, hand_pose: &Pose) {
        let seg = &self.config;
        let roi = RegionOfInterest::reach(hand_pose, seg.reach_roi_offset, seg.reach_roi_radius);
        for d in self.entities.iter() {
            if d.is_static || d.is_hand() || frame.sleeping.contains(&d.id) || h.chains.contains_key(&d.id) {
                h.candidates.remove(&d.id);
                continue;
            }
            let Some(pose) = frame.poses.get(&d.id) else {
                continue;
            };
            let inside = roi.overlaps(&d.shape, pose);
            let touching = h.touching.contains(&d.id);
            let dist = (pose.position - hand_pose.position).norm();
            match h.candidates.get_mut(&d.id) {
                Some(c) if !inside && !touching => {
                    let _ = c;
                    h.candidates.remove(&d.id);
                }
                Some(c) => {
                    let delta = dist - c.prev_distance;
                    if delta.abs() <= seg.still_tolerance {
                        c.reach_start = frame.t;
                        c.min_distance = dist;
                        c.away = false;
                    } else if delta > 0.0 {
                        if c.away || dist > c.min_distance + seg.reach_hysteresis {
                            c.away = true;
                            c.reach_start = frame.t;
                            c.min_distance = dist;
                        }
                    } else {
                        c.away = false;
                        c.min_distance = c.min_distance.min(dist);
                    }
                    c.prev_distance = dist;
                }
                None if inside && !touching => {
                    h.candidates.insert(
                        d.id,
                        ReachCandidate {
                            object: d.id,
                            reach_start: frame.t,
                            prev_distance: dist,
                            min_distance: dist,
                            away: false,
                        },
                    );
                }
                None => {}
            }
        }
    }

    /// Closes every open chain phase at `t`.
    pub fn finish(&mut self, t: f64) -> Vec<Event> {
        let mut out = Vec::new();
        for h in &mut self.hands {
            for (o, chain) in std::mem::take(&mut h.chains) {
                close_phase(h.hand, o, chain.phase, t, &mut out);
            }
        }
        out
    }
}

fn close_phase(hand: EntityId, o: EntityId, phase: Phase, end: f64, out: &mut Vec<Event>) {
    let (kind, start) = match phase {
        Phase::Grasped { .. } => return,
        Phase::Sliding { start } => (EventKind::Sliding, start),
        Phase::PickingUp { start, .. } => (EventKind::PickingUp, start),
        Phase::Transporting { start } => (EventKind::Transporting, start),
    };
    out.push(emit(kind, start, end, hand, o));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_cache_respects_horizon() {
        let mut c = DecayCache::new(2.0);
        let dt = 1.0 / 90.0;
        for k in 0..1000 {
            let t = k as f64 * dt;
            c.push(t, Pose::identity());
            assert!(t - c.oldest().unwrap() <= 2.0 + dt + 1e-9);
        }
        assert_eq!(c.len(), 181);
    }

    #[test]
    fn reach_roi_is_in_front_of_the_hand() {
        let roi = RegionOfInterest::reach(&Pose::identity(), 0.15, 0.25);
        assert!(roi.contains(&Vec3::new(0.35, 0.0, 0.0)));
        assert!(!roi.contains(&Vec3::new(-0.15, 0.0, 0.0)));
        let ball = Shape::Sphere { radius: 0.1 };
        assert!(roi.overlaps(&ball, &Pose::from_translation(Vec3::new(0.45, 0.0, 0.0))));
        assert!(!roi.overlaps(&ball, &Pose::from_translation(Vec3::new(0.55, 0.0, 0.0))));
    }
}

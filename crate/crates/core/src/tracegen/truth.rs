//! Offline ground-truth annotation.
//!
//! The annotator sees the whole run at once: the exact separation of every
//! pair, the grasp predicate of every frame and the labelled directive
//! schedule. Reach onsets come from `reach`-labelled move directives and slide
//! onsets from `slide`-labelled ones; every other boundary is read off the
//! full trajectory without debouncing.

use std::collections::BTreeMap;

use serde_json::json;

use super::contacts::separation;
use super::scenario::{Directive, ScenarioScript, Scheduled};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::{
    EntityId, EntitySet, Event, EventIds, EventKind, EventSource, Frame, IdMinter, Participants, Vec3,
};

pub(crate) fn annotate(
    script: &ScenarioScript,
    config: &Config,
    entities: &EntitySet,
    schedule: &[Scheduled],
    frames: &[Frame],
    minter: &IdMinter,
) -> Result<Vec<Event>> {
    let mut ids = EventIds::new(minter.event_namespace(&script.name).map(|ns| ns.derive("ground-truth")));
    let mut events = if script.ground_truth.is_empty() {
        Annotator::new(script, config, entities, schedule, frames).run()
    } else {
        explicit(script, entities)?
    };
    for e in &mut events {
        e.id = ids.next(e.kind.as_str(), e.start, &e.participants.key());
    }
    events.sort_by(|a, b| a.listing_cmp(b));
    Ok(events)
}

fn explicit(script: &ScenarioScript, entities: &EntitySet) -> Result<Vec<Event>> {
    let resolve = |n: &Option<String>| -> Result<Option<EntityId>> {
        n.as_ref().map(|n| script.id_of(entities, n)).transpose()
    };
    script
        .ground_truth
        .iter()
        .map(|g| {
            let e = Event {
                id: EntityId::random(),
                kind: g.kind.parse()?,
                start: g.start,
                end: g.end,
                participants: Participants {
                    performer: resolve(&g.performer)?,
                    object: resolve(&g.object)?,
                    supporter: resolve(&g.supporter)?,
                    other: resolve(&g.other)?,
                },
                attributes: g.attributes.clone(),
                source: EventSource::Script,
            };
            e.validate().map_err(|err| Error::validation(format!("ground_truth: {err}")))?;
            Ok(e)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Grasped { onset: usize, path: f64 },
    Sliding { start: f64 },
    PickingUp { start: usize, center: Vec3 },
    Transporting { start: usize },
}

struct Annotator<'a> {
    config: &'a Config,
    entities: &'a EntitySet,
    schedule: &'a [Scheduled],
    frames: &'a [Frame],
    dt: f64,
}

impl<'a> Annotator<'a> {
    fn new(
        script: &ScenarioScript,
        config: &'a Config,
        entities: &'a EntitySet,
        schedule: &'a [Scheduled],
        frames: &'a [Frame],
    ) -> Self {
        Annotator {
            config,
            entities,
            schedule,
            frames,
            dt: script.dt(),
        }
    }

    fn t(&self, k: usize) -> f64 {
        self.frames[k].t
    }

    fn pos(&self, o: &EntityId, k: usize) -> Vec3 {
        self.frames[k].poses[o].position
    }

    fn vz(&self, o: &EntityId, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            (self.pos(o, k).z - self.pos(o, k - 1).z) / self.dt
        }
    }

    fn gripping(&self, hand: &EntityId, o: &EntityId, k: usize) -> bool {
        self.frames[k].hand(hand).is_some_and(|h| {
            h.grasp_input > self.config.grasp.g_min && h.sets_touching(o) >= self.config.grasp.min_sets
        })
    }

    fn touching(&self, a: &EntityId, b: &EntityId, k: usize) -> Option<(f64, Vec3, Vec3)> {
        let (da, db) = (self.entities.get(a)?, self.entities.get(b)?);
        let f = &self.frames[k];
        let c = separation(&da.shape, &f.poses[a], &db.shape, &f.poses[b]);
        (c.separation <= self.config.sim.eps_pen).then_some((c.separation, c.normal, c.point))
    }

    fn surfaces(&self, o: &EntityId) -> Vec<EntityId> {
        self.entities
            .iter()
            .filter(|d| d.id != *o && !d.is_hand())
            .map(|d| d.id)
            .collect()
    }

    fn supported(&self, o: &EntityId, surfaces: &[EntityId], k: usize) -> bool {
        surfaces.iter().any(|s| {
            self.touching(o, s, k).is_some_and(|(_, n, _)| {
                n.z >= self.config.contact.support_cos()
                    && (self.vz(o, k) - self.vz(s, k)).abs() <= self.config.contact.eps_v
            })
        })
    }

    /// New contact with a surface whose normal on `o` points up; returns the contact point.
    fn lands(&self, o: &EntityId, surfaces: &[EntityId], k: usize) -> Option<Vec3> {
        surfaces.iter().find_map(|s| {
            let now = self.touching(o, s, k)?;
            if k > 0 && self.touching(o, s, k - 1).is_some() {
                return None;
            }
            (now.1.z >= self.config.contact.support_cos()).then_some(now.2)
        })
    }

    fn labelled_start(&self, hand: &str, label: &str, after: f64, before: f64) -> Option<f64> {
        self.schedule
            .iter()
            .filter(|s| {
                matches!(s.directive, Directive::MoveHand { .. })
                    && s.directive.hand() == Some(hand)
                    && s.directive.label() == Some(label)
                    && s.start >= after
                    && s.start <= before + 1e-9
            })
            .map(|s| s.start)
            .last()
    }

    fn run(&self) -> Vec<Event> {
        let mut out = Vec::new();
        let n = self.frames.len();
        for hand in self.entities.iter().filter(|d| d.is_hand()) {
            let mut runs: Vec<(usize, usize, EntityId)> = Vec::new();
            for o in self.entities.iter().filter(|d| !d.is_hand()) {
                let mut k = 0;
                while k < n {
                    if self.gripping(&hand.id, &o.id, k) {
                        let k0 = k;
                        while k < n && self.gripping(&hand.id, &o.id, k) {
                            k += 1;
                        }
                        runs.push((k0, k, o.id));
                    } else {
                        k += 1;
                    }
                }
            }
            runs.sort_by_key(|r| (r.0, r.2));
            for (i, &(k0, k1, o)) in runs.iter().enumerate() {
                let release = if k1 < n { self.t(k1) } else { self.t(n - 1) };
                let who = Participants {
                    performer: Some(hand.id),
                    object: Some(o),
                    ..Default::default()
                };
                let style = self.frames[k0].hand(&hand.id).map(|h| h.grasp_style);
                let mut grasp = self.event(EventKind::Grasping, self.t(k0), release, &who);
                if let Some(style) = style {
                    grasp.attributes.insert("grasp_style".into(), json!(style.as_str()));
                }
                out.push(grasp);
                let movable = self.entities.get(&o).is_some_and(|d| !d.is_static);
                if movable {
                    let mut kc = k0;
                    while kc > 0 && self.touching(&hand.id, &o, kc - 1).is_some() {
                        kc -= 1;
                    }
                    let fresh_touch = runs[..i].iter().all(|r| r.2 != o || r.1 < kc) || kc == 0;
                    if fresh_touch {
                        let last_release = runs
                            .iter()
                            .filter(|r| r.1 <= kc)
                            .map(|r| self.t(r.1))
                            .fold(f64::NEG_INFINITY, f64::max);
                        if let Some(s) = self.labelled_start(&hand.name, "reach", last_release, self.t(kc)) {
                            out.push(self.event(EventKind::Reaching, s, self.t(kc), &who));
                        }
                        if kc < k0 {
                            out.push(self.event(EventKind::Fixation, self.t(kc), self.t(k0), &who));
                        }
                    }
                    self.chain(&hand.name, k0, k1, release, &o, &who, &mut out);
                }
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn chain(
        &self,
        hand_name: &str,
        k0: usize,
        k1: usize,
        release: f64,
        o: &EntityId,
        who: &Participants,
        out: &mut Vec<Event>,
    ) {
        let seg = &self.config.segmenter;
        let surfaces = self.surfaces(o);
        let supported: Vec<bool> = (k0..k1).map(|k| self.supported(o, &surfaces, k)).collect();
        let sup = |k: usize| supported[k - k0];
        let mut phase = Phase::Grasped { onset: k0, path: 0.0 };
        for k in k0..k1 {
            let broke = k > k0 && sup(k - 1) && !sup(k);
            phase = match phase {
                Phase::Grasped { onset, path } => {
                    if broke {
                        Phase::PickingUp {
                            start: k,
                            center: self.pos(o, k),
                        }
                    } else if k > k0 && sup(k) {
                        let step = self.pos(o, k) - self.pos(o, k - 1);
                        if step.norm() < seg.still_tolerance {
                            Phase::Grasped { onset: k, path: 0.0 }
                        } else {
                            let path = path + step.xy().norm();
                            if path > seg.slide_distance {
                                let start = self
                                    .labelled_start(hand_name, "slide", self.t(k0), self.t(k))
                                    .unwrap_or(self.t(onset));
                                Phase::Sliding { start }
                            } else {
                                Phase::Grasped { onset, path }
                            }
                        }
                    } else {
                        Phase::Grasped { onset: k, path: 0.0 }
                    }
                }
                Phase::Sliding { start } => {
                    if broke {
                        out.push(self.event(EventKind::Sliding, start, self.t(k), who));
                        if seg.direct_transport_after_slide {
                            Phase::Transporting { start: k }
                        } else {
                            Phase::PickingUp {
                                start: k,
                                center: self.pos(o, k),
                            }
                        }
                    } else {
                        phase
                    }
                }
                Phase::PickingUp { start, center } => {
                    if k > start && sup(k) {
                        Phase::Grasped { onset: k, path: 0.0 }
                    } else if (self.pos(o, k) - center).norm() > seg.pickup_roi_radius {
                        out.push(self.event(EventKind::PickingUp, self.t(start), self.t(k), who));
                        Phase::Transporting { start: k }
                    } else {
                        phase
                    }
                }
                Phase::Transporting { start } => match self.lands(o, &surfaces, k) {
                    Some(point) if k > start => {
                        if self.from_above(o, start, k) {
                            let cut = self.backscan(o, start, k, point);
                            out.push(self.event(EventKind::Transporting, self.t(start), self.t(cut), who));
                            out.push(self.event(EventKind::PuttingDown, self.t(cut), self.t(k), who));
                            Phase::Grasped { onset: k, path: 0.0 }
                        } else {
                            out.push(self.event(EventKind::Transporting, self.t(start), self.t(k), who));
                            Phase::Sliding { start: self.t(k) }
                        }
                    }
                    _ => phase,
                },
            };
        }
        match phase {
            Phase::Grasped { .. } => {}
            Phase::Sliding { start } => out.push(self.event(EventKind::Sliding, start, release, who)),
            Phase::PickingUp { start, .. } => {
                out.push(self.event(EventKind::PickingUp, self.t(start), release, who))
            }
            Phase::Transporting { start } => {
                out.push(self.event(EventKind::Transporting, self.t(start), release, who))
            }
        }
    }

    fn from_above(&self, o: &EntityId, floor: usize, k: usize) -> bool {
        let seg = &self.config.segmenter;
        let j = k.saturating_sub(seg.from_above_frames).max(floor);
        if j >= k {
            return false;
        }
        let v = (self.pos(o, k) - self.pos(o, j)) / ((k - j) as f64 * self.dt);
        let down = -v.z;
        down >= seg.from_above_min_speed && down >= seg.from_above_cone_deg.to_radians().cos() * v.norm()
    }

    /// Earliest frame of the final approach into the put-down region.
    fn backscan(&self, o: &EntityId, floor: usize, k: usize, center: Vec3) -> usize {
        let seg = &self.config.segmenter;
        let d = |j: usize| (self.pos(o, j) - center).norm();
        let mut roi = k;
        while roi > floor && d(roi - 1) <= seg.putdown_roi_radius {
            roi -= 1;
        }
        let mut mono = k;
        while mono > floor && d(mono - 1) >= d(mono) - seg.approach_tolerance {
            mono -= 1;
        }
        roi.max(mono)
    }

    fn event(&self, kind: EventKind, start: f64, end: f64, who: &Participants) -> Event {
        Event {
            id: EntityId::random(),
            kind,
            start,
            end,
            participants: who.clone(),
            attributes: BTreeMap::new(),
            source: EventSource::Script,
        }
    }
}

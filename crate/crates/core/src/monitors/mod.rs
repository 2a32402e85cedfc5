//! Online event monitors: contact and supported-by, grasping, and the
//! pick-and-place segmenter, driven frame by frame through [`Parser`].

mod contact;
mod grasp;
mod segmenter;

use std::collections::BTreeMap;

use uuid::Uuid;

pub use contact::{ContactMonitor, Transition};
pub use grasp::{grasp_predicate, GraspChange, GraspMonitor};
pub use segmenter::{DecayCache, HandPhase, ReachCandidate, RegionOfInterest, RoiKind, Segmenter};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::{EntityId, EntitySet, Event, EventIds, EventKind, EventSource, Frame, Participants};

/// An event whose end is not known yet.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenEvent {
    pub kind: EventKind,
    pub start: f64,
    pub participants: Participants,
    pub attributes: BTreeMap<String, serde_json::Value>,
}

impl OpenEvent {
    pub fn new(kind: EventKind, start: f64, participants: Participants) -> Self {
        OpenEvent {
            kind,
            start,
            participants,
            attributes: BTreeMap::new(),
        }
    }

    /// Closed event with a nil id; the parser assigns the real one.
    pub fn close(self, end: f64) -> Event {
        Event {
            id: EntityId::from_uuid(Uuid::nil()),
            kind: self.kind,
            start: self.start,
            end,
            participants: self.participants,
            attributes: self.attributes,
            source: EventSource::Monitor,
        }
    }
}

/// All monitors over one episode stream.
#[derive(Debug, Clone)]
pub struct Parser {
    entities: EntitySet,
    contact: ContactMonitor,
    grasp: GraspMonitor,
    segmenter: Segmenter,
    ids: EventIds,
    contact_open: BTreeMap<(EntityId, EntityId), f64>,
    support_open: BTreeMap<(EntityId, EntityId), f64>,
    last_t: Option<f64>,
}

impl Parser {
    /// `namespace` seeds content-derived event ids; `None` draws random ones.
    pub fn new(entities: &EntitySet, config: &Config, namespace: Option<EntityId>) -> Result<Self> {
        config.validate()?;
        Ok(Parser {
            entities: entities.clone(),
            contact: ContactMonitor::new(entities, &config.contact),
            grasp: GraspMonitor::new(&config.grasp),
            segmenter: Segmenter::new(entities, config),
            ids: EventIds::new(namespace),
            contact_open: BTreeMap::new(),
            support_open: BTreeMap::new(),
            last_t: None,
        })
    }

    pub fn segmenter(&self) -> &Segmenter {
        &self.segmenter
    }

    pub fn contacts(&self) -> &ContactMonitor {
        &self.contact
    }

    fn check(&self, frame: &Frame) -> Result<()> {
        let t = frame.t;
        if !t.is_finite() {
            return Err(Error::stream(t, "non-finite frame time"));
        }
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(Error::stream(t, format!("frame out of order (previous t={last})")));
            }
        }
        if let Some(id) = frame.referenced_ids().into_iter().find(|id| !self.entities.contains(id)) {
            return Err(Error::stream(t, format!("unknown entity {id}")));
        }
        for h in &frame.hands {
            for o in h.touching() {
                let touching = frame
                    .contacts
                    .iter()
                    .any(|c| c.other(&h.hand_id) == Some(o));
                if !touching {
                    return Err(Error::stream(
                        t,
                        format!("hand {} reports sensor contact with {o} but the frame has no such contact", h.hand_id),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Consumes one frame and returns the events that closed with it.
    pub fn step(&mut self, frame: &Frame) -> Result<Vec<Event>> {
        self.check(frame)?;
        let grasps = self.grasp.step(frame).map_err(|e| Error::stream(frame.t, e.to_string()))?;
        let transitions = self.contact.step(frame);
        let mut out = Vec::new();
        for tr in &transitions {
            match *tr {
                Transition::ContactOpened { a, b, t, .. } => {
                    self.contact_open.insert((a, b), t);
                }
                Transition::ContactClosed { a, b, t } => {
                    if let Some(start) = self.contact_open.remove(&(a, b)) {
                        out.push(OpenEvent::new(EventKind::Contact, start, self.contact.contact_participants(a, b)).close(t));
                    }
                }
                Transition::SupportOpened { object, supporter, t } => {
                    self.support_open.insert((object, supporter), t);
                }
                Transition::SupportClosed { object, supporter, t } => {
                    if let Some(start) = self.support_open.remove(&(object, supporter)) {
                        out.push(OpenEvent::new(EventKind::SupportedBy, start, support_who(object, supporter)).close(t));
                    }
                }
            }
        }
        for g in &grasps {
            if let GraspChange::Closed {
                hand,
                object,
                t,
                start,
                style,
            } = g
            {
                out.push(grasping(*hand, *object, *start, style.as_str()).close(*t));
            }
        }
        out.extend(self.segmenter.step(frame, &transitions, &grasps, &self.contact, &self.grasp));
        self.last_t = Some(frame.t);
        Ok(self.finalize(out))
    }

    /// Closes every open event at the last frame time.
    pub fn finish(&mut self) -> Vec<Event> {
        let Some(t) = self.last_t else {
            return Vec::new();
        };
        let mut out: Vec<Event> = Vec::new();
        for ((a, b), start) in std::mem::take(&mut self.contact_open) {
            out.push(OpenEvent::new(EventKind::Contact, start, self.contact.contact_participants(a, b)).close(t));
        }
        for ((o, s), start) in std::mem::take(&mut self.support_open) {
            out.push(OpenEvent::new(EventKind::SupportedBy, start, support_who(o, s)).close(t));
        }
        for (h, o, start, style) in self.grasp.open().collect::<Vec<_>>() {
            out.push(grasping(h, o, start, style.as_str()).close(t));
        }
        out.extend(self.segmenter.finish(t));
        self.finalize(out)
    }

    fn finalize(&mut self, mut out: Vec<Event>) -> Vec<Event> {
        out.sort_by(|a, b| a.listing_cmp(b));
        for e in &mut out {
            e.id = self.ids.next(e.kind.as_str(), e.start, &e.participants.key());
        }
        out
    }

    /// Parses a whole trace.
    pub fn parse_all<'a>(
        entities: &EntitySet,
        config: &Config,
        namespace: Option<EntityId>,
        frames: impl IntoIterator<Item = &'a Frame>,
    ) -> Result<Vec<Event>> {
        let mut p = Parser::new(entities, config, namespace)?;
        let mut events = Vec::new();
        for f in frames {
            events.extend(p.step(f)?);
        }
        events.extend(p.finish());
        Ok(events)
    }
}

fn support_who(object: EntityId, supporter: EntityId) -> Participants {
    Participants {
        object: Some(object),
        supporter: Some(supporter),
        ..Default::default()
    }
}

fn grasping(hand: EntityId, object: EntityId, start: f64, style: &str) -> OpenEvent {
    let mut e = OpenEvent::new(
        EventKind::Grasping,
        start,
        Participants {
            performer: Some(hand),
            object: Some(object),
            ..Default::default()
        },
    );
    e.attributes.insert("grasp_style".into(), serde_json::json!(style));
    e
}

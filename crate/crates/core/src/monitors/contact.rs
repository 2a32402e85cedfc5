use std::collections::{BTreeMap, BTreeSet};

use crate::config::ContactConfig;
use crate::model::{ContactRecord, EntityId, EntitySet, Frame, Participants};

use super::OpenEvent;
use crate::model::EventKind;

/// Confirmed edge of the contact or supported-by relation. `t` is the first
/// frame of the run that confirmed it.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    ContactOpened { a: EntityId, b: EntityId, t: f64, record: ContactRecord },
    ContactClosed { a: EntityId, b: EntityId, t: f64 },
    SupportOpened { object: EntityId, supporter: EntityId, t: f64 },
    SupportClosed { object: EntityId, supporter: EntityId, t: f64 },
}

impl Transition {
    pub fn t(&self) -> f64 {
        match self {
            Transition::ContactOpened { t, .. }
            | Transition::ContactClosed { t, .. }
            | Transition::SupportOpened { t, .. }
            | Transition::SupportClosed { t, .. } => *t,
        }
    }
}

/// Debounced boolean: flips only after `need` consecutive disagreeing samples.
#[derive(Debug, Clone, Default)]
struct Debounce {
    on: bool,
    since: f64,
    run: u32,
    run_start: f64,
    run_record: Option<ContactRecord>,
}

impl Debounce {
    /// Returns the confirmed boundary time when the state flips.
    fn feed(&mut self, raw: bool, t: f64, record: Option<&ContactRecord>, need: u32) -> Option<f64> {
        if raw == self.on {
            self.run = 0;
            return None;
        }
        if self.run == 0 {
            self.run_start = t;
            self.run_record = record.cloned();
        }
        self.run += 1;
        if self.run >= need {
            self.on = raw;
            self.since = self.run_start;
            self.run = 0;
            Some(self.run_start)
        } else {
            None
        }
    }

    fn idle(&self) -> bool {
        !self.on && self.run == 0
    }
}

#[derive(Debug, Clone, Default)]
struct PairState {
    contact: Debounce,
    /// `[0]`: a supported by b, `[1]`: b supported by a.
    support: [Debounce; 2],
    /// Open supported-by interval start per direction, clipped to the contact.
    support_open: [Option<f64>; 2],
}

/// Contact and supported-by monitor over canonical pairs.
#[derive(Debug, Clone)]
pub struct ContactMonitor {
    config: ContactConfig,
    hands: BTreeSet<EntityId>,
    fixed: BTreeSet<EntityId>,
    pairs: BTreeMap<(EntityId, EntityId), PairState>,
}

impl ContactMonitor {
    pub fn new(entities: &EntitySet, config: &ContactConfig) -> Self {
        ContactMonitor {
            config: config.clone(),
            hands: entities.iter().filter(|d| d.is_hand()).map(|d| d.id).collect(),
            fixed: entities.iter().filter(|d| d.is_static).map(|d| d.id).collect(),
            pairs: BTreeMap::new(),
        }
    }

    pub fn is_hand(&self, id: &EntityId) -> bool {
        self.hands.contains(id)
    }

    /// Participants of the Contact event for a pair.
    pub fn contact_participants(&self, a: EntityId, b: EntityId) -> Participants {
        if self.is_hand(&a) {
            Participants {
                performer: Some(a),
                object: Some(b),
                ..Default::default()
            }
        } else if self.is_hand(&b) {
            Participants {
                performer: Some(b),
                object: Some(a),
                ..Default::default()
            }
        } else {
            Participants {
                object: Some(a),
                other: Some(b),
                ..Default::default()
            }
        }
    }

    fn raw_support(&self, frame: &Frame, c: &ContactRecord, object: &EntityId) -> bool {
        let Some(supporter) = c.other(object) else {
            return false;
        };
        if self.fixed.contains(object) || self.is_hand(object) || self.is_hand(&supporter) {
            return false;
        }
        let up = c.normal_toward(object).is_some_and(|n| n.z >= self.config.support_cos());
        let vz = |id: &EntityId| frame.twists.get(id).map_or(0.0, |tw| tw.linear.z);
        up && (vz(object) - vz(&supporter)).abs() <= self.config.eps_v
    }

    /// Consumes one frame; returns the confirmed transitions in time order.
    pub fn step(&mut self, frame: &Frame) -> Vec<Transition> {
        let t = frame.t;
        let need = self.config.debounce_frames;
        let current: BTreeMap<(EntityId, EntityId), &ContactRecord> =
            frame.contacts.iter().map(|c| ((c.a, c.b), c)).collect();
        let keys: BTreeSet<(EntityId, EntityId)> =
            current.keys().copied().chain(self.pairs.keys().copied()).collect();
        let mut out = Vec::new();
        for key @ (a, b) in keys {
            if frame.sleeping.contains(&a) || frame.sleeping.contains(&b) {
                continue;
            }
            let record = current.get(&key).copied();
            let raw_support = [
                record.is_some_and(|c| self.raw_support(frame, c, &a)),
                record.is_some_and(|c| self.raw_support(frame, c, &b)),
            ];
            let st = self.pairs.entry(key).or_default();
            let contact_edge = st.contact.feed(record.is_some(), t, record, need);
            let support_edges = [
                st.support[0].feed(raw_support[0], t, None, need),
                st.support[1].feed(raw_support[1], t, None, need),
            ];
            if let Some(te) = contact_edge {
                if st.contact.on {
                    let record = st.contact.run_record.clone().expect("opening run has a record");
                    out.push(Transition::ContactOpened { a, b, t: te, record });
                }
            }
            for dir in 0..2 {
                let (object, supporter) = if dir == 0 { (a, b) } else { (b, a) };
                let want = st.contact.on && st.support[dir].on;
                match (st.support_open[dir], want) {
                    (Some(start), false) => {
                        let end = [
                            contact_edge.filter(|_| !st.contact.on),
                            support_edges[dir].filter(|_| !st.support[dir].on),
                        ]
                        .into_iter()
                        .flatten()
                        .fold(f64::INFINITY, f64::min);
                        let end = if end.is_finite() { end.max(start) } else { t };
                        st.support_open[dir] = None;
                        out.push(Transition::SupportClosed {
                            object,
                            supporter,
                            t: end,
                        });
                    }
                    (None, true) => {
                        let start = st.contact.since.max(st.support[dir].since);
                        st.support_open[dir] = Some(start);
                        out.push(Transition::SupportOpened {
                            object,
                            supporter,
                            t: start,
                        });
                    }
                    _ => {}
                }
            }
            if let Some(te) = contact_edge {
                if !st.contact.on {
                    out.push(Transition::ContactClosed { a, b, t: te });
                }
            }
            if st.contact.idle() && st.support.iter().all(Debounce::idle) && st.support_open == [None, None] {
                self.pairs.remove(&key);
            }
        }
        out.sort_by(|x, y| x.t().total_cmp(&y.t()));
        out
    }

    /// Whether `object` currently has a confirmed supported-by relation.
    pub fn is_supported(&self, object: &EntityId) -> bool {
        self.pairs.iter().any(|(&(a, b), st)| {
            (a == *object && st.support_open[0].is_some()) || (b == *object && st.support_open[1].is_some())
        })
    }

    pub fn is_touching(&self, x: &EntityId, y: &EntityId) -> bool {
        let key = if x < y { (*x, *y) } else { (*y, *x) };
        self.pairs.get(&key).is_some_and(|st| st.contact.on)
    }

    /// Open Contact and SupportedBy intervals, for closing at end of stream.
    pub fn open_events(&self) -> Vec<OpenEvent> {
        let mut out = Vec::new();
        for (&(a, b), st) in &self.pairs {
            if st.contact.on {
                out.push(OpenEvent::new(EventKind::Contact, st.contact.since, self.contact_participants(a, b)));
            }
            for (dir, open) in st.support_open.iter().enumerate() {
                if let Some(start) = open {
                    let (object, supporter) = if dir == 0 { (a, b) } else { (b, a) };
                    let who = Participants {
                        object: Some(object),
                        supporter: Some(supporter),
                        ..Default::default()
                    };
                    out.push(OpenEvent::new(EventKind::SupportedBy, *start, who));
                }
            }
        }
        out
    }

    /// Start time of the open contact between a canonical pair.
    pub fn contact_since(&self, a: &EntityId, b: &EntityId) -> Option<f64> {
        self.pairs.get(&(*a, *b)).filter(|st| st.contact.on).map(|st| st.contact.since)
    }
}

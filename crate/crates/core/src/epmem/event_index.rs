use std::collections::BTreeMap;

use crate::model::{EntityId, Event, Interval};

/// Conjunctive event filter; unset fields match everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventFilter {
    /// Exact event type name.
    pub kind: Option<String>,
    pub participant: Option<EntityId>,
    /// Events whose interval intersects this one.
    pub interval: Option<Interval>,
}

impl EventFilter {
    pub fn kind(kind: impl Into<String>) -> Self {
        EventFilter {
            kind: Some(kind.into()),
            ..Default::default()
        }
    }

    pub fn matches(&self, e: &Event) -> bool {
        self.kind.as_deref().is_none_or(|k| e.kind.as_str() == k)
            && self.participant.is_none_or(|p| e.participants.mentions(&p))
            && self.interval.is_none_or(|i| i.intersects(&e.interval()))
    }
}

/// Events of one episode with secondary indexes on type, participant and start.
#[derive(Debug, Clone, Default)]
pub struct EventIndex {
    events: Vec<Event>,
    by_kind: BTreeMap<String, Vec<usize>>,
    by_participant: BTreeMap<EntityId, Vec<usize>>,
    /// Positions ordered by the listing order.
    by_start: Vec<usize>,
}

impl EventIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn insert(&mut self, e: Event) {
        let i = self.events.len();
        self.by_kind.entry(e.kind.as_str().to_string()).or_default().push(i);
        let mut ids: Vec<EntityId> = e.participants.ids().collect();
        ids.sort();
        ids.dedup();
        for id in ids {
            self.by_participant.entry(id).or_default().push(i);
        }
        let at = self
            .by_start
            .partition_point(|&j| self.events[j].listing_cmp(&e).is_lt());
        self.by_start.insert(at, i);
        self.events.push(e);
    }

    pub fn get(&self, id: &EntityId) -> Option<&Event> {
        self.events.iter().find(|e| e.id == *id)
    }

    /// All events in listing order.
    pub fn all(&self) -> impl Iterator<Item = &Event> {
        self.by_start.iter().map(|&i| &self.events[i])
    }

    /// Events matching every set field, in listing order.
    pub fn query(&self, f: &EventFilter) -> Vec<Event> {
        let empty = Vec::new();
        let mut lists: Vec<&Vec<usize>> = Vec::new();
        if let Some(k) = &f.kind {
            lists.push(self.by_kind.get(k).unwrap_or(&empty));
        }
        if let Some(p) = &f.participant {
            lists.push(self.by_participant.get(p).unwrap_or(&empty));
        }
        let mut hits: Vec<&Event> = match lists.into_iter().min_by_key(|l| l.len()) {
            Some(list) => list.iter().map(|&i| &self.events[i]).filter(|e| f.matches(e)).collect(),
            None => self.all().filter(|e| f.matches(e)).collect(),
        };
        hits.sort_by(|a, b| a.listing_cmp(b));
        hits.into_iter().cloned().collect()
    }
}

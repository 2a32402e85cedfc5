use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::class::{ClassHierarchy, ClassTag};
use super::ids::EntityId;
use super::interval::Interval;
use crate::error::{Error, Result};

/// Event type tag. Monitor-produced kinds are enumerated; composed and
/// derived kinds travel as `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Contact,
    SupportedBy,
    Grasping,
    Reaching,
    Fixation,
    Sliding,
    PickingUp,
    Transporting,
    PuttingDown,
    Other(String),
}

impl EventKind {
    pub const BUILTIN: [EventKind; 9] = [
        EventKind::Contact,
        EventKind::SupportedBy,
        EventKind::Grasping,
        EventKind::Reaching,
        EventKind::Fixation,
        EventKind::Sliding,
        EventKind::PickingUp,
        EventKind::Transporting,
        EventKind::PuttingDown,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            EventKind::Contact => "Contact",
            EventKind::SupportedBy => "SupportedBy",
            EventKind::Grasping => "Grasping",
            EventKind::Reaching => "Reaching",
            EventKind::Fixation => "Fixation",
            EventKind::Sliding => "Sliding",
            EventKind::PickingUp => "PickingUp",
            EventKind::Transporting => "Transporting",
            EventKind::PuttingDown => "PuttingDown",
            EventKind::Other(s) => s,
        }
    }

    /// Manipulation phases plus grasping: the kinds compared against the
    /// ground-truth sidecar.
    pub fn is_manipulation(&self) -> bool {
        matches!(
            self,
            EventKind::Grasping
                | EventKind::Reaching
                | EventKind::Fixation
                | EventKind::Sliding
                | EventKind::PickingUp
                | EventKind::Transporting
                | EventKind::PuttingDown
        )
    }

    /// Tie-break order for events sharing a start time.
    pub fn phase_rank(&self) -> u8 {
        match self {
            EventKind::Reaching => 0,
            EventKind::Fixation => 1,
            EventKind::Grasping => 2,
            EventKind::Sliding => 3,
            EventKind::PickingUp => 4,
            EventKind::Transporting => 5,
            EventKind::PuttingDown => 6,
            EventKind::Contact => 7,
            EventKind::SupportedBy => 8,
            EventKind::Other(_) => 9,
        }
    }

    /// Class hierarchy over event types used to resolve type patterns.
    pub fn builtin_hierarchy() -> ClassHierarchy {
        let tags = [
            ClassTag::with_parents("Event", Vec::<String>::new()),
            ClassTag::with_parents("Action", ["Event"]),
            ClassTag::with_parents("ForceDynamicEvent", ["Event"]),
            ClassTag::with_parents("Contact", ["ForceDynamicEvent"]),
            ClassTag::with_parents("SupportedBy", ["ForceDynamicEvent"]),
            ClassTag::with_parents("Grasping", ["Action"]),
            ClassTag::with_parents("GraspingOnto", ["Grasping"]),
            ClassTag::with_parents("HoldingOnto", ["Grasping"]),
            ClassTag::with_parents("ManipulationPhase", ["Action"]),
            ClassTag::with_parents("Reaching", ["ManipulationPhase"]),
            ClassTag::with_parents("Fixation", ["ManipulationPhase"]),
            ClassTag::with_parents("Sliding", ["ManipulationPhase"]),
            ClassTag::with_parents("PickingUp", ["ManipulationPhase"]),
            ClassTag::with_parents("Transporting", ["ManipulationPhase"]),
            ClassTag::with_parents("PuttingDown", ["ManipulationPhase"]),
            ClassTag::with_parents("PickAndPlace", ["Action"]),
        ];
        ClassHierarchy::from_tags(&tags).expect("builtin event hierarchy is acyclic")
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::validation("empty event type"));
        }
        Ok(EventKind::BUILTIN
            .iter()
            .find(|k| k.as_str() == s)
            .cloned()
            .unwrap_or_else(|| EventKind::Other(s.to_string())))
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Role bindings of an event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Participants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performer: Option<EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supporter: Option<EntityId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<EntityId>,
}

impl Participants {
    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        [self.performer, self.object, self.supporter, self.other]
            .into_iter()
            .flatten()
    }

    pub fn mentions(&self, id: &EntityId) -> bool {
        self.ids().any(|p| p == *id)
    }

    pub fn key(&self) -> String {
        let f = |o: Option<EntityId>| o.map(|i| i.to_string()).unwrap_or_default();
        format!(
            "{}/{}/{}/{}",
            f(self.performer),
            f(self.object),
            f(self.supporter),
            f(self.other)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    Monitor,
    Script,
    Composed,
    Derived,
}

/// One symbolic interval record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: EntityId,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub start: f64,
    pub end: f64,
    pub participants: Participants,
    #[serde(default)]
    pub attributes: BTreeMap<String, serde_json::Value>,
    pub source: EventSource,
}

impl Event {
    pub fn interval(&self) -> Interval {
        Interval {
            start: self.start,
            end: self.end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.interval().validate()?;
        if self.kind == EventKind::Grasping
            && (self.participants.performer.is_none()
                || self.participants.object.is_none()
                || !self.attributes.contains_key("grasp_style"))
        {
            return Err(Error::validation(format!(
                "Grasping event {} must carry performer, object and grasp_style",
                self.id
            )));
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }

    /// Ordering used for every event listing: start, then phase rank, then end, then id.
    pub fn listing_cmp(&self, other: &Event) -> std::cmp::Ordering {
        self.start
            .total_cmp(&other.start)
            .then(self.kind.phase_rank().cmp(&other.kind.phase_rank()))
            .then(self.end.total_cmp(&other.end))
            .then(self.kind.cmp(&other.kind))
            .then(self.id.cmp(&other.id))
    }
}

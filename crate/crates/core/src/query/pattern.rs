use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{allen_relation, AllenRelation, EntityId, EntitySet, Event, Interval};

/// Constraint on an entity taking part in an event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityConstraint {
    /// Class name; subclasses match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<EntityId>,
    /// Local entity name within its task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// The entity must be a (transitive) part of some entity matching this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part_of: Option<Box<EntityConstraint>>,
    /// Variable name the matched entity id is bound to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind: Option<String>,
}

impl EntityConstraint {
    pub fn class(name: impl Into<String>) -> Self {
        EntityConstraint {
            class: Some(name.into()),
            ..Default::default()
        }
    }

    pub fn matches(&self, id: &EntityId, entities: &EntitySet) -> bool {
        let Some(d) = entities.get(id) else {
            return false;
        };
        if self.id.is_some_and(|x| x != *id) || self.name.as_ref().is_some_and(|n| *n != d.name) {
            return false;
        }
        if let Some(c) = &self.class {
            if !entities.classes().is_a(&d.class.name, c) {
                return false;
            }
        }
        match &self.part_of {
            None => true,
            Some(whole) => entities
                .iter()
                .any(|w| w.id != *id && whole.matches(&w.id, entities) && entities.is_part_of(id, &w.id)),
        }
    }

    pub(crate) fn classes(&self, out: &mut Vec<String>) {
        out.extend(self.class.iter().cloned());
        if let Some(w) = &self.part_of {
            w.classes(out);
        }
    }
}

/// Entity/action pattern over stored events.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryPattern {
    /// Event type; subtypes match.
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub action_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<EntityConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performer: Option<EntityConstraint>,
    /// Only events intersecting this window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    /// Variable name the matched event id is bound to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind: Option<String>,
    /// Ordered sub-actions lying within the matched event.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_actions: Vec<SubAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubAction {
    pub pattern: QueryPattern,
    /// Allowed relations of the previous sub-action to this one; any when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub after: Vec<AllenRelation>,
}

pub type Bindings = BTreeMap<String, EntityId>;

impl QueryPattern {
    pub fn of_type(kind: impl Into<String>) -> Self {
        QueryPattern {
            action_type: Some(kind.into()),
            ..Default::default()
        }
    }

    pub fn with_object(mut self, object: EntityConstraint) -> Self {
        self.object = Some(object);
        self
    }

    /// Every class and event type named anywhere in the pattern.
    pub(crate) fn names(&self, classes: &mut Vec<String>, types: &mut Vec<String>) {
        types.extend(self.action_type.iter().cloned());
        for c in self.object.iter().chain(self.performer.iter()) {
            c.classes(classes);
        }
        for s in &self.sub_actions {
            s.pattern.names(classes, types);
        }
    }

    /// Test of a single event, ignoring sub-actions.
    pub(crate) fn matches_event(
        &self,
        e: &Event,
        entities: &EntitySet,
        is_type: &dyn Fn(&str, &str) -> bool,
    ) -> Option<Bindings> {
        if let Some(t) = &self.action_type {
            if !is_type(e.kind.as_str(), t) {
                return None;
            }
        }
        if let Some(w) = &self.interval {
            if !w.intersects(&e.interval()) {
                return None;
            }
        }
        let mut b = Bindings::new();
        for (c, who) in [(&self.object, e.participants.object), (&self.performer, e.participants.performer)] {
            if let Some(c) = c {
                let id = who?;
                if !c.matches(&id, entities) {
                    return None;
                }
                bind_entity(c, id, &mut b);
            }
        }
        if let Some(name) = &self.bind {
            b.insert(name.clone(), e.id);
        }
        Some(b)
    }

    /// Full match including sub-actions drawn from `pool` (one episode).
    pub(crate) fn matches(
        &self,
        e: &Event,
        pool: &[Event],
        entities: &EntitySet,
        is_type: &dyn Fn(&str, &str) -> bool,
        tol: f64,
    ) -> Option<Bindings> {
        let mut b = self.matches_event(e, entities, is_type)?;
        if self.sub_actions.is_empty() {
            return Some(b);
        }
        let inside: Vec<&Event> = pool
            .iter()
            .filter(|x| x.id != e.id && e.interval().contains_interval(&x.interval(), tol))
            .collect();
        let mut chosen: Vec<&Event> = Vec::new();
        let sub = self.assign_subs(0, &inside, &mut chosen, entities, is_type, tol)?;
        b.extend(sub);
        Some(b)
    }

    fn assign_subs<'a>(
        &self,
        k: usize,
        inside: &[&'a Event],
        chosen: &mut Vec<&'a Event>,
        entities: &EntitySet,
        is_type: &dyn Fn(&str, &str) -> bool,
        tol: f64,
    ) -> Option<Bindings> {
        let Some(step) = self.sub_actions.get(k) else {
            return Some(Bindings::new());
        };
        for x in inside {
            if chosen.iter().any(|c| c.id == x.id) {
                continue;
            }
            let Some(mut b) = step.pattern.matches_event(x, entities, is_type) else {
                continue;
            };
            if let (Some(prev), false) = (chosen.last(), step.after.is_empty()) {
                match allen_relation(&prev.interval(), &x.interval(), tol) {
                    Ok(r) if step.after.contains(&r) => {}
                    _ => continue,
                }
            }
            chosen.push(x);
            if let Some(rest) = self.assign_subs(k + 1, inside, chosen, entities, is_type, tol) {
                b.extend(rest);
                return Some(b);
            }
            chosen.pop();
        }
        None
    }
}

fn bind_entity(c: &EntityConstraint, id: EntityId, b: &mut Bindings) {
    if let Some(name) = &c.bind {
        b.insert(name.clone(), id);
    }
}

//! Queries over stored episodes: entity/action patterns, rule-based
//! composition, simple inference rules, trajectories and world state.

mod compose;
mod document;
mod pattern;

use std::collections::BTreeSet;

pub use compose::{
    default_rules, find_matches, parse_rules, select, CompositionRule, RuleConstraint, RuleMatch, RuleStep,
    BEFORE_OR_MEETS, DEFAULT_RULES,
};
pub use document::{QueryDocument, QueryOutput};
pub use pattern::{Bindings, EntityConstraint, QueryPattern, SubAction};

use crate::config::Config;
use crate::epmem::{EventFilter, Store};
use crate::error::{Error, Result};
use crate::model::{ray_intersect, ClassHierarchy, EntityId, Event, EventKind, EventSource, Interval, Pose};

/// One pattern match.
#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub episode: EntityId,
    pub event: Event,
    pub bindings: Bindings,
}

/// One composed event with its sub-events in rule step order.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub episode: EntityId,
    pub event: Event,
    pub steps: Vec<(String, Option<EntityId>)>,
}

/// Read-only query engine over a store.
#[derive(Debug)]
pub struct Engine<'a> {
    store: &'a Store,
    config: &'a Config,
    kinds: ClassHierarchy,
}

impl<'a> Engine<'a> {
    pub fn new(store: &'a Store, config: &'a Config) -> Self {
        let mut kinds = EventKind::builtin_hierarchy();
        for r in default_rules() {
            kinds.insert(&crate::model::ClassTag::with_parents(r.result, ["Action"]));
        }
        Engine { store, config, kinds }
    }

    pub fn store(&self) -> &Store {
        self.store
    }

    /// Makes a composed type known to type patterns.
    pub fn register_type(&mut self, name: &str) {
        if !self.kinds.contains(name) {
            self.kinds.insert(&crate::model::ClassTag::with_parents(name, ["Action"]));
        }
    }

    pub fn is_type(&self, kind: &str, wanted: &str) -> bool {
        self.kinds.is_a(kind, wanted)
    }

    /// Boundary tolerance for one episode.
    pub fn tolerance(&self, episode: &EntityId) -> Result<f64> {
        if let Some(d) = self.config.query.delta_t {
            return Ok(d);
        }
        Ok(1.0 / self.store.episode(episode)?.frame_rate.unwrap_or(90.0))
    }

    fn known_classes(&self) -> BTreeSet<String> {
        self.store
            .tasks()
            .flat_map(|t| t.entities.iter().flat_map(|d| std::iter::once(d.class.name.clone()).chain(d.class.parents.iter().cloned())))
            .collect()
    }

    fn known_types(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.kinds.names().map(str::to_string).collect();
        for ep in self.store.episodes() {
            if let Ok(a) = self.store.events_by(&ep.id, &EventFilter::default()) {
                out.extend(a.value.iter().map(|e| e.kind.as_str().to_string()));
            }
        }
        out
    }

    fn check_types<'n>(&self, types: impl IntoIterator<Item = &'n String>) -> Result<()> {
        let mut known = None;
        for t in types {
            let known = known.get_or_insert_with(|| self.known_types());
            if !known.contains(t) {
                return Err(Error::validation(format!(
                    "unknown event type {t:?}; known types: {}",
                    known.iter().cloned().collect::<Vec<_>>().join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn validate_pattern(&self, p: &QueryPattern) -> Result<()> {
        let (mut classes, mut types) = (Vec::new(), Vec::new());
        p.names(&mut classes, &mut types);
        if !classes.is_empty() {
            let known = self.known_classes();
            if let Some(c) = classes.iter().find(|c| !known.contains(*c)) {
                return Err(Error::validation(format!(
                    "unknown class {c:?}; known classes: {}",
                    known.into_iter().collect::<Vec<_>>().join(", ")
                )));
            }
        }
        self.check_types(&types)
    }

    fn episodes(&self, scope: Option<&EntityId>) -> Result<Vec<EntityId>> {
        match scope {
            Some(ep) => {
                self.store.episode(ep)?;
                Ok(vec![*ep])
            }
            None => {
                let mut out = Vec::new();
                let mut tasks: Vec<_> = self.store.tasks().collect();
                tasks.sort_by(|a, b| a.name.cmp(&b.name));
                for t in tasks {
                    out.extend(t.episodes.iter().copied());
                }
                Ok(out)
            }
        }
    }

    /// All stored events matching `pattern`, in episode then listing order.
    pub fn find_actions(&self, pattern: &QueryPattern) -> Result<Vec<Match>> {
        self.find_actions_in(pattern, None)
    }

    pub fn find_actions_in(&self, pattern: &QueryPattern, scope: Option<&EntityId>) -> Result<Vec<Match>> {
        self.validate_pattern(pattern)?;
        let is_type = |k: &str, w: &str| self.is_type(k, w);
        let mut out = Vec::new();
        for ep in self.episodes(scope)? {
            let entities = self.store.entities(&ep)?;
            let tol = self.tolerance(&ep)?;
            let filter = EventFilter {
                participant: pattern.object.as_ref().and_then(|o| o.id),
                interval: pattern.interval,
                ..Default::default()
            };
            let events = self.store.events_by(&ep, &filter)?.value;
            let pool = if pattern.sub_actions.is_empty() {
                Vec::new()
            } else {
                self.store.events_by(&ep, &EventFilter::default())?.value
            };
            for e in &events {
                if let Some(bindings) = pattern.matches(e, &pool, entities, &is_type, tol) {
                    out.push(Match {
                        episode: ep,
                        event: e.clone(),
                        bindings,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn occurs(&self, event: &EntityId) -> Result<Interval> {
        Ok(self.store.event(event)?.1.interval())
    }

    /// Applies `rule` to every episode (or just `scope`).
    pub fn compose(&self, rule: &CompositionRule, scope: Option<&EntityId>) -> Result<Vec<Composite>> {
        rule.validate()?;
        self.check_types(rule.steps.iter().map(|s| &s.kind))?;
        let is_type = |k: &str, w: &str| self.is_type(k, w);
        let mut out = Vec::new();
        for ep in self.episodes(scope)? {
            let tol = self.tolerance(&ep)?;
            let pool = self.store.events_by(&ep, &EventFilter::default())?.value;
            let matches = select(find_matches(rule, &pool, &is_type, tol), &pool);
            for m in matches {
                out.push(self.materialize(rule, ep, &m, &pool)?);
            }
        }
        Ok(out)
    }

    fn materialize(&self, rule: &CompositionRule, ep: EntityId, m: &RuleMatch, pool: &[Event]) -> Result<Composite> {
        let events = m.events(pool);
        let (start, end) = m.interval(pool);
        let first = events.iter().flatten().next().expect("non-empty match");
        let ids: Vec<String> = events.iter().flatten().map(|e| e.id.to_string()).collect();
        let id = if self.store.minter().is_seeded() {
            ep.derive(&format!("{}:{}", rule.result, ids.join(",")))
        } else {
            EntityId::random()
        };
        let mut attributes = std::collections::BTreeMap::new();
        attributes.insert(
            "sub_events".to_string(),
            serde_json::Value::Array(ids.iter().map(|s| serde_json::json!(s)).collect()),
        );
        let event = Event {
            id,
            kind: rule.result.parse()?,
            start,
            end,
            participants: crate::model::Participants {
                performer: first.participants.performer,
                object: first.participants.object,
                ..Default::default()
            },
            attributes,
            source: EventSource::Composed,
        };
        let steps = rule
            .steps
            .iter()
            .zip(&events)
            .map(|(s, e)| (s.label().to_string(), e.map(|e| e.id)))
            .collect();
        Ok(Composite { episode: ep, event, steps })
    }

    /// Derives HoldingOnto for grasps of objects heavier than `hand_strength`
    /// (kg, strict) and GraspingOnto for the rest.
    pub fn infer_holding(&self, hand_strength: f64, scope: Option<&EntityId>) -> Result<Vec<(EntityId, Event)>> {
        if !(hand_strength > 0.0 && hand_strength.is_finite()) {
            return Err(Error::validation(format!("hand strength must be positive, got {hand_strength}")));
        }
        let mut out = Vec::new();
        for ep in self.episodes(scope)? {
            let entities = self.store.entities(&ep)?;
            for g in self.store.events_by(&ep, &EventFilter::kind("Grasping"))?.value {
                let Some(mass) = g.participants.object.and_then(|o| entities.get(&o)).map(|d| d.mass) else {
                    continue;
                };
                out.push((ep, derive_holding(&g, mass, hand_strength, self.store.minter().is_seeded())));
            }
        }
        Ok(out)
    }

    pub fn episode_of(&self, entity: &EntityId, hint: Option<&EntityId>) -> Result<EntityId> {
        if let Some(ep) = hint {
            return Ok(*ep);
        }
        let task = self
            .store
            .tasks()
            .find(|t| t.entities.iter().any(|d| d.id == *entity))
            .ok_or_else(|| Error::NotFound(format!("entity {entity}")))?;
        match task.episodes.as_slice() {
            [ep] => Ok(*ep),
            [] => Err(Error::NotFound(format!("task {} has no episodes", task.name))),
            _ => Err(Error::validation(format!(
                "entity {entity} appears in {} episodes of task {}; name one",
                task.episodes.len(),
                task.name
            ))),
        }
    }

    /// Poses of `entity` at every frame within `interval`.
    pub fn trajectory(&self, episode: &EntityId, entity: &EntityId, interval: &Interval) -> Result<Vec<(f64, Pose)>> {
        interval.validate()?;
        if !self.store.entities(episode)?.contains(entity) {
            return Err(Error::NotFound(format!("entity {entity} in episode {episode}")));
        }
        Ok(self
            .store
            .frames_in(episode, interval)?
            .into_iter()
            .filter_map(|f| f.poses.get(entity).map(|p| (f.t, *p)))
            .collect())
    }

    /// Nearest entity hit by the gaze ray of the frame at or before `t`.
    pub fn gaze_target(&self, episode: &EntityId, t: f64) -> Result<Option<EntityId>> {
        let frame = self.store.frame_at(episode, t)?;
        let entities = self.store.entities(episode)?;
        let g = &frame.gaze;
        if (g.direction.norm() - 1.0).abs() > 1e-6 {
            return Ok(None);
        }
        let mut best: Option<(f64, EntityId)> = None;
        for (id, pose) in &frame.poses {
            let Some(d) = entities.get(id) else { continue };
            if let Some(dist) = ray_intersect(&g.origin, &g.direction, d, pose)? {
                if best.is_none_or(|(b, bid)| dist < b || (dist == b && *id < bid)) {
                    best = Some((dist, *id));
                }
            }
        }
        Ok(best.map(|(_, id)| id))
    }
}

fn derive_holding(g: &Event, mass: f64, strength: f64, seeded: bool) -> Event {
    let kind = if mass > strength { "HoldingOnto" } else { "GraspingOnto" };
    let mut attributes = g.attributes.clone();
    attributes.insert("derived_from".into(), serde_json::json!(g.id.to_string()));
    Event {
        id: if seeded { g.id.derive(kind) } else { EntityId::random() },
        kind: EventKind::Other(kind.to_string()),
        start: g.start,
        end: g.end,
        participants: g.participants.clone(),
        attributes,
        source: EventSource::Derived,
    }
}

//! Structured query documents and their JSON results.
//!
//! A document is one JSON object tagged by `"query"`:
//!
//! ```json
//! {"query":"find","pattern":{"type":"Sliding","bind":"Act","object":{"class":"CerealBox","bind":"Obj"}},"trajectory":"Obj"}
//! {"query":"compose","rule":"PickAndPlace"}
//! {"query":"infer_holding","hand_strength":3.0}
//! {"query":"occurs","event":"<uuid>"}
//! {"query":"events","type":"Grasping"}
//! {"query":"trajectory","entity":"cup","interval":{"start":0.0,"end":2.0}}
//! {"query":"world","episode":"<uuid>","t":1.5}
//! {"query":"gaze","episode":"<uuid>","t":1.5}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CompositionRule, Engine, QueryPattern};
use crate::epmem::EventFilter;
use crate::error::{Error, Result};
use crate::model::{EntityId, Interval, Pose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "query", rename_all = "snake_case", deny_unknown_fields)]
pub enum QueryDocument {
    Find {
        pattern: QueryPattern,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        episode: Option<EntityId>,
        /// Binding whose trajectory over the matched interval is attached
        /// when trajectories are requested; defaults to the event object.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trajectory: Option<String>,
    },
    Compose {
        /// Name of a builtin rule.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rule: Option<String>,
        /// Inline rule definition; takes precedence over `rule`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        definition: Option<CompositionRule>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        episode: Option<EntityId>,
    },
    InferHolding {
        hand_strength: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        episode: Option<EntityId>,
    },
    Occurs {
        event: EntityId,
    },
    Events {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        episode: Option<EntityId>,
        #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
        kind: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        participant: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<Interval>,
    },
    Trajectory {
        /// Entity id or local name.
        entity: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        episode: Option<EntityId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interval: Option<Interval>,
    },
    World {
        episode: EntityId,
        t: f64,
    },
    Gaze {
        episode: EntityId,
        t: f64,
    },
}

/// Result lines of one document.
pub type QueryOutput = Vec<Value>;

impl QueryDocument {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Parses a file holding either one JSON document or NDJSON documents.
    pub fn parse_many(text: &str, origin: &str) -> Result<Vec<Self>> {
        if let Ok(doc) = serde_json::from_str::<QueryDocument>(text) {
            return Ok(vec![doc]);
        }
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: n + 1,
                column: e.column(),
                message: e.to_string(),
            })?);
        }
        if out.is_empty() {
            return Err(Error::validation(format!("{origin}: no query documents")));
        }
        Ok(out)
    }
}

fn samples_json(samples: &[(f64, Pose)]) -> Value {
    Value::Array(samples.iter().map(|(t, p)| json!({"t": t, "pose": p})).collect())
}

impl Engine<'_> {
    fn resolve_entity(&self, r: &str, episode: Option<&EntityId>) -> Result<EntityId> {
        if let Ok(id) = r.parse::<EntityId>() {
            return Ok(id);
        }
        let hits: Vec<EntityId> = match episode {
            Some(ep) => self.store().entities(ep)?.by_name(r).map(|d| d.id).into_iter().collect(),
            None => self
                .store()
                .tasks()
                .filter_map(|t| t.entities.iter().find(|d| d.name == r).map(|d| d.id))
                .collect(),
        };
        match hits.as_slice() {
            [id] => Ok(*id),
            [] => Err(Error::NotFound(format!("entity {r:?}"))),
            _ => Err(Error::validation(format!("entity name {r:?} is ambiguous across tasks; use its id"))),
        }
    }

    /// Runs one document. With `trajectories`, match results carry the pose
    /// samples of their object over the matched interval.
    pub fn run(&self, doc: &QueryDocument, trajectories: bool) -> Result<QueryOutput> {
        match doc {
            QueryDocument::Find {
                pattern,
                episode,
                trajectory,
            } => {
                let mut out = Vec::new();
                for m in self.find_actions_in(pattern, episode.as_ref())? {
                    let iv = m.event.interval();
                    let mut v = json!({
                        "episode": m.episode,
                        "event": m.event,
                        "interval": [iv.start, iv.end],
                        "bindings": m.bindings,
                    });
                    if trajectories {
                        let who = match trajectory {
                            Some(name) => m.bindings.get(name).copied(),
                            None => m.event.participants.object,
                        };
                        if let Some(id) = who {
                            v["trajectory"] = json!({
                                "entity": id,
                                "samples": samples_json(&self.trajectory(&m.episode, &id, &iv)?),
                            });
                        }
                    }
                    out.push(v);
                }
                Ok(out)
            }
            QueryDocument::Compose {
                rule,
                definition,
                episode,
            } => {
                let rule = match (definition, rule) {
                    (Some(d), _) => d.clone(),
                    (None, name) => {
                        let name = name.as_deref().unwrap_or("PickAndPlace");
                        super::default_rules()
                            .into_iter()
                            .find(|r| r.result == name)
                            .ok_or_else(|| Error::validation(format!("no builtin rule named {name:?}")))?
                    }
                };
                let mut out = Vec::new();
                for c in self.compose(&rule, episode.as_ref())? {
                    let iv = c.event.interval();
                    let steps: serde_json::Map<String, Value> =
                        c.steps.iter().filter_map(|(l, id)| id.map(|id| (l.clone(), json!(id)))).collect();
                    let mut v = json!({
                        "episode": c.episode,
                        "event": c.event,
                        "interval": [iv.start, iv.end],
                        "steps": steps,
                    });
                    if trajectories {
                        if let Some(id) = c.event.participants.object {
                            v["trajectory"] = json!({
                                "entity": id,
                                "samples": samples_json(&self.trajectory(&c.episode, &id, &iv)?),
                            });
                        }
                    }
                    out.push(v);
                }
                Ok(out)
            }
            QueryDocument::InferHolding { hand_strength, episode } => Ok(self
                .infer_holding(*hand_strength, episode.as_ref())?
                .into_iter()
                .map(|(ep, e)| json!({"episode": ep, "event": e}))
                .collect()),
            QueryDocument::Occurs { event } => {
                let iv = self.occurs(event)?;
                Ok(vec![json!({"event": event, "interval": [iv.start, iv.end]})])
            }
            QueryDocument::Events {
                episode,
                kind,
                participant,
                interval,
            } => {
                let participant = participant.as_deref().map(|p| self.resolve_entity(p, episode.as_ref())).transpose()?;
                if let Some(k) = kind {
                    self.validate_pattern(&QueryPattern::of_type(k.clone()))?;
                }
                let filter = EventFilter {
                    kind: kind.clone(),
                    participant,
                    interval: *interval,
                };
                let mut out = Vec::new();
                let eps: Vec<EntityId> = match episode {
                    Some(ep) => vec![*ep],
                    None => self.store().episodes().map(|e| e.id).collect(),
                };
                for ep in eps {
                    let a = self.store().events_by(&ep, &filter)?;
                    for e in a.value {
                        out.push(json!({"episode": ep, "provisional": a.provisional, "event": e}));
                    }
                }
                Ok(out)
            }
            QueryDocument::Trajectory {
                entity,
                episode,
                interval,
            } => {
                let id = self.resolve_entity(entity, episode.as_ref())?;
                let ep = self.episode_of(&id, episode.as_ref())?;
                let iv = match interval {
                    Some(iv) => *iv,
                    None => self
                        .store()
                        .episode(&ep)?
                        .time_range
                        .ok_or_else(|| Error::NotFound(format!("episode {ep} has no frames")))?,
                };
                Ok(self
                    .trajectory(&ep, &id, &iv)?
                    .into_iter()
                    .map(|(t, p)| json!({"t": t, "pose": p}))
                    .collect())
            }
            QueryDocument::World { episode, t } => {
                let (frame, _) = self.store().frame_at_probed(episode, *t)?;
                Ok(vec![serde_json::to_value(frame)?])
            }
            QueryDocument::Gaze { episode, t } => Ok(vec![json!({"t": t, "target": self.gaze_target(episode, *t)?})]),
        }
    }
}

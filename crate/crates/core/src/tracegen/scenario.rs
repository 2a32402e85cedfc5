//! Scenario scripts.
//!
//! A script is a TOML document:
//!
//! ```toml
//! name = "canonical-wrap"      # task name
//! seed = 7
//! frame_rate = 90.0            # Hz, default 90
//! duration = 6.0               # s, default: last directive end + 0.5
//! head = [-0.3, 0.0, 1.55]     # gaze origin
//! gaze_offset = [0.0, 0.0, 0.0]
//!
//! [[entities]]
//! name = "table"
//! class = "Table"
//! parents = ["Furniture"]      # optional
//! shape = { kind = "box", half_extents = [0.6, 0.5, 0.02] }
//! mass = 0.0                   # 0 marks a static entity
//! parts = []                   # local names
//! pose = [0.5, 0.0, 0.7, 1.0, 0.0, 0.0, 0.0]
//!
//! [[directives]]
//! op = "move_hand"             # move_hand | set_grasp | wait
//! hand = "right_hand"
//! position = [0.28, -0.1, 0.77]
//! orientation = [1.0, 0.0, 0.0, 0.0]   # optional, keeps the current one
//! duration = 1.0
//! at = 0.5                     # optional start time, default: previous directive end
//! label = "reach"              # optional
//!
//! [[directives]]
//! op = "set_grasp"
//! hand = "right_hand"
//! style = "wrap"
//! u = 1.0                      # grasp input target, linear ramp
//! duration = 0.3
//!
//! [[ground_truth]]             # optional, replaces the derived annotation
//! type = "Reaching"
//! start = 0.5
//! end = 1.4
//! performer = "right_hand"
//! object = "cup"
//! ```
//!
//! Entities of class `Hand` (or with `Hand` among their parents) are hands.
//! Labels `reach` and `slide` mark the directives whose start times the
//! annotator uses as reach and slide onsets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::toml_error;
use crate::error::{Error, Result};
use crate::model::{
    ClassTag, EntityDescriptor, EntityId, EntitySet, EntitySpec, GraspStyle, IdMinter, Pose, Shape, Vec3,
};

pub const DEFAULT_FRAME_RATE: f64 = 90.0;
const TAIL: f64 = 0.5;
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntity {
    pub name: String,
    pub class: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<String>,
    pub shape: Shape,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<String>,
    pub pose: Pose,
}

impl ScenarioEntity {
    pub fn new(name: &str, class: ClassTag, shape: Shape, mass: f64, position: Vec3) -> Self {
        ScenarioEntity {
            name: name.into(),
            class: class.name,
            parents: class.parents,
            shape,
            mass,
            parts: Vec::new(),
            pose: Pose::from_translation(position),
        }
    }

    pub fn with_parts(mut self, parts: &[&str]) -> Self {
        self.parts = parts.iter().map(|p| p.to_string()).collect();
        self
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    pub fn is_hand(&self) -> bool {
        self.class == "Hand" || self.parents.iter().any(|p| p == "Hand")
    }

    fn spec(&self) -> EntitySpec {
        EntitySpec {
            name: self.name.clone(),
            class: ClassTag::with_parents(self.class.clone(), self.parents.clone()),
            shape: self.shape,
            mass: self.mass,
            parts: self.parts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Directive {
    MoveHand {
        hand: String,
        position: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        orientation: Option<[f64; 4]>,
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    SetGrasp {
        hand: String,
        style: GraspStyle,
        u: f64,
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Wait {
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
}

impl Directive {
    pub fn move_hand(hand: &str, position: Vec3, duration: f64) -> Self {
        Directive::MoveHand {
            hand: hand.into(),
            position: [position.x, position.y, position.z],
            orientation: None,
            duration,
            at: None,
            label: None,
        }
    }

    pub fn set_grasp(hand: &str, style: GraspStyle, u: f64, duration: f64) -> Self {
        Directive::SetGrasp {
            hand: hand.into(),
            style,
            u,
            duration,
            at: None,
            label: None,
        }
    }

    pub fn wait(duration: f64) -> Self {
        Directive::Wait { duration, at: None }
    }

    pub fn labeled(mut self, name: &str) -> Self {
        match &mut self {
            Directive::MoveHand { label, .. } | Directive::SetGrasp { label, .. } => {
                *label = Some(name.into())
            }
            Directive::Wait { .. } => {}
        }
        self
    }

    pub fn at(mut self, t: f64) -> Self {
        match &mut self {
            Directive::MoveHand { at, .. } | Directive::SetGrasp { at, .. } | Directive::Wait { at, .. } => {
                *at = Some(t)
            }
        }
        self
    }

    pub fn oriented(mut self, wxyz: [f64; 4]) -> Self {
        if let Directive::MoveHand { orientation, .. } = &mut self {
            *orientation = Some(wxyz);
        }
        self
    }

    pub fn hand(&self) -> Option<&str> {
        match self {
            Directive::MoveHand { hand, .. } | Directive::SetGrasp { hand, .. } => Some(hand),
            Directive::Wait { .. } => None,
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            Directive::MoveHand { duration, .. }
            | Directive::SetGrasp { duration, .. }
            | Directive::Wait { duration, .. } => *duration,
        }
    }

    fn start_at(&self) -> Option<f64> {
        match self {
            Directive::MoveHand { at, .. } | Directive::SetGrasp { at, .. } | Directive::Wait { at, .. } => *at,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Directive::MoveHand { label, .. } | Directive::SetGrasp { label, .. } => label.as_deref(),
            Directive::Wait { .. } => None,
        }
    }
}

/// Ground-truth event stated by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supporter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, serde_json::Value>,
}

fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE
}

fn default_head() -> [f64; 3] {
    [-0.3, 0.0, 1.55]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default = "default_head")]
    pub head: [f64; 3],
    #[serde(default)]
    pub gaze_offset: [f64; 3],
    pub entities: Vec<ScenarioEntity>,
    #[serde(default)]
    pub directives: Vec<Directive>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ground_truth: Vec<TruthSpec>,
}

/// Directive with its resolved time span.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheduled {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub directive: Directive,
}

/// Raw document shape used to attach positions to per-item errors.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    name: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_frame_rate")]
    frame_rate: f64,
    #[serde(default)]
    duration: Option<f64>,
    #[serde(default = "default_head")]
    head: [f64; 3],
    #[serde(default)]
    gaze_offset: [f64; 3],
    entities: Vec<toml::Spanned<toml::Value>>,
    #[serde(default)]
    directives: Vec<toml::Spanned<toml::Value>>,
    #[serde(default)]
    ground_truth: Vec<toml::Spanned<toml::Value>>,
}

fn item<T: serde::de::DeserializeOwned>(
    origin: &str,
    text: &str,
    what: &str,
    index: usize,
    v: toml::Spanned<toml::Value>,
) -> Result<T> {
    let (line, column) = crate::config::line_col(text, v.span().start);
    v.into_inner().try_into().map_err(|e: toml::de::Error| Error::Parse {
        path: origin.to_string(),
        line,
        column,
        message: format!("{what} {index}: {}", e.message()),
    })
}

impl ScenarioScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Parses and validates a script. Errors inside a directive name its
    /// zero-based index.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let raw: RawScript = toml::from_str(text).map_err(|e| toml_error(origin, text, &e))?;
        let entities = raw
            .entities
            .into_iter()
            .enumerate()
            .map(|(i, v)| item(origin, text, "entity", i, v))
            .collect::<Result<Vec<_>>>()?;
        let directives = raw
            .directives
            .into_iter()
            .enumerate()
            .map(|(i, v)| item(origin, text, "directive", i, v))
            .collect::<Result<Vec<_>>>()?;
        let ground_truth = raw
            .ground_truth
            .into_iter()
            .enumerate()
            .map(|(i, v)| item(origin, text, "ground_truth", i, v))
            .collect::<Result<Vec<_>>>()?;
        let script = ScenarioScript {
            name: raw.name,
            seed: raw.seed,
            frame_rate: raw.frame_rate,
            duration: raw.duration,
            head: raw.head,
            gaze_offset: raw.gaze_offset,
            entities,
            directives,
            ground_truth,
        };
        script.validate()?;
        Ok(script)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Resolves start and end times, checking ordering and per-hand overlap.
    pub fn schedule(&self) -> Result<Vec<Scheduled>> {
        let mut cursor = 0.0;
        let mut prev_start = 0.0;
        let mut hand_busy: BTreeMap<&str, f64> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.directives.len());
        for (index, d) in self.directives.iter().enumerate() {
            let err = |msg: String| Error::validation(format!("directive {index}: {msg}"));
            let duration = d.duration();
            let start = d.start_at().unwrap_or(cursor);
            if !start.is_finite() || start < 0.0 {
                return Err(err(format!("start time {start} must be finite and non-negative")));
            }
            if !duration.is_finite() || duration < 0.0 {
                return Err(err(format!("duration {duration} must be finite and non-negative")));
            }
            if !matches!(d, Directive::Wait { .. }) && duration <= 0.0 {
                return Err(err("duration must be positive".into()));
            }
            if start + TIME_TOL < prev_start {
                return Err(err(format!(
                    "starts at {start} before the previous directive ({prev_start})"
                )));
            }
            match d {
                Directive::MoveHand {
                    hand,
                    position,
                    orientation,
                    ..
                } => {
                    self.check_hand(hand).map_err(|m| err(m))?;
                    if !position.iter().all(|v| v.is_finite()) {
                        return Err(err("non-finite target position".into()));
                    }
                    if let Some(q) = orientation {
                        Pose::new(Vec3::zeros(), *q).map_err(|e| err(e.to_string()))?;
                    }
                }
                Directive::SetGrasp { hand, u, .. } => {
                    self.check_hand(hand).map_err(|m| err(m))?;
                    if !(0.0..=1.0).contains(u) {
                        return Err(err(format!("grasp target u={u} outside [0, 1]")));
                    }
                }
                Directive::Wait { .. } => {}
            }
            let end = start + duration;
            if let Some(hand) = d.hand() {
                if let Some(&busy) = hand_busy.get(hand) {
                    if start + TIME_TOL < busy {
                        return Err(err(format!(
                            "overlaps the previous directive of hand {hand:?} (busy until {busy})"
                        )));
                    }
                }
                hand_busy.insert(hand, end);
            }
            prev_start = start;
            cursor = end;
            out.push(Scheduled {
                index,
                start,
                end,
                directive: d.clone(),
            });
        }
        Ok(out)
    }

    fn check_hand(&self, hand: &str) -> std::result::Result<(), String> {
        match self.entities.iter().find(|e| e.name == hand) {
            None => Err(format!("unknown hand {hand:?}")),
            Some(e) if !e.is_hand() => Err(format!("entity {hand:?} is not a hand")),
            Some(_) => Ok(()),
        }
    }

    /// Total simulated time.
    pub fn total_duration(&self) -> Result<f64> {
        if let Some(d) = self.duration {
            return Ok(d);
        }
        let last = self.schedule()?.iter().map(|s| s.end).fold(0.0, f64::max);
        Ok(last + TAIL)
    }

    /// Number of frames: timestamps k / frame_rate up to the duration.
    pub fn frame_count(&self) -> Result<usize> {
        let d = self.total_duration()?;
        Ok((d * self.frame_rate + 1e-6).floor() as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::validation("scenario name must be nonempty"));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::validation(format!(
                "frame_rate must be positive, got {}",
                self.frame_rate
            )));
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::validation(format!("duration must be non-negative, got {d}")));
            }
        }
        for e in &self.entities {
            if e.is_hand() {
                if !matches!(e.shape, Shape::Sphere { .. }) {
                    return Err(Error::validation(format!("hand {:?} must be a sphere", e.name)));
                }
                if e.mass <= 0.0 {
                    return Err(Error::validation(format!("hand {:?} must have positive mass", e.name)));
                }
            }
        }
        let specs: Vec<EntitySpec> = self.entities.iter().map(ScenarioEntity::spec).collect();
        EntitySpec::mint_all(&specs, &IdMinter::seeded(0), IdMinter::seeded(0).task_id(&self.name))?;
        let schedule = self.schedule()?;
        let total = match self.duration {
            Some(d) => d,
            None => schedule.iter().map(|s| s.end).fold(0.0, f64::max) + TAIL,
        };
        if let Some(s) = schedule.iter().find(|s| s.end > total + TIME_TOL) {
            return Err(Error::validation(format!(
                "directive {}: ends at {} after the scenario duration {total}",
                s.index, s.end
            )));
        }
        for (i, g) in self.ground_truth.iter().enumerate() {
            if !(g.start <= g.end && g.start >= 0.0 && g.end <= total + TIME_TOL) {
                return Err(Error::validation(format!(
                    "ground_truth {i}: interval [{}, {}] outside [0, {total}]",
                    g.start, g.end
                )));
            }
            for name in [&g.performer, &g.object, &g.supporter, &g.other].into_iter().flatten() {
                if !self.entities.iter().any(|e| &e.name == name) {
                    return Err(Error::validation(format!("ground_truth {i}: unknown entity {name:?}")));
                }
            }
        }
        Ok(())
    }

    /// Descriptors with ids minted under the task namespace of `minter`.
    pub fn descriptors(&self, minter: &IdMinter) -> Result<Vec<EntityDescriptor>> {
        let specs: Vec<EntitySpec> = self.entities.iter().map(ScenarioEntity::spec).collect();
        EntitySpec::mint_all(&specs, minter, minter.task_id(&self.name))
    }

    pub fn entity_set(&self, minter: &IdMinter) -> Result<EntitySet> {
        EntitySet::new(self.descriptors(minter)?)
    }

    pub fn id_of(&self, set: &EntitySet, name: &str) -> Result<EntityId> {
        set.by_name(name)
            .map(|e| e.id)
            .ok_or_else(|| Error::NotFound(format!("entity {name:?}")))
    }
}

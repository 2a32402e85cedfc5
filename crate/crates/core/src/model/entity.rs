use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::class::{ClassHierarchy, ClassTag};
use super::geometry::{Pose, Shape, Vec3};
use super::ids::{EntityId, IdMinter};
use crate::error::{Error, Result};

/// Static identity and properties of one world entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDescriptor {
    pub id: EntityId,
    /// Local name, unique within a task.
    pub name: String,
    pub class: ClassTag,
    pub shape: Shape,
    /// kg; zero marks a static entity.
    pub mass: f64,
    #[serde(default)]
    pub parts: Vec<EntityId>,
    pub is_static: bool,
}

impl EntityDescriptor {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::validation(format!(
                "entity {}: mass must be non-negative, got {}",
                self.name, self.mass
            )));
        }
        if self.is_static != (self.mass == 0.0) {
            return Err(Error::validation(format!(
                "entity {}: is_static must hold exactly when mass is zero",
                self.name
            )));
        }
        if self.name.is_empty() {
            return Err(Error::validation("entity name must be nonempty"));
        }
        Ok(())
    }

    pub fn is_hand(&self) -> bool {
        self.class.name == "Hand" || self.class.parents.iter().any(|p| p == "Hand")
    }
}

/// Entity described by local names, before ids are minted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub name: String,
    pub class: ClassTag,
    pub shape: Shape,
    pub mass: f64,
    #[serde(default)]
    pub parts: Vec<String>,
}

impl EntitySpec {
    /// Mints ids under `task` and resolves part names.
    pub fn mint_all(specs: &[EntitySpec], minter: &IdMinter, task: EntityId) -> Result<Vec<EntityDescriptor>> {
        let mut ids = HashMap::new();
        for s in specs {
            if ids.insert(s.name.as_str(), minter.entity_id(task, &s.name)).is_some() {
                return Err(Error::validation(format!("duplicate entity name {:?}", s.name)));
            }
        }
        let descriptors = specs
            .iter()
            .map(|s| {
                let parts = s
                    .parts
                    .iter()
                    .map(|p| {
                        ids.get(p.as_str()).copied().ok_or_else(|| {
                            Error::validation(format!("entity {:?}: unknown part {p:?}", s.name))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(EntityDescriptor {
                    id: ids[s.name.as_str()],
                    name: s.name.clone(),
                    class: s.class.clone(),
                    shape: s.shape,
                    mass: s.mass,
                    parts,
                    is_static: s.mass == 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        EntitySet::new(descriptors.clone())?;
        Ok(descriptors)
    }
}

/// Validated descriptor collection with id lookup and partonomy closure.
#[derive(Debug, Clone, Default)]
pub struct EntitySet {
    entities: Vec<EntityDescriptor>,
    by_id: HashMap<EntityId, usize>,
    classes: ClassHierarchy,
}

impl EntitySet {
    pub fn new(entities: Vec<EntityDescriptor>) -> Result<Self> {
        let mut by_id = HashMap::new();
        let mut names = BTreeSet::new();
        for (i, e) in entities.iter().enumerate() {
            e.validate()?;
            if by_id.insert(e.id, i).is_some() {
                return Err(Error::validation(format!("duplicate entity id {}", e.id)));
            }
            if !names.insert(e.name.as_str()) {
                return Err(Error::validation(format!("duplicate entity name {:?}", e.name)));
            }
        }
        for e in &entities {
            for p in &e.parts {
                if !by_id.contains_key(p) {
                    return Err(Error::validation(format!(
                        "entity {}: part {p} is not in the descriptor set",
                        e.name
                    )));
                }
            }
        }
        let classes = ClassHierarchy::from_tags(entities.iter().map(|e| &e.class))?;
        let set = EntitySet {
            entities,
            by_id,
            classes,
        };
        set.check_partonomy_acyclic()?;
        Ok(set)
    }

    fn check_partonomy_acyclic(&self) -> Result<()> {
        let mut state: BTreeMap<EntityId, u8> = BTreeMap::new();
        for root in &self.entities {
            if state.contains_key(&root.id) {
                continue;
            }
            let mut stack = vec![(root.id, 0usize)];
            state.insert(root.id, 1);
            while let Some((id, idx)) = stack.pop() {
                let parts = &self.entities[self.by_id[&id]].parts;
                if idx < parts.len() {
                    stack.push((id, idx + 1));
                    let child = parts[idx];
                    match state.get(&child).copied().unwrap_or(0) {
                        0 => {
                            state.insert(child, 1);
                            stack.push((child, 0));
                        }
                        1 => {
                            return Err(Error::validation(format!(
                                "partonomy cycle through entity {}",
                                self.entities[self.by_id[&child]].name
                            )))
                        }
                        _ => {}
                    }
                } else {
                    state.insert(id, 2);
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &EntityId) -> Option<&EntityDescriptor> {
        self.by_id.get(id).map(|&i| &self.entities[i])
    }

    pub fn by_name(&self, name: &str) -> Option<&EntityDescriptor> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityDescriptor> {
        self.entities.iter()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn descriptors(&self) -> &[EntityDescriptor] {
        &self.entities
    }

    pub fn classes(&self) -> &ClassHierarchy {
        &self.classes
    }

    /// `true` when `part` is reachable from `whole` through `parts` links.
    pub fn is_part_of(&self, part: &EntityId, whole: &EntityId) -> bool {
        let mut stack = vec![*whole];
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(e) = self.get(&id) {
                for p in &e.parts {
                    if p == part {
                        return true;
                    }
                    stack.push(*p);
                }
            }
        }
        false
    }
}

/// Nearest non-negative distance along the ray to the entity's shape.
pub fn ray_intersect(
    origin: &Vec3,
    direction: &Vec3,
    entity: &EntityDescriptor,
    pose: &Pose,
) -> Result<Option<f64>> {
    if ((direction.norm() - 1.0).abs() > 1e-6) || !origin.iter().all(|v| v.is_finite()) {
        return Err(Error::validation(format!(
            "ray direction must be unit length, got {direction:?}"
        )));
    }
    let o = pose.inverse_transform_point(origin);
    let d = pose.inverse_transform_vector(direction);
    Ok(entity.shape.local_ray_hit(&o, &d))
}

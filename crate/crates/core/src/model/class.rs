use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named class with direct parent links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassTag {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<String>,
}

impl ClassTag {
    pub fn new(name: impl Into<String>) -> Self {
        ClassTag {
            name: name.into(),
            parents: Vec::new(),
        }
    }

    pub fn with_parents<I, S>(name: impl Into<String>, parents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ClassTag {
            name: name.into(),
            parents: parents.into_iter().map(Into::into).collect(),
        }
    }
}

/// Union of parent links gathered from a set of class tags.
///
/// Subsumption is parent-chain walking only; the graph must be acyclic.
#[derive(Debug, Clone, Default)]
pub struct ClassHierarchy {
    parents: BTreeMap<String, BTreeSet<String>>,
}

impl ClassHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a ClassTag>) -> Result<Self> {
        let mut h = ClassHierarchy::new();
        for tag in tags {
            h.insert(tag);
        }
        h.validate()?;
        Ok(h)
    }

    pub fn insert(&mut self, tag: &ClassTag) {
        let entry = self.parents.entry(tag.name.clone()).or_default();
        entry.extend(tag.parents.iter().cloned());
        for p in &tag.parents {
            self.parents.entry(p.clone()).or_default();
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.parents.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    /// `true` when `class` equals `ancestor` or reaches it through parents.
    pub fn is_a(&self, class: &str, ancestor: &str) -> bool {
        if class == ancestor {
            return true;
        }
        let mut stack = vec![class];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            if let Some(ps) = self.parents.get(c) {
                for p in ps {
                    if p == ancestor {
                        return true;
                    }
                    stack.push(p);
                }
            }
        }
        false
    }

    /// Rejects cyclic parent graphs.
    pub fn validate(&self) -> Result<()> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark: BTreeMap<&str, u8> = BTreeMap::new();
        for start in self.parents.keys() {
            if mark.get(start.as_str()).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(&str, Vec<&str>)> = vec![(start, self.children_of(start))];
            mark.insert(start, 1);
            while let Some((node, pending)) = stack.last_mut() {
                if let Some(next) = pending.pop() {
                    match mark.get(next).copied().unwrap_or(0) {
                        0 => {
                            mark.insert(next, 1);
                            let kids = self.children_of(next);
                            stack.push((next, kids));
                        }
                        1 => {
                            return Err(Error::validation(format!(
                                "class hierarchy cycle through {next:?}"
                            )))
                        }
                        _ => {}
                    }
                } else {
                    mark.insert(node, 2);
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    fn children_of(&self, name: &str) -> Vec<&str> {
        self.parents
            .get(name)
            .map(|s| s.iter().map(String::as_str).collect())
            .unwrap_or_default()
    }
}

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{allen_relation, AllenRelation, EntityId, Event};

/// Default rule set: a full pick-and-place chain on one object by one hand.
pub const DEFAULT_RULES: &str = include_str!("pick_and_place.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleStep {
    #[serde(rename = "type")]
    pub kind: String,
    /// Name used by constraints; defaults to the type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub optional: bool,
}

impl RuleStep {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.kind)
    }
}

/// `from` must stand in one of `relations` to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConstraint {
    pub from: String,
    pub to: String,
    pub relations: Vec<AllenRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionRule {
    pub result: String,
    #[serde(default = "yes")]
    pub same_object: bool,
    #[serde(default = "yes")]
    pub same_performer: bool,
    pub steps: Vec<RuleStep>,
    /// When empty, consecutive present steps must be before-or-meets.
    #[serde(default)]
    pub constraints: Vec<RuleConstraint>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(rename = "rule")]
    rules: Vec<CompositionRule>,
}

/// Parses a TOML rule file holding `[[rule]]` tables.
pub fn parse_rules(text: &str, origin: &str) -> Result<Vec<CompositionRule>> {
    let file: RuleFile = toml::from_str(text).map_err(|e| crate::config::toml_error(origin, text, &e))?;
    for r in &file.rules {
        r.validate()?;
    }
    Ok(file.rules)
}

pub fn default_rules() -> Vec<CompositionRule> {
    parse_rules(DEFAULT_RULES, "builtin rules").expect("builtin rules parse")
}

pub const BEFORE_OR_MEETS: [AllenRelation; 2] = [AllenRelation::Before, AllenRelation::Meets];

impl CompositionRule {
    /// Structural checks; type names are checked by the engine.
    pub fn validate(&self) -> Result<()> {
        if self.result.is_empty() {
            return Err(Error::validation("rule result type must not be empty"));
        }
        if !self.steps.iter().any(|s| !s.optional) {
            return Err(Error::validation(format!("rule {}: needs at least one required step", self.result)));
        }
        let mut seen = BTreeMap::new();
        for (i, s) in self.steps.iter().enumerate() {
            if seen.insert(s.label(), i).is_some() {
                return Err(Error::validation(format!("rule {}: duplicate step label {:?}", self.result, s.label())));
            }
        }
        for c in &self.constraints {
            for l in [&c.from, &c.to] {
                if !seen.contains_key(l.as_str()) {
                    return Err(Error::validation(format!("rule {}: constraint names unknown step {l:?}", self.result)));
                }
            }
            if c.relations.is_empty() {
                return Err(Error::validation(format!("rule {}: constraint {} -> {} allows nothing", self.result, c.from, c.to)));
            }
        }
        Ok(())
    }

    fn index(&self, label: &str) -> usize {
        self.steps.iter().position(|s| s.label() == label).expect("validated label")
    }

    /// Constraints as step-index triples.
    pub(crate) fn edges(&self) -> Vec<(usize, usize, Vec<AllenRelation>)> {
        self.constraints
            .iter()
            .map(|c| (self.index(&c.from), self.index(&c.to), c.relations.clone()))
            .collect()
    }

    /// Whether a full assignment (one optional event per step) satisfies the rule.
    pub fn satisfied(&self, assignment: &[Option<&Event>], tol: f64) -> bool {
        if assignment.len() != self.steps.len() {
            return false;
        }
        if self.steps.iter().zip(assignment).any(|(s, a)| !s.optional && a.is_none()) {
            return false;
        }
        let present: Vec<&Event> = assignment.iter().flatten().copied().collect();
        for (i, a) in present.iter().enumerate() {
            if present[..i].iter().any(|b| b.id == a.id) {
                return false;
            }
        }
        if !self.binding_ok(&present) {
            return false;
        }
        let rel_ok = |a: &Event, b: &Event, allowed: &[AllenRelation]| {
            allen_relation(&a.interval(), &b.interval(), tol).is_ok_and(|r| allowed.contains(&r))
        };
        if self.constraints.is_empty() {
            present.windows(2).all(|w| rel_ok(w[0], w[1], &BEFORE_OR_MEETS))
        } else {
            self.edges().iter().all(|(i, j, rels)| match (assignment[*i], assignment[*j]) {
                (Some(a), Some(b)) => rel_ok(a, b, rels),
                _ => true,
            })
        }
    }

    fn binding_ok(&self, present: &[&Event]) -> bool {
        let same = |f: fn(&Event) -> Option<EntityId>| {
            let first = present.first().map(|e| f(e));
            present.iter().all(|e| f(e).is_some() && Some(f(e)) == first)
        };
        (!self.same_object || same(|e| e.participants.object)) && (!self.same_performer || same(|e| e.participants.performer))
    }
}

/// A satisfied rule instance: per-step event positions into the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleMatch {
    pub steps: Vec<Option<usize>>,
}

impl RuleMatch {
    pub fn events<'a>(&self, pool: &'a [Event]) -> Vec<Option<&'a Event>> {
        self.steps.iter().map(|s| s.map(|i| &pool[i])).collect()
    }

    pub fn size(&self) -> usize {
        self.steps.iter().flatten().count()
    }

    /// `[first present step start, last present step end]`.
    pub fn interval(&self, pool: &[Event]) -> (f64, f64) {
        let present: Vec<usize> = self.steps.iter().flatten().copied().collect();
        (pool[present[0]].start, pool[*present.last().expect("non-empty")].end)
    }
}

/// Order in which matches are considered for the non-overlapping selection:
/// larger first, then earlier, then by event content.
pub fn selection_cmp(a: &RuleMatch, b: &RuleMatch, pool: &[Event]) -> Ordering {
    let (sa, ea) = a.interval(pool);
    let (sb, eb) = b.interval(pool);
    b.size()
        .cmp(&a.size())
        .then(sa.total_cmp(&sb))
        .then(ea.total_cmp(&eb))
        .then_with(|| {
            for (x, y) in a.steps.iter().zip(&b.steps) {
                let o = match (x, y) {
                    (Some(i), Some(j)) => pool[*i].listing_cmp(&pool[*j]),
                    (None, Some(_)) => Ordering::Greater,
                    (Some(_), None) => Ordering::Less,
                    (None, None) => Ordering::Equal,
                };
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
}

/// Greedy selection of matches that share no event.
pub fn select(mut matches: Vec<RuleMatch>, pool: &[Event]) -> Vec<RuleMatch> {
    matches.sort_by(|a, b| selection_cmp(a, b, pool));
    let mut used = vec![false; pool.len()];
    let mut out = Vec::new();
    for m in matches {
        if m.steps.iter().flatten().any(|&i| used[i]) {
            continue;
        }
        for &i in m.steps.iter().flatten() {
            used[i] = true;
        }
        out.push(m);
    }
    out.sort_by(|a, b| {
        let (sa, ea) = a.interval(pool);
        let (sb, eb) = b.interval(pool);
        sa.total_cmp(&sb).then(ea.total_cmp(&eb)).then_with(|| selection_cmp(a, b, pool))
    });
    out
}

/// Every satisfying assignment over `pool`, by backtracking with
/// incremental constraint checks. `is_type(kind, wanted)` resolves subtypes.
pub fn find_matches(rule: &CompositionRule, pool: &[Event], is_type: &dyn Fn(&str, &str) -> bool, tol: f64) -> Vec<RuleMatch> {
    let candidates: Vec<Vec<usize>> = rule
        .steps
        .iter()
        .map(|s| (0..pool.len()).filter(|&i| is_type(pool[i].kind.as_str(), &s.kind)).collect())
        .collect();
    let mut groups: BTreeMap<(Option<EntityId>, Option<EntityId>), Vec<usize>> = BTreeMap::new();
    for (i, e) in pool.iter().enumerate() {
        let o = rule.same_object.then_some(e.participants.object).flatten();
        let p = rule.same_performer.then_some(e.participants.performer).flatten();
        groups.entry((o, p)).or_default().push(i);
    }
    let edges = rule.edges();
    let mut out = Vec::new();
    for members in groups.values() {
        let mut in_group = vec![false; pool.len()];
        for &i in members {
            in_group[i] = true;
        }
        let cands: Vec<Vec<usize>> = candidates
            .iter()
            .map(|c| c.iter().copied().filter(|&i| in_group[i]).collect())
            .collect();
        let mut cur = vec![None; rule.steps.len()];
        search(rule, pool, &cands, &edges, tol, 0, &mut cur, &mut out);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn search(
    rule: &CompositionRule,
    pool: &[Event],
    cands: &[Vec<usize>],
    edges: &[(usize, usize, Vec<AllenRelation>)],
    tol: f64,
    k: usize,
    cur: &mut Vec<Option<usize>>,
    out: &mut Vec<RuleMatch>,
) {
    if k == rule.steps.len() {
        let a: Vec<Option<&Event>> = cur.iter().map(|s| s.map(|i| &pool[i])).collect();
        if rule.satisfied(&a, tol) {
            out.push(RuleMatch { steps: cur.clone() });
        }
        return;
    }
    let consistent = |cur: &[Option<usize>], i: usize| {
        if cur[..k].contains(&Some(i)) {
            return false;
        }
        let rel = |a: usize, b: usize, allowed: &[AllenRelation]| {
            allen_relation(&pool[a].interval(), &pool[b].interval(), tol).is_ok_and(|r| allowed.contains(&r))
        };
        if rule.constraints.is_empty() {
            cur[..k].iter().rev().flatten().next().is_none_or(|&p| rel(p, i, &BEFORE_OR_MEETS))
        } else {
            edges.iter().all(|(a, b, rels)| match (*a == k, *b == k) {
                (true, false) if *b < k => cur[*b].is_none_or(|j| rel(i, j, rels)),
                (false, true) if *a < k => cur[*a].is_none_or(|j| rel(j, i, rels)),
                _ => true,
            })
        }
    };
    for &i in &cands[k] {
        if consistent(cur, i) {
            cur[k] = Some(i);
            search(rule, pool, cands, edges, tol, k + 1, cur, out);
            cur[k] = None;
        }
    }
    if rule.steps[k].optional {
        search(rule, pool, cands, edges, tol, k + 1, cur, out);
    }
}

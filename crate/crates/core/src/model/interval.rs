use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let iv = Interval { start, end };
        iv.validate()?;
        Ok(iv)
    }

    pub fn instant(t: f64) -> Self {
        Interval { start: t, end: t }
    }

    pub fn validate(&self) -> Result<()> {
        if self.start.is_finite() && self.end.is_finite() && self.start <= self.end {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "invalid interval [{}, {}]",
                self.start, self.end
            )))
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains_time(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    /// `other` lies within `self`, widened by `tol` on both sides.
    pub fn contains_interval(&self, other: &Interval, tol: f64) -> bool {
        other.start >= self.start - tol && other.end <= self.end + tol
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// The thirteen qualitative relations between two intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllenRelation {
    Before,
    Meets,
    Overlaps,
    Starts,
    During,
    Finishes,
    Equals,
    FinishedBy,
    Contains,
    StartedBy,
    OverlappedBy,
    MetBy,
    After,
}

impl AllenRelation {
    pub const ALL: [AllenRelation; 13] = [
        AllenRelation::Before,
        AllenRelation::Meets,
        AllenRelation::Overlaps,
        AllenRelation::Starts,
        AllenRelation::During,
        AllenRelation::Finishes,
        AllenRelation::Equals,
        AllenRelation::FinishedBy,
        AllenRelation::Contains,
        AllenRelation::StartedBy,
        AllenRelation::OverlappedBy,
        AllenRelation::MetBy,
        AllenRelation::After,
    ];

    pub fn inverse(self) -> AllenRelation {
        use AllenRelation::*;
        match self {
            Before => After,
            Meets => MetBy,
            Overlaps => OverlappedBy,
            Starts => StartedBy,
            During => Contains,
            Finishes => FinishedBy,
            Equals => Equals,
            FinishedBy => Finishes,
            Contains => During,
            StartedBy => Starts,
            OverlappedBy => Overlaps,
            MetBy => Meets,
            After => Before,
        }
    }

    pub fn as_str(self) -> &'static str {
        use AllenRelation::*;
        match self {
            Before => "before",
            Meets => "meets",
            Overlaps => "overlaps",
            Starts => "starts",
            During => "during",
            Finishes => "finishes",
            Equals => "equals",
            FinishedBy => "finished_by",
            Contains => "contains",
            StartedBy => "started_by",
            OverlappedBy => "overlapped_by",
            MetBy => "met_by",
            After => "after",
        }
    }
}

impl fmt::Display for AllenRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllenRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AllenRelation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown Allen relation {s:?}")))
    }
}

fn cmp_tol(x: f64, y: f64, tol: f64) -> Ordering {
    if (x - y).abs() <= tol {
        Ordering::Equal
    } else if x < y {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Relation of `a` to `b`; endpoints closer than `tol` compare equal.
///
/// Categories are tested from the most to the least constrained (shared
/// both ends, shared start, shared end, touching, disjoint, overlapping) so
/// that exactly one relation is returned even when the tolerance makes
/// several boundary equalities hold at once.
pub fn allen_relation(a: &Interval, b: &Interval, tol: f64) -> Result<AllenRelation> {
    use AllenRelation::*;
    use Ordering::*;
    a.validate()?;
    b.validate()?;
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::validation(format!("tolerance must be >= 0, got {tol}")));
    }
    let ss = cmp_tol(a.start, b.start, tol);
    let ee = cmp_tol(a.end, b.end, tol);
    let es = cmp_tol(a.end, b.start, tol);
    let se = cmp_tol(a.start, b.end, tol);

    let rel = match (ss, ee) {
        (Equal, Equal) => Equals,
        (Equal, Less) => Starts,
        (Equal, Greater) => StartedBy,
        (Greater, Equal) => Finishes,
        (Less, Equal) => FinishedBy,
        _ => match (es, se) {
            (Equal, Equal) => {
                // Both intervals collapse inside the tolerance band; order by midpoint.
                match (a.start + a.end).partial_cmp(&(b.start + b.end)) {
                    Some(Less) => Meets,
                    Some(Greater) => MetBy,
                    _ => Equals,
                }
            }
            (Equal, _) => Meets,
            (_, Equal) => MetBy,
            (Less, _) => Before,
            (_, Greater) => After,
            _ => match (ss, ee) {
                (Less, Less) => Overlaps,
                (Less, Greater) => Contains,
                (Greater, Less) => During,
                (Greater, Greater) => OverlappedBy,
                _ => unreachable!("equal start/end handled above"),
            },
        },
    };
    Ok(rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(s: f64, e: f64) -> Interval {
        Interval::new(s, e).unwrap()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(allen_relation(&iv(0.0, 1.0), &iv(1.0, 2.0), 0.0).unwrap(), AllenRelation::Meets);
        assert_eq!(allen_relation(&iv(0.0, 1.0), &iv(0.0, 1.0), 0.0).unwrap(), AllenRelation::Equals);
        assert_eq!(
            allen_relation(&iv(0.0, 1.0), &iv(1.005, 2.0), 0.011).unwrap(),
            AllenRelation::Meets
        );
    }

    #[test]
    fn invalid_inputs() {
        let bad = Interval { start: 2.0, end: 1.0 };
        assert!(allen_relation(&bad, &iv(0.0, 1.0), 0.0).is_err());
        assert!(allen_relation(&iv(0.0, 1.0), &iv(0.0, 1.0), -1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn relation_names_parse() {
        for r in AllenRelation::ALL {
            assert_eq!(r.as_str().parse::<AllenRelation>().unwrap(), r);
            assert_eq!(r.inverse().inverse(), r);
        }
    }
}

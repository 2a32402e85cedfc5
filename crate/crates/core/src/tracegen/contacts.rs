use std::collections::BTreeMap;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::model::{ContactRecord, EntityId, EntitySet, Pose, Shape, Vec3};

/// Collision solid in world coordinates. Cylinders use their bounding box.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Solid {
    Sphere { center: Vec3, radius: f64 },
    Obb { center: Vec3, axes: Matrix3<f64>, half: Vec3 },
}

impl Solid {
    pub(crate) fn new(shape: &Shape, pose: &Pose) -> Solid {
        match *shape {
            Shape::Sphere { radius } => Solid::Sphere {
                center: pose.position,
                radius,
            },
            _ => Solid::Obb {
                center: pose.position,
                axes: pose.rotation(),
                half: shape.local_half_extents(),
            },
        }
    }

    fn center(&self) -> Vec3 {
        match self {
            Solid::Sphere { center, .. } | Solid::Obb { center, .. } => *center,
        }
    }

    fn closest_point(&self, p: &Vec3) -> Vec3 {
        match self {
            Solid::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                if n <= *radius {
                    *p
                } else {
                    center + d * (radius / n)
                }
            }
            Solid::Obb { center, axes, half } => {
                let local = axes.transpose() * (p - center);
                let q = Vec3::new(
                    local.x.clamp(-half.x, half.x),
                    local.y.clamp(-half.y, half.y),
                    local.z.clamp(-half.z, half.z),
                );
                center + axes * q
            }
        }
    }
}

/// Signed separation and normal (pointing from `b` toward `a`) between two solids.
pub(crate) struct PairContact {
    pub separation: f64,
    pub normal: Vec3,
    pub point: Vec3,
}

pub(crate) fn pair_contact(a: &Solid, b: &Solid) -> PairContact {
    match (a, b) {
        (
            Solid::Sphere {
                center: ca,
                radius: ra,
            },
            Solid::Sphere {
                center: cb,
                radius: rb,
            },
        ) => {
            let d = ca - cb;
            let dist = d.norm();
            let normal = if dist > 1e-12 {
                d / dist
            } else {
                Vec3::z()
            };
            let separation = dist - ra - rb;
            PairContact {
                separation,
                normal,
                point: cb + normal * (rb + separation / 2.0),
            }
        }
        (Solid::Sphere { center, radius }, Solid::Obb { .. }) => sphere_box(center, *radius, b),
        (Solid::Obb { .. }, Solid::Sphere { center, radius }) => {
            let c = sphere_box(center, *radius, a);
            PairContact {
                normal: -c.normal,
                ..c
            }
        }
        (Solid::Obb { .. }, Solid::Obb { .. }) => box_box(a, b),
    }
}

fn sphere_box(center: &Vec3, radius: f64, boxed: &Solid) -> PairContact {
    let Solid::Obb {
        center: bc,
        axes,
        half,
    } = boxed
    else {
        unreachable!("sphere_box called with a non-box")
    };
    let local = axes.transpose() * (center - bc);
    let q = Vec3::new(
        local.x.clamp(-half.x, half.x),
        local.y.clamp(-half.y, half.y),
        local.z.clamp(-half.z, half.z),
    );
    let diff = local - q;
    let dist = diff.norm();
    let (normal_local, separation, surface) = if dist > 1e-12 {
        (diff / dist, dist - radius, q)
    } else {
        // center inside the box: push out through the nearest face
        let mut best = 0;
        let mut depth = f64::INFINITY;
        for i in 0..3 {
            let d = half[i] - local[i].abs();
            if d < depth {
                depth = d;
                best = i;
            }
        }
        let sign = if local[best] >= 0.0 { 1.0 } else { -1.0 };
        let mut n = Vec3::zeros();
        n[best] = sign;
        let mut s = local;
        s[best] = sign * half[best];
        (n, -(depth + radius), s)
    };
    PairContact {
        separation,
        normal: axes * normal_local,
        point: bc + axes * surface,
    }
}

fn box_box(a: &Solid, b: &Solid) -> PairContact {
    let (
        Solid::Obb {
            center: ca,
            axes: ra,
            half: ha,
        },
        Solid::Obb {
            center: cb,
            axes: rb,
            half: hb,
        },
    ) = (a, b)
    else {
        unreachable!("box_box called with a non-box")
    };
    let d = ca - cb;
    let mut candidates: Vec<(Vec3, bool)> = Vec::with_capacity(15);
    for i in 0..3 {
        candidates.push((ra.column(i).into_owned(), true));
        candidates.push((rb.column(i).into_owned(), true));
    }
    for i in 0..3 {
        for j in 0..3 {
            let c = ra.column(i).cross(&rb.column(j));
            let n = c.norm();
            if n > 1e-9 {
                candidates.push((c / n, false));
            }
        }
    }
    let mut best_sep = f64::NEG_INFINITY;
    let mut best_axis = Vec3::z();
    for (axis, is_face) in candidates {
        let proj_a: f64 = (0..3).map(|i| ha[i] * axis.dot(&ra.column(i)).abs()).sum();
        let proj_b: f64 = (0..3).map(|i| hb[i] * axis.dot(&rb.column(i)).abs()).sum();
        let dist = axis.dot(&d);
        let mut sep = dist.abs() - proj_a - proj_b;
        if !is_face {
            // prefer face normals on ties
            sep -= 1e-9;
        }
        if sep > best_sep {
            best_sep = sep;
            best_axis = if dist >= 0.0 { axis } else { -axis };
        }
    }
    let pa = a.closest_point(&b.center());
    let pb = b.closest_point(&a.center());
    PairContact {
        separation: best_sep,
        normal: best_axis,
        point: (pa + pb) / 2.0,
    }
}

/// All touching pairs (separation within `eps_pen`), canonically ordered.
/// Pairs of two static entities are not reported.
pub fn compute_contacts(
    entities: &EntitySet,
    poses: &BTreeMap<EntityId, Pose>,
    eps_pen: f64,
) -> Result<Vec<ContactRecord>> {
    let solids = entities
        .iter()
        .map(|e| {
            poses
                .get(&e.id)
                .map(|p| (e.id, e.is_static, Solid::new(&e.shape, p)))
                .ok_or_else(|| Error::validation(format!("missing pose for entity {}", e.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..solids.len() {
        for j in i + 1..solids.len() {
            let (ia, sa, a) = &solids[i];
            let (ib, sb, b) = &solids[j];
            if *sa && *sb {
                continue;
            }
            let c = pair_contact(a, b);
            if c.separation <= eps_pen {
                out.push(ContactRecord::canonical(*ia, *ib, c.normal, c.point));
            }
        }
    }
    out.sort_by(|x, y| (x.a, x.b).cmp(&(y.a, y.b)));
    Ok(out)
}

/// Signed surface gap between two entities.
pub(crate) fn separation(shape_a: &Shape, pose_a: &Pose, shape_b: &Shape, pose_b: &Pose) -> PairContact {
    pair_contact(&Solid::new(shape_a, pose_a), &Solid::new(shape_b, pose_b))
}

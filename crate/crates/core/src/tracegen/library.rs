//! Built-in desk-scale scenarios.

use crate::model::{ClassTag, GraspStyle, Pose, Shape, Vec3};

use super::scenario::{Directive, ScenarioEntity, ScenarioScript, DEFAULT_FRAME_RATE};

pub const TABLE_TOP: f64 = 0.72;
pub const HAND_RADIUS: f64 = 0.04;
const RIGHT: &str = "right_hand";
const LEFT: &str = "left_hand";
/// Hand orientation whose palm-forward axis points down.
const PALM_DOWN: [f64; 4] = [std::f64::consts::FRAC_1_SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2, 0.0];

/// Names of every built-in scenario.
pub const NAMES: [&str; 20] = [
    "canonical-wrap",
    "canonical-pinch",
    "canonical-tripod",
    "canonical-lateral",
    "slide-then-lift",
    "slide-then-lift-far",
    "approach-retreat-approach",
    "approach-retreat-pause-approach",
    "transport-with-dip",
    "transport-with-offset-dip",
    "tray-carry",
    "tray-carry-far",
    "multi-object-grasp",
    "grasp-fridge-handle",
    "grasp-drawer-handle",
    "release-mid-air",
    "release-mid-air-high",
    "two-pick-and-place",
    "transport-then-slide",
    "left-hand-canonical",
];

pub fn scenarios() -> Vec<ScenarioScript> {
    NAMES.iter().map(|n| by_name(n).expect("listed scenario")).collect()
}

pub fn by_name(name: &str) -> Option<ScenarioScript> {
    let s = match name {
        "canonical-wrap" => canonical(name, GraspStyle::Wrap, cup()),
        "canonical-pinch" => canonical(name, GraspStyle::Pinch, small_box()),
        "canonical-tripod" => canonical(name, GraspStyle::Tripod, cup()),
        "canonical-lateral" => canonical(name, GraspStyle::Lateral, small_box()),
        "slide-then-lift" => slide_then_lift(name, 0.3),
        "slide-then-lift-far" => slide_then_lift(name, 0.4),
        "approach-retreat-approach" => approach_retreat(name, 0.0),
        "approach-retreat-pause-approach" => approach_retreat(name, 0.25),
        "transport-with-dip" => dip(name, 0.0),
        "transport-with-offset-dip" => dip(name, 0.05),
        "tray-carry" => tray_carry(name, 0.4),
        "tray-carry-far" => tray_carry(name, 0.5),
        "multi-object-grasp" => multi_object(name),
        "grasp-fridge-handle" => furniture(name, "FridgeDoor", "FridgeHandle", "Fridge"),
        "grasp-drawer-handle" => furniture(name, "Drawer", "DrawerHandle", "Cabinet"),
        "release-mid-air" => release_mid_air(name, 0.2),
        "release-mid-air-high" => release_mid_air(name, 0.3),
        "two-pick-and-place" => two_pick_and_place(name),
        "transport-then-slide" => transport_then_slide(name),
        "left-hand-canonical" => left_hand(name),
        _ => return None,
    };
    Some(s)
}

#[derive(Debug, Clone, Copy)]
struct Obj {
    class: &'static str,
    parent: &'static str,
    shape: Shape,
    mass: f64,
}

fn cup() -> Obj {
    Obj {
        class: "Cup",
        parent: "Container",
        shape: Shape::Cylinder {
            radius: 0.03,
            half_height: 0.05,
        },
        mass: 0.3,
    }
}

fn small_box() -> Obj {
    Obj {
        class: "SpiceBox",
        parent: "Box",
        shape: Shape::Box {
            half_extents: [0.03, 0.03, 0.06],
        },
        mass: 0.2,
    }
}

fn cereal_box() -> Obj {
    Obj {
        class: "CerealBox",
        parent: "Box",
        shape: Shape::Box {
            half_extents: [0.03, 0.08, 0.12],
        },
        mass: 0.5,
    }
}

impl Obj {
    fn half(&self) -> Vec3 {
        self.shape.local_half_extents()
    }

    fn rest_z(&self) -> f64 {
        TABLE_TOP + self.half().z
    }

    fn entity(&self, name: &str, x: f64, y: f64) -> ScenarioEntity {
        ScenarioEntity::new(
            name,
            ClassTag::with_parents(self.class, [self.parent]),
            self.shape,
            self.mass,
            Vec3::new(x, y, self.rest_z()),
        )
    }

    /// Hand position touching the object's -x face, object resting at (x, y).
    fn grip_point(&self, x: f64, y: f64) -> Vec3 {
        Vec3::new(x - self.half().x - HAND_RADIUS, y, self.rest_z().max(TABLE_TOP + HAND_RADIUS + 0.01))
    }
}

fn table() -> ScenarioEntity {
    ScenarioEntity::new(
        "table",
        ClassTag::with_parents("Table", ["Furniture"]),
        Shape::Box {
            half_extents: [0.6, 0.5, 0.02],
        },
        0.0,
        Vec3::new(0.5, 0.0, TABLE_TOP - 0.02),
    )
}

fn hand(name: &str, at: Vec3) -> ScenarioEntity {
    ScenarioEntity::new(
        name,
        ClassTag::with_parents("Hand", ["BodyPart"]),
        Shape::Sphere { radius: HAND_RADIUS },
        1.0,
        at,
    )
}

fn script(name: &str, entities: Vec<ScenarioEntity>, directives: Vec<Directive>) -> ScenarioScript {
    ScenarioScript {
        name: name.into(),
        seed: 7,
        frame_rate: DEFAULT_FRAME_RATE,
        duration: None,
        head: [-0.3, 0.0, 1.55],
        gaze_offset: [0.0, 0.0, 0.0],
        entities,
        directives,
        ground_truth: Vec::new(),
    }
}

fn up(p: Vec3, dz: f64) -> Vec3 {
    p + Vec3::new(0.0, 0.0, dz)
}

fn shift(p: Vec3, dx: f64, dy: f64) -> Vec3 {
    p + Vec3::new(dx, dy, 0.0)
}

/// Wait, reach, fixate, grasp, lift, carry, lower and release.
fn pick_and_place(hand: &str, style: GraspStyle, grip: Vec3, carry: Vec3, home: Vec3) -> Vec<Directive> {
    let lifted = up(grip, 0.2);
    let above = lifted + carry;
    let placed = grip + carry;
    vec![
        Directive::wait(0.5),
        Directive::move_hand(hand, grip, 1.0).labeled("reach"),
        Directive::wait(0.2),
        Directive::set_grasp(hand, style, 1.0, 0.3),
        Directive::wait(0.2),
        Directive::move_hand(hand, lifted, 0.8).labeled("lift"),
        Directive::move_hand(hand, above, 1.5).labeled("transport"),
        Directive::move_hand(hand, placed, 1.0).labeled("putdown"),
        Directive::wait(0.2),
        Directive::set_grasp(hand, style, 0.0, 0.3),
        Directive::wait(0.2),
        Directive::move_hand(hand, home, 0.8).labeled("retreat"),
    ]
}

fn canonical(name: &str, style: GraspStyle, obj: Obj) -> ScenarioScript {
    let (x, y) = (0.38, -0.15);
    let start = Vec3::new(0.05, y, 0.95);
    let grip = obj.grip_point(x, y);
    let carry = Vec3::new(0.0, 0.4, 0.0);
    script(
        name,
        vec![table(), hand(RIGHT, start), obj.entity("object", x, y)],
        pick_and_place(RIGHT, style, grip, carry, shift(start, 0.0, 0.4)),
    )
}

fn left_hand(name: &str) -> ScenarioScript {
    let obj = cup();
    let (x, y) = (0.38, 0.15);
    let start = Vec3::new(0.05, y, 0.95);
    let grip = obj.grip_point(x, y);
    script(
        name,
        vec![
            table(),
            hand(RIGHT, Vec3::new(0.05, -0.3, 0.95)),
            hand(LEFT, start),
            obj.entity("cup", x, y),
        ],
        pick_and_place(LEFT, GraspStyle::Wrap, grip, Vec3::new(0.0, -0.35, 0.0), shift(start, 0.0, -0.35)),
    )
}

fn slide_then_lift(name: &str, slide: f64) -> ScenarioScript {
    let obj = cereal_box();
    let (x, y) = (0.38, -0.2);
    let start = Vec3::new(0.05, y, 0.95);
    let grip = obj.grip_point(x, y);
    let slid = shift(grip, 0.0, slide);
    let lifted = up(slid, 0.2);
    let above = shift(lifted, 0.1, 0.0);
    let placed = shift(slid, 0.1, 0.0);
    script(
        name,
        vec![table(), hand(RIGHT, start), obj.entity("cereal", x, y)],
        vec![
            Directive::wait(0.5),
            Directive::move_hand(RIGHT, grip, 1.0).labeled("reach"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 1.0, 0.3),
            Directive::wait(0.3),
            Directive::move_hand(RIGHT, slid, 1.2).labeled("slide"),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, lifted, 0.8).labeled("lift"),
            Directive::move_hand(RIGHT, above, 0.8).labeled("transport"),
            Directive::move_hand(RIGHT, placed, 1.0).labeled("putdown"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 0.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, up(placed, 0.2), 0.8).labeled("retreat"),
        ],
    )
}

fn approach_retreat(name: &str, pause: f64) -> ScenarioScript {
    let obj = cup();
    let (x, y) = (0.38, -0.15);
    let start = Vec3::new(0.05, y, 0.95);
    let grip = obj.grip_point(x, y);
    let mut d = vec![
        Directive::wait(0.5),
        Directive::move_hand(RIGHT, Vec3::new(0.2, y, 0.85), 0.6).labeled("reach"),
        Directive::move_hand(RIGHT, Vec3::new(0.12, y, 0.92), 0.3).labeled("retreat"),
    ];
    if pause > 0.0 {
        d.push(Directive::wait(pause));
    }
    d.push(Directive::move_hand(RIGHT, grip, 0.8).labeled("reach"));
    let mut rest = pick_and_place(RIGHT, GraspStyle::Wrap, grip, Vec3::new(0.0, 0.35, 0.0), shift(start, 0.0, 0.35));
    rest.drain(..2);
    d.extend(rest);
    script(name, vec![table(), hand(RIGHT, start), obj.entity("cup", x, y)], d)
}

fn dip(name: &str, offset: f64) -> ScenarioScript {
    let obj = cup();
    let (x, y) = (0.38, -0.15);
    let start = Vec3::new(0.05, y, 0.95);
    let grip = obj.grip_point(x, y);
    let placed = shift(grip, 0.0, 0.4);
    script(
        name,
        vec![table(), hand(RIGHT, start), obj.entity("cup", x, y)],
        vec![
            Directive::wait(0.5),
            Directive::move_hand(RIGHT, grip, 1.0).labeled("reach"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 1.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, up(grip, 0.2), 0.8).labeled("lift"),
            Directive::move_hand(RIGHT, up(placed, 0.2), 1.2).labeled("transport"),
            Directive::move_hand(RIGHT, up(shift(placed, 0.0, -offset), 0.04), 0.6).labeled("dip"),
            Directive::move_hand(RIGHT, up(placed, 0.08), 0.5).labeled("retreat"),
            Directive::move_hand(RIGHT, placed, 0.8).labeled("putdown"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 0.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, up(placed, 0.2), 0.8).labeled("retreat"),
        ],
    )
}

fn tray_carry(name: &str, carry: f64) -> ScenarioScript {
    let tray = ScenarioEntity::new(
        "tray",
        ClassTag::with_parents("Tray", ["Container"]),
        Shape::Box {
            half_extents: [0.15, 0.1, 0.01],
        },
        0.4,
        Vec3::new(0.45, -0.2, TABLE_TOP + 0.01),
    );
    let cup = cup();
    let mut cup_entity = cup.entity("cup", 0.5, -0.2);
    cup_entity.pose.position.z = TABLE_TOP + 0.02 + cup.half().z;
    let grip = Vec3::new(0.33, -0.2, TABLE_TOP + 0.02 + HAND_RADIUS);
    let start = Pose::new(up(grip, 0.22), PALM_DOWN).expect("unit quaternion");
    let lifted = up(grip, 0.25);
    let above = shift(lifted, 0.0, carry);
    let placed = shift(grip, 0.0, carry);
    script(
        name,
        vec![table(), hand(RIGHT, start.position).with_pose(start), tray, cup_entity],
        vec![
            Directive::wait(0.5),
            Directive::move_hand(RIGHT, grip, 0.8).labeled("reach"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 1.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, lifted, 1.0).labeled("lift"),
            Directive::move_hand(RIGHT, above, 1.5).labeled("transport"),
            Directive::move_hand(RIGHT, placed, 1.0).labeled("putdown"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 0.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, up(placed, 0.2), 0.8).labeled("retreat"),
        ],
    )
}

fn multi_object(name: &str) -> ScenarioScript {
    let obj = Obj {
        class: "SpiceBox",
        parent: "Box",
        shape: Shape::Box {
            half_extents: [0.03, 0.03, 0.05],
        },
        mass: 0.15,
    };
    let (x, y) = (0.38, -0.15);
    let gap = obj.half().y + HAND_RADIUS;
    let start = Vec3::new(0.05, y, 0.95);
    let grip = Vec3::new(x, y, obj.rest_z());
    script(
        name,
        vec![
            table(),
            hand(RIGHT, start),
            obj.entity("salt", x, y - gap),
            obj.entity("pepper", x, y + gap),
        ],
        pick_and_place(RIGHT, GraspStyle::Tripod, grip, Vec3::new(0.0, 0.35, 0.0), Vec3::new(0.05, 0.2, 0.95)),
    )
}

fn furniture(name: &str, part_class: &str, handle_class: &str, body_class: &str) -> ScenarioScript {
    let body = ScenarioEntity::new(
        "body",
        ClassTag::with_parents(body_class, ["Furniture"]),
        Shape::Box {
            half_extents: [0.3, 0.35, 0.6],
        },
        0.0,
        Vec3::new(1.2, -0.15, 0.6),
    )
    .with_parts(&["front"]);
    let front = ScenarioEntity::new(
        "front",
        ClassTag::with_parents(part_class, ["FurniturePart"]),
        Shape::Box {
            half_extents: [0.02, 0.33, 0.3],
        },
        0.0,
        Vec3::new(0.88, -0.15, 0.9),
    )
    .with_parts(&["handle"]);
    let handle = ScenarioEntity::new(
        "handle",
        ClassTag::with_parents(handle_class, ["Handle"]),
        Shape::Box {
            half_extents: [0.015, 0.01, 0.08],
        },
        0.0,
        Vec3::new(0.845, -0.15, 0.95),
    );
    let start = Vec3::new(0.5, -0.15, 1.0);
    let grip = Vec3::new(0.83 - HAND_RADIUS, -0.15, 0.95);
    script(
        name,
        vec![hand(RIGHT, start), body, front, handle],
        vec![
            Directive::wait(0.5),
            Directive::move_hand(RIGHT, grip, 1.0).labeled("reach"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 1.0, 0.3),
            Directive::wait(0.6),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 0.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, start, 0.8).labeled("retreat"),
        ],
    )
}

fn release_mid_air(name: &str, height: f64) -> ScenarioScript {
    let obj = cup();
    let (x, y) = (0.38, -0.15);
    let start = Vec3::new(0.05, y, 0.95);
    let grip = obj.grip_point(x, y);
    let above = shift(up(grip, height), 0.0, 0.3);
    script(
        name,
        vec![table(), hand(RIGHT, start), obj.entity("cup", x, y)],
        vec![
            Directive::wait(0.5),
            Directive::move_hand(RIGHT, grip, 1.0).labeled("reach"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 1.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, up(grip, height), 0.8).labeled("lift"),
            Directive::move_hand(RIGHT, above, 1.2).labeled("transport"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Wrap, 0.0, 0.3),
            Directive::move_hand(RIGHT, shift(above, -0.2, 0.0), 0.8).labeled("retreat"),
        ],
    )
}

fn two_pick_and_place(name: &str) -> ScenarioScript {
    let (a, b) = (cup(), small_box());
    let start = Vec3::new(0.05, -0.3, 0.95);
    let grip_a = a.grip_point(0.38, -0.3);
    let grip_b = b.grip_point(0.38, 0.15);
    let home_a = Vec3::new(0.05, 0.15, 0.95);
    let mut d = pick_and_place(RIGHT, GraspStyle::Wrap, grip_a, Vec3::new(0.0, 0.2, 0.0), home_a);
    d.extend(pick_and_place(
        RIGHT,
        GraspStyle::Pinch,
        grip_b,
        Vec3::new(0.0, 0.25, 0.0),
        Vec3::new(0.05, 0.4, 0.95),
    ));
    script(
        name,
        vec![table(), hand(RIGHT, start), a.entity("cup", 0.38, -0.3), b.entity("spices", 0.38, 0.15)],
        d,
    )
}

fn transport_then_slide(name: &str) -> ScenarioScript {
    let obj = small_box();
    let (x, y) = (0.38, -0.2);
    let start = Vec3::new(0.05, y, 0.95);
    let grip = obj.grip_point(x, y);
    let lowered = up(shift(grip, 0.0, 0.15), 0.03);
    let landed = shift(grip, 0.0, 0.3);
    let slid = shift(landed, 0.0, 0.15);
    script(
        name,
        vec![table(), hand(RIGHT, start), obj.entity("spices", x, y)],
        vec![
            Directive::wait(0.5),
            Directive::move_hand(RIGHT, grip, 1.0).labeled("reach"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Pinch, 1.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, up(grip, 0.2), 0.8).labeled("lift"),
            Directive::move_hand(RIGHT, up(shift(grip, 0.0, 0.15), 0.2), 0.8).labeled("transport"),
            Directive::move_hand(RIGHT, lowered, 0.8).labeled("lower"),
            Directive::move_hand(RIGHT, landed, 1.0).labeled("land"),
            Directive::move_hand(RIGHT, slid, 0.8).labeled("slide"),
            Directive::wait(0.2),
            Directive::set_grasp(RIGHT, GraspStyle::Pinch, 0.0, 0.3),
            Directive::wait(0.2),
            Directive::move_hand(RIGHT, up(slid, 0.2), 0.8).labeled("retreat"),
        ],
    )
}

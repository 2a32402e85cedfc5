#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;

use forcelog::epmem::Store;
use forcelog::model::{ClassTag, EntityId, EntitySpec, Event, EventKind, EventSource, GraspStyle, Participants, Shape, Vec3};
use forcelog::monitors::Parser;
use forcelog::tracegen::library::{HAND_RADIUS, TABLE_TOP};
use forcelog::tracegen::{simulate, Directive, ScenarioEntity, ScenarioScript, SimOutput};
use forcelog::Config;

pub const HAND: &str = "right_hand";

#[derive(Debug, Clone, Copy)]
pub struct Obj {
    pub class: &'static str,
    pub parent: &'static str,
    pub shape: Shape,
    pub mass: f64,
}

pub const OBJECTS: [Obj; 4] = [
    Obj {
        class: "Cup",
        parent: "Container",
        shape: Shape::Cylinder {
            radius: 0.03,
            half_height: 0.05,
        },
        mass: 0.3,
    },
    Obj {
        class: "SpiceBox",
        parent: "Box",
        shape: Shape::Box {
            half_extents: [0.03, 0.03, 0.06],
        },
        mass: 0.2,
    },
    Obj {
        class: "CerealBox",
        parent: "Box",
        shape: Shape::Box {
            half_extents: [0.03, 0.08, 0.12],
        },
        mass: 0.5,
    },
    Obj {
        class: "Tray",
        parent: "Container",
        shape: Shape::Box {
            half_extents: [0.15, 0.1, 0.01],
        },
        mass: 0.4,
    },
];

impl Obj {
    pub fn half(&self) -> Vec3 {
        self.shape.local_half_extents()
    }

    pub fn entity(&self, name: &str, x: f64, y: f64, base: f64) -> ScenarioEntity {
        ScenarioEntity::new(
            name,
            ClassTag::with_parents(self.class, [self.parent]),
            self.shape,
            self.mass,
            Vec3::new(x, y, base + self.half().z),
        )
    }

    pub fn grip(&self, x: f64, y: f64, base: f64) -> Vec3 {
        let z = (base + self.half().z).max(TABLE_TOP + HAND_RADIUS + 0.01);
        Vec3::new(x - self.half().x - HAND_RADIUS, y, z)
    }
}

pub fn table() -> ScenarioEntity {
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

pub fn hand(name: &str, at: Vec3) -> ScenarioEntity {
    ScenarioEntity::new(
        name,
        ClassTag::with_parents("Hand", ["BodyPart"]),
        Shape::Sphere { radius: HAND_RADIUS },
        1.0,
        at,
    )
}

/// A random desk script: a few objects (sometimes a loaded tray) and one
/// hand doing random reaches, grasps, lifts, carries, placements and
/// mid-air releases.
pub fn fuzz_script<R: Rng>(rng: &mut R, name: &str) -> ScenarioScript {
    let mut entities = vec![table()];
    let start = Vec3::new(rng.gen_range(0.0..0.12), rng.gen_range(-0.3..0.3), rng.gen_range(0.9..1.0));
    entities.push(hand(HAND, start));
    let mut placed: Vec<(Obj, f64, f64, f64)> = Vec::new();
    let n = rng.gen_range(1..=3);
    let mut tries = 0;
    while placed.len() < n && tries < 50 {
        tries += 1;
        let obj = OBJECTS[rng.gen_range(0..OBJECTS.len())];
        let (x, y) = (rng.gen_range(0.3..0.7), rng.gen_range(-0.3..0.3));
        let clear = placed.iter().all(|(o, px, py, _)| {
            (x - px).abs() > o.half().x + obj.half().x + 0.1 || (y - py).abs() > o.half().y + obj.half().y + 0.1
        });
        if !clear {
            continue;
        }
        placed.push((obj, x, y, TABLE_TOP));
        if obj.class == "Tray" && rng.gen_bool(0.6) {
            let cup = OBJECTS[0];
            placed.push((cup, x + rng.gen_range(0.0..0.08), y + rng.gen_range(-0.05..0.05), TABLE_TOP + 0.02));
        }
    }
    for (i, (o, x, y, base)) in placed.iter().enumerate() {
        entities.push(o.entity(&format!("obj{i}"), *x, *y, *base));
    }

    let mut d = vec![Directive::wait(rng.gen_range(0.1..0.4))];
    let actions = rng.gen_range(1..=2);
    let mut here = start;
    for _ in 0..actions {
        let (o, x, y, base) = placed[rng.gen_range(0..placed.len())];
        let grip = o.grip(x, y, base);
        let style = GraspStyle::ALL[rng.gen_range(0..4)];
        match rng.gen_range(0..10) {
            0 => {
                // wander without touching anything
                let to = Vec3::new(rng.gen_range(0.0..0.2), rng.gen_range(-0.3..0.3), rng.gen_range(0.85..1.0));
                d.push(Directive::move_hand(HAND, to, rng.gen_range(0.3..0.8)));
                here = to;
                continue;
            }
            1 => {
                // reach and retreat
                d.push(Directive::move_hand(HAND, grip, rng.gen_range(0.5..1.0)).labeled("reach"));
                d.push(Directive::move_hand(HAND, here, rng.gen_range(0.4..0.8)).labeled("retreat"));
                continue;
            }
            _ => {}
        }
        d.push(Directive::move_hand(HAND, grip, rng.gen_range(0.5..1.0)).labeled("reach"));
        d.push(Directive::wait(rng.gen_range(0.0..0.3)));
        let u = if rng.gen_bool(0.85) { 1.0 } else { rng.gen_range(0.0..1.0) };
        d.push(Directive::set_grasp(HAND, style, u, rng.gen_range(0.15..0.4)));
        d.push(Directive::wait(rng.gen_range(0.0..0.3)));
        if rng.gen_bool(0.25) {
            let slid = grip + Vec3::new(0.0, rng.gen_range(-0.15..0.15), 0.0);
            d.push(Directive::move_hand(HAND, slid, rng.gen_range(0.4..1.0)).labeled("slide"));
        }
        let lift = rng.gen_range(0.05..0.3);
        let carry = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.25..0.25), 0.0);
        let lifted = grip + Vec3::new(0.0, 0.0, lift);
        let above = lifted + carry;
        d.push(Directive::move_hand(HAND, lifted, rng.gen_range(0.4..0.9)).labeled("lift"));
        d.push(Directive::move_hand(HAND, above, rng.gen_range(0.5..1.2)).labeled("transport"));
        if rng.gen_bool(0.7) {
            let down = grip + carry + Vec3::new(0.0, 0.0, rng.gen_range(0.0..0.01));
            d.push(Directive::move_hand(HAND, down, rng.gen_range(0.4..1.0)).labeled("putdown"));
        }
        d.push(Directive::wait(rng.gen_range(0.0..0.2)));
        d.push(Directive::set_grasp(HAND, style, 0.0, rng.gen_range(0.15..0.4)));
        here = above + Vec3::new(-0.1, 0.0, 0.1);
        d.push(Directive::move_hand(HAND, here, rng.gen_range(0.4..0.8)).labeled("retreat"));
    }

    ScenarioScript {
        name: name.into(),
        seed: rng.gen(),
        frame_rate: 90.0,
        duration: None,
        head: [-0.3, 0.0, 1.55],
        gaze_offset: [0.0, 0.0, 0.0],
        entities,
        directives: d,
        ground_truth: Vec::new(),
    }
}

/// Event namespace used by seeded monitor runs in tests.
pub fn namespace(sim: &SimOutput) -> Option<EntityId> {
    forcelog::model::IdMinter::seeded(sim.trace.header.seed.unwrap_or(0)).event_namespace(&sim.trace.header.task)
}

/// Full parse, with the frame index at which each event was emitted.
pub fn parse_logged(sim: &SimOutput, config: &Config) -> Vec<(usize, Event)> {
    let mut p = Parser::new(&sim.entities, config, namespace(sim)).expect("parser");
    let mut out = Vec::new();
    for (k, f) in sim.trace.frames.iter().enumerate() {
        out.extend(p.step(f).expect("step").into_iter().map(|e| (k, e)));
    }
    let n = sim.trace.frames.len();
    out.extend(p.finish().into_iter().map(|e| (n, e)));
    out
}

pub fn parse(sim: &SimOutput, config: &Config) -> Vec<Event> {
    parse_logged(sim, config).into_iter().map(|(_, e)| e).collect()
}

pub fn run(name: &str) -> SimOutput {
    let script = forcelog::tracegen::library::by_name(name).expect("builtin scenario");
    simulate(&script, &Config::default()).expect("simulation")
}

/// Streams a simulated trace into the store as one sealed episode.
pub fn load_episode(store: &mut Store, sim: &SimOutput, config: &Config) -> EntityId {
    let header = &sim.trace.header;
    let task = match store.task_by_name(&header.task) {
        Some(t) => t.id,
        None => store.create_task_with(&header.task, header.entities.clone()).expect("task").id,
    };
    let ep = store.create_episode(&task, Some(header.frame_rate)).expect("episode").id;
    let ns = store.minter().is_seeded().then(|| ep.derive("events"));
    let mut p = Parser::new(&sim.entities, config, ns).expect("parser");
    for f in &sim.trace.frames {
        let events = p.step(f).expect("step");
        store.append_frame(&ep, f).expect("append");
        for e in &events {
            store.store_event(&ep, e).expect("store event");
        }
    }
    for e in p.finish() {
        store.store_event(&ep, &e).expect("store event");
    }
    store.seal_episode(&ep).expect("seal");
    ep
}

pub fn spec(name: &str, class: &str, parent: &str, mass: f64) -> EntitySpec {
    EntitySpec {
        name: name.into(),
        class: ClassTag::with_parents(class, [parent]),
        shape: Shape::Sphere { radius: 0.04 },
        mass,
        parts: Vec::new(),
    }
}

/// Entities of the synthetic event stores.
pub fn random_store_specs() -> Vec<EntitySpec> {
    vec![
        spec("table", "Table", "Furniture", 0.0),
        spec("left_hand", "Hand", "BodyPart", 1.0),
        spec("right_hand", "Hand", "BodyPart", 1.0),
        spec("cup", "Cup", "Container", 0.3),
        spec("mug", "Cup", "Container", 0.35),
        spec("tray", "Tray", "Container", 0.4),
        spec("spice", "SpiceBox", "Box", 0.2),
        spec("cereal", "CerealBox", "Box", 0.5),
    ]
}

pub const KINDS: [EventKind; 9] = [
    EventKind::Contact,
    EventKind::SupportedBy,
    EventKind::Grasping,
    EventKind::Reaching,
    EventKind::Fixation,
    EventKind::Sliding,
    EventKind::PickingUp,
    EventKind::Transporting,
    EventKind::PuttingDown,
];

/// Random events over `[0, horizon]` between the given hands and objects.
pub fn random_events<R: Rng>(
    rng: &mut R,
    n: usize,
    horizon: f64,
    hands: &[EntityId],
    objects: &[EntityId],
    ns: EntityId,
) -> Vec<Event> {
    (0..n)
        .map(|i| {
            let kind = KINDS[rng.gen_range(0..KINDS.len())].clone();
            let start = (rng.gen_range(0.0..horizon) * 10.0).round() / 10.0;
            let end = (start + rng.gen_range(0.0..2.0_f64)).min(horizon);
            let object = objects[rng.gen_range(0..objects.len())];
            let mut participants = Participants {
                object: Some(object),
                ..Default::default()
            };
            match kind {
                EventKind::Contact => participants.other = Some(hands[rng.gen_range(0..hands.len())]),
                EventKind::SupportedBy => participants.supporter = Some(objects[rng.gen_range(0..objects.len())]),
                _ => participants.performer = Some(hands[rng.gen_range(0..hands.len())]),
            }
            let mut attributes = BTreeMap::new();
            if kind == EventKind::Grasping {
                attributes.insert("grasp_style".to_string(), serde_json::json!("wrap"));
            }
            Event {
                id: ns.derive(&format!("e{i}")),
                kind,
                start,
                end,
                participants,
                attributes,
                source: EventSource::Monitor,
            }
        })
        .collect()
}

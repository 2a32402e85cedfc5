//! Acceptance suite. Each criterion prints one `criterion N ...: PASS|FAIL`
//! line and asserts at the stated tolerance; the process fails if any does.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forcelog::epmem::{EventFilter, Store};
use forcelog::model::{
    allen_relation, AllenRelation, EntityId, Event, EventKind, EventSource, Frame, GraspStyle, HandState, IdMinter, Interval, Participants, Vec3,
};
use forcelog::monitors::{grasp_predicate, GraspChange, GraspMonitor, Parser};
use forcelog::query::{
    default_rules, find_matches, select, CompositionRule, Engine, EntityConstraint, QueryDocument, QueryPattern,
    SubAction,
};
use forcelog::tracegen::library::{self, NAMES};
use forcelog::tracegen::{joint_driver_torque, pid3_step, simulate, JointDriver, Pid3Config, Pid3State};
use forcelog::Config;

fn main() {
    let criteria: [(&str, fn()); 8] = [
        ("criterion 1", criterion_1_grammar_end_to_end),
        ("criterion 2", criterion_2_grasp_oracle),
        ("criterion 3", criterion_3_supported_by_containment),
        ("criterion 4", criterion_4_index_complexity),
        ("criterion 5", criterion_5_query_compose_equivalence),
        ("criterion 6", criterion_6_controllers),
        ("criterion 7", criterion_7_determinism_and_durability),
        ("criterion 8", criterion_8_online_property),
    ];
    let began = Instant::now();
    let failed: Vec<&str> = criteria
        .iter()
        .filter(|(name, f)| {
            let ok = std::panic::catch_unwind(f).is_ok();
            if !ok {
                println!("{name}: FAIL (panicked)");
            }
            !ok
        })
        .map(|(name, _)| *name)
        .collect();
    println!(
        "acceptance: {} passed, {} failed in {:.2}s",
        criteria.len() - failed.len(),
        failed.len(),
        began.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn report(n: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {n} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------------------
// 1. grammar end-to-end

fn criterion_1_grammar_end_to_end() {
    let cfg = Config::default();
    let tol = 2.0 / 90.0 + 1e-9;
    let began = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for name in NAMES {
        let sim = common::run(name);
        let got: Vec<Event> = common::parse(&sim, &cfg).into_iter().filter(|e| e.kind.is_manipulation()).collect();
        let want: Vec<Event> = sim.truth.iter().filter(|e| e.kind.is_manipulation()).cloned().collect();
        // one sequence per (hand, object) track
        let tracks = |v: &[Event]| {
            let mut m: BTreeMap<(Option<EntityId>, Option<EntityId>), Vec<Event>> = BTreeMap::new();
            for e in v {
                m.entry((e.participants.performer, e.participants.object)).or_default().push(e.clone());
            }
            for seq in m.values_mut() {
                seq.sort_by(|a, b| a.listing_cmp(b));
            }
            m
        };
        let (got, want) = (tracks(&got), tracks(&want));
        let types = |m: &BTreeMap<_, Vec<Event>>| {
            m.iter()
                .map(|(k, v): (&(Option<EntityId>, Option<EntityId>), &Vec<Event>)| (*k, v.iter().map(|e| e.kind.clone()).collect::<Vec<_>>()))
                .collect::<Vec<_>>()
        };
        if types(&got) != types(&want) {
            failures.push(format!("{name}: type sequences {:?} != {:?}", types(&got), types(&want)));
            continue;
        }
        for (g, w) in got.values().flatten().zip(want.values().flatten()) {
            let d = (g.start - w.start).abs().max((g.end - w.end).abs());
            worst = worst.max(d);
            if d > tol {
                failures.push(format!("{name}: {} boundary off by {d:.4} s", g.kind));
            }
        }
    }
    let elapsed = began.elapsed().as_secs_f64();
    let ok = failures.is_empty() && elapsed < 10.0;
    report(
        1,
        "grammar end-to-end",
        ok,
        &format!("20 scenarios, worst boundary {:.1} ms, {elapsed:.2} s", worst * 1e3),
    );
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(elapsed < 10.0, "took {elapsed} s");
}

// ---------------------------------------------------------------------------
// 2. grasp grammar oracle

fn criterion_2_grasp_oracle() {
    let cfg = Config::default().grasp;
    let sets = ["thumb", "fingers", "palm"];
    let hand = EntityId::random();
    let object = EntityId::random();
    let inputs = [0.0, cfg.g_min - 0.05, cfg.g_min, cfg.g_min + 1e-9, 0.5, 1.0];
    let (mut cases, mut mismatches) = (0, 0);
    for mask in 0u8..8 {
        let subset: Vec<&str> = (0..3).filter(|i| mask & (1 << i) != 0).map(|i| sets[i]).collect();
        for style in GraspStyle::ALL {
            for &input in &inputs {
                let expect = input > 0.1 && subset.len() >= 2;
                let direct = grasp_predicate(&cfg, input, subset.iter().copied()).unwrap();
                let mut monitor = GraspMonitor::new(&cfg);
                let mut frame = Frame::empty(0.0);
                frame.hands.push(HandState {
                    hand_id: hand,
                    grasp_style: style,
                    grasp_input: input,
                    sensor_contacts: subset.iter().map(|s| (s.to_string(), BTreeSet::from([object]))).collect(),
                });
                let opened = monitor
                    .step(&frame)
                    .unwrap()
                    .iter()
                    .any(|c| matches!(c, GraspChange::Opened { hand: h, object: o, .. } if *h == hand && *o == object));
                cases += 1;
                if direct != expect || opened != expect {
                    mismatches += 1;
                }
            }
        }
    }
    report(2, "grasp oracle", mismatches == 0, &format!("{cases} cases, {mismatches} mismatches"));
    assert_eq!(cfg.g_min, 0.1);
    assert_eq!(mismatches, 0);
}

// ---------------------------------------------------------------------------
// 3. supported-by containment

fn support_violations(events: &[Event]) -> Vec<String> {
    let contacts: Vec<&Event> = events.iter().filter(|e| e.kind == EventKind::Contact).collect();
    let pair = |e: &Event| {
        let ids: BTreeSet<EntityId> = e.participants.ids().collect();
        ids
    };
    events
        .iter()
        .filter(|e| e.kind == EventKind::SupportedBy)
        .filter(|s| {
            !contacts
                .iter()
                .any(|c| pair(c) == pair(s) && c.start <= s.start && s.end <= c.end)
        })
        .map(|s| format!("SupportedBy [{}, {}] {:?}", s.start, s.end, pair(s)))
        .collect()
}

fn criterion_3_supported_by_containment() {
    let cfg = Config::default();
    let (mut supports, mut bad) = (0usize, Vec::new());
    for i in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + i);
        let script = common::fuzz_script(&mut rng, &format!("fuzz-{i}"));
        let sim = simulate(&script, &cfg).unwrap_or_else(|e| panic!("fuzz script {i}: {e}"));
        let events = common::parse(&sim, &cfg);
        supports += events.iter().filter(|e| e.kind == EventKind::SupportedBy).count();
        for v in support_violations(&events) {
            bad.push(format!("script {i}: {v}"));
        }
    }

    let sim = common::run("tray-carry");
    let events = common::parse(&sim, &cfg);
    let cup = sim.entities.by_name("cup").unwrap().id;
    let tray = sim.entities.by_name("tray").unwrap().id;
    let transport = events
        .iter()
        .find(|e| e.kind == EventKind::Transporting && e.participants.object == Some(tray))
        .expect("tray transport")
        .interval();
    let covered: f64 = events
        .iter()
        .filter(|e| {
            e.kind == EventKind::SupportedBy && e.participants.object == Some(cup) && e.participants.supporter == Some(tray)
        })
        .map(|e| e.interval().overlap(&transport))
        .sum();
    let coverage = covered / transport.duration();

    let ok = bad.is_empty() && coverage >= 0.99;
    report(
        3,
        "supported-by containment",
        ok,
        &format!("1000 fuzzed traces, {supports} SupportedBy, {} violations, tray coverage {:.2}%", bad.len(), coverage * 100.0),
    );
    assert!(bad.is_empty(), "{bad:#?}");
    assert!(supports > 1000, "fuzzing produced too few supports: {supports}");
    assert!(coverage >= 0.99, "coverage {coverage}");
}

// ---------------------------------------------------------------------------
// 4. index complexity

fn linear_predecessor(times: &[f64], t: f64) -> Option<usize> {
    let mut out = None;
    for (k, &x) in times.iter().enumerate() {
        if x <= t {
            out = Some(k);
        }
    }
    out
}

fn index_battery(n: usize, seed: u64) -> (usize, usize, f64) {
    let began = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path(), Some(seed)).unwrap();
    let task = store.create_task("index", &[common::spec("table", "Table", "Furniture", 0.0)]).unwrap();
    let ep = store.create_episode(&task.id, Some(90.0)).unwrap().id;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(n);
    let mut t = 0.0;
    for _ in 0..n {
        t += rng.gen_range(0.001..0.02);
        times.push(t);
        store.append_frame(&ep, &Frame::empty(t)).unwrap();
    }
    store.seal_episode(&ep).unwrap();
    let bound = (n as f64).log2().ceil() as usize + 3;
    let (mut worst, mut wrong) = (0, 0);
    let (lo, hi) = (times[0] - 1.0, times[n - 1] + 1.0);
    for q in 0..1000 {
        let t = match q % 4 {
            0 => times[rng.gen_range(0..n)],
            _ => rng.gen_range(lo..hi),
        };
        let want = linear_predecessor(&times, t);
        match (store.frame_at_probed(&ep, t), want) {
            (Ok((f, probes)), Some(k)) => {
                worst = worst.max(probes);
                if f.t != times[k] {
                    wrong += 1;
                }
            }
            (Err(forcelog::Error::NotFound(_)), None) => {}
            _ => wrong += 1,
        }
    }
    assert!(worst <= bound, "n={n}: {worst} probes > {bound}");
    (worst, wrong, began.elapsed().as_secs_f64())
}

fn criterion_4_index_complexity() {
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, seed) in [(100usize, 1u64), (10_000, 2), (1_000_000, 3)] {
        let (worst, wrong, secs) = index_battery(n, seed);
        let bound = (n as f64).log2().ceil() as usize + 3;
        ok &= worst <= bound && wrong == 0 && (n < 1_000_000 || secs < 60.0);
        lines.push(format!("n={n}: {worst}/{bound} probes, {wrong} wrong, {secs:.1} s"));
        assert_eq!(wrong, 0, "n={n}");
        if n == 1_000_000 {
            assert!(secs < 60.0, "1e6 build and battery took {secs} s");
        }
    }
    report(4, "index complexity", ok, &lines.join("; "));
}

// ---------------------------------------------------------------------------
// 5. query/compose equivalence

const EVENT_PARENTS: [(&str, &str); 12] = [
    ("Action", "Event"),
    ("ForceDynamicEvent", "Event"),
    ("Contact", "ForceDynamicEvent"),
    ("SupportedBy", "ForceDynamicEvent"),
    ("Grasping", "Action"),
    ("ManipulationPhase", "Action"),
    ("Reaching", "ManipulationPhase"),
    ("Fixation", "ManipulationPhase"),
    ("Sliding", "ManipulationPhase"),
    ("PickingUp", "ManipulationPhase"),
    ("Transporting", "ManipulationPhase"),
    ("PuttingDown", "ManipulationPhase"),
];

fn oracle_is_type(kind: &str, wanted: &str) -> bool {
    let mut k = kind;
    loop {
        if k == wanted {
            return true;
        }
        match EVENT_PARENTS.iter().find(|(c, _)| *c == k) {
            Some((_, p)) => k = p,
            None => return false,
        }
    }
}

/// Entity facts of the synthetic store: id -> (name, class, parent).
type Facts = BTreeMap<EntityId, (String, String, String)>;

fn oracle_entity(c: &EntityConstraint, id: Option<EntityId>, facts: &Facts) -> bool {
    let Some(id) = id else { return false };
    let Some((name, class, parent)) = facts.get(&id) else { return false };
    c.id.is_none_or(|x| x == id)
        && c.name.as_ref().is_none_or(|n| n == name)
        && c.class.as_ref().is_none_or(|k| k == class || k == parent)
}

fn oracle_single(p: &QueryPattern, e: &Event, facts: &Facts) -> bool {
    p.action_type.as_ref().is_none_or(|t| oracle_is_type(e.kind.as_str(), t))
        && p.interval.is_none_or(|w| w.start <= e.end && e.start <= w.end)
        && p.object.as_ref().is_none_or(|c| oracle_entity(c, e.participants.object, facts))
        && p.performer.as_ref().is_none_or(|c| oracle_entity(c, e.participants.performer, facts))
}

fn oracle_subs(p: &QueryPattern, parent: &Event, pool: &[Event], chosen: &mut Vec<usize>, facts: &Facts, tol: f64) -> bool {
    let k = chosen.len();
    if k == p.sub_actions.len() {
        return true;
    }
    let step = &p.sub_actions[k];
    for (i, x) in pool.iter().enumerate() {
        let inside = x.start >= parent.start - tol && x.end <= parent.end + tol;
        if x.id == parent.id || !inside || chosen.contains(&i) || !oracle_single(&step.pattern, x, facts) {
            continue;
        }
        if let (Some(&prev), false) = (chosen.last(), step.after.is_empty()) {
            match allen_relation(&pool[prev].interval(), &x.interval(), tol) {
                Ok(r) if step.after.contains(&r) => {}
                _ => continue,
            }
        }
        chosen.push(i);
        if oracle_subs(p, parent, pool, chosen, facts, tol) {
            return true;
        }
        chosen.pop();
    }
    false
}

fn random_pattern<R: Rng>(rng: &mut R, facts: &Facts, with_subs: bool) -> QueryPattern {
    const TYPES: [&str; 13] = [
        "Event",
        "Action",
        "ForceDynamicEvent",
        "ManipulationPhase",
        "Contact",
        "SupportedBy",
        "Grasping",
        "Reaching",
        "Fixation",
        "Sliding",
        "PickingUp",
        "Transporting",
        "PuttingDown",
    ];
    const CLASSES: [&str; 8] = ["Cup", "Container", "Box", "Tray", "SpiceBox", "CerealBox", "Hand", "Furniture"];
    let ids: Vec<EntityId> = facts.keys().copied().collect();
    let constraint = |rng: &mut R, bind: &str| -> Option<EntityConstraint> {
        let mut c = EntityConstraint::default();
        match rng.gen_range(0..5) {
            0 => return None,
            1 => c.id = Some(ids[rng.gen_range(0..ids.len())]),
            2 => c.name = Some(facts[&ids[rng.gen_range(0..ids.len())]].0.clone()),
            _ => c.class = Some(CLASSES[rng.gen_range(0..CLASSES.len())].to_string()),
        }
        c.bind = Some(bind.to_string());
        Some(c)
    };
    let object = constraint(rng, "Obj");
    let performer = if rng.gen_bool(0.3) { constraint(rng, "Who") } else { None };
    let interval = rng.gen_bool(0.4).then(|| {
        let s = rng.gen_range(0.0..10.0);
        Interval::new(s, s + rng.gen_range(0.0..3.0)).unwrap()
    });
    let mut p = QueryPattern {
        action_type: rng.gen_bool(0.85).then(|| TYPES[rng.gen_range(0..TYPES.len())].to_string()),
        object,
        performer,
        interval,
        bind: Some("Act".into()),
        sub_actions: Vec::new(),
    };
    if with_subs {
        for j in 0..rng.gen_range(1..=2) {
            let mut sub = QueryPattern::of_type(TYPES[rng.gen_range(4..TYPES.len())]);
            sub.bind = Some(format!("Sub{j}"));
            let after = if rng.gen_bool(0.5) { Vec::new() } else { vec![AllenRelation::Before, AllenRelation::Meets] };
            p.sub_actions.push(SubAction { pattern: sub, after });
        }
    }
    p
}

/// Brute-force PickAndPlace-style composition over one pool.
fn oracle_compose(rule: &CompositionRule, pool: &[Event], tol: f64) -> Vec<Vec<Option<EntityId>>> {
    let mut groups: BTreeMap<(Option<EntityId>, Option<EntityId>), Vec<usize>> = BTreeMap::new();
    for (i, e) in pool.iter().enumerate() {
        groups.entry((e.participants.object, e.participants.performer)).or_default().push(i);
    }
    let mut all: Vec<Vec<Option<usize>>> = Vec::new();
    for ((object, performer), members) in groups {
        if object.is_none() || performer.is_none() {
            continue;
        }
        let options: Vec<Vec<Option<usize>>> = rule
            .steps
            .iter()
            .map(|s| {
                let mut o: Vec<Option<usize>> = members
                    .iter()
                    .copied()
                    .filter(|&i| oracle_is_type(pool[i].kind.as_str(), &s.kind))
                    .map(Some)
                    .collect();
                if s.optional {
                    o.push(None);
                }
                o
            })
            .collect();
        let mut combo = vec![0usize; options.len()];
        if options.iter().any(|o| o.is_empty()) {
            continue;
        }
        loop {
            let pick: Vec<Option<usize>> = combo.iter().zip(&options).map(|(&c, o)| o[c]).collect();
            let present: Vec<usize> = pick.iter().flatten().copied().collect();
            let distinct = present.iter().collect::<BTreeSet<_>>().len() == present.len();
            let label = |l: &str| rule.steps.iter().position(|s| s.label() == l).unwrap();
            let constraints_ok = rule.constraints.iter().all(|c| match (pick[label(&c.from)], pick[label(&c.to)]) {
                (Some(a), Some(b)) => allen_relation(&pool[a].interval(), &pool[b].interval(), tol)
                    .is_ok_and(|r| c.relations.contains(&r)),
                _ => true,
            });
            if !present.is_empty() && distinct && constraints_ok {
                all.push(pick);
            }
            let mut k = 0;
            loop {
                if k == combo.len() {
                    break;
                }
                combo[k] += 1;
                if combo[k] < options[k].len() {
                    break;
                }
                combo[k] = 0;
                k += 1;
            }
            if k == combo.len() {
                break;
            }
        }
    }
    let span = |m: &Vec<Option<usize>>| {
        let p: Vec<usize> = m.iter().flatten().copied().collect();
        (pool[p[0]].start, pool[*p.last().unwrap()].end)
    };
    let size = |m: &Vec<Option<usize>>| m.iter().flatten().count();
    all.sort_by(|a, b| {
        size(b)
            .cmp(&size(a))
            .then(span(a).0.total_cmp(&span(b).0))
            .then(span(a).1.total_cmp(&span(b).1))
            .then_with(|| {
                for (x, y) in a.iter().zip(b) {
                    let o = match (x, y) {
                        (Some(i), Some(j)) => pool[*i].listing_cmp(&pool[*j]),
                        (None, Some(_)) => std::cmp::Ordering::Greater,
                        (Some(_), None) => std::cmp::Ordering::Less,
                        (None, None) => std::cmp::Ordering::Equal,
                    };
                    if o.is_ne() {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    let mut used = BTreeSet::new();
    let mut chosen = Vec::new();
    for m in all {
        if m.iter().flatten().any(|i| used.contains(i)) {
            continue;
        }
        used.extend(m.iter().flatten().copied());
        chosen.push(m);
    }
    let mut out: Vec<Vec<Option<EntityId>>> =
        chosen.iter().map(|m| m.iter().map(|s| s.map(|i| pool[i].id)).collect()).collect();
    out.sort();
    out
}

/// Pick-and-place-like chains with jitter, gaps and duplicates, plus noise.
fn chain_pool<R: Rng>(rng: &mut R, hands: &[EntityId], objects: &[EntityId], ns: EntityId) -> Vec<Event> {
    let mut out = Vec::new();
    let mut id = 0;
    let mut push = |out: &mut Vec<Event>, kind: EventKind, s: f64, e: f64, hand: EntityId, obj: EntityId| {
        id += 1;
        let mut attributes = BTreeMap::new();
        if kind == EventKind::Grasping {
            attributes.insert("grasp_style".to_string(), serde_json::json!("wrap"));
        }
        out.push(Event {
            id: ns.derive(&id.to_string()),
            kind,
            start: s,
            end: e.max(s),
            participants: Participants {
                performer: Some(hand),
                object: Some(obj),
                ..Default::default()
            },
            attributes,
            source: EventSource::Monitor,
        });
    };
    for _ in 0..rng.gen_range(1..=4) {
        let hand = hands[rng.gen_range(0..hands.len())];
        let obj = objects[rng.gen_range(0..objects.len())];
        let mut t = rng.gen_range(0.0..6.0);
        let jitter = |rng: &mut R| if rng.gen_bool(0.3) { rng.gen_range(-0.03..0.03) } else { 0.0 };
        let mut phase = |out: &mut Vec<Event>, rng: &mut R, kind: EventKind, t: &mut f64| {
            let d = rng.gen_range(0.1..0.8);
            let s = *t + jitter(rng);
            if rng.gen_bool(0.9) {
                push(out, kind.clone(), s, s + d, hand, obj);
            }
            if rng.gen_bool(0.1) {
                push(out, kind, s + 0.05, s + d + 0.05, hand, obj);
            }
            *t = s + d;
        };
        phase(&mut out, rng, EventKind::Reaching, &mut t);
        if rng.gen_bool(0.5) {
            phase(&mut out, rng, EventKind::Fixation, &mut t);
        }
        let g0 = t + jitter(rng);
        if rng.gen_bool(0.3) {
            phase(&mut out, rng, EventKind::Sliding, &mut t);
        }
        if rng.gen_bool(0.6) {
            phase(&mut out, rng, EventKind::PickingUp, &mut t);
        }
        phase(&mut out, rng, EventKind::Transporting, &mut t);
        phase(&mut out, rng, EventKind::PuttingDown, &mut t);
        let g1 = t + if rng.gen_bool(0.5) { rng.gen_range(0.0..0.5) } else { jitter(rng) };
        push(&mut out, EventKind::Grasping, g0, g1, hand, obj);
    }
    for _ in 0..rng.gen_range(0..8) {
        let kind = common::KINDS[rng.gen_range(2..common::KINDS.len())].clone();
        let s = rng.gen_range(0.0..10.0);
        let d = rng.gen_range(0.0..1.0);
        push(&mut out, kind, s, s + d, hands[rng.gen_range(0..hands.len())], objects[rng.gen_range(0..objects.len())]);
    }
    out.sort_by(|a, b| a.listing_cmp(b));
    out
}

fn criterion_5_query_compose_equivalence() {
    let cfg = Config::default();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path(), Some(5)).unwrap();
    let task = store.create_task("synthetic", &common::random_store_specs()).unwrap();
    let facts: Facts = task
        .entities
        .iter()
        .map(|d| (d.id, (d.name.clone(), d.class.name.clone(), d.class.parents[0].clone())))
        .collect();
    let hands: Vec<EntityId> = task.entities.iter().filter(|d| d.class.name == "Hand").map(|d| d.id).collect();
    let objects: Vec<EntityId> = task.entities.iter().filter(|d| d.mass > 0.0 && d.class.name != "Hand").map(|d| d.id).collect();
    let mut episodes = Vec::new();
    for (k, n) in [500usize, 120].into_iter().enumerate() {
        let ep = store.create_episode(&task.id, Some(10.0)).unwrap().id;
        for i in 0..=100 {
            store.append_frame(&ep, &Frame::empty(i as f64 * 0.1)).unwrap();
        }
        let ns = IdMinter::seeded(5).task_id(&format!("events-{k}"));
        for e in common::random_events(&mut rng, n, 10.0, &hands, &objects, ns) {
            store.store_event(&ep, &e).unwrap();
        }
        store.seal_episode(&ep).unwrap();
        episodes.push(ep);
    }
    let engine = Engine::new(&store, &cfg);
    let tol = 0.1;

    let mut find_mismatch = Vec::new();
    let mut total_matches = 0;
    for q in 0..100 {
        let pattern = random_pattern(&mut rng, &facts, q % 5 == 4);
        let got = engine.find_actions(&pattern).unwrap();
        let mut want: Vec<(EntityId, EntityId)> = Vec::new();
        let mut want_bindings = BTreeMap::new();
        for ep in &episodes {
            let pool = store.events_by(ep, &EventFilter::default()).unwrap().value;
            for e in &pool {
                if oracle_single(&pattern, e, &facts) && oracle_subs(&pattern, e, &pool, &mut Vec::new(), &facts, tol) {
                    want.push((*ep, e.id));
                    let mut b = BTreeMap::new();
                    b.insert("Act".to_string(), e.id);
                    if pattern.object.is_some() {
                        b.insert("Obj".to_string(), e.participants.object.unwrap());
                    }
                    if pattern.performer.is_some() {
                        b.insert("Who".to_string(), e.participants.performer.unwrap());
                    }
                    want_bindings.insert(e.id, b);
                }
            }
        }
        total_matches += want.len();
        let got_ids: Vec<(EntityId, EntityId)> = got.iter().map(|m| (m.episode, m.event.id)).collect();
        if got_ids != want {
            find_mismatch.push(format!("pattern {q}: {} vs {} matches", got_ids.len(), want.len()));
            continue;
        }
        for m in &got {
            let want_b = &want_bindings[&m.event.id];
            let mut core = m.bindings.clone();
            core.retain(|k, _| !k.starts_with("Sub"));
            if &core != want_b {
                find_mismatch.push(format!("pattern {q}: bindings differ"));
            }
            let subs = m.bindings.keys().filter(|k| k.starts_with("Sub")).count();
            if subs != pattern.sub_actions.len() {
                find_mismatch.push(format!("pattern {q}: {subs} sub-action bindings"));
            }
        }
    }

    let rule = default_rules().into_iter().find(|r| r.result == "PickAndPlace").unwrap();
    let is_type = |k: &str, w: &str| oracle_is_type(k, w);
    let mut compose_mismatch = Vec::new();
    let mut composites = 0;
    for q in 0..100 {
        let ns = IdMinter::seeded(9).task_id(&format!("pool-{q}"));
        let pool = chain_pool(&mut rng, &hands, &objects, ns);
        let got = select(find_matches(&rule, &pool, &is_type, tol), &pool);
        let mut got: Vec<Vec<Option<EntityId>>> =
            got.iter().map(|m| m.steps.iter().map(|s| s.map(|i| pool[i].id)).collect()).collect();
        got.sort();
        let want = oracle_compose(&rule, &pool, tol);
        composites += want.len();
        if got != want {
            compose_mismatch.push(format!("pool {q}: {got:?} vs {want:?}"));
        }
    }

    // the engine path on one stored chain pool
    let ep = store.create_episode(&task.id, Some(10.0)).unwrap().id;
    for i in 0..=140 {
        store.append_frame(&ep, &Frame::empty(i as f64 * 0.1)).unwrap();
    }
    let pool = chain_pool(&mut rng, &hands, &objects, IdMinter::seeded(9).task_id("stored"));
    for e in &pool {
        store.store_event(&ep, e).unwrap();
    }
    store.seal_episode(&ep).unwrap();
    let engine = Engine::new(&store, &cfg);
    let mut stored: Vec<Vec<Option<EntityId>>> = engine
        .compose(&rule, Some(&ep))
        .unwrap()
        .iter()
        .map(|c| c.steps.iter().map(|(_, id)| *id).collect())
        .collect();
    stored.sort();
    let stored_pool = store.events_by(&ep, &EventFilter::default()).unwrap().value;
    assert_eq!(stored, oracle_compose(&rule, &stored_pool, engine.tolerance(&ep).unwrap()));

    // canonical trace
    let cdir = tempfile::tempdir().unwrap();
    let mut cstore = Store::open(cdir.path(), Some(1)).unwrap();
    let cep = common::load_episode(&mut cstore, &common::run("canonical-wrap"), &cfg);
    let cengine = Engine::new(&cstore, &cfg);
    let found = cengine.compose(&rule, None).unwrap();
    let first = |k: &str| cstore.events_by(&cep, &EventFilter::kind(k)).unwrap().value[0].clone();
    let (reach, put) = (first("Reaching"), first("PuttingDown"));
    let canonical_ok = found.len() == 1 && found[0].event.start == reach.start && found[0].event.end == put.end;

    let ok = find_mismatch.is_empty() && compose_mismatch.is_empty() && canonical_ok;
    report(
        5,
        "query/compose equivalence",
        ok,
        &format!(
            "100 patterns ({total_matches} matches), 100 pools ({composites} composites), canonical composites {}",
            found.len()
        ),
    );
    assert!(find_mismatch.is_empty(), "{find_mismatch:#?}");
    assert!(compose_mismatch.is_empty(), "{compose_mismatch:#?}");
    assert!(total_matches > 0 && composites > 50);
    assert!(canonical_ok, "{found:#?}");
}

// ---------------------------------------------------------------------------
// 6. controllers

/// Unit-mass double integrator driven toward 1 m; returns (final, max).
fn step_response(dt: f64, horizon: f64) -> (f64, f64, Vec<(f64, f64)>) {
    let cfg = Pid3Config {
        kp: 10.0,
        ki: 0.0,
        kd: 2.0 * 10f64.sqrt(),
        max_output: 1e9,
        integral_clamp: 0.0,
    };
    let (mut x, mut v) = (0.0, 0.0);
    let mut state = Pid3State::default();
    let mut peak: f64 = 0.0;
    let steps = (horizon / dt).round() as usize;
    let mut samples = Vec::new();
    for k in 0..steps {
        let (f, next) = pid3_step(&cfg, &state, Vec3::new(1.0 - x, 0.0, 0.0), dt).unwrap();
        state = next;
        v += f.x * dt;
        x += v * dt;
        peak = peak.max(x);
        if k % ((0.1 / dt).round() as usize).max(1) == 0 {
            samples.push(((k + 1) as f64 * dt, x));
        }
    }
    (x, peak, samples)
}

fn criterion_6_controllers() {
    let (x, peak, coarse) = step_response(1.0 / 90.0, 4.0);
    let (x_ref, peak_ref, fine) = step_response(1e-5, 4.0);
    let settled = (x - 1.0).abs() <= 0.02;
    let overshoot = (peak - 1.0).max(0.0);
    let overshoot_ref = (peak_ref - 1.0).max(0.0);
    // the coarse run tracks the reference curve closely
    let mut track: f64 = 0.0;
    for (t, xc) in &coarse {
        let (_, xf) = fine.iter().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs())).unwrap();
        track = track.max((xc - xf).abs());
    }
    let pid_ok = settled && overshoot < 0.05 && (x_ref - 1.0).abs() <= 0.02 && overshoot_ref < 0.05 && track < 0.05;

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let d = JointDriver {
            stiffness: rng.gen_range(0.0..100.0),
            damping: rng.gen_range(0.0..20.0),
            target_angle: rng.gen_range(-3.2..3.2),
            target_velocity: rng.gen_range(-5.0..5.0),
        };
        let (a, w) = (rng.gen_range(-3.2..3.2), rng.gen_range(-5.0..5.0));
        let closed = d.stiffness * (d.target_angle - a) + d.damping * (d.target_velocity - w);
        worst = worst.max((joint_driver_torque(&d, a, w).unwrap() - closed).abs());
    }
    let ok = pid_ok && worst <= 1e-12;
    report(
        6,
        "controllers",
        ok,
        &format!(
            "final {x:.4}, overshoot {:.3}%, ref final {x_ref:.4}, ref overshoot {:.3}%, max tracking gap {track:.4} m, torque error {worst:e}",
            overshoot * 100.0,
            overshoot_ref * 100.0
        ),
    );
    assert!(settled, "final position {x}");
    assert!(overshoot < 0.05, "overshoot {overshoot}");
    assert!((x_ref - 1.0).abs() <= 0.02 && overshoot_ref < 0.05);
    assert!(track < 0.05, "tracking gap {track}");
    assert!(worst <= 1e-12, "torque error {worst}");
}

// ---------------------------------------------------------------------------
// 7. determinism and durability

fn battery(store: &Store, cfg: &Config) -> Vec<String> {
    let engine = Engine::new(store, cfg);
    let mut docs: Vec<QueryDocument> = vec![
        serde_json::from_str(r#"{"query":"find","pattern":{"type":"Action","bind":"A"}}"#).unwrap(),
        serde_json::from_str(r#"{"query":"find","pattern":{"type":"Grasping","object":{"class":"Container","bind":"O"}}}"#)
            .unwrap(),
        serde_json::from_str(
            r#"{"query":"find","pattern":{"type":"Grasping","sub_actions":[{"pattern":{"type":"PickingUp"}},{"pattern":{"type":"Transporting"},"after":["meets","before"]}]}}"#,
        )
        .unwrap(),
        serde_json::from_str(r#"{"query":"compose"}"#).unwrap(),
        serde_json::from_str(r#"{"query":"infer_holding","hand_strength":0.25}"#).unwrap(),
        serde_json::from_str(r#"{"query":"events"}"#).unwrap(),
        serde_json::from_str(r#"{"query":"events","type":"SupportedBy","interval":{"start":1.0,"end":3.0}}"#).unwrap(),
    ];
    for ep in store.episodes() {
        let range = ep.time_range.unwrap();
        for k in 0..=8 {
            let t = range.start + (range.end - range.start) * k as f64 / 8.0;
            docs.push(QueryDocument::World { episode: ep.id, t });
            docs.push(QueryDocument::Gaze { episode: ep.id, t });
        }
        for d in store.entities(&ep.id).unwrap().iter() {
            docs.push(QueryDocument::Trajectory {
                entity: d.id.to_string(),
                episode: Some(ep.id),
                interval: Some(Interval::new(range.start + 0.5, range.start + 1.5).unwrap()),
            });
        }
        for e in store.events_by(&ep.id, &EventFilter::default()).unwrap().value {
            docs.push(QueryDocument::Occurs { event: e.id });
        }
    }
    docs.sort_by_key(|d| serde_json::to_string(d).unwrap());
    let mut out = Vec::new();
    for d in &docs {
        for (with, line) in [false, true].into_iter().flat_map(|w| engine.run(d, w).unwrap().into_iter().map(move |l| (w, l))) {
            out.push(format!("{with} {line}"));
        }
    }
    out
}

fn criterion_7_determinism_and_durability() {
    let cfg = Config::default();
    let mut identical = true;
    for name in ["canonical-wrap", "tray-carry", "two-pick-and-place", "release-mid-air"] {
        let script = library::by_name(name).unwrap();
        let a = simulate(&script, &cfg).unwrap();
        let b = simulate(&script, &cfg).unwrap();
        let ta = a.trace.to_ndjson();
        identical &= ta == b.trace.to_ndjson();
        let ea = forcelog::epmem::trace::events_to_ndjson(&common::parse(&a, &cfg));
        let eb = forcelog::epmem::trace::events_to_ndjson(&common::parse(&b, &cfg));
        identical &= ea == eb && !ea.is_empty();
        identical &= forcelog::epmem::trace::events_to_ndjson(&a.truth) == forcelog::epmem::trace::events_to_ndjson(&b.truth);
        assert_eq!(ta, b.trace.to_ndjson(), "{name}: traces differ");
        assert_eq!(ea, eb, "{name}: event exports differ");
    }

    let dir = tempfile::tempdir().unwrap();
    let before = {
        let mut store = Store::open(dir.path(), Some(77)).unwrap();
        for name in ["canonical-wrap", "tray-carry", "grasp-fridge-handle"] {
            common::load_episode(&mut store, &common::run(name), &cfg);
        }
        battery(&store, &cfg)
    };
    let after = battery(&Store::open(dir.path(), Some(77)).unwrap(), &cfg);
    let durable = before == after;
    report(
        7,
        "determinism and durability",
        identical && durable,
        &format!("4 scenarios byte-identical: {identical}; {} battery answers equal after reopen: {durable}", before.len()),
    );
    assert!(identical);
    assert_eq!(before, after);
}

// ---------------------------------------------------------------------------
// 8. online property

fn criterion_8_online_property() {
    let cfg = Config::default();
    let mut cuts = 0;
    let mut bad = Vec::new();
    for name in [
        "canonical-wrap",
        "slide-then-lift",
        "approach-retreat-approach",
        "transport-with-dip",
        "tray-carry",
        "release-mid-air",
        "two-pick-and-place",
    ] {
        let sim = common::run(name);
        let full = common::parse_logged(&sim, &cfg);
        let n = sim.trace.frames.len();
        for k in (0..=n).step_by(7).chain([n]) {
            cuts += 1;
            let mut p = Parser::new(&sim.entities, &cfg, common::namespace(&sim)).unwrap();
            let mut got = Vec::new();
            for f in &sim.trace.frames[..k] {
                got.extend(p.step(f).unwrap());
            }
            let want: Vec<&Event> = full.iter().filter(|(at, _)| *at < k).map(|(_, e)| e).collect();
            let last = if k == 0 { f64::NEG_INFINITY } else { sim.trace.frames[k - 1].t };
            if got.iter().collect::<Vec<_>>() != want {
                bad.push(format!("{name} prefix {k}: {} events vs {}", got.len(), want.len()));
            }
            if let Some(e) = got.iter().find(|e| e.end > last) {
                bad.push(format!("{name} prefix {k}: {} ends at {} after {last}", e.kind, e.end));
            }
        }
    }
    report(8, "online property", bad.is_empty(), &format!("{cuts} prefixes over 7 scenarios, {} mismatches", bad.len()));
    assert!(bad.is_empty(), "{bad:#?}");
}

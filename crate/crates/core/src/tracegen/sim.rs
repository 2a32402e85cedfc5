use std::collections::{BTreeMap, BTreeSet};

use nalgebra::UnitQuaternion;

use super::contacts::{compute_contacts, separation};
use super::grasp_anim::{grasp_interpolate, GraspAnimation};
use super::joint::{joint_driver_torque, JointDriver};
use super::pid::{pid3_step, Pid3State};
use super::scenario::{Directive, ScenarioScript, Scheduled};
use super::truth::annotate;
use crate::config::Config;
use crate::epmem::trace::{Trace, TraceHeader, FORMAT_VERSION};
use crate::error::Result;
use crate::model::{
    EntityDescriptor, EntityId, EntitySet, Event, Frame, Gaze, GraspStyle, HandState, IdMinter, Pose, Shape, Twist,
    Vec3,
};

/// Simulated trace plus its ground-truth annotation.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Trace,
    pub truth: Vec<Event>,
    pub entities: EntitySet,
}

/// Runs `script` with ids seeded by the script seed.
pub fn simulate(script: &ScenarioScript, config: &Config) -> Result<SimOutput> {
    simulate_with(script, config, script.seed)
}

/// Runs `script` with an explicit seed.
pub fn simulate_with(script: &ScenarioScript, config: &Config, seed: u64) -> Result<SimOutput> {
    script.validate()?;
    config.validate()?;
    let minter = IdMinter::seeded(seed);
    let entities = script.entity_set(&minter)?;
    let schedule = script.schedule()?;
    let n = script.frame_count()?;
    let mut world = World::new(script, config, &entities, &schedule)?;
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        frames.push(world.step(k)?);
    }
    let header = TraceHeader {
        format_version: FORMAT_VERSION,
        task: script.name.clone(),
        frame_rate: script.frame_rate,
        entities: entities.descriptors().to_vec(),
        seed: Some(seed),
    };
    let trace = Trace { header, frames };
    let truth = annotate(script, config, &entities, &schedule, &trace.frames, &minter)?;
    Ok(SimOutput {
        trace,
        truth,
        entities,
    })
}

/// Minimum-jerk blend parameter.
pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

#[derive(Debug, Clone)]
struct Segment<T> {
    start: f64,
    end: f64,
    from: T,
    to: T,
}

#[derive(Debug, Clone)]
struct HandSim {
    entity: usize,
    moves: Vec<Segment<Pose>>,
    grips: Vec<(Segment<f64>, GraspStyle)>,
    initial: Pose,
    velocity: Vec3,
    angular: Vec3,
    pid: Pid3State,
    rot_pid: Pid3State,
    fingers: BTreeMap<String, (f64, f64)>,
}

impl HandSim {
    fn reference(&self, t: f64) -> Pose {
        let Some(seg) = self.moves.iter().rev().find(|s| s.start <= t) else {
            return self.initial;
        };
        if t >= seg.end {
            return seg.to;
        }
        let s = min_jerk((t - seg.start) / (seg.end - seg.start));
        let position = seg.from.position + (seg.to.position - seg.from.position) * s;
        let orientation = seg.from.orientation.slerp(&seg.to.orientation, s);
        Pose {
            position,
            orientation,
        }
    }

    fn input(&self, t: f64) -> (f64, GraspStyle) {
        let Some((seg, style)) = self.grips.iter().rev().find(|(s, _)| s.start <= t) else {
            return (0.0, GraspStyle::Pinch);
        };
        let u = if t >= seg.end {
            seg.to
        } else {
            seg.from + (seg.to - seg.from) * (t - seg.start) / (seg.end - seg.start)
        };
        (u.clamp(0.0, 1.0), *style)
    }
}

struct World<'a> {
    config: &'a Config,
    entities: &'a EntitySet,
    dt: f64,
    frame_rate: f64,
    head: Vec3,
    gaze_offset: Vec3,
    gaze_targets: Vec<(f64, Vec3)>,
    poses: Vec<Pose>,
    prev_poses: Vec<Pose>,
    hands: Vec<HandSim>,
    /// object index -> (hand slot, pose relative to the hand)
    attached: BTreeMap<usize, (usize, Pose)>,
    resting_on: BTreeMap<usize, Option<usize>>,
    rest_count: Vec<u32>,
    g_pose: BTreeMap<GraspStyle, BTreeMap<String, f64>>,
    anims: BTreeMap<GraspStyle, GraspAnimation>,
}

impl<'a> World<'a> {
    fn new(
        script: &ScenarioScript,
        config: &'a Config,
        entities: &'a EntitySet,
        schedule: &[Scheduled],
    ) -> Result<Self> {
        let descs = entities.descriptors();
        let poses: Vec<Pose> = script.entities.iter().map(|e| e.pose).collect();
        let index_of = |name: &str| descs.iter().position(|d| d.name == name).expect("validated name");
        let mut hands: Vec<HandSim> = Vec::new();
        for (i, d) in descs.iter().enumerate() {
            if d.is_hand() {
                hands.push(HandSim {
                    entity: i,
                    moves: Vec::new(),
                    grips: Vec::new(),
                    initial: poses[i],
                    velocity: Vec3::zeros(),
                    angular: Vec3::zeros(),
                    pid: Pid3State::default(),
                    rot_pid: Pid3State::default(),
                    fingers: BTreeMap::new(),
                });
            }
        }
        let slot_of = |hands: &[HandSim], name: &str| {
            let e = index_of(name);
            hands.iter().position(|h| h.entity == e).expect("validated hand")
        };
        let mut gaze_targets = Vec::new();
        for s in schedule {
            match &s.directive {
                Directive::MoveHand {
                    hand,
                    position,
                    orientation,
                    ..
                } => {
                    let h = slot_of(&hands, hand);
                    let from = hands[h].moves.last().map_or(hands[h].initial, |m| m.to);
                    let orientation = match orientation {
                        Some(q) => Pose::new(Vec3::zeros(), *q)?.orientation,
                        None => from.orientation,
                    };
                    let to = Pose {
                        position: Vec3::new(position[0], position[1], position[2]),
                        orientation,
                    };
                    hands[h].moves.push(Segment {
                        start: s.start,
                        end: s.end,
                        from,
                        to,
                    });
                    gaze_targets.push((s.start, to.position));
                }
                Directive::SetGrasp { hand, style, u, .. } => {
                    let h = slot_of(&hands, hand);
                    let from = hands[h].grips.last().map_or(0.0, |(g, _)| g.to);
                    hands[h].grips.push((
                        Segment {
                            start: s.start,
                            end: s.end,
                            from,
                            to: *u,
                        },
                        *style,
                    ));
                }
                Directive::Wait { .. } => {}
            }
        }
        let anims: BTreeMap<GraspStyle, GraspAnimation> = GraspStyle::ALL
            .into_iter()
            .map(|s| (s, GraspAnimation::builtin(s)))
            .collect();
        let g_pose = anims
            .iter()
            .map(|(s, a)| (*s, grasp_interpolate(a, config.grasp.g_min)))
            .collect();
        for h in &mut hands {
            h.fingers = anims[&GraspStyle::Pinch]
                .joints()
                .map(|j| (j.to_string(), (0.0, 0.0)))
                .collect();
        }
        Ok(World {
            config,
            entities,
            dt: 1.0 / script.frame_rate,
            frame_rate: script.frame_rate,
            head: Vec3::from(script.head),
            gaze_offset: Vec3::from(script.gaze_offset),
            gaze_targets,
            prev_poses: poses.clone(),
            poses,
            hands,
            attached: BTreeMap::new(),
            resting_on: BTreeMap::new(),
            rest_count: vec![0; descs.len()],
            g_pose,
            anims,
        })
    }

    fn desc(&self, i: usize) -> &EntityDescriptor {
        &self.entities.descriptors()[i]
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 / self.frame_rate
    }

    fn step(&mut self, k: usize) -> Result<Frame> {
        let t = self.time(k);
        self.prev_poses = self.poses.clone();
        if k > 0 {
            self.move_hands(k)?;
            self.move_fingers(t)?;
            self.move_objects();
        }
        let ids: Vec<EntityId> = self.entities.iter().map(|d| d.id).collect();
        let pose_map: BTreeMap<EntityId, Pose> = ids.iter().copied().zip(self.poses.iter().copied()).collect();
        let contacts = compute_contacts(self.entities, &pose_map, self.config.sim.eps_pen)?;
        let index: BTreeMap<EntityId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

        let mut hand_states = Vec::with_capacity(self.hands.len());
        let mut grasped: BTreeMap<usize, usize> = BTreeMap::new();
        for (slot, h) in self.hands.iter().enumerate() {
            let hid = ids[h.entity];
            let (input, style) = h.input(t);
            let closed = input > self.config.grasp.g_min
                && self.g_pose[&style]
                    .iter()
                    .all(|(j, a)| h.fingers.get(j).is_some_and(|(angle, _)| *angle >= a - 1e-9));
            let touching: BTreeSet<EntityId> = contacts
                .iter()
                .filter_map(|c| c.other(&hid))
                .filter(|o| !self.desc(index[o]).is_hand())
                .collect();
            let sets: &[&str] = if closed { style.sensor_sets() } else { &["palm"] };
            let mut sensor_contacts = BTreeMap::new();
            if !touching.is_empty() {
                for s in sets {
                    sensor_contacts.insert(s.to_string(), touching.clone());
                }
            }
            if input > self.config.grasp.g_min && sets.len() >= self.config.grasp.min_sets {
                for o in &touching {
                    let oi = index[o];
                    if !self.desc(oi).is_static {
                        grasped.entry(oi).or_insert(slot);
                    }
                }
            }
            hand_states.push(HandState {
                hand_id: hid,
                grasp_style: style,
                grasp_input: input,
                sensor_contacts,
            });
        }
        // attachments follow the grasp predicate of this frame
        self.attached.retain(|o, (slot, _)| grasped.get(o) == Some(slot));
        for (o, slot) in grasped {
            if let std::collections::btree_map::Entry::Vacant(v) = self.attached.entry(o) {
                let hand_pose = self.poses[self.hands[slot].entity];
                v.insert((slot, hand_pose.inverse().compose(&self.poses[o])));
                self.resting_on.insert(o, None);
            }
        }

        let twists: BTreeMap<EntityId, Twist> = if k == 0 {
            ids.iter().map(|id| (*id, Twist::zero())).collect()
        } else {
            ids.iter()
                .enumerate()
                .map(|(i, id)| (*id, Twist::between(&self.prev_poses[i], &self.poses[i], self.dt)))
                .collect()
        };

        let moved: Vec<bool> = (0..ids.len())
            .map(|i| k > 0 && self.poses[i] != self.prev_poses[i])
            .collect();
        let mut sleeping = BTreeSet::new();
        let wake = Shape::Sphere {
            radius: self.config.sim.wake_radius,
        };
        for (i, d) in self.entities.iter().enumerate() {
            if d.is_static || d.is_hand() {
                continue;
            }
            let near_hand = self.hands.iter().any(|h| {
                separation(&wake, &self.poses[h.entity], &d.shape, &self.poses[i]).separation <= 0.0
            });
            let disturbed = moved[i]
                || near_hand
                || contacts.iter().any(|c| {
                    c.other(&d.id).is_some_and(|o| {
                        let oi = index[&o];
                        let od = self.desc(oi);
                        od.is_hand() || (!od.is_static && moved[oi])
                    })
                });
            if disturbed {
                self.rest_count[i] = 0;
            } else if k > 0 {
                self.rest_count[i] = self.rest_count[i].saturating_add(1);
            }
            if self.rest_count[i] >= self.config.sim.n_sleep {
                sleeping.insert(d.id);
            }
        }

        let target = self
            .gaze_targets
            .iter()
            .rev()
            .find(|(s, _)| *s <= t)
            .map(|(_, p)| *p)
            .or_else(|| self.hands.first().map(|h| self.poses[h.entity].position));
        let direction = target
            .map(|p| p + self.gaze_offset - self.head)
            .filter(|d| d.norm() > 1e-12)
            .map_or(Vec3::x(), |d| d.normalize());

        Ok(Frame {
            t,
            poses: pose_map,
            twists,
            contacts,
            hands: hand_states,
            gaze: Gaze {
                origin: self.head,
                direction,
            },
            sleeping,
        })
    }

    /// PID tracking of the minimum-jerk reference with feed-forward of the
    /// reference's discrete acceleration.
    fn move_hands(&mut self, k: usize) -> Result<()> {
        let dt = self.dt;
        let t = |j: usize| j as f64 / self.frame_rate;
        let mass = self.config.sim.hand_mass;
        for h in &mut self.hands {
            let r0 = h.reference(t(k));
            let r1 = h.reference(t(k - 1));
            let r2 = h.reference(t(k.saturating_sub(2)));
            let cur = self.poses[h.entity];

            let a_ff = (r0.position - r1.position * 2.0 + r2.position) / (dt * dt);
            let (force, pid) = pid3_step(&self.config.sim.hand_pid, &h.pid, r1.position - cur.position, dt)?;
            h.pid = pid;
            h.velocity += (a_ff + force / mass) * dt;
            let position = cur.position + h.velocity * dt;

            let w0 = (r0.orientation * r1.orientation.inverse()).scaled_axis() / dt;
            let w1 = (r1.orientation * r2.orientation.inverse()).scaled_axis() / dt;
            let err = (r1.orientation * cur.orientation.inverse()).scaled_axis();
            let (torque, rot_pid) = pid3_step(&self.config.sim.rotation_pid, &h.rot_pid, err, dt)?;
            h.rot_pid = rot_pid;
            h.angular += (w0 - w1) + torque * dt;
            let orientation = UnitQuaternion::from_scaled_axis(h.angular * dt) * cur.orientation;
            self.poses[h.entity] = Pose {
                position,
                orientation,
            };
        }
        Ok(())
    }

    fn move_fingers(&mut self, t: f64) -> Result<()> {
        let dt = self.dt;
        for h in &mut self.hands {
            let (input, style) = h.input(t);
            let targets = grasp_interpolate(&self.anims[&style], input);
            for (joint, (angle, velocity)) in h.fingers.iter_mut() {
                let driver = JointDriver {
                    stiffness: self.config.sim.finger_stiffness,
                    damping: self.config.sim.finger_damping,
                    target_angle: targets.get(joint).copied().unwrap_or(0.0),
                    target_velocity: 0.0,
                };
                let torque = joint_driver_torque(&driver, *angle, *velocity)?;
                *velocity += torque * dt;
                *angle += *velocity * dt;
            }
        }
        Ok(())
    }

    fn move_objects(&mut self) {
        for (o, (slot, rel)) in &self.attached {
            let hand_pose = self.poses[self.hands[*slot].entity];
            self.poses[*o] = hand_pose.compose(rel);
        }
        let mut free: Vec<usize> = (0..self.poses.len())
            .filter(|i| {
                let d = self.desc(*i);
                !d.is_static && !d.is_hand() && !self.attached.contains_key(i)
            })
            .collect();
        free.sort_by(|a, b| self.bottom(*a).total_cmp(&self.bottom(*b)).then(a.cmp(b)));
        for o in free {
            if let Some(Some(s)) = self.resting_on.get(&o).copied() {
                let shift = self.poses[s].position - self.prev_poses[s].position;
                self.poses[o].position += shift;
            }
            let bottom = self.bottom(o);
            let (floor, supporter) = self.floor_below(o, bottom);
            let fall = self.config.sim.fall_speed * self.dt;
            let new_bottom = if bottom - floor <= 1e-9 { floor } else { (bottom - fall).max(floor) };
            self.poses[o].position.z += new_bottom - bottom;
            let rests = new_bottom == floor;
            self.resting_on.insert(o, if rests { supporter } else { None });
        }
    }

    fn bottom(&self, i: usize) -> f64 {
        let p = &self.poses[i];
        p.position.z - self.desc(i).shape.world_half_extents(p).z
    }

    /// Highest top surface under the footprint of `o` that is not above its
    /// bottom; the ground plane z = 0 when nothing is below.
    fn floor_below(&self, o: usize, bottom: f64) -> (f64, Option<usize>) {
        let po = &self.poses[o];
        let ho = self.desc(o).shape.world_half_extents(po);
        let mut best = (0.0, None);
        for (i, d) in self.entities.iter().enumerate() {
            if i == o || d.is_hand() {
                continue;
            }
            let p = &self.poses[i];
            let h = d.shape.world_half_extents(p);
            let overlap_x = (po.position.x - p.position.x).abs() < ho.x + h.x - 1e-9;
            let overlap_y = (po.position.y - p.position.y).abs() < ho.y + h.y - 1e-9;
            let top = p.position.z + h.z;
            if overlap_x && overlap_y && top <= bottom + 1e-6 && top >= best.0 {
                best = (top, Some(i));
            }
        }
        best
    }
}

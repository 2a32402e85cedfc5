//! Scripted trace generation: hand controllers, grasp animation, contacts and the simulator.

mod contacts;
mod grasp_anim;
mod joint;
pub mod library;
mod pid;
mod scenario;
mod sim;
mod truth;

pub use contacts::compute_contacts;
pub(crate) use contacts::separation;
pub use grasp_anim::{grasp_interpolate, GraspAnimation, Keyframe};
pub use joint::{joint_driver_torque, JointDriver};
pub use pid::{pid3_step, Pid3Config, Pid3State};
pub use scenario::{Directive, ScenarioEntity, ScenarioScript, Scheduled, TruthSpec, DEFAULT_FRAME_RATE};
pub use sim::{min_jerk, simulate, simulate_with, SimOutput};

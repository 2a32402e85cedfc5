//! Trace-driven recognition of force-dynamic events and pick-and-place motion
//! phases, with an embedded episodic-memory store and a pattern query engine.
//!
//! The pipeline is:
//!
//! 1. [`tracegen`] steps a quasi-static desk-scale world from a scenario script
//!    and writes an NDJSON trace plus a ground-truth sidecar.
//! 2. [`monitors`] consume trace frames in order and emit interval [`Event`]s
//!    (contact, supported-by, grasping and the motion phases).
//! 3. [`epmem`] persists frames and events per episode with time and field
//!    indexes.
//! 4. [`query`] answers entity/action patterns, composes sub-actions into
//!    higher-level actions and reconstructs trajectories.

pub mod config;
pub mod epmem;
pub mod error;
pub mod model;
pub mod monitors;
pub mod query;
pub mod tracegen;

pub use config::Config;
pub use error::{Error, Result};
pub use model::{
    AllenRelation, ClassTag, EntityDescriptor, EntityId, Event, EventKind, Frame, Interval, Pose,
    Shape, Twist,
};

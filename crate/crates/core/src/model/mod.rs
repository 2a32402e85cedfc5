//! Shared domain types: identifiers, classes, geometry, intervals, events and frames.

mod class;
mod entity;
mod event;
mod frame;
mod geometry;
mod ids;
mod interval;

pub use class::{ClassHierarchy, ClassTag};
pub use entity::{ray_intersect, EntityDescriptor, EntitySet, EntitySpec};
pub use event::{Event, EventKind, EventSource, Participants};
pub use frame::{ContactRecord, Frame, Gaze, GraspStyle, HandState};
pub use geometry::{Pose, Shape, Twist, Vec3};
pub use ids::{EntityId, EventIds, IdMinter};
pub use interval::{allen_relation, AllenRelation, Interval};

//! Episodic memory: trace files, the on-disk store and indices.

mod event_index;
pub mod export;
mod frame_index;
mod store;
pub mod trace;

pub use event_index::{EventFilter, EventIndex};
pub use frame_index::FrameIndex;
pub use store::{Answer, Episode, PoseRanges, Store, Task};

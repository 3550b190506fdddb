//! Concurrent behavior trees.
//!
//! A behavior tree is ticked once per simulated cycle from its root. On top of
//! the classical Sequence / Fallback / Parallel / memory nodes this crate adds
//! two synchronization decorators:
//!
//! * [`NodeKind::ProgressSync`] gates its child on a barrier shared by every
//!   decorator in the same named group. Barriers are absolute (a fixed list of
//!   progress levels) or relative (the laggard's progress plus a threshold).
//! * [`NodeKind::ResourceSync`] gives its child exclusive use of the resources
//!   it currently needs, with per-node priorities that age while waiting.
//!
//! Trees are usually written in the small `.bt` language (see [`dsl`]),
//! executed by an [`Engine`], measured with [`metrics`] and swept over
//! parameter grids by the Monte-Carlo harness in [`sim`].

pub mod behavior;
pub mod dsl;
pub mod engine;
pub mod mailbox;
pub mod metrics;
pub mod sim;
pub mod status;
pub mod sync;
pub mod trace;
pub mod tree;

pub use behavior::{ActionModel, Behavior, ConditionModel, ProfileSchedule};
pub use engine::{Blackboard, Engine, IncrementInput};
pub use status::NodeStatus;
pub use sync::barrier::BarrierPolicy;
pub use sync::resource::{PriorityIncrement, ResourceId, ResourceSet};
pub use trace::{CycleRecord, TickTrace};
pub use tree::{NodeId, NodeKind, NodeSpec, Tree, TreeError};

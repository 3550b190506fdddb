//! Progress and resource synchronization primitives shared by the decorators.

pub mod barrier;
pub mod resource;

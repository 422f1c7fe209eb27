//! Overlay topology, channel delays and the discrete-event engine.

pub mod engine;
pub mod event;
pub mod topology;

pub use engine::{run, run_with_observer, NodeStats, Observer, RunResult, Simulation};
pub use event::{Event, EventKind, EventQueue};
pub use topology::{build_channels, build_topology, is_connected, Adjacency, Channel};

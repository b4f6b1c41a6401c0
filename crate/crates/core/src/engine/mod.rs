//! Graph description and the generic iterative process over it.

mod graph;
pub(crate) mod metrics;
mod run;

pub use graph::{validate, Constraint, Side, SystemGraph, Truth};
pub use metrics::{ber, hard_decide, mse};
pub use run::{run, PortMetrics, RunConfig, Snapshot, Tracking, Trajectory, TrajectoryRow};

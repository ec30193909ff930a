//! Lane-following navigation stack for an Ackermann-steered vehicle.
//!
//! The crate bundles three local planners (dynamic window, timed elastic
//! band, artificial potential field) together with the machinery they share:
//! bicycle kinematics, occupancy costmaps with inflation, a Dijkstra global
//! planner, a camera-style lane-detection pipeline and a closed-loop
//! simulator that scores each planner on the same scenario.
//!
//! Inner loops that are data parallel (DWA sample scoring, TEB alternative
//! bands, suite episodes, image batches) go through [`exec::Exec`], which uses
//! rayon when the `parallel` feature is enabled and plain iterators otherwise.

// Negated comparisons reject NaN in config validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apf;
pub mod costmap;
pub mod dwa;
pub mod exec;
pub mod geom;
pub mod global_planner;
pub mod sim;
pub mod teb;
pub mod vehicle;
pub mod vision;

pub use geom::{Circle, Vec2};
pub use vehicle::{ControlCommand, Pose2D, VehicleParams};

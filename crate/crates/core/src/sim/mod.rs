//! Scenarios, the closed-loop runner, the comparison suite and plotting.

pub mod fixtures;
pub mod perception;
pub mod plot;
pub mod runner;
pub mod scenario;
pub mod suite;
pub mod track;

pub use plot::plot_trace;
pub use runner::{run_episode, RunMetrics, SimError, TraceLog, TraceRecord};
pub use scenario::{PlannerKind, Scenario, ScenarioError};
pub use suite::{load_dir, run_suite, write_csv, SuiteRow};
pub use track::Track;

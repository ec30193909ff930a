//! Scenario x planner comparison table.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::runner::{run_episode, RunMetrics};
use super::scenario::{PlannerKind, Scenario, ScenarioError};
use crate::exec::Exec;

/// One table row; `metrics` is `None` when the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub scenario: String,
    pub planner: PlannerKind,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 10] = [
    "scenario",
    "planner",
    "obstacles_avoided",
    "obstacles_total",
    "collided",
    "completed",
    "lane_deviation_rms",
    "lane_exits",
    "completion_time",
    "error",
];

/// Runs every scenario with every planner. Episodes run in parallel under
/// `exec`; each episode itself is sequential. Rows are ordered by scenario
/// then planner.
pub fn run_suite(
    scenarios: &[Result<Scenario, (String, ScenarioError)>],
    planners: &[PlannerKind],
    exec: Exec,
) -> Vec<SuiteRow> {
    let cells: Vec<(usize, PlannerKind)> = (0..scenarios.len())
        .flat_map(|i| planners.iter().map(move |p| (i, *p)))
        .collect();
    let mut rows = exec.map(&cells, |&(i, planner)| match &scenarios[i] {
        Ok(scn) => match run_episode(scn, planner, Exec::Sequential) {
            Ok((metrics, _)) => SuiteRow {
                scenario: scn.name.clone(),
                planner,
                metrics: Some(metrics),
                error: None,
            },
            Err(e) => SuiteRow {
                scenario: scn.name.clone(),
                planner,
                metrics: None,
                error: Some(e.to_string()),
            },
        },
        Err((name, e)) => SuiteRow {
            scenario: name.clone(),
            planner,
            metrics: None,
            error: Some(e.to_string()),
        },
    });
    rows.sort_by(|a, b| a.scenario.cmp(&b.scenario).then(a.planner.cmp(&b.planner)));
    rows
}

/// Loads every `*.toml` file in `dir`, sorted by file name. Files that fail
/// to load are returned as errors keyed by their stem.
pub fn load_dir(dir: &Path) -> std::io::Result<Vec<Result<Scenario, (String, ScenarioError)>>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    Ok(paths
        .iter()
        .map(|p| {
            Scenario::load(p).map_err(|e| {
                let stem = p
                    .file_stem()
                    .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                (stem, e)
            })
        })
        .collect())
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

/// RFC 4180 CSV with a fixed column order.
pub fn write_csv<W: Write>(rows: &[SuiteRow], w: W) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        let mut rec = vec![r.scenario.clone(), r.planner.to_string()];
        match &r.metrics {
            Some(m) => rec.extend([
                m.obstacles_avoided.to_string(),
                m.obstacles_total.to_string(),
                m.collided.to_string(),
                m.completed.to_string(),
                fmt_f64(m.lane_deviation_rms),
                m.lane_exits.to_string(),
                m.completion_time.map(fmt_f64).unwrap_or_default(),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 7)),
        }
        rec.push(r.error.clone().unwrap_or_default());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

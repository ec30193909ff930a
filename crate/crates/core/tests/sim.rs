use std::path::PathBuf;

use navbench::exec::Exec;
use navbench::sim::{
    plot_trace, run_episode, run_suite, write_csv, PlannerKind, Scenario, TraceLog,
};
use navbench::vehicle::footprint_circles;

fn straight(obstacles: &str) -> Scenario {
    let text = format!(
        r#"
format_version = 1
name = "straight"
tick = 0.05
max_ticks = 1200
rng_seed = 3

[track]
lane_width = 0.8
line_width = 0.1
control_points = [[0.0, 0.0], [6.0, 0.0], [12.0, 0.0]]

[start]
s = 0.5
{obstacles}
"#
    );
    Scenario::from_toml_str(&text).expect("valid scenario")
}

fn reference() -> Scenario {
    Scenario::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/reference.toml"))
        .unwrap()
}

const BLOCKER: &str = r#"
[[obstacles]]
s = 5.0
lateral = -0.4
radius = 0.2
"#;

#[test]
fn straight_lane_is_followed_closely() {
    let scn = straight("");
    for planner in PlannerKind::ALL {
        let (m, _) = run_episode(&scn, planner, Exec::Sequential).unwrap();
        assert!(m.completed, "{planner}: not completed");
        assert!(!m.collided, "{planner}: collided");
        assert_eq!(m.lane_exits, 0, "{planner}");
        assert!(
            m.lane_deviation_rms < 0.05,
            "{planner}: rms {}",
            m.lane_deviation_rms
        );
    }
}

#[test]
fn blocked_lane_forces_a_lane_change() {
    let scn = straight(BLOCKER);
    for planner in PlannerKind::ALL {
        let (m, trace) = run_episode(&scn, planner, Exec::Sequential).unwrap();
        assert!(!m.collided, "{planner}: collided");
        assert_eq!(m.obstacles_avoided, 1, "{planner}");
        let passing = trace
            .records
            .iter()
            .find(|r| (r.s - 5.0).abs() < 0.1)
            .expect("trace passes the obstacle");
        assert!(
            passing.lateral > 0.0,
            "{planner}: lateral {} beside the obstacle",
            passing.lateral
        );
    }
}

fn check_trace(scn: &Scenario, planner: PlannerKind) {
    let (m, trace) = run_episode(scn, planner, Exec::Sequential).unwrap();
    let params = scn.vehicle();
    let dt = scn.tick();
    assert_eq!(trace.len(), m.ticks);
    let mut prev = scn.start;
    for (i, r) in trace.records.iter().enumerate() {
        assert_eq!(r.tick, i);
        let moved = r.pose.position().dist(prev.position());
        assert!(
            moved <= params.v_max * dt + 1e-6,
            "{planner}: jump of {moved} m at tick {i}"
        );
        assert!(
            r.command.v <= params.v_max + 1e-12
                && r.command.gamma.abs() <= params.gamma_max + 1e-12
        );
        prev = r.pose;
    }
    let circles = scn.circles();
    let hit = trace.records.iter().any(|r| {
        footprint_circles(&r.pose, params).iter().any(|f| {
            circles
                .iter()
                .any(|c| f.center.dist(c.center) < f.radius + c.radius)
        })
    });
    assert_eq!(
        hit, m.collided,
        "{planner}: collision flag disagrees with the trace"
    );
    let furthest = trace
        .records
        .iter()
        .map(|r| r.s)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = scn
        .obstacles
        .iter()
        .filter(|o| furthest > o.s + o.circle.radius + params.body_length / 2.0)
        .count();
    assert_eq!(passed, m.obstacles_avoided, "{planner}");
}

#[test]
fn trace_invariants_hold() {
    let scn = straight(BLOCKER);
    for planner in PlannerKind::ALL {
        check_trace(&scn, planner);
    }
}

#[test]
fn trace_invariants_hold_on_reference() {
    check_trace(&reference(), PlannerKind::Apf);
}

#[test]
fn episodes_are_deterministic() {
    let scn = straight(BLOCKER);
    for planner in PlannerKind::ALL {
        let (a, ta) = run_episode(&scn, planner, Exec::Sequential).unwrap();
        let (b, tb) = run_episode(&scn, planner, Exec::Parallel).unwrap();
        assert_eq!(ta, tb, "{planner}");
        assert_eq!(
            (a.ticks, a.obstacles_avoided, a.collided),
            (b.ticks, b.obstacles_avoided, b.collided)
        );
        assert_eq!(a.lane_deviation_rms, b.lane_deviation_rms);
    }
}

#[test]
fn trace_lines_are_json() {
    let scn = straight(BLOCKER);
    let (_, trace) = run_episode(&scn, PlannerKind::Teb, Exec::Sequential).unwrap();
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), trace.len());
    for (i, line) in lines.iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["tick"], i);
        assert_eq!(v["internals"]["kind"], "teb");
    }
}

fn suite_inputs() -> Vec<Result<Scenario, (String, navbench::sim::ScenarioError)>> {
    let a = straight("");
    let mut b = straight(BLOCKER);
    b.name = "blocked".into();
    let bad = Scenario::from_toml_str("format_version = 9").map_err(|e| ("broken".to_string(), e));
    vec![Ok(a), Ok(b), bad]
}

#[test]
fn suite_has_one_row_per_cell_and_is_reproducible() {
    let rows = run_suite(&suite_inputs(), &PlannerKind::ALL, Exec::default());
    assert_eq!(rows.len(), 9);
    let cells: Vec<(&str, PlannerKind)> = rows
        .iter()
        .map(|r| (r.scenario.as_str(), r.planner))
        .collect();
    let mut sorted = cells.clone();
    sorted.sort();
    assert_eq!(cells, sorted);
    for r in &rows {
        assert_eq!(
            r.metrics.is_some(),
            r.scenario != "broken",
            "{}",
            r.scenario
        );
        assert_eq!(r.error.is_some(), r.scenario == "broken");
    }

    let mut first = Vec::new();
    write_csv(&rows, &mut first).unwrap();
    let mut r = csv::Reader::from_reader(first.as_slice());
    assert_eq!(r.headers().unwrap().len(), 10);
    assert_eq!(r.records().count(), 9);

    let again = run_suite(&suite_inputs(), &PlannerKind::ALL, Exec::Sequential);
    let mut second = Vec::new();
    write_csv(&again, &mut second).unwrap();
    assert_eq!(first, second);
}

fn svg_points(doc: &roxmltree::Document, id: &str) -> Vec<(f64, f64)> {
    let node = doc
        .descendants()
        .find(|n| n.attribute("id") == Some(id))
        .expect("path polyline");
    node.attribute("points")
        .unwrap()
        .split_whitespace()
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn plot_is_valid_svg_with_the_driven_path() {
    let scn = straight(BLOCKER);
    let (_, trace): (_, TraceLog) = run_episode(&scn, PlannerKind::Dwa, Exec::Sequential).unwrap();
    let svg = plot_trace(&trace, &scn);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let pts = svg_points(&doc, "path");
    assert_eq!(pts.len(), trace.len());
    let lw = scn.track.lane_width;
    for (x, y) in pts {
        assert!((-1.0..=13.0).contains(&x));
        // The page y axis is flipped.
        assert!((-y).abs() <= lw, "path leaves the road at y = {}", -y);
    }
    let obstacles = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("obstacle"))
        .count();
    assert_eq!(obstacles, 1);
}

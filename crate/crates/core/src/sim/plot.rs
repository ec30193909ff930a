//! Top-down SVG rendering of an episode.

use std::fmt::Write;

use super::runner::TraceLog;
use super::scenario::Scenario;
use crate::geom::Vec2;

const MARGIN: f64 = 1.0;
const MAX_OVERLAYS: usize = 40;

fn points_attr(points: &[Vec2]) -> String {
    let mut s = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        // Flip y so that world +y points up on the page.
        let _ = write!(s, "{:.4},{:.4}", p.x, -p.y);
    }
    s
}

fn offset_line(scn: &Scenario, lateral: f64) -> Vec<Vec2> {
    let line = scn.track.centerline();
    line.iter()
        .enumerate()
        .step_by(5)
        .map(|(i, p)| {
            let j = (i + 1).min(line.len() - 1);
            let k = j - 1;
            *p + (line[j] - line[k]).unit().perp() * lateral
        })
        .collect()
}

/// Standalone SVG: lanes, obstacles, the driven path and sampled local plans.
pub fn plot_trace(trace: &TraceLog, scn: &Scenario) -> String {
    let lw = scn.track.lane_width;
    let mut all: Vec<Vec2> = offset_line(scn, lw + 0.1);
    all.extend(offset_line(scn, -lw - 0.1));
    all.extend(trace.records.iter().map(|r| r.pose.position()));
    let (mut lo, mut hi) = (all[0], all[0]);
    for p in &all {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let (x0, y0) = (lo.x - MARGIN, -hi.y - MARGIN);
    let (w, h) = (hi.x - lo.x + 2.0 * MARGIN, hi.y - lo.y + 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.4} {y0:.4} {w:.4} {h:.4}" width="{:.0}" height="{:.0}">"#,
        w * 40.0,
        h * 40.0
    );
    let _ = writeln!(s, "<title>{}</title>", xml_escape(&scn.name));
    let _ = writeln!(
        s,
        r##"<rect x="{x0:.4}" y="{y0:.4}" width="{w:.4}" height="{h:.4}" fill="#808080"/>"##
    );
    for lat in [lw, -lw] {
        let _ = writeln!(
            s,
            r#"<polyline class="edge" fill="none" stroke="black" stroke-width="{:.3}" points="{}"/>"#,
            scn.track.line_width,
            points_attr(&offset_line(scn, lat))
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline class="center" fill="none" stroke="red" stroke-width="{:.3}" points="{}"/>"#,
        scn.track.line_width,
        points_attr(&offset_line(scn, 0.0))
    );
    for o in &scn.obstacles {
        let c = o.circle;
        let _ = writeln!(
            s,
            r#"<circle class="obstacle" cx="{:.4}" cy="{:.4}" r="{:.4}" fill="blue"/>"#,
            c.center.x, -c.center.y, c.radius
        );
    }
    let stride = trace.len().div_ceil(MAX_OVERLAYS).max(1);
    for r in trace.records.iter().step_by(stride) {
        if r.local_plan.len() >= 2 {
            let _ = writeln!(
                s,
                r#"<polyline class="local-plan" fill="none" stroke="purple" stroke-width="0.02" points="{}"/>"#,
                points_attr(&r.local_plan)
            );
        }
    }
    let path: Vec<Vec2> = trace.records.iter().map(|r| r.pose.position()).collect();
    let _ = writeln!(
        s,
        r#"<polyline id="path" fill="none" stroke="lime" stroke-width="0.04" points="{}"/>"#,
        points_attr(&path)
    );
    let st = scn.start.position();
    let _ = writeln!(
        s,
        r#"<circle class="start" cx="{:.4}" cy="{:.4}" r="0.08" fill="white"/>"#,
        st.x, -st.y
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

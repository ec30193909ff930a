//! Obstacle perception from a simulated range scan, and lane selection.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::costmap::{raycast_scan, scan_hits};
use crate::geom::{Circle, Vec2};
use crate::vehicle::{Pose2D, VehicleParams};
use crate::vision::LaneTarget;

use super::scenario::{BehaviorSpec, SensorSpec};

const MIN_RADIUS: f64 = 0.05;
const MAX_RADIUS: f64 = 1.5;

/// What the vehicle sensed this tick, in world coordinates.
#[derive(Debug, Clone, Default)]
pub struct Perception {
    pub hits: Vec<Vec2>,
    pub circles: Vec<Circle>,
}

/// Splits the scan into runs of consecutive hits; the run wrapping past the
/// last beam is joined with the first.
pub fn cluster_scan(pose: &Pose2D, ranges: &[f64], max_range: f64, gap: f64) -> Vec<Vec<Vec2>> {
    let n = ranges.len();
    let origin = pose.position();
    let point = |i: usize| {
        let a = pose.theta + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        origin + Vec2::from_angle(a) * ranges[i]
    };
    let hit = |i: usize| ranges[i] < max_range;
    let Some(first_gap) = (0..n).find(|i| !hit(*i)) else {
        return vec![(0..n).map(point).collect()];
    };
    let mut clusters: Vec<Vec<Vec2>> = Vec::new();
    let mut current: Vec<Vec2> = Vec::new();
    for k in 1..=n {
        let i = (first_gap + k) % n;
        if hit(i) {
            let p = point(i);
            if current.last().is_some_and(|q| q.dist(p) > gap) {
                clusters.push(std::mem::take(&mut current));
            }
            current.push(p);
        } else if !current.is_empty() {
            clusters.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        clusters.push(current);
    }
    clusters
}

/// Algebraic least-squares circle through the points, falling back to a
/// bounding disc around the centroid when the fit is degenerate.
pub fn fit_circle(points: &[Vec2], viewpoint: Vec2) -> Circle {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec2::ZERO, |a, p| a + *p) * (1.0 / n);
    let fallback = || {
        let r = points.iter().map(|p| p.dist(centroid)).fold(0.0, f64::max);
        Circle::new(centroid, r.max(MIN_RADIUS))
    };
    if points.len() < 3 {
        return fallback();
    }
    // Solve x^2 + y^2 + D x + E y + F = 0 in the centroid frame.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in points {
        let q = *p - centroid;
        let row = Vector3::new(q.x, q.y, 1.0);
        ata += row * row.transpose();
        atb += row * -(q.x * q.x + q.y * q.y);
    }
    let Some(sol) = ata.lu().solve(&atb) else {
        return fallback();
    };
    let c = Vec2::new(-sol.x / 2.0, -sol.y / 2.0);
    let r2 = c.norm_sq() - sol.z;
    if !(r2 > 0.0) {
        return fallback();
    }
    let r = r2.sqrt();
    let center = centroid + c;
    let facing = center.dist(viewpoint) > centroid.dist(viewpoint);
    if !(MIN_RADIUS..=MAX_RADIUS).contains(&r) || !facing {
        return fallback();
    }
    Circle::new(center, r)
}

pub fn perceive(truth: &[Circle], pose: &Pose2D, sensor: &SensorSpec) -> Perception {
    let ranges = raycast_scan(truth, pose, sensor.beams, sensor.max_range);
    let hits = scan_hits(pose, &ranges, sensor.max_range);
    let circles = cluster_scan(pose, &ranges, sensor.max_range, sensor.cluster_gap)
        .iter()
        .map(|c| fit_circle(c, pose.position()))
        .collect();
    Perception { hits, circles }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Right,
    Left,
}

impl Lane {
    /// Lane center offset from the red line, positive to the left.
    pub fn offset(self, lane_width: f64) -> f64 {
        match self {
            Lane::Right => -lane_width / 2.0,
            Lane::Left => lane_width / 2.0,
        }
    }

    fn other(self) -> Lane {
        match self {
            Lane::Right => Lane::Left,
            Lane::Left => Lane::Right,
        }
    }
}

/// Distance along the lane to the nearest obstacle intruding into `lane`,
/// with obstacles given in the vehicle frame.
fn blocking_distance(
    lane: Lane,
    target: &LaneTarget,
    local: &[Circle],
    lane_width: f64,
    params: &VehicleParams,
    cfg: &BehaviorSpec,
) -> Option<f64> {
    let center = lane.offset(lane_width);
    // Distance along the lane, measured from the vehicle's foot point.
    let dir = Vec2::new(1.0, target.poly[1]).unit();
    local
        .iter()
        .filter_map(|c| {
            let along = c.center.dot(dir);
            let behind = c.radius + params.body_length / 2.0 + cfg.clear_behind;
            if along < -behind || along > cfg.horizon {
                return None;
            }
            let rel = c.center.y - target.lateral_at(c.center.x.max(0.0));
            ((rel - center).abs() < c.radius + params.body_width / 2.0 + cfg.margin)
                .then_some(along)
        })
        .min_by(f64::total_cmp)
}

/// Keeps to the right lane unless an obstacle blocks it; moves back once
/// the right lane is clear. When both lanes are blocked the lane whose
/// nearest obstacle ahead is further away wins.
pub fn choose_lane(
    current: Lane,
    target: &LaneTarget,
    local: &[Circle],
    lane_width: f64,
    params: &VehicleParams,
    cfg: &BehaviorSpec,
) -> Lane {
    let block = |lane| blocking_distance(lane, target, local, lane_width, params, cfg);
    match (block(current), block(current.other())) {
        (None, None) => Lane::Right,
        (None, Some(_)) => current,
        (Some(_), None) => current.other(),
        (Some(here), Some(there)) => {
            // An obstacle already beside or behind is being passed.
            let ahead = |d: f64| if d < 0.0 { f64::INFINITY } else { d };
            if ahead(there) > ahead(here) {
                current.other()
            } else {
                current
            }
        }
    }
}

/// Goal pose in the vehicle frame: the lookahead point shifted into `lane`,
/// facing along the fitted line.
pub fn lane_goal(target: &LaneTarget, lane: Lane, lane_width: f64) -> Pose2D {
    let [a, b, _] = target.poly;
    let slope = 2.0 * a * target.lookahead + b;
    let tangent = Vec2::new(1.0, slope).unit();
    let p = target.point + tangent.perp() * lane.offset(lane_width);
    Pose2D::new(p.x, p.y, slope.atan())
}

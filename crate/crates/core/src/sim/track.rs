//! Road geometry: a Catmull-Rom centerline with two lanes.

use crate::geom::{Circle, Vec2};
use crate::vehicle::Pose2D;
use crate::vision::camera::{EDGE_BLACK, FLOOR_GRAY, LANE_RED, OBSTACLE_BLUE};
use crate::vision::GroundScene;

const SAMPLES_PER_SPAN: usize = 64;
const SPACING: f64 = 0.02;
const RASTER_RES: f64 = 0.01;
const RASTER_CHORD: f64 = 0.1;

/// Position of a point relative to the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackProjection {
    /// Arc length of the foot point; extrapolated past either end.
    pub s: f64,
    /// Signed offset, positive to the left of the driving direction.
    pub lateral: f64,
    pub foot: Vec2,
    pub tangent: Vec2,
}

/// Signed lateral offsets sampled on a fixed grid around the road.
#[derive(Debug, Clone)]
struct LateralRaster {
    origin: Vec2,
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl LateralRaster {
    fn build(chords: &[Vec2], reach: f64) -> Self {
        let (mut lo, mut hi) = (chords[0], chords[0]);
        for p in chords {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let origin = lo - Vec2::new(reach, reach);
        let width = ((hi.x - lo.x + 2.0 * reach) / RASTER_RES).ceil() as usize + 1;
        let height = ((hi.y - lo.y + 2.0 * reach) / RASTER_RES).ceil() as usize + 1;
        let mut values = vec![f32::NAN; width * height];
        let last = chords.len() - 2;
        for (k, w) in chords.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let seg = b - a;
            let len2 = seg.norm_sq();
            let dir = seg.unit();
            let cell = |v: f64, o: f64| ((v - o) / RASTER_RES).floor().max(0.0) as usize;
            let x0 = cell(a.x.min(b.x) - reach, origin.x);
            let y0 = cell(a.y.min(b.y) - reach, origin.y);
            let x1 = cell(a.x.max(b.x) + reach, origin.x).min(width - 1);
            let y1 = cell(a.y.max(b.y) + reach, origin.y).min(height - 1);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    let p = origin + Vec2::new(cx as f64 * RASTER_RES, cy as f64 * RASTER_RES);
                    let mut t = (p - a).dot(seg) / len2;
                    if k > 0 {
                        t = t.max(0.0);
                    }
                    if k < last {
                        t = t.min(1.0);
                    }
                    let foot = a + seg * t;
                    let d = p.dist(foot);
                    if d > reach {
                        continue;
                    }
                    let slot = &mut values[cy * width + cx];
                    if slot.is_nan() || d < f64::from(slot.abs()) {
                        let sign = if dir.cross(p - foot) >= 0.0 {
                            1.0
                        } else {
                            -1.0
                        };
                        *slot = (sign * d) as f32;
                    }
                }
            }
        }
        Self {
            origin,
            width,
            height,
            values,
        }
    }

    fn lookup(&self, p: Vec2) -> Option<f64> {
        let fx = ((p.x - self.origin.x) / RASTER_RES).round();
        let fy = ((p.y - self.origin.y) / RASTER_RES).round();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        let v = self.values[fy as usize * self.width + fx as usize];
        (!v.is_nan()).then_some(f64::from(v))
    }
}

/// A two-lane road. The red center line separates the left lane
/// (positive lateral) from the right lane; black edge lines sit at
/// `+-lane_width`.
#[derive(Debug, Clone)]
pub struct Track {
    control_points: Vec<Vec2>,
    pub lane_width: f64,
    pub line_width: f64,
    points: Vec<Vec2>,
    s: Vec<f64>,
    raster: LateralRaster,
}

fn catmull_rom(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2, t: f64) -> Vec2 {
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0
        + (p2 - p0) * t
        + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
        + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
        * 0.5
}

fn resample(line: &[Vec2], spacing: f64) -> Vec<Vec2> {
    let mut out = vec![line[0]];
    let mut carry = 0.0;
    for w in line.windows(2) {
        let len = w[0].dist(w[1]);
        let mut at = spacing - carry;
        while at <= len {
            out.push(w[0].lerp(w[1], at / len));
            at += spacing;
        }
        carry = len - (at - spacing);
    }
    let end = *line.last().expect("non-empty");
    if out.last().is_some_and(|p| p.dist(end) > 1e-9) {
        out.push(end);
    }
    out
}

impl Track {
    pub fn new(
        control_points: Vec<Vec2>,
        lane_width: f64,
        line_width: f64,
    ) -> Result<Self, String> {
        if control_points.len() < 2 {
            return Err("track needs at least two control points".into());
        }
        if control_points.windows(2).any(|w| w[0].dist(w[1]) < 1e-6) {
            return Err("consecutive track control points coincide".into());
        }
        if !(lane_width > 0.0 && line_width > 0.0 && line_width < lane_width) {
            return Err("need 0 < line_width < lane_width".into());
        }
        let n = control_points.len();
        let at = |i: isize| -> Vec2 {
            if i < 0 {
                control_points[0] * 2.0 - control_points[1]
            } else if i as usize >= n {
                control_points[n - 1] * 2.0 - control_points[n - 2]
            } else {
                control_points[i as usize]
            }
        };
        let mut dense = Vec::with_capacity((n - 1) * SAMPLES_PER_SPAN + 1);
        for i in 0..n as isize - 1 {
            for k in 0..SAMPLES_PER_SPAN {
                let t = k as f64 / SAMPLES_PER_SPAN as f64;
                dense.push(catmull_rom(at(i - 1), at(i), at(i + 1), at(i + 2), t));
            }
        }
        dense.push(control_points[n - 1]);
        let points = resample(&dense, SPACING);
        let mut s = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        s.push(0.0);
        for w in points.windows(2) {
            acc += w[0].dist(w[1]);
            s.push(acc);
        }
        let raster = LateralRaster::build(
            &resample(&points, RASTER_CHORD),
            lane_width + line_width + 0.3,
        );
        Ok(Self {
            control_points,
            lane_width,
            line_width,
            points,
            s,
            raster,
        })
    }

    pub fn control_points(&self) -> &[Vec2] {
        &self.control_points
    }

    pub fn centerline(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.s.last().expect("non-empty")
    }

    fn segment_at(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length());
        let i = self
            .s
            .partition_point(|v| *v <= s)
            .clamp(1, self.points.len() - 1)
            - 1;
        let len = self.s[i + 1] - self.s[i];
        (
            i,
            if len > 0.0 {
                (s - self.s[i]) / len
            } else {
                0.0
            },
        )
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let (i, t) = self.segment_at(s);
        self.points[i].lerp(self.points[i + 1], t)
    }

    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let (i, _) = self.segment_at(s);
        (self.points[i + 1] - self.points[i]).unit()
    }

    /// Pose at arc length `s`, offset `lateral` to the left, facing along
    /// the road.
    pub fn pose_at(&self, s: f64, lateral: f64) -> Pose2D {
        let t = self.tangent_at(s);
        let p = self.point_at(s) + t.perp() * lateral;
        Pose2D::new(p.x, p.y, t.angle())
    }

    pub fn project(&self, p: Vec2) -> TrackProjection {
        let last = self.points.len() - 2;
        let mut best: Option<(f64, TrackProjection)> = None;
        for (k, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let seg = b - a;
            let len = seg.norm();
            let mut t = (p - a).dot(seg) / (len * len);
            if k > 0 {
                t = t.max(0.0);
            }
            if k < last {
                t = t.min(1.0);
            }
            let foot = a + seg * t;
            let d = p.dist(foot);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                let tangent = seg * (1.0 / len);
                best = Some((
                    d,
                    TrackProjection {
                        s: self.s[k] + t * len,
                        lateral: tangent.cross(p - foot),
                        foot,
                        tangent,
                    },
                ));
            }
        }
        best.expect("track has segments").1
    }

    /// Signed lateral offset from the precomputed raster; `None` far from
    /// the road.
    pub fn lateral_lookup(&self, p: Vec2) -> Option<f64> {
        self.raster.lookup(p)
    }

    /// Largest curvature along the centerline, from circumscribed circles
    /// over points `stride` samples apart.
    pub fn max_curvature(&self) -> f64 {
        let stride = 10;
        let mut k: f64 = 0.0;
        for i in stride..self.points.len().saturating_sub(stride) {
            let (a, b, c) = (
                self.points[i - stride],
                self.points[i],
                self.points[i + stride],
            );
            let area2 = (b - a).cross(c - a).abs();
            let denom = a.dist(b) * b.dist(c) * c.dist(a);
            if denom > 0.0 {
                k = k.max(2.0 * area2 / denom);
            }
        }
        k
    }

    /// Color of a point given its signed lateral offset.
    pub fn color_for_lateral(&self, lateral: f64) -> [u8; 3] {
        let d = lateral.abs();
        let half = self.line_width / 2.0;
        if d <= half {
            LANE_RED
        } else if (d - self.lane_width).abs() <= half {
            EDGE_BLACK
        } else {
            FLOOR_GRAY
        }
    }
}

/// The floor as seen by the camera: the road plus obstacle footprints.
pub struct World<'a> {
    pub track: &'a Track,
    pub obstacles: &'a [Circle],
}

impl GroundScene for World<'_> {
    fn color_at(&self, p: Vec2) -> [u8; 3] {
        if self.obstacles.iter().any(|c| c.center.dist(p) <= c.radius) {
            return OBSTACLE_BLUE;
        }
        self.track
            .lateral_lookup(p)
            .map_or(FLOOR_GRAY, |lat| self.track.color_for_lateral(lat))
    }
}

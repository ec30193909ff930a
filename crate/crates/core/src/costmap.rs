//! Occupancy costmap with lethal cells, exponential inflation and planner
//! traversal costs.
//!
//! Cell value legend (also used by the P5 dump):
//!
//! | value     | meaning                                               |
//! |-----------|-------------------------------------------------------|
//! | 0         | free space                                            |
//! | 1..=252   | inflated cost, decays with distance from obstacles    |
//! | 253       | inscribed: the footprint would touch an obstacle      |
//! | 254       | lethal: an obstacle occupies the cell                 |
//! | 255       | unknown                                               |

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Circle, Vec2};
use crate::vehicle::Pose2D;

pub const FREE: u8 = 0;
pub const MAX_INFLATED: u8 = 252;
pub const INSCRIBED: u8 = 253;
pub const LETHAL: u8 = 254;
pub const UNKNOWN: u8 = 255;

#[derive(Debug, Error, PartialEq)]
pub enum CostmapError {
    #[error("invalid costmap geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflationParams {
    pub inflation_radius: f64,
    pub cost_scaling_factor: f64,
    pub inscribed_radius: f64,
}

impl Default for InflationParams {
    fn default() -> Self {
        Self {
            inflation_radius: 0.6,
            cost_scaling_factor: 6.0,
            inscribed_radius: 0.16,
        }
    }
}

impl InflationParams {
    pub fn validate(&self) -> Result<(), CostmapError> {
        let ok = self.inscribed_radius >= 0.0
            && self.inflation_radius >= self.inscribed_radius
            && self.cost_scaling_factor >= 0.0
            && self.inflation_radius.is_finite()
            && self.cost_scaling_factor.is_finite();
        if ok {
            Ok(())
        } else {
            Err(CostmapError::InvalidParams(format!("{self:?}")))
        }
    }

    /// Cost of a non-lethal cell at metric distance `d` from the nearest
    /// lethal cell, or `None` when the cell is outside the inflation radius.
    pub fn cost_at(&self, d: f64) -> Option<u8> {
        const EPS: f64 = 1e-9;
        if d <= self.inscribed_radius + EPS {
            Some(INSCRIBED)
        } else if d <= self.inflation_radius + EPS {
            let c = f64::from(MAX_INFLATED)
                * (-self.cost_scaling_factor * (d - self.inscribed_radius)).exp();
            Some(c.round() as u8)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerCostParams {
    pub cost_factor: f64,
    pub neutral_cost: f64,
}

impl Default for PlannerCostParams {
    fn default() -> Self {
        Self {
            cost_factor: 0.8,
            neutral_cost: 50.0,
        }
    }
}

impl PlannerCostParams {
    pub fn validate(&self) -> Result<(), CostmapError> {
        if self.neutral_cost >= 1.0 && self.cost_factor >= 0.0 && self.cost_factor.is_finite() {
            Ok(())
        } else {
            Err(CostmapError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Row-major grid of cell costs. `origin` is the world position of the
/// lower-left corner of cell (0, 0); rows grow along +y.
#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    resolution: f64,
    width: usize,
    height: usize,
    origin: Vec2,
    cells: Vec<u8>,
    inflation: Option<InflationParams>,
}

impl Costmap {
    pub fn new(
        resolution: f64,
        width: usize,
        height: usize,
        origin: Vec2,
    ) -> Result<Self, CostmapError> {
        if !(resolution.is_finite() && resolution > 0.0) || width == 0 || height == 0 {
            return Err(CostmapError::InvalidGeometry(format!(
                "resolution={resolution} width={width} height={height}"
            )));
        }
        Ok(Self {
            resolution,
            width,
            height,
            origin,
            cells: vec![FREE; width * height],
            inflation: None,
        })
    }

    /// A square window of side `size` meters centered on `center`.
    pub fn centered(center: Vec2, size: f64, resolution: f64) -> Result<Self, CostmapError> {
        let n = (size / resolution).round().max(1.0) as usize;
        let half = n as f64 * resolution / 2.0;
        Self::new(resolution, n, n, center - Vec2::new(half, half))
    }

    /// Builds a map from raw cell values (row-major).
    pub fn from_cells(
        resolution: f64,
        width: usize,
        height: usize,
        origin: Vec2,
        cells: Vec<u8>,
    ) -> Result<Self, CostmapError> {
        let mut map = Self::new(resolution, width, height, origin)?;
        if cells.len() != width * height {
            return Err(CostmapError::InvalidGeometry(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        map.cells = cells;
        Ok(map)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Parameters of the last [`Costmap::inflate`] call, if any.
    pub fn inflation(&self) -> Option<&InflationParams> {
        self.inflation.as_ref()
    }

    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width + cx
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn cost(&self, cx: usize, cy: usize) -> u8 {
        self.cells[self.index(cx, cy)]
    }

    pub fn cost_at_index(&self, index: usize) -> u8 {
        self.cells[index]
    }

    pub fn set_cost(&mut self, cx: usize, cy: usize, value: u8) {
        let i = self.index(cx, cy);
        self.cells[i] = value;
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Vec2 {
        self.origin
            + Vec2::new(
                (cx as f64 + 0.5) * self.resolution,
                (cy as f64 + 0.5) * self.resolution,
            )
    }

    pub fn index_center(&self, index: usize) -> Vec2 {
        let (cx, cy) = self.coords(index);
        self.cell_center(cx, cy)
    }

    /// Cell containing world point `p`, if inside the map.
    pub fn world_to_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx >= 0.0 && fy >= 0.0 && (fx as usize) < self.width && (fy as usize) < self.height {
            Some((fx as usize, fy as usize))
        } else {
            None
        }
    }

    pub fn world_to_index(&self, p: Vec2) -> Option<usize> {
        self.world_to_cell(p).map(|(cx, cy)| self.index(cx, cy))
    }

    /// Cost at world point `p`; `UNKNOWN` outside the map.
    pub fn cost_at_world(&self, p: Vec2) -> u8 {
        self.world_to_index(p).map_or(UNKNOWN, |i| self.cells[i])
    }

    /// Cell index range overlapped by an axis-aligned box, clipped to the map.
    fn clip_box(&self, lo: Vec2, hi: Vec2) -> Option<(usize, usize, usize, usize)> {
        let to_cell = |v: f64, o: f64| ((v - o) / self.resolution).floor();
        let x0 = to_cell(lo.x, self.origin.x).max(0.0);
        let y0 = to_cell(lo.y, self.origin.y).max(0.0);
        let x1 = to_cell(hi.x, self.origin.x).min(self.width as f64 - 1.0);
        let y1 = to_cell(hi.y, self.origin.y).min(self.height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            None
        } else {
            Some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
        }
    }

    /// Marks every cell whose center lies inside one of `obstacles` as lethal.
    /// Obstacles partly or fully outside the window are clipped.
    pub fn mark_obstacles(&self, obstacles: &[Circle]) -> Costmap {
        let mut out = self.clone();
        for c in obstacles {
            let r = Vec2::new(c.radius, c.radius);
            let Some((x0, y0, x1, y1)) = out.clip_box(c.center - r, c.center + r) else {
                continue;
            };
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    if out.cell_center(cx, cy).dist(c.center) <= c.radius {
                        out.set_cost(cx, cy, LETHAL);
                    }
                }
            }
        }
        out
    }

    /// Marks the cells containing each point as lethal.
    pub fn mark_points(&self, points: &[Vec2]) -> Costmap {
        let mut out = self.clone();
        for p in points {
            if let Some(i) = out.world_to_index(*p) {
                out.cells[i] = LETHAL;
            }
        }
        out
    }

    /// Metric distance from each cell center to the nearest lethal cell center.
    pub fn distance_field(&self) -> DistanceField {
        let sq = squared_edt(self.width, self.height, |i| self.cells[i] == LETHAL);
        DistanceField {
            resolution: self.resolution,
            width: self.width,
            height: self.height,
            origin: self.origin,
            dist: sq
                .into_iter()
                .map(|d| {
                    if d.is_finite() {
                        d.sqrt() * self.resolution
                    } else {
                        f64::INFINITY
                    }
                })
                .collect(),
        }
    }

    /// Spreads cost around lethal cells.
    ///
    /// A non-lethal cell at distance `d` from the nearest lethal cell gets 253
    /// when `d <= inscribed_radius`, `round(252 * exp(-k (d - inscribed)))`
    /// up to `inflation_radius` and keeps its value beyond. Existing values are
    /// never lowered.
    pub fn inflate(&self, p: &InflationParams) -> Costmap {
        let field = self.distance_field();
        let mut out = self.clone();
        for (i, cell) in out.cells.iter_mut().enumerate() {
            if *cell == LETHAL {
                continue;
            }
            if let Some(c) = p.cost_at(field.dist[i]) {
                *cell = (*cell).max(c);
            }
        }
        out.inflation = Some(*p);
        out
    }

    /// Per-step edge weight for the global planner, `None` if impassable.
    ///
    /// Inscribed cells count as impassable along with lethal and unknown ones:
    /// a footprint centered there already touches an obstacle.
    pub fn traversal_cost(&self, index: usize, p: &PlannerCostParams) -> Option<f64> {
        let c = self.cells[index];
        if c >= INSCRIBED {
            None
        } else {
            Some(p.neutral_cost + p.cost_factor * f64::from(c))
        }
    }

    /// Writes the map as a binary graymap, top row = largest y.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        for cy in (0..self.height).rev() {
            let row = &self.cells[cy * self.width..(cy + 1) * self.width];
            w.write_all(row)?;
        }
        Ok(())
    }
}

/// Distance-to-nearest-lethal lookup built from a [`Costmap`].
#[derive(Debug, Clone)]
pub struct DistanceField {
    resolution: f64,
    width: usize,
    height: usize,
    origin: Vec2,
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn at_index(&self, index: usize) -> f64 {
        self.dist[index]
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Distance at the cell containing `p`; infinite outside the map.
    pub fn at_world(&self, p: Vec2) -> f64 {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx >= 0.0 && fy >= 0.0 && (fx as usize) < self.width && (fy as usize) < self.height {
            self.dist[fy as usize * self.width + fx as usize]
        } else {
            f64::INFINITY
        }
    }

    /// Conservative clearance of a disc: distance from its boundary to the
    /// nearest lethal cell square, never overestimated.
    pub fn disc_clearance(&self, c: &Circle) -> f64 {
        // The cell containing the center is at most half a diagonal away, and
        // the lethal square extends half a diagonal around its center.
        self.at_world(c.center) - c.radius - self.resolution * std::f64::consts::SQRT_2
    }
}

/// 1-D squared distance transform of a sampled function (lower envelope of
/// parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let mut have_finite = f[0].is_finite();
    for q in 1..n {
        if !f[q].is_finite() {
            continue;
        }
        if !have_finite {
            v[0] = q;
            have_finite = true;
            continue;
        }
        loop {
            let p = v[k];
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if !have_finite {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared euclidean distance transform, in cell units, two passes.
fn squared_edt(width: usize, height: usize, is_site: impl Fn(usize) -> bool) -> Vec<f64> {
    let n = width.max(height);
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut grid: Vec<f64> = (0..width * height)
        .map(|i| if is_site(i) { 0.0 } else { f64::INFINITY })
        .collect();
    for cx in 0..width {
        for cy in 0..height {
            f[cy] = grid[cy * width + cx];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for cy in 0..height {
            grid[cy * width + cx] = out[cy];
        }
    }
    for cy in 0..height {
        f[..width].copy_from_slice(&grid[cy * width..(cy + 1) * width]);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        grid[cy * width..(cy + 1) * width].copy_from_slice(&out[..width]);
    }
    grid
}

/// Simulated planar range finder over circular obstacles.
///
/// Beam `i` points at `pose.theta + 2 pi i / n_beams`; each range is the
/// distance to the first obstacle surface, or `max_range` when nothing is hit.
pub fn raycast_scan(
    obstacles: &[Circle],
    pose: &Pose2D,
    n_beams: usize,
    max_range: f64,
) -> Vec<f64> {
    let origin = pose.position();
    (0..n_beams)
        .map(|i| {
            let angle = pose.theta + 2.0 * std::f64::consts::PI * i as f64 / n_beams as f64;
            let dir = Vec2::from_angle(angle);
            obstacles
                .iter()
                .filter_map(|c| ray_circle(origin, dir, c))
                .fold(max_range, f64::min)
        })
        .collect()
}

/// Distance along a unit ray to the first intersection with `c`; zero when
/// the origin is inside.
fn ray_circle(origin: Vec2, dir: Vec2, c: &Circle) -> Option<f64> {
    let f = origin - c.center;
    let b = f.dot(dir);
    let cc = f.norm_sq() - c.radius * c.radius;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

/// World-frame hit points of a scan; beams at `max_range` are dropped.
pub fn scan_hits(pose: &Pose2D, ranges: &[f64], max_range: f64) -> Vec<Vec2> {
    let n = ranges.len();
    ranges
        .iter()
        .enumerate()
        .filter(|(_, r)| **r < max_range)
        .map(|(i, r)| {
            let angle = pose.theta + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            pose.position() + Vec2::from_angle(angle) * *r
        })
        .collect()
}

//! Simplified timed elastic band planner.
//!
//! A band is a chain of poses with a time interval between each consecutive
//! pair. The optimizer trades total travel time against quadratic exterior
//! penalties for speed, acceleration, turning radius, obstacle clearance and
//! non-holonomic consistency. Several bands from distinct homotopy classes
//! (pass left, pass right, follow the incumbent) are optimized side by side
//! and the cheapest feasible one drives the vehicle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::geom::{point_polyline_distance, wrap_angle, Circle, Vec2};
use crate::global_planner::GlobalPath;
use crate::vehicle::{ControlCommand, Pose2D, VehicleParams};

/// Upper bound on band size.
pub const MAX_NODES: usize = 40;
/// Smallest time interval the optimizer will produce.
pub const DT_MIN: f64 = 0.01;
/// Clearance shortfall tolerated when ranking bands as feasible.
pub const FEASIBILITY_SLACK: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum TebError {
    #[error("band objective became non-finite")]
    Diverged,
    #[error("invalid TEB config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TebConfig {
    pub weight_time: f64,
    pub weight_vel: f64,
    pub weight_acc: f64,
    pub weight_turn_radius: f64,
    pub weight_obstacle: f64,
    pub weight_kinematics: f64,
    /// Required distance from a band node to an obstacle surface.
    pub min_obstacle_dist: f64,
    pub dt_ref: f64,
    pub dt_hysteresis: f64,
    pub max_iterations: usize,
    pub n_alternatives: usize,
}

impl Default for TebConfig {
    fn default() -> Self {
        Self {
            weight_time: 1.0,
            weight_vel: 200.0,
            weight_acc: 5.0,
            weight_turn_radius: 20.0,
            weight_obstacle: 2000.0,
            weight_kinematics: 200.0,
            min_obstacle_dist: 0.35,
            dt_ref: 0.3,
            dt_hysteresis: 0.1,
            max_iterations: 500,
            n_alternatives: 3,
        }
    }
}

impl TebConfig {
    pub fn validate(&self) -> Result<(), TebError> {
        let weights = [
            self.weight_time,
            self.weight_vel,
            self.weight_acc,
            self.weight_turn_radius,
            self.weight_obstacle,
            self.weight_kinematics,
        ];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(TebError::InvalidConfig("weights must be >= 0".into()));
        }
        if !(self.dt_hysteresis > 0.0 && self.dt_ref > self.dt_hysteresis) {
            return Err(TebError::InvalidConfig(
                "need dt_ref > dt_hysteresis > 0".into(),
            ));
        }
        if self.max_iterations == 0 || self.n_alternatives == 0 {
            return Err(TebError::InvalidConfig(
                "max_iterations and n_alternatives must be >= 1".into(),
            ));
        }
        if !(self.min_obstacle_dist >= 0.0) {
            return Err(TebError::InvalidConfig(
                "min_obstacle_dist must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticBand {
    pub nodes: Vec<Pose2D>,
    /// `dts[k]` is the time from node `k` to node `k + 1`.
    pub dts: Vec<f64>,
    pub fixed_start: bool,
    pub fixed_goal: bool,
}

impl ElasticBand {
    pub fn new(nodes: Vec<Pose2D>, dts: Vec<f64>) -> Self {
        debug_assert_eq!(nodes.len(), dts.len() + 1);
        Self {
            nodes,
            dts,
            fixed_start: true,
            fixed_goal: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.dts.iter().sum()
    }

    pub fn segment_length(&self, k: usize) -> f64 {
        self.nodes[k].position().dist(self.nodes[k + 1].position())
    }

    pub fn path_length(&self) -> f64 {
        (0..self.dts.len()).map(|k| self.segment_length(k)).sum()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.nodes.iter().map(Pose2D::position).collect()
    }

    /// Smallest distance from the band polyline to any obstacle surface.
    pub fn min_clearance(&self, obstacles: &[Circle]) -> f64 {
        let line = self.positions();
        obstacles
            .iter()
            .map(|c| point_polyline_distance(c.center, &line) - c.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest node-to-obstacle-surface distance.
    pub fn min_node_clearance(&self, obstacles: &[Circle]) -> f64 {
        self.nodes
            .iter()
            .map(|n| node_clearance(n.position(), obstacles))
            .fold(f64::INFINITY, f64::min)
    }

    fn is_finite(&self) -> bool {
        self.nodes.iter().all(Pose2D::is_finite) && self.dts.iter().all(|d| d.is_finite())
    }
}

fn node_clearance(p: Vec2, obstacles: &[Circle]) -> f64 {
    obstacles
        .iter()
        .map(|c| c.clearance(p))
        .fold(f64::INFINITY, f64::min)
}

/// Heading from `a` towards `b`, or `fallback` when they coincide.
fn direction(a: Vec2, b: Vec2, fallback: f64) -> f64 {
    let d = b - a;
    if d.norm() > 1e-9 {
        d.angle()
    } else {
        fallback
    }
}

/// Resamples a polyline into `n + 1` points equally spaced by arc length.
fn resample(line: &[Vec2], n: usize) -> Vec<Vec2> {
    let total: f64 = line.windows(2).map(|w| w[0].dist(w[1])).sum();
    if total <= 0.0 || line.len() < 2 {
        return vec![line[0]; n + 1];
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut seg = 0;
    let mut acc = 0.0;
    for i in 0..=n {
        let target = total * i as f64 / n as f64;
        while seg + 1 < line.len() - 1 && acc + line[seg].dist(line[seg + 1]) < target {
            acc += line[seg].dist(line[seg + 1]);
            seg += 1;
        }
        let len = line[seg].dist(line[seg + 1]);
        let t = if len > 0.0 {
            ((target - acc) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(line[seg].lerp(line[seg + 1], t));
    }
    out
}

/// Builds a band along a polyline from `pose` to `goal`.
fn band_along(
    pose: &Pose2D,
    goal: &Pose2D,
    line: &[Vec2],
    cfg: &TebConfig,
    params: &VehicleParams,
) -> ElasticBand {
    let total: f64 = line.windows(2).map(|w| w[0].dist(w[1])).sum();
    if total < 1e-9 {
        return ElasticBand::new(vec![*pose, *goal], vec![cfg.dt_ref]);
    }
    let spacing = cfg.dt_ref * params.v_max;
    let n = ((total / spacing).round() as usize).clamp(1, MAX_NODES - 1);
    let pts = resample(line, n);
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(*pose);
    for i in 1..n {
        let th = direction(pts[i - 1], pts[i + 1], pose.theta);
        nodes.push(Pose2D::new(pts[i].x, pts[i].y, th));
    }
    nodes.push(*goal);
    let dts = (0..n)
        .map(|k| (nodes[k].position().dist(nodes[k + 1].position()) / params.v_max).max(DT_MIN))
        .collect();
    ElasticBand::new(nodes, dts)
}

/// Part of the global path between the pose and the goal, as a polyline
/// that starts at the pose and ends at the goal.
fn path_between(pose: Vec2, goal: Vec2, path: &GlobalPath) -> Vec<Vec2> {
    let wps = &path.waypoints;
    let mut line = vec![pose];
    if !wps.is_empty() {
        let nearest = |p: Vec2| {
            (0..wps.len())
                .min_by(|&a, &b| wps[a].dist(p).total_cmp(&wps[b].dist(p)))
                .unwrap_or(0)
        };
        let i0 = nearest(pose);
        let i1 = nearest(goal);
        if i1 > i0 + 1 {
            line.extend_from_slice(&wps[i0 + 1..i1]);
        }
    }
    line.push(goal);
    line
}

/// Seeds a band along the global path with node spacing about
/// `dt_ref * v_max` and intervals of `segment_length / v_max`.
pub fn seed_band(
    pose: &Pose2D,
    goal: &Pose2D,
    global_path: &GlobalPath,
    cfg: &TebConfig,
    params: &VehicleParams,
) -> ElasticBand {
    let line = path_between(pose.position(), goal.position(), global_path);
    band_along(pose, goal, &line, cfg, params)
}

fn penalty_sq(x: f64) -> f64 {
    let p = x.max(0.0);
    p * p
}

fn segment_speed(b: &ElasticBand, k: usize) -> f64 {
    b.segment_length(k) / b.dts[k]
}

fn time_term(b: &ElasticBand, k: usize, cfg: &TebConfig) -> f64 {
    cfg.weight_time * b.dts[k]
}

fn vel_term(b: &ElasticBand, k: usize, cfg: &TebConfig, params: &VehicleParams) -> f64 {
    cfg.weight_vel * penalty_sq(segment_speed(b, k).abs() - params.v_max)
}

fn acc_term(b: &ElasticBand, k: usize, cfg: &TebConfig, params: &VehicleParams) -> f64 {
    let a = (segment_speed(b, k + 1) - segment_speed(b, k)) / (0.5 * (b.dts[k] + b.dts[k + 1]));
    cfg.weight_acc * penalty_sq(a.abs() - params.a_max)
}

fn turn_term(b: &ElasticBand, k: usize, cfg: &TebConfig, params: &VehicleParams) -> f64 {
    let dth = wrap_angle(b.nodes[k + 1].theta - b.nodes[k].theta).abs();
    if dth < 1e-9 {
        return 0.0;
    }
    let r = b.segment_length(k) / dth;
    cfg.weight_turn_radius * penalty_sq(params.min_turn_radius() - r)
}

/// Angle between the direction of travel and the mean heading of a segment.
fn kinematic_residual(b: &ElasticBand, k: usize) -> f64 {
    let a = b.nodes[k];
    let c = b.nodes[k + 1];
    let d = c.position() - a.position();
    if d.norm() < 1e-9 {
        return 0.0;
    }
    let mean = a.theta + 0.5 * wrap_angle(c.theta - a.theta);
    wrap_angle(d.angle() - mean)
}

fn kin_term(b: &ElasticBand, k: usize, cfg: &TebConfig) -> f64 {
    let h = kinematic_residual(b, k);
    cfg.weight_kinematics * h * h
}

fn obs_term(b: &ElasticBand, i: usize, obstacles: &[Circle], cfg: &TebConfig) -> f64 {
    if obstacles.is_empty() {
        return 0.0;
    }
    let d = node_clearance(b.nodes[i].position(), obstacles);
    cfg.weight_obstacle * penalty_sq(cfg.min_obstacle_dist - d)
}

/// Per-term breakdown of [`band_objective`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ObjectiveTerms {
    pub time: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub turning: f64,
    pub obstacle: f64,
    pub kinematics: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.time
            + self.velocity
            + self.acceleration
            + self.turning
            + self.obstacle
            + self.kinematics
    }
}

pub fn objective_terms(
    band: &ElasticBand,
    obstacles: &[Circle],
    cfg: &TebConfig,
    params: &VehicleParams,
) -> ObjectiveTerms {
    let segs = band.dts.len();
    let mut t = ObjectiveTerms::default();
    for k in 0..segs {
        t.time += time_term(band, k, cfg);
        t.velocity += vel_term(band, k, cfg, params);
        t.turning += turn_term(band, k, cfg, params);
        t.kinematics += kin_term(band, k, cfg);
    }
    for k in 0..segs.saturating_sub(1) {
        t.acceleration += acc_term(band, k, cfg, params);
    }
    for i in 0..band.nodes.len() {
        t.obstacle += obs_term(band, i, obstacles, cfg);
    }
    t
}

/// Weighted sum of the time term and every squared constraint penalty.
pub fn band_objective(
    band: &ElasticBand,
    obstacles: &[Circle],
    cfg: &TebConfig,
    params: &VehicleParams,
) -> f64 {
    objective_terms(band, obstacles, cfg, params).total()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    Node(usize, usize),
    Dt(usize),
}

struct Problem<'a> {
    obstacles: &'a [Circle],
    cfg: &'a TebConfig,
    params: &'a VehicleParams,
}

impl Problem<'_> {
    fn objective(&self, b: &ElasticBand) -> f64 {
        band_objective(b, self.obstacles, self.cfg, self.params)
    }

    /// Sum of the terms that depend on `var`.
    fn local(&self, b: &ElasticBand, var: Var) -> f64 {
        let segs = b.dts.len();
        let (cfg, params) = (self.cfg, self.params);
        let mut s = 0.0;
        match var {
            Var::Node(i, _) => {
                for k in i.saturating_sub(1)..=i.min(segs.saturating_sub(1)) {
                    if k < segs {
                        s += vel_term(b, k, cfg, params)
                            + turn_term(b, k, cfg, params)
                            + kin_term(b, k, cfg);
                    }
                }
                for k in i.saturating_sub(2)..=i {
                    if k + 1 < segs {
                        s += acc_term(b, k, cfg, params);
                    }
                }
                s += obs_term(b, i, self.obstacles, cfg);
            }
            Var::Dt(k) => {
                s += time_term(b, k, cfg) + vel_term(b, k, cfg, params);
                for j in k.saturating_sub(1)..=k {
                    if j + 1 < segs {
                        s += acc_term(b, j, cfg, params);
                    }
                }
            }
        }
        s
    }

    fn vars(&self, b: &ElasticBand) -> Vec<Var> {
        let n = b.nodes.len();
        let first = usize::from(b.fixed_start);
        let last = if b.fixed_goal { n.saturating_sub(1) } else { n };
        let mut v: Vec<Var> = (first..last)
            .flat_map(|i| (0..3).map(move |c| Var::Node(i, c)))
            .collect();
        v.extend((0..b.dts.len()).map(Var::Dt));
        v
    }
}

fn get(b: &ElasticBand, v: Var) -> f64 {
    match v {
        Var::Node(i, 0) => b.nodes[i].x,
        Var::Node(i, 1) => b.nodes[i].y,
        Var::Node(i, _) => b.nodes[i].theta,
        Var::Dt(k) => b.dts[k],
    }
}

fn set(b: &mut ElasticBand, v: Var, value: f64) {
    match v {
        Var::Node(i, 0) => b.nodes[i].x = value,
        Var::Node(i, 1) => b.nodes[i].y = value,
        Var::Node(i, _) => b.nodes[i].theta = value,
        Var::Dt(k) => b.dts[k] = value,
    }
}

/// Central-difference gradient and diagonal curvature over the free
/// variables, using only the terms each variable touches.
fn gradient(problem: &Problem<'_>, band: &ElasticBand, h: f64) -> (Vec<Var>, Vec<f64>, Vec<f64>) {
    let vars = problem.vars(band);
    let mut work = band.clone();
    let mut grad = Vec::with_capacity(vars.len());
    let mut curv = Vec::with_capacity(vars.len());
    for &v in &vars {
        let x0 = get(&work, v);
        let f0 = problem.local(&work, v);
        set(&mut work, v, x0 + h);
        let fp = problem.local(&work, v);
        set(&mut work, v, x0 - h);
        let fm = problem.local(&work, v);
        set(&mut work, v, x0);
        grad.push((fp - fm) / (2.0 * h));
        curv.push((fp - 2.0 * f0 + fm) / (h * h));
    }
    (vars, grad, curv)
}

/// Finite-difference gradient of [`band_objective`] over the free variables,
/// ordered as free node (x, y, theta) triples followed by the time intervals.
pub fn objective_gradient(
    band: &ElasticBand,
    obstacles: &[Circle],
    cfg: &TebConfig,
    params: &VehicleParams,
    h: f64,
) -> Vec<f64> {
    let problem = Problem {
        obstacles,
        cfg,
        params,
    };
    gradient(&problem, band, h).1
}

const FD_STEP: f64 = 1e-6;
const CURVATURE_FLOOR: f64 = 1.0;
const ARMIJO: f64 = 1e-4;
const REL_TOL: f64 = 1e-6;

/// One accepted descent step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub band: ElasticBand,
    pub objective: f64,
    pub steps: Vec<StepRecord>,
    pub iterations: usize,
}

/// Inserts a node where an interval is too long and merges where it is too
/// short. Returns true if the band changed.
fn resize(band: &mut ElasticBand, cfg: &TebConfig) -> bool {
    let hi = cfg.dt_ref + cfg.dt_hysteresis;
    let lo = cfg.dt_ref - cfg.dt_hysteresis;
    let mut changed = false;
    let mut k = 0;
    while k < band.dts.len() {
        if band.dts[k] > hi && band.nodes.len() < MAX_NODES {
            let a = band.nodes[k];
            let b = band.nodes[k + 1];
            let mid = a.position().lerp(b.position(), 0.5);
            let th = a.theta + 0.5 * wrap_angle(b.theta - a.theta);
            band.nodes.insert(k + 1, Pose2D::new(mid.x, mid.y, th));
            let half = band.dts[k] / 2.0;
            band.dts[k] = half;
            band.dts.insert(k + 1, half);
            changed = true;
            continue;
        }
        if band.dts[k] < lo && band.dts.len() > 1 {
            // Drop an interior node adjacent to interval k.
            let remove = if k + 1 < band.nodes.len() - 1 {
                k + 1
            } else {
                k
            };
            if remove == 0 {
                k += 1;
                continue;
            }
            band.nodes.remove(remove);
            let merged = band.dts[remove - 1] + band.dts[remove];
            band.dts[remove - 1] = merged;
            band.dts.remove(remove);
            changed = true;
            k = k.saturating_sub(1);
            continue;
        }
        k += 1;
    }
    changed
}

/// Preconditioned gradient descent with backtracking line search on the free
/// node coordinates and intervals, interleaved with band resizing.
pub fn optimize(
    band: &ElasticBand,
    obstacles: &[Circle],
    cfg: &TebConfig,
    params: &VehicleParams,
) -> Result<OptimizeReport, TebError> {
    let problem = Problem {
        obstacles,
        cfg,
        params,
    };
    let mut band = band.clone();
    let mut steps = Vec::new();
    let mut alpha: f64 = 1.0;
    let mut iterations = 0;
    for _ in 0..cfg.max_iterations {
        iterations += 1;
        resize(&mut band, cfg);
        let f0 = problem.objective(&band);
        if !f0.is_finite() {
            return Err(TebError::Diverged);
        }
        let (vars, grad, curv) = gradient(&problem, &band, FD_STEP);
        let dir: Vec<f64> = grad
            .iter()
            .zip(&curv)
            .map(|(g, c)| -g / c.max(CURVATURE_FLOOR))
            .collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if slope >= 0.0 || slope.abs() < 1e-14 {
            break;
        }
        let mut accepted = None;
        let mut a = (alpha * 2.0).min(1.0);
        for _ in 0..40 {
            let mut trial = band.clone();
            for (v, d) in vars.iter().zip(&dir) {
                let x = get(&trial, *v) + a * d;
                set(
                    &mut trial,
                    *v,
                    if matches!(v, Var::Dt(_)) {
                        x.max(DT_MIN)
                    } else {
                        x
                    },
                );
            }
            let f1 = problem.objective(&trial);
            if f1.is_finite() && f1 <= f0 + ARMIJO * a * slope {
                accepted = Some((trial, f1));
                break;
            }
            a *= 0.5;
        }
        let Some((mut trial, f1)) = accepted else {
            break;
        };
        for n in &mut trial.nodes {
            *n = Pose2D::new(n.x, n.y, n.theta);
        }
        alpha = a;
        steps.push(StepRecord {
            before: f0,
            after: f1,
        });
        band = trial;
        if (f0 - f1) <= REL_TOL * f0.abs().max(1e-12) {
            break;
        }
    }
    if resize(&mut band, cfg) {
        // A final insertion pass leaves every interval within the upper
        // hysteresis bound; merges are left to the next call.
    }
    if !band.is_finite() {
        return Err(TebError::Diverged);
    }
    let objective = problem.objective(&band);
    if !objective.is_finite() {
        return Err(TebError::Diverged);
    }
    Ok(OptimizeReport {
        band,
        objective,
        steps,
        iterations,
    })
}

/// Command that follows the first band segment.
pub fn first_segment_command(band: &ElasticBand, params: &VehicleParams) -> ControlCommand {
    if band.nodes.len() < 2 {
        return ControlCommand::STOP;
    }
    let a = band.nodes[0];
    let b = band.nodes[1];
    let d = b.position() - a.position();
    let ds = d.norm();
    if ds < 1e-6 {
        return ControlCommand::STOP;
    }
    let forward = d.dot(a.heading()) > 0.0;
    let v = if forward {
        (ds / band.dts[0]).min(params.v_max)
    } else {
        0.0
    };
    let kappa = wrap_angle(b.theta - a.theta) / ds;
    ControlCommand::new(v.max(0.0), params.steering_for_curvature(kappa))
}

/// Which homotopy class a candidate band was seeded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandOrigin {
    Incumbent,
    Left,
    Right,
    Reseeded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub origin: BandOrigin,
    pub objective: f64,
    pub clearance: f64,
    pub feasible: bool,
    #[serde(skip)]
    pub band: ElasticBand,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TebDecision {
    pub command: ControlCommand,
    pub candidates: Vec<Candidate>,
    /// Index into `candidates`; `None` when every band was infeasible.
    pub chosen: Option<usize>,
}

impl TebDecision {
    pub fn chosen_band(&self) -> Option<&ElasticBand> {
        self.chosen.map(|i| &self.candidates[i].band)
    }
}

/// The obstacle nearest to `from` along `line` that sits closer to the line
/// than `min_dist`.
fn blocking_obstacle(line: &[Vec2], obstacles: &[Circle], min_dist: f64) -> Option<(Circle, Vec2)> {
    let mut best: Option<(f64, Circle, Vec2)> = None;
    let mut travelled = 0.0;
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = b - a;
        let len = seg.norm();
        for c in obstacles {
            let t = if len > 0.0 {
                ((c.center - a).dot(seg) / (len * len)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let foot = a + seg * t;
            if foot.dist(c.center) - c.radius < min_dist {
                let along = travelled + t * len;
                let normal = if len > 0.0 {
                    seg.unit().perp()
                } else {
                    Vec2::new(0.0, 1.0)
                };
                if best.as_ref().is_none_or(|(s, _, _)| along < *s) {
                    best = Some((along, *c, normal));
                }
            }
        }
        travelled += len;
    }
    best.map(|(_, c, n)| (c, n))
}

/// Stateful TEB planner: keeps the last chosen band as the incumbent.
#[derive(Debug, Clone, Default)]
pub struct TebPlanner {
    pub cfg: TebConfig,
    incumbent: Option<ElasticBand>,
}

impl TebPlanner {
    pub fn new(cfg: TebConfig) -> Self {
        Self {
            cfg,
            incumbent: None,
        }
    }

    pub fn incumbent(&self) -> Option<&ElasticBand> {
        self.incumbent.as_ref()
    }

    pub fn reset(&mut self) {
        self.incumbent = None;
    }

    /// Re-anchors the incumbent on the current pose and goal.
    fn carried_incumbent(
        &self,
        pose: &Pose2D,
        goal: &Pose2D,
        params: &VehicleParams,
    ) -> Option<ElasticBand> {
        let mut band = self.incumbent.clone()?;
        let spacing = self.cfg.dt_ref * params.v_max;
        // Drop nodes the vehicle has already passed.
        while band.nodes.len() > 2 {
            let next = band.nodes[1].position();
            let ahead = (next - pose.position()).dot(pose.heading());
            if ahead < 0.5 * spacing {
                band.nodes.remove(1);
                let merged = band.dts[0] + band.dts[1];
                band.dts[0] = merged;
                band.dts.remove(1);
            } else {
                break;
            }
        }
        if band.nodes.len() < 2
            || goal.position().dist(band.nodes.last()?.position()) > 2.0 * spacing
        {
            return None;
        }
        band.nodes[0] = *pose;
        *band.nodes.last_mut()? = *goal;
        let d0 = band.segment_length(0);
        band.dts[0] = (d0 / params.v_max).max(DT_MIN);
        Some(band)
    }

    /// One planning cycle.
    #[allow(clippy::too_many_arguments)]
    pub fn plan_step(
        &mut self,
        pose: &Pose2D,
        goal: &Pose2D,
        global_path: &GlobalPath,
        obstacles: &[Circle],
        params: &VehicleParams,
        exec: Exec,
    ) -> Result<TebDecision, TebError> {
        let cfg = self.cfg;
        let mut seeds: Vec<(BandOrigin, ElasticBand)> = Vec::new();
        let reference = path_between(pose.position(), goal.position(), global_path);
        match self.carried_incumbent(pose, goal, params) {
            Some(b) => seeds.push((BandOrigin::Incumbent, b)),
            None => seeds.push((
                BandOrigin::Reseeded,
                band_along(pose, goal, &reference, &cfg, params),
            )),
        }
        if cfg.n_alternatives > 1 {
            let straight = [pose.position(), goal.position()];
            let blocking = blocking_obstacle(&reference, obstacles, cfg.min_obstacle_dist)
                .or_else(|| blocking_obstacle(&straight, obstacles, cfg.min_obstacle_dist));
            if let Some((c, normal)) = blocking {
                let offset = c.radius + cfg.min_obstacle_dist + 0.1;
                let sides = [(BandOrigin::Left, 1.0), (BandOrigin::Right, -1.0)];
                for (origin, sign) in sides.into_iter().take(cfg.n_alternatives - 1) {
                    let via = c.center + normal * (sign * offset);
                    let line = [pose.position(), via, goal.position()];
                    seeds.push((origin, band_along(pose, goal, &line, &cfg, params)));
                }
            } else if seeds[0].0 == BandOrigin::Incumbent {
                seeds.push((
                    BandOrigin::Reseeded,
                    band_along(pose, goal, &reference, &cfg, params),
                ));
            }
        }
        let results = exec.map_owned(seeds, |(origin, band)| {
            optimize(&band, obstacles, &cfg, params).map(|r| (origin, r))
        });
        let mut candidates = Vec::with_capacity(results.len());
        for r in results {
            let (origin, report) = match r {
                Ok(x) => x,
                Err(TebError::Diverged) => continue,
                Err(e) => return Err(e),
            };
            let clearance = report.band.min_clearance(obstacles);
            candidates.push(Candidate {
                origin,
                objective: report.objective,
                clearance,
                feasible: clearance >= cfg.min_obstacle_dist - FEASIBILITY_SLACK,
                band: report.band,
            });
        }
        if candidates.is_empty() {
            return Err(TebError::Diverged);
        }
        // First strictly lower objective wins, so the incumbent keeps ties.
        let mut chosen: Option<usize> = None;
        for (i, c) in candidates.iter().enumerate() {
            if c.feasible && chosen.is_none_or(|j| c.objective < candidates[j].objective) {
                chosen = Some(i);
            }
        }
        let command = match chosen {
            Some(i) => {
                self.incumbent = Some(candidates[i].band.clone());
                first_segment_command(&candidates[i].band, params).clamped(params)
            }
            None => {
                self.incumbent = None;
                ControlCommand::STOP
            }
        };
        Ok(TebDecision {
            command,
            candidates,
            chosen,
        })
    }
}

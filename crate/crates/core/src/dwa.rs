//! Dynamic Window Approach local planner.
//!
//! Each control period the planner samples linear and angular velocities
//! reachable within one period, rolls every pair forward as a constant arc,
//! drops rollouts that hit a lethal cell and keeps the best-scoring one.
//! Only forward speeds are sampled and there is no lateral velocity axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::{Costmap, DistanceField};
use crate::exec::Exec;
use crate::geom::{point_polyline_distance, Vec2};
use crate::global_planner::GlobalPath;
use crate::vehicle::{arc_step, footprint_circles, ControlCommand, Pose2D, VehicleParams};

#[derive(Debug, Error, PartialEq)]
#[error("invalid DWA config: {0}")]
pub struct DwaConfigError(String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DwaConfig {
    pub sim_time: f64,
    pub sim_granularity: f64,
    pub vx_samples: usize,
    pub vth_samples: usize,
    pub weight_goal: f64,
    pub weight_path: f64,
    pub weight_obstacle: f64,
    pub weight_speed: f64,
    pub control_period: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            sim_time: 3.0,
            sim_granularity: 0.1,
            vx_samples: 8,
            vth_samples: 21,
            weight_goal: 1.0,
            weight_path: 0.8,
            weight_obstacle: 1.0,
            weight_speed: 0.4,
            control_period: 0.05,
        }
    }
}

impl DwaConfig {
    pub fn validate(&self) -> Result<(), DwaConfigError> {
        let weights = [
            self.weight_goal,
            self.weight_path,
            self.weight_obstacle,
            self.weight_speed,
        ];
        if !(self.sim_granularity > 0.0 && self.sim_time > self.sim_granularity) {
            return Err(DwaConfigError("need sim_time > sim_granularity > 0".into()));
        }
        if self.vx_samples == 0 || self.vth_samples == 0 {
            return Err(DwaConfigError("sample counts must be at least 1".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
            return Err(DwaConfigError(
                "weights must be >= 0 and not all zero".into(),
            ));
        }
        if !(self.control_period > 0.0) {
            return Err(DwaConfigError("control_period must be positive".into()));
        }
        Ok(())
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_goal + self.weight_path + self.weight_obstacle + self.weight_speed
    }
}

/// Rectangle of reachable (v, omega) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWindow {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl VelocityWindow {
    pub fn contains(&self, v: f64, omega: f64) -> bool {
        const EPS: f64 = 1e-9;
        v >= self.v_min - EPS
            && v <= self.v_max + EPS
            && omega >= self.omega_min - EPS
            && omega <= self.omega_max + EPS
    }
}

/// Current velocity state of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub v: f64,
    pub omega: f64,
}

/// Absolute limits intersected with what the accelerations allow within one
/// control period. If the current state sits outside the absolute limits the
/// window collapses onto the nearest admissible edge.
pub fn dynamic_window(
    current: Velocity,
    params: &VehicleParams,
    cfg: &DwaConfig,
) -> VelocityWindow {
    let t = cfg.control_period;
    let w_abs = params.omega_max();
    let clamp_range = |lo: f64, hi: f64, abs_lo: f64, abs_hi: f64| {
        let a = lo.max(abs_lo);
        let b = hi.min(abs_hi);
        if a <= b {
            (a, b)
        } else if hi < abs_lo {
            (abs_lo, abs_lo)
        } else {
            (abs_hi, abs_hi)
        }
    };
    let (v_min, v_max) = clamp_range(
        current.v - params.a_max * t,
        current.v + params.a_max * t,
        0.0,
        params.v_max,
    );
    let (omega_min, omega_max) = clamp_range(
        current.omega - params.alpha_max * t,
        current.omega + params.alpha_max * t,
        -w_abs,
        w_abs,
    );
    VelocityWindow {
        v_min,
        v_max,
        omega_min,
        omega_max,
    }
}

/// Poses at `t = k * sim_granularity`, `k = 0..=floor(sim_time / granularity)`.
pub fn rollout(v: f64, omega: f64, pose: &Pose2D, cfg: &DwaConfig) -> Vec<Pose2D> {
    let n = (cfg.sim_time / cfg.sim_granularity + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| arc_step(pose, v, omega, k as f64 * cfg.sim_granularity))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredTrajectory {
    pub v: f64,
    pub omega: f64,
    #[serde(skip)]
    pub states: Vec<Pose2D>,
    pub score: f64,
    /// Goal, path, obstacle and speed terms, each in [0, 1].
    pub terms: [f64; 4],
    pub collides: bool,
}

/// Precomputed lookups for scoring against one local costmap snapshot.
#[derive(Debug, Clone)]
pub struct ScoringContext {
    field: DistanceField,
    clearance_scale: f64,
}

impl ScoringContext {
    pub fn new(local_map: &Costmap) -> Self {
        let clearance_scale = local_map
            .inflation()
            .map(|p| p.inflation_radius)
            .filter(|r| *r > 0.0)
            .unwrap_or(1.0);
        Self {
            field: local_map.distance_field(),
            clearance_scale,
        }
    }

    pub fn field(&self) -> &DistanceField {
        &self.field
    }
}

/// Scores one rollout.
///
/// `score = wg * f_goal + wp * f_path + wo * f_obs + ws * f_speed` with
/// `f_goal = 1 / (1 + |end - goal|)`, `f_path = 1 / (1 + mean distance to the
/// global path)`, `f_obs = min(clearance, r_infl) / r_infl` and
/// `f_speed = v / v_max`.
#[allow(clippy::too_many_arguments)]
pub fn score(
    v: f64,
    omega: f64,
    states: Vec<Pose2D>,
    interim_goal: Vec2,
    global_path: &GlobalPath,
    ctx: &ScoringContext,
    cfg: &DwaConfig,
    params: &VehicleParams,
) -> ScoredTrajectory {
    let mut clearance = f64::INFINITY;
    for s in &states {
        for c in footprint_circles(s, params) {
            clearance = clearance.min(ctx.field.disc_clearance(&c));
        }
    }
    let collides = clearance < 0.0;
    let end = states.last().map_or(Vec2::ZERO, |p| p.position());
    let f_goal = 1.0 / (1.0 + end.dist(interim_goal));
    let mean_path = if states.is_empty() {
        0.0
    } else {
        states
            .iter()
            .map(|s| point_polyline_distance(s.position(), &global_path.waypoints))
            .sum::<f64>()
            / states.len() as f64
    };
    let f_path = 1.0 / (1.0 + mean_path);
    let f_obs = clearance.max(0.0).min(ctx.clearance_scale) / ctx.clearance_scale;
    let f_speed = (v / params.v_max).clamp(0.0, 1.0);
    let terms = [f_goal, f_path, f_obs, f_speed];
    let score = cfg.weight_goal * f_goal
        + cfg.weight_path * f_path
        + cfg.weight_obstacle * f_obs
        + cfg.weight_speed * f_speed;
    ScoredTrajectory {
        v,
        omega,
        states,
        score,
        terms,
        collides,
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![hi];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// The (v, omega) sample grid over a window.
///
/// Angular samples are clipped to the Ackermann limit at each speed and the
/// straight-ahead sample is always included when the window allows it.
pub fn sample_grid(
    window: &VelocityWindow,
    params: &VehicleParams,
    cfg: &DwaConfig,
) -> Vec<(f64, f64)> {
    let mut omegas = linspace(window.omega_min, window.omega_max, cfg.vth_samples);
    if window.omega_min <= 0.0 && window.omega_max >= 0.0 {
        omegas.push(0.0);
    }
    let mut grid = Vec::new();
    for v in linspace(window.v_min, window.v_max, cfg.vx_samples) {
        let lim = params.omega_limit_at(v);
        let mut row: Vec<f64> = omegas
            .iter()
            .map(|w| w.clamp(-lim, lim).clamp(window.omega_min, window.omega_max))
            .collect();
        row.sort_by(f64::total_cmp);
        row.dedup();
        grid.extend(row.into_iter().map(|w| (v, w)));
    }
    grid
}

/// Ranks candidates: higher score, then faster, then straighter, then left.
fn better(a: &ScoredTrajectory, b: &ScoredTrajectory) -> bool {
    a.score
        .total_cmp(&b.score)
        .then_with(|| a.v.total_cmp(&b.v))
        .then_with(|| b.omega.abs().total_cmp(&a.omega.abs()))
        .then_with(|| a.omega.total_cmp(&b.omega))
        .is_gt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DwaDecision {
    pub command: ControlCommand,
    pub velocity: Velocity,
    pub window: (f64, f64, f64, f64),
    /// The chosen rollout; `None` when every sample collided.
    pub best: Option<ScoredTrajectory>,
    pub evaluated: usize,
    pub colliding: usize,
}

/// One planning cycle: sample, roll out, score, pick the best safe command.
#[allow(clippy::too_many_arguments)]
pub fn plan_step(
    pose: &Pose2D,
    current: Velocity,
    interim_goal: Vec2,
    global_path: &GlobalPath,
    local_map: &Costmap,
    cfg: &DwaConfig,
    params: &VehicleParams,
    exec: Exec,
) -> DwaDecision {
    let ctx = ScoringContext::new(local_map);
    plan_step_with(
        pose,
        current,
        interim_goal,
        global_path,
        &ctx,
        cfg,
        params,
        exec,
    )
}

/// [`plan_step`] with a prebuilt scoring context.
#[allow(clippy::too_many_arguments)]
pub fn plan_step_with(
    pose: &Pose2D,
    current: Velocity,
    interim_goal: Vec2,
    global_path: &GlobalPath,
    ctx: &ScoringContext,
    cfg: &DwaConfig,
    params: &VehicleParams,
    exec: Exec,
) -> DwaDecision {
    let window = dynamic_window(current, params, cfg);
    let grid = sample_grid(&window, params, cfg);
    let scored = exec.map(&grid, |&(v, w)| {
        let states = rollout(v, w, pose, cfg);
        score(v, w, states, interim_goal, global_path, ctx, cfg, params)
    });
    let colliding = scored.iter().filter(|t| t.collides).count();
    let best = scored.into_iter().filter(|t| !t.collides).fold(
        None::<ScoredTrajectory>,
        |acc, t| match acc {
            Some(b) if !better(&t, &b) => Some(b),
            _ => Some(t),
        },
    );
    let (command, velocity) = match &best {
        Some(t) => (
            ControlCommand::new(t.v, params.steering_for(t.v, t.omega)),
            Velocity {
                v: t.v,
                omega: t.omega,
            },
        ),
        None => (ControlCommand::STOP, Velocity::default()),
    };
    DwaDecision {
        command,
        velocity,
        window: (
            window.v_min,
            window.v_max,
            window.omega_min,
            window.omega_max,
        ),
        best,
        evaluated: grid.len(),
        colliding,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{InflationParams, LETHAL};
    use crate::geom::Circle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn saturated_window_is_full_range() {
        let p = VehicleParams {
            a_max: 100.0,
            alpha_max: 1000.0,
            ..params()
        };
        let w = dynamic_window(Velocity::default(), &p, &DwaConfig::default());
        assert_eq!(w.v_min, 0.0);
        assert_eq!(w.v_max, p.v_max);
        assert_eq!(w.omega_min, -p.omega_max());
        assert_eq!(w.omega_max, p.omega_max());
    }

    #[test]
    fn window_clamps_at_top_speed() {
        let p = VehicleParams {
            a_max: 2.0,
            ..params()
        };
        let cfg = DwaConfig {
            control_period: 0.05,
            ..DwaConfig::default()
        };
        let w = dynamic_window(
            Velocity {
                v: p.v_max,
                omega: 0.0,
            },
            &p,
            &cfg,
        );
        assert!((w.v_min - (p.v_max - 0.1)).abs() < 1e-12);
        assert_eq!(w.v_max, p.v_max);
    }

    #[test]
    fn window_matches_scalar_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = params();
        let cfg = DwaConfig::default();
        for _ in 0..500 {
            let cur = Velocity {
                v: rng.random_range(0.0..p.v_max),
                omega: rng.random_range(-p.omega_max()..p.omega_max()),
            };
            let w = dynamic_window(cur, &p, &cfg);
            let t = cfg.control_period;
            assert_eq!(w.v_min, f64::max(0.0, cur.v - p.a_max * t));
            assert_eq!(w.v_max, f64::min(p.v_max, cur.v + p.a_max * t));
            assert_eq!(
                w.omega_min,
                f64::max(-p.omega_max(), cur.omega - p.alpha_max * t)
            );
            assert_eq!(
                w.omega_max,
                f64::min(p.omega_max(), cur.omega + p.alpha_max * t)
            );
        }
    }

    #[test]
    fn straight_rollout() {
        let cfg = DwaConfig {
            sim_time: 2.0,
            sim_granularity: 0.5,
            ..DwaConfig::default()
        };
        let states = rollout(1.0, 0.0, &Pose2D::default(), &cfg);
        assert_eq!(states.len(), 5);
        for (k, s) in states.iter().enumerate() {
            assert!((s.x - 0.5 * k as f64).abs() < 1e-12);
            assert_eq!(s.y, 0.0);
        }
    }

    #[test]
    fn arc_rollout_stays_on_circle() {
        let cfg = DwaConfig::default();
        let (v, w) = (0.8, 1.3);
        let pose = Pose2D::new(1.0, 2.0, 0.4);
        let center = pose.position() + pose.heading().perp() * (v / w);
        for s in rollout(v, w, &pose, &cfg) {
            assert!((s.position().dist(center) - v / w).abs() < 1e-9);
        }
    }

    #[test]
    fn rollout_matches_vehicle_steps() {
        let p = params();
        let cfg = DwaConfig::default();
        let cmd = ControlCommand::new(0.7, 0.3);
        let omega = cmd.omega(&p);
        let states = rollout(cmd.v, omega, &Pose2D::default(), &cfg);
        let mut q = Pose2D::default();
        for s in states.iter().skip(1) {
            q = crate::vehicle::step(&q, &cmd, cfg.sim_granularity, &p).unwrap();
            assert!((q.x - s.x).abs() < 1e-9 && (q.y - s.y).abs() < 1e-9);
        }
    }

    fn open_map() -> Costmap {
        Costmap::centered(Vec2::ZERO, 12.0, 0.05)
            .unwrap()
            .inflate(&InflationParams::default())
    }

    #[test]
    fn perfect_terms() {
        let p = params();
        let cfg = DwaConfig::default();
        let map = open_map();
        let ctx = ScoringContext::new(&map);
        let states = rollout(p.v_max, 0.0, &Pose2D::default(), &cfg);
        let goal = states.last().unwrap().position();
        let path = GlobalPath::straight(Vec2::ZERO, goal);
        let t = score(p.v_max, 0.0, states, goal, &path, &ctx, &cfg, &p);
        assert_eq!(t.terms[0], 1.0);
        assert_eq!(t.terms[1], 1.0);
        assert_eq!(t.terms[2], 1.0);
        assert_eq!(t.terms[3], 1.0);
        assert!(!t.collides);
        assert!((t.score - cfg.weight_sum()).abs() < 1e-12);
    }

    #[test]
    fn lethal_cell_marks_collision() {
        let p = params();
        let cfg = DwaConfig::default();
        let mut map = Costmap::centered(Vec2::ZERO, 12.0, 0.05).unwrap();
        let (cx, cy) = map.world_to_cell(Vec2::new(1.0, 0.0)).unwrap();
        map.set_cost(cx, cy, LETHAL);
        let ctx = ScoringContext::new(&map);
        let states = rollout(1.0, 0.0, &Pose2D::default(), &cfg);
        let t = score(
            1.0,
            0.0,
            states,
            Vec2::new(3.0, 0.0),
            &GlobalPath::straight(Vec2::ZERO, Vec2::new(3.0, 0.0)),
            &ctx,
            &cfg,
            &p,
        );
        assert!(t.collides);
    }

    #[test]
    fn unconstrained_optimum_is_fast_and_straight() {
        let p = params();
        let cfg = DwaConfig {
            weight_goal: 1.0,
            weight_path: 0.0,
            weight_obstacle: 0.0,
            weight_speed: 1.0,
            ..DwaConfig::default()
        };
        let map = open_map();
        let goal = Vec2::new(5.0, 0.0);
        let d = plan_step(
            &Pose2D::default(),
            Velocity { v: 0.5, omega: 0.0 },
            goal,
            &GlobalPath::straight(Vec2::ZERO, goal),
            &map,
            &cfg,
            &p,
            Exec::Sequential,
        );
        let w = dynamic_window(Velocity { v: 0.5, omega: 0.0 }, &p, &cfg);
        assert_eq!(d.command.v, w.v_max);
        assert_eq!(d.velocity.omega, 0.0);
        assert_eq!(d.command.gamma, 0.0);
    }

    #[test]
    fn wall_ahead_forces_stop() {
        let p = params();
        let cfg = DwaConfig::default();
        let mut map = Costmap::centered(Vec2::ZERO, 12.0, 0.05).unwrap();
        map = map.mark_obstacles(
            &(0..60)
                .map(|i| Circle::new(Vec2::new(0.6, -3.0 + i as f64 * 0.1), 0.06))
                .collect::<Vec<_>>(),
        );
        let d = plan_step(
            &Pose2D::default(),
            Velocity {
                v: p.v_max,
                omega: 0.0,
            },
            Vec2::new(3.0, 0.0),
            &GlobalPath::straight(Vec2::ZERO, Vec2::new(3.0, 0.0)),
            &map,
            &cfg,
            &p,
            Exec::Sequential,
        );
        assert_eq!(d.command, ControlCommand::STOP);
        assert!(d.best.is_none());
        assert_eq!(d.colliding, d.evaluated);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let p = params();
        let cfg = DwaConfig::default();
        let map = Costmap::centered(Vec2::ZERO, 12.0, 0.05)
            .unwrap()
            .mark_obstacles(&[Circle::new(Vec2::new(1.5, 0.1), 0.3)])
            .inflate(&InflationParams::default());
        let goal = Vec2::new(4.0, 0.0);
        let path = GlobalPath::straight(Vec2::ZERO, goal);
        let cur = Velocity { v: 0.6, omega: 0.0 };
        let a = plan_step(
            &Pose2D::default(),
            cur,
            goal,
            &path,
            &map,
            &cfg,
            &p,
            Exec::Sequential,
        );
        let b = plan_step(
            &Pose2D::default(),
            cur,
            goal,
            &path,
            &map,
            &cfg,
            &p,
            Exec::Parallel,
        );
        assert_eq!(a, b);
    }

    #[test]
    fn weight_scaling_keeps_argmax() {
        let p = params();
        let cfg = DwaConfig::default();
        let doubled = DwaConfig {
            weight_goal: 2.0 * cfg.weight_goal,
            weight_path: 2.0 * cfg.weight_path,
            weight_obstacle: 2.0 * cfg.weight_obstacle,
            weight_speed: 2.0 * cfg.weight_speed,
            ..cfg
        };
        let map = Costmap::centered(Vec2::ZERO, 12.0, 0.05)
            .unwrap()
            .mark_obstacles(&[
                Circle::new(Vec2::new(1.2, -0.2), 0.25),
                Circle::new(Vec2::new(2.0, 0.6), 0.2),
            ])
            .inflate(&InflationParams::default());
        let goal = Vec2::new(3.0, 0.5);
        let path = GlobalPath::straight(Vec2::ZERO, goal);
        let cur = Velocity { v: 0.5, omega: 0.2 };
        let a = plan_step(
            &Pose2D::default(),
            cur,
            goal,
            &path,
            &map,
            &cfg,
            &p,
            Exec::Sequential,
        );
        let b = plan_step(
            &Pose2D::default(),
            cur,
            goal,
            &path,
            &map,
            &doubled,
            &p,
            Exec::Sequential,
        );
        assert_eq!(a.command, b.command);
    }
}

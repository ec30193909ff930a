//! Small stand-alone fixtures for single-planner experiments.
//!
//! These bypass the camera and the track: the planner sees a fixed map or
//! a fixed obstacle set and is driven in a closed loop until it reaches the
//! goal, stops for good or runs out of time.

use serde::Serialize;

use crate::apf::{plan_step_apf, ApfConfig, ForceState};
use crate::costmap::{Costmap, InflationParams, PlannerCostParams, LETHAL};
use crate::dwa::{self, DwaConfig, ScoringContext, Velocity};
use crate::exec::Exec;
use crate::geom::{Circle, Vec2};
use crate::global_planner::prune_to_window;
use crate::sim::runner::{global_plan, in_collision};
use crate::vehicle::{step, ControlCommand, Pose2D, VehicleParams};

/// How a fixture run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Ending {
    Reached,
    Stopped,
    Collided,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureOutcome {
    pub ending: Ending,
    pub elapsed: f64,
    pub path: Vec<Pose2D>,
    pub final_pose: Pose2D,
}

impl FixtureOutcome {
    pub fn reached(&self) -> bool {
        self.ending == Ending::Reached
    }
}

/// Axis-aligned rectangle `[x0, y0, x1, y1]`.
pub type Rect = [f64; 4];

fn rect_contains(r: &Rect, p: Vec2) -> bool {
    p.x >= r[0] && p.x <= r[2] && p.y >= r[1] && p.y <= r[3]
}

/// A walled corridor for the DWA horizon experiment.
///
/// Free space is the union of `free` minus the union of `blocks`; every
/// other cell is lethal. The default is a 1.2 m wide corridor running east
/// for 4 m and then turning left, narrow enough that the corner has to be
/// entered wide.
#[derive(Debug, Clone, PartialEq)]
pub struct DwaCorridor {
    pub free: Vec<Rect>,
    pub blocks: Vec<Rect>,
    pub start: Pose2D,
    pub goal: Vec2,
    pub resolution: f64,
    pub inflation: InflationParams,
    pub cost: PlannerCostParams,
    pub vehicle: VehicleParams,
    pub window_radius: f64,
    pub tick: f64,
    pub time_limit: f64,
    /// Seconds at (near) zero speed after which the run counts as stopped.
    pub stop_after: f64,
    pub goal_tolerance: f64,
}

impl Default for DwaCorridor {
    fn default() -> Self {
        Self {
            free: vec![[0.0, -0.6, 4.0, 0.6], [2.8, -0.6, 4.0, 5.0]],
            blocks: Vec::new(),
            start: Pose2D::new(0.5, 0.0, 0.0),
            goal: Vec2::new(3.4, 3.8),
            resolution: 0.05,
            inflation: InflationParams::default(),
            cost: PlannerCostParams::default(),
            vehicle: VehicleParams::default(),
            window_radius: 2.0,
            tick: 0.05,
            time_limit: 40.0,
            stop_after: 3.0,
            goal_tolerance: 0.3,
        }
    }
}

impl DwaCorridor {
    fn is_free(&self, p: Vec2) -> bool {
        self.free.iter().any(|r| rect_contains(r, p))
            && !self.blocks.iter().any(|r| rect_contains(r, p))
    }

    /// The inflated map with a one-meter lethal margin around the corridor.
    pub fn map(&self) -> Costmap {
        let margin = 1.0;
        let lo = self
            .free
            .iter()
            .fold(Vec2::new(f64::INFINITY, f64::INFINITY), |m, r| {
                Vec2::new(m.x.min(r[0]), m.y.min(r[1]))
            });
        let hi = self
            .free
            .iter()
            .fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |m, r| {
                Vec2::new(m.x.max(r[2]), m.y.max(r[3]))
            });
        let origin = lo - Vec2::new(margin, margin);
        let w = ((hi.x - lo.x + 2.0 * margin) / self.resolution).ceil() as usize;
        let h = ((hi.y - lo.y + 2.0 * margin) / self.resolution).ceil() as usize;
        let mut map = Costmap::new(self.resolution, w, h, origin).expect("valid corridor geometry");
        for cy in 0..h {
            for cx in 0..w {
                if !self.is_free(map.cell_center(cx, cy)) {
                    map.set_cost(cx, cy, LETHAL);
                }
            }
        }
        map.inflate(&self.inflation)
    }

    /// Drives DWA with `cfg` until the goal, a stall, a collision or the
    /// time limit.
    pub fn run(&self, cfg: &DwaConfig, exec: Exec) -> FixtureOutcome {
        let map = self.map();
        let ctx = ScoringContext::new(&map);
        let goal = self.goal;
        let path = global_plan(&map, &self.cost, self.start.position(), goal);
        let cfg = DwaConfig {
            control_period: self.tick,
            ..*cfg
        };
        let mut pose = self.start;
        let mut velocity = Velocity::default();
        let mut still = 0.0;
        let mut trail = vec![pose];
        let n = (self.time_limit / self.tick).round() as usize;
        for k in 0..n {
            let elapsed = (k + 1) as f64 * self.tick;
            let interim = prune_to_window(&path, &pose, self.window_radius);
            let d = dwa::plan_step_with(
                &pose,
                velocity,
                interim,
                &path,
                &ctx,
                &cfg,
                &self.vehicle,
                exec,
            );
            pose =
                step(&pose, &d.command, self.tick, &self.vehicle).expect("planner respects limits");
            velocity = d.velocity;
            trail.push(pose);
            let ending = if pose.position().dist(goal) <= self.goal_tolerance {
                Some(Ending::Reached)
            } else if map.cost_at_world(pose.position()) == LETHAL {
                Some(Ending::Collided)
            } else {
                still = if d.command.v.abs() < 1e-3 {
                    still + self.tick
                } else {
                    0.0
                };
                (still >= self.stop_after).then_some(Ending::Stopped)
            };
            if let Some(ending) = ending {
                return FixtureOutcome {
                    ending,
                    elapsed,
                    path: trail,
                    final_pose: pose,
                };
            }
        }
        FixtureOutcome {
            ending: Ending::TimedOut,
            elapsed: self.time_limit,
            path: trail,
            final_pose: pose,
        }
    }
}

/// Two obstacles placed symmetrically about the straight line to the goal,
/// the gap between them too narrow for the vehicle.
///
/// The potential field is tuned so the push of the pair balances the pull of
/// the goal well before the body reaches them.
#[derive(Debug, Clone, PartialEq)]
pub struct ApfDeadlock {
    pub obstacles: Vec<Circle>,
    pub start: Pose2D,
    pub goal: Vec2,
    pub config: ApfConfig,
    pub vehicle: VehicleParams,
    pub tick: f64,
    pub time_limit: f64,
}

impl Default for ApfDeadlock {
    fn default() -> Self {
        Self {
            obstacles: vec![
                Circle::new(Vec2::new(2.5, 0.22), 0.2),
                Circle::new(Vec2::new(2.5, -0.22), 0.2),
            ],
            start: Pose2D::new(0.0, 0.0, 0.0),
            goal: Vec2::new(5.0, 0.0),
            config: ApfConfig {
                k_rep: 0.1,
                rho0: 1.0,
                ..ApfConfig::default()
            },
            vehicle: VehicleParams::default(),
            tick: 0.05,
            time_limit: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeadlockOutcome {
    pub run: FixtureOutcome,
    /// Reduction of the distance to the goal after each tick, starting at 0.
    pub progress: Vec<f64>,
    pub escape_fired: bool,
}

impl DeadlockOutcome {
    /// Progress made during the last `window` seconds of the run.
    pub fn final_progress(&self, window: f64, tick: f64) -> f64 {
        let w = (window / tick).round() as usize;
        let last = self.progress.len() - 1;
        self.progress[last] - self.progress[last.saturating_sub(w)]
    }
}

impl ApfDeadlock {
    pub fn run(&self, escape_enabled: bool) -> DeadlockOutcome {
        let cfg = ApfConfig {
            escape_enabled,
            ..self.config
        };
        let mut pose = self.start;
        let mut state = ForceState::default();
        let mut trail = vec![pose];
        let d0 = pose.position().dist(self.goal);
        let mut progress = vec![0.0];
        let mut escape_fired = false;
        let n = (self.time_limit / self.tick).round() as usize;
        let mut ending = Ending::TimedOut;
        let mut elapsed = self.time_limit;
        for k in 0..n {
            let (cmd, fs) = plan_step_apf(
                &pose,
                self.goal,
                &self.obstacles,
                &cfg,
                &self.vehicle,
                &state,
            )
            .unwrap_or((ControlCommand::STOP, ForceState::default()));
            escape_fired |= fs.f_escape != Vec2::ZERO;
            state = fs;
            pose = step(&pose, &cmd.clamped(&self.vehicle), self.tick, &self.vehicle)
                .expect("clamped command");
            trail.push(pose);
            progress.push(d0 - pose.position().dist(self.goal));
            let t = (k + 1) as f64 * self.tick;
            if in_collision(&pose, &self.vehicle, &self.obstacles) {
                ending = Ending::Collided;
                elapsed = t;
                break;
            }
            if pose.position().dist(self.goal) <= cfg.goal_tolerance {
                ending = Ending::Reached;
                elapsed = t;
                break;
            }
        }
        DeadlockOutcome {
            run: FixtureOutcome {
                ending,
                elapsed,
                path: trail,
                final_pose: pose,
            },
            progress,
            escape_fired,
        }
    }
}

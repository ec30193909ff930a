//! Closed-loop episode: sense, detect the lane, plan globally, plan
//! locally, act.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use super::perception::{choose_lane, lane_goal, perceive, Lane};
use super::scenario::{PlannerKind, Scenario};
use super::track::World;
use crate::apf::{plan_step_apf, ForceState};
use crate::costmap::{Costmap, PlannerCostParams};
use crate::dwa::{self, ScoringContext, Velocity};
use crate::exec::Exec;
use crate::geom::{Circle, Vec2};
use crate::global_planner::{plan, prune_to_window, GlobalPath};
use crate::teb::{BandOrigin, TebError, TebPlanner};
use crate::vehicle::{footprint_circles, step, ControlCommand, Pose2D, VehicleParams};
use crate::vision::{render_view, LaneDetector, LaneTarget};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("planner configuration: {0}")]
    Config(String),
    #[error("vehicle model rejected a command: {0}")]
    Vehicle(String),
}

/// Summary of one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub obstacles_avoided: usize,
    pub obstacles_total: usize,
    pub collided: bool,
    pub completed: bool,
    pub lane_deviation_rms: f64,
    pub lane_exits: usize,
    /// Simulated seconds to reach the goal; `None` if not completed.
    pub completion_time: Option<f64>,
    /// Wall-clock milliseconds per tick; not deterministic.
    pub mean_tick_compute: f64,
    pub ticks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlannerInternals {
    Dwa {
        score: Option<f64>,
        terms: Option<[f64; 4]>,
        evaluated: usize,
        colliding: usize,
    },
    Teb {
        objective: Option<f64>,
        origin: Option<BandOrigin>,
        candidates: usize,
        feasible: usize,
    },
    Apf {
        f_att: Vec2,
        f_rep: Vec2,
        f_escape: Vec2,
        n_obstacles: usize,
        in_local_min: bool,
    },
}

/// One executed tick. `pose` is the pose after applying `command`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub tick: usize,
    pub t: f64,
    pub pose: Pose2D,
    pub command: ControlCommand,
    pub lane_target: LaneTarget,
    pub lane: Lane,
    pub goal: Vec2,
    pub s: f64,
    pub lateral: f64,
    pub local_plan: Vec<Vec2>,
    pub internals: PlannerInternals,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    pub records: Vec<TraceRecord>,
}

impl TraceLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// True when any footprint circle overlaps any obstacle.
pub fn in_collision(pose: &Pose2D, params: &VehicleParams, obstacles: &[Circle]) -> bool {
    footprint_circles(pose, params)
        .iter()
        .any(|f| obstacles.iter().any(|o| f.overlaps(o)))
}

/// Nearest passable cell center to `p`, or `p` itself when already passable.
fn snap_to_passable(map: &Costmap, p: Vec2, cost: &PlannerCostParams) -> Option<Vec2> {
    if map
        .world_to_index(p)
        .is_some_and(|i| map.traversal_cost(i, cost).is_some())
    {
        return Some(p);
    }
    (0..map.len())
        .filter(|i| map.traversal_cost(*i, cost).is_some())
        .map(|i| map.index_center(i))
        .min_by(|a, b| a.dist(p).total_cmp(&b.dist(p)))
}

/// Dijkstra between snapped endpoints, or a straight segment when no path
/// exists.
pub fn global_plan(map: &Costmap, cost: &PlannerCostParams, start: Vec2, goal: Vec2) -> GlobalPath {
    let (Some(s), Some(g)) = (
        snap_to_passable(map, start, cost),
        snap_to_passable(map, goal, cost),
    ) else {
        return GlobalPath::straight(start, goal);
    };
    plan(map, cost, s, g).unwrap_or_else(|_| GlobalPath::straight(start, goal))
}

/// Mixes the scenario seed with the tick index.
fn tick_seed(seed: u64, tick: usize) -> u64 {
    let mut z = seed ^ (tick as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Limits acceleration to `a_max`; braking is not limited.
fn actuate(cmd: ControlCommand, prev_v: f64, params: &VehicleParams, dt: f64) -> ControlCommand {
    let v = cmd.v.min(prev_v + params.a_max * dt);
    ControlCommand::new(v, cmd.gamma).clamped(params)
}

enum LocalPlanner {
    Dwa,
    Teb(Box<TebPlanner>),
    Apf(ForceState),
}

pub fn run_episode(
    scn: &Scenario,
    planner: PlannerKind,
    exec: Exec,
) -> Result<(RunMetrics, TraceLog), SimError> {
    let f = &scn.file;
    let params = f.vehicle;
    let dt = f.tick;
    let truth = scn.circles();
    let world = World {
        track: &scn.track,
        obstacles: &truth,
    };
    let detector = LaneDetector::new(f.lane, scn.camera);
    let lane_width = scn.track.lane_width;
    let mut local = match planner {
        PlannerKind::Dwa => LocalPlanner::Dwa,
        PlannerKind::Teb => LocalPlanner::Teb(Box::new(TebPlanner::new(f.teb))),
        PlannerKind::Apf => LocalPlanner::Apf(ForceState::default()),
    };

    let mut pose = scn.start;
    let mut velocity = Velocity { v: 0.0, omega: 0.0 };
    let mut lane = Lane::Right;
    let mut held: Option<LaneTarget> = None;
    let mut trace = TraceLog::default();
    let mut passed = vec![false; scn.obstacles.len()];
    let mut avoided = 0;
    let mut collided = false;
    let mut completed = false;
    let mut dev_sq = 0.0;
    let mut lane_exits = 0;
    let mut off_road = false;
    let mut compute = 0.0;

    for tick in 0..f.max_ticks {
        let started = Instant::now();
        let img = render_view(
            &pose,
            &world,
            &scn.camera,
            &f.lighting,
            tick_seed(f.rng_seed, tick),
        );
        let detected = detector.detect(&img, velocity.v);
        let target = if detected.valid {
            held = Some(detected);
            detected
        } else {
            held.unwrap_or(detected)
        };

        let sensed = perceive(&truth, &pose, &f.sensor);
        let local_circles: Vec<Circle> = sensed
            .circles
            .iter()
            .map(|c| Circle::new(pose.inverse_transform_point(c.center), c.radius))
            .collect();
        lane = choose_lane(
            lane,
            &target,
            &local_circles,
            lane_width,
            &params,
            &f.behavior,
        );
        let goal = pose.compose(&lane_goal(&target, lane, lane_width));

        let map = Costmap::centered(pose.position(), f.local_map.size, f.local_map.resolution)
            .map_err(|e| SimError::Config(e.to_string()))?
            .mark_points(&sensed.hits)
            .inflate(&f.inflation);
        let path = global_plan(&map, &f.planner_cost, pose.position(), goal.position());
        let interim = prune_to_window(&path, &pose, f.behavior.window_radius);

        let (command, local_plan, internals) = match &mut local {
            LocalPlanner::Dwa => {
                let ctx = ScoringContext::new(&map);
                let d = dwa::plan_step_with(
                    &pose, velocity, interim, &path, &ctx, &f.dwa, &params, exec,
                );
                let plan = d.best.as_ref().map_or_else(Vec::new, |b| {
                    b.states.iter().step_by(5).map(|s| s.position()).collect()
                });
                let internals = PlannerInternals::Dwa {
                    score: d.best.as_ref().map(|b| b.score),
                    terms: d.best.as_ref().map(|b| b.terms),
                    evaluated: d.evaluated,
                    colliding: d.colliding,
                };
                (d.command, plan, internals)
            }
            LocalPlanner::Teb(teb) => {
                let teb_goal = Pose2D::new(interim.x, interim.y, goal.theta);
                match teb.plan_step(&pose, &teb_goal, &path, &sensed.circles, &params, exec) {
                    Ok(d) => {
                        let plan = d.chosen_band().map_or_else(Vec::new, |b| b.positions());
                        let chosen = d.chosen.map(|i| &d.candidates[i]);
                        let internals = PlannerInternals::Teb {
                            objective: chosen.map(|c| c.objective),
                            origin: chosen.map(|c| c.origin),
                            candidates: d.candidates.len(),
                            feasible: d.candidates.iter().filter(|c| c.feasible).count(),
                        };
                        (d.command, plan, internals)
                    }
                    Err(TebError::Diverged) => {
                        teb.reset();
                        let internals = PlannerInternals::Teb {
                            objective: None,
                            origin: None,
                            candidates: 0,
                            feasible: 0,
                        };
                        (ControlCommand::STOP, Vec::new(), internals)
                    }
                    Err(e) => return Err(SimError::Config(e.to_string())),
                }
            }
            LocalPlanner::Apf(state) => {
                let (cmd, fs) =
                    plan_step_apf(&pose, interim, &sensed.circles, &f.apf, &params, state)
                        .unwrap_or_else(|_| (ControlCommand::STOP, ForceState::default()));
                *state = fs;
                let internals = PlannerInternals::Apf {
                    f_att: fs.f_att,
                    f_rep: fs.f_rep,
                    f_escape: fs.f_escape,
                    n_obstacles: fs.n_obstacles,
                    in_local_min: fs.in_local_min,
                };
                (cmd, Vec::new(), internals)
            }
        };

        let command = actuate(command, velocity.v, &params, dt);
        compute += started.elapsed().as_secs_f64() * 1e3;
        pose = step(&pose, &command, dt, &params).map_err(|e| SimError::Vehicle(e.to_string()))?;
        velocity = Velocity {
            v: command.v,
            omega: command.omega(&params),
        };

        let proj = scn.track.project(pose.position());
        let dev = (proj.lateral - Lane::Right.offset(lane_width))
            .abs()
            .min((proj.lateral - Lane::Left.offset(lane_width)).abs());
        dev_sq += dev * dev;
        let outside = proj.lateral.abs() > lane_width;
        if outside && !off_road {
            lane_exits += 1;
        }
        off_road = outside;

        trace.records.push(TraceRecord {
            tick,
            t: (tick + 1) as f64 * dt,
            pose,
            command,
            lane_target: target,
            lane,
            goal: goal.position(),
            s: proj.s,
            lateral: proj.lateral,
            local_plan,
            internals,
        });

        if in_collision(&pose, &params, &truth) {
            collided = true;
            break;
        }
        for (k, o) in scn.obstacles.iter().enumerate() {
            if !passed[k] && proj.s > o.s + o.circle.radius + params.body_length / 2.0 {
                passed[k] = true;
                avoided += 1;
            }
        }
        if proj.s >= scn.goal_s {
            completed = true;
            break;
        }
    }

    let ticks = trace.len();
    let metrics = RunMetrics {
        obstacles_avoided: avoided,
        obstacles_total: scn.obstacles.len(),
        collided,
        completed,
        lane_deviation_rms: if ticks > 0 {
            (dev_sq / ticks as f64).sqrt()
        } else {
            0.0
        },
        lane_exits,
        completion_time: completed.then_some(ticks as f64 * dt),
        mean_tick_compute: if ticks > 0 {
            compute / ticks as f64
        } else {
            0.0
        },
        ticks,
    };
    Ok((metrics, trace))
}

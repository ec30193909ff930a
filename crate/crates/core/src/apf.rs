//! Artificial potential field planner.
//!
//! The goal pulls with `k_att * (goal - q)`; each obstacle whose surface is
//! within `rho0` pushes with `k_rep * (1/rho - 1/rho0) / rho^2` along the
//! line from its center. Speed drops with the number of nearby obstacles.
//! When the pull and the push cancel or oppose each other the vehicle is
//! considered trapped and an extra sideways vector is injected for a few
//! ticks to lead it around.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Circle, Vec2};
use crate::vehicle::{ControlCommand, Pose2D, VehicleParams};

/// Smallest surface distance used when evaluating the repulsive term.
pub const RHO_FLOOR: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum ApfError {
    #[error("vehicle reference point is inside an obstacle at {0:?}")]
    Collision(Vec2),
    #[error("invalid APF config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApfConfig {
    pub k_att: f64,
    pub k_rep: f64,
    pub rho0: f64,
    pub v_max: f64,
    pub k_gain: f64,
    pub v_min: f64,
    pub eps_force: f64,
    pub antiparallel_cos: f64,
    pub escape_gain: f64,
    pub escape_hold: usize,
    pub escape_enabled: bool,
    pub goal_tolerance: f64,
    /// Proportional gain from heading error to steering angle.
    pub k_heading: f64,
    /// Forward component of the net force at and above which the speed law
    /// applies in full; weaker components scale the speed down linearly and
    /// a net force pointing backwards stops the vehicle. While an escape is
    /// active the speed never drops below `v_min`.
    pub force_speed_ref: f64,
}

impl Default for ApfConfig {
    fn default() -> Self {
        Self {
            k_att: 1.0,
            k_rep: 0.02,
            rho0: 0.6,
            v_max: 0.8,
            k_gain: 0.1,
            v_min: 0.2,
            eps_force: 0.05,
            antiparallel_cos: -0.95,
            escape_gain: 1.5,
            escape_hold: 30,
            escape_enabled: true,
            goal_tolerance: 0.15,
            k_heading: 1.5,
            force_speed_ref: 0.5,
        }
    }
}

impl ApfConfig {
    pub fn validate(&self) -> Result<(), ApfError> {
        let bad = |m: &str| Err(ApfError::InvalidConfig(m.into()));
        if !(self.rho0 > 0.0) {
            return bad("rho0 must be positive");
        }
        if !(self.v_min >= 0.0 && self.v_max >= self.v_min) {
            return bad("need 0 <= v_min <= v_max");
        }
        if !(-1.0..=0.0).contains(&self.antiparallel_cos) {
            return bad("antiparallel_cos must be in [-1, 0]");
        }
        if self.escape_hold == 0 {
            return bad("escape_hold must be >= 1");
        }
        if !(self.force_speed_ref > 0.0) {
            return bad("force_speed_ref must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceState {
    pub f_att: Vec2,
    pub f_rep: Vec2,
    pub f_escape: Vec2,
    pub n_obstacles: usize,
    pub in_local_min: bool,
    pub escape_ticks_left: usize,
    /// +1 escapes to the left of the attractive force, -1 to the right.
    pub escape_side: i8,
}

impl ForceState {
    pub fn net(&self) -> Vec2 {
        self.f_att + self.f_rep + self.f_escape
    }
}

/// Repulsive push from one obstacle, zero outside the influence radius.
pub fn repulsion(position: Vec2, obstacle: &Circle, cfg: &ApfConfig) -> Vec2 {
    let rho = obstacle.clearance(position).max(RHO_FLOOR);
    if rho > cfg.rho0 {
        return Vec2::ZERO;
    }
    let magnitude = cfg.k_rep * (1.0 / rho - 1.0 / cfg.rho0) / (rho * rho);
    (position - obstacle.center).unit() * magnitude
}

/// Attractive and repulsive forces at `pose`.
pub fn forces(
    pose: &Pose2D,
    goal: Vec2,
    obstacles: &[Circle],
    cfg: &ApfConfig,
) -> Result<ForceState, ApfError> {
    let q = pose.position();
    if let Some(c) = obstacles.iter().find(|c| c.clearance(q) < 0.0) {
        return Err(ApfError::Collision(c.center));
    }
    let mut f_rep = Vec2::ZERO;
    let mut n = 0;
    for c in obstacles {
        if c.clearance(q).max(RHO_FLOOR) <= cfg.rho0 {
            n += 1;
            f_rep += repulsion(q, c, cfg);
        }
    }
    Ok(ForceState {
        f_att: (goal - q) * cfg.k_att,
        f_rep,
        n_obstacles: n,
        ..ForceState::default()
    })
}

/// `clamp(v_max - k_gain * n, v_min, v_max)`.
pub fn speed_law(n_obstacles: usize, cfg: &ApfConfig) -> f64 {
    (cfg.v_max - cfg.k_gain * n_obstacles as f64).clamp(cfg.v_min, cfg.v_max)
}

/// True when the vehicle is short of the goal and the attractive and
/// repulsive forces either cancel or point against each other.
pub fn detect_local_min(fs: &ForceState, dist_to_goal: f64, cfg: &ApfConfig) -> bool {
    if dist_to_goal <= cfg.goal_tolerance {
        return false;
    }
    let cancelled = (fs.f_att + fs.f_rep).norm() < cfg.eps_force;
    let denom = fs.f_att.norm() * fs.f_rep.norm();
    let opposed = denom > 0.0 && fs.f_att.dot(fs.f_rep) / denom < cfg.antiparallel_cos;
    cancelled || opposed
}

/// Which side of the attractive force has fewer obstacles within `rho0`;
/// ties go left.
fn escape_side(position: Vec2, f_att: Vec2, obstacles: &[Circle], cfg: &ApfConfig) -> i8 {
    let left = f_att.perp();
    let (mut n_left, mut n_right) = (0, 0);
    for c in obstacles {
        if c.clearance(position).max(RHO_FLOOR) > cfg.rho0 {
            continue;
        }
        let side = (c.center - position).dot(left);
        if side > 0.0 {
            n_left += 1;
        } else if side < 0.0 {
            n_right += 1;
        }
    }
    if n_right < n_left {
        -1
    } else {
        1
    }
}

/// One control cycle. `prev` carries the escape hysteresis between ticks.
pub fn plan_step_apf(
    pose: &Pose2D,
    goal: Vec2,
    obstacles: &[Circle],
    cfg: &ApfConfig,
    params: &VehicleParams,
    prev: &ForceState,
) -> Result<(ControlCommand, ForceState), ApfError> {
    let mut fs = forces(pose, goal, obstacles, cfg)?;
    let q = pose.position();
    let dist = q.dist(goal);
    fs.in_local_min = detect_local_min(&fs, dist, cfg);
    if cfg.escape_enabled && dist > cfg.goal_tolerance {
        if prev.escape_ticks_left > 0 {
            fs.escape_side = prev.escape_side;
            fs.escape_ticks_left = prev.escape_ticks_left - 1;
        } else if fs.in_local_min {
            fs.escape_side = escape_side(q, fs.f_att, obstacles, cfg);
            fs.escape_ticks_left = cfg.escape_hold;
        }
        if fs.escape_ticks_left > 0 || fs.in_local_min {
            let side = f64::from(fs.escape_side);
            fs.f_escape = fs.f_att.unit().perp() * (side * cfg.escape_gain * fs.f_att.norm());
        }
    }
    if dist <= cfg.goal_tolerance {
        return Ok((ControlCommand::STOP, fs));
    }
    let net = fs.net();
    let target = net.angle();
    let scale = (net.dot(pose.heading()) / cfg.force_speed_ref).clamp(0.0, 1.0);
    let mut v = speed_law(fs.n_obstacles, cfg) * scale;
    if fs.f_escape != Vec2::ZERO {
        v = v.max(cfg.v_min);
    }
    let v = v.min(params.v_max);
    let gamma = (cfg.k_heading * wrap_angle(target - pose.theta))
        .clamp(-params.gamma_max, params.gamma_max);
    Ok((ControlCommand::new(v, gamma), fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ApfConfig {
        ApfConfig::default()
    }

    #[test]
    fn free_space_points_at_goal() {
        let fs = forces(&Pose2D::default(), Vec2::new(3.0, 4.0), &[], &cfg()).unwrap();
        assert_eq!(fs.f_rep, Vec2::ZERO);
        assert_eq!(fs.n_obstacles, 0);
        assert!((fs.net().unit().dot(Vec2::new(0.6, 0.8)) - 1.0).abs() < 1e-12);
        assert!(!detect_local_min(&fs, 5.0, &cfg()));
    }

    #[test]
    fn zero_push_at_influence_boundary() {
        let c = cfg();
        let obs = Circle::new(Vec2::new(1.0, 0.0), 1.0 - c.rho0);
        assert_eq!(obs.clearance(Vec2::ZERO), c.rho0);
        assert_eq!(repulsion(Vec2::ZERO, &obs, &c), Vec2::ZERO);
    }

    #[test]
    fn repulsion_matches_direct_sum() {
        let c = cfg();
        let obs = [
            Circle::new(Vec2::new(0.5, 0.2), 0.2),
            Circle::new(Vec2::new(-0.3, 0.5), 0.15),
            Circle::new(Vec2::new(0.1, -0.6), 0.25),
        ];
        let pose = Pose2D::new(0.05, 0.02, 0.3);
        let fs = forces(&pose, Vec2::new(2.0, 0.0), &obs, &c).unwrap();
        let mut expected = Vec2::ZERO;
        let mut n = 0;
        for o in &obs {
            let dx = pose.x - o.center.x;
            let dy = pose.y - o.center.y;
            let d = (dx * dx + dy * dy).sqrt();
            let rho = f64::max(d - o.radius, 0.05);
            if rho <= c.rho0 {
                n += 1;
                let m = c.k_rep * (1.0 / rho - 1.0 / c.rho0) / (rho * rho);
                expected += Vec2::new(dx / d * m, dy / d * m);
            }
        }
        assert_eq!(fs.n_obstacles, n);
        assert!((fs.f_rep - expected).norm() < 1e-12 * expected.norm().max(1.0));
    }

    #[test]
    fn inside_obstacle_is_collision() {
        let obs = [Circle::new(Vec2::new(0.1, 0.0), 0.2)];
        assert!(matches!(
            forces(&Pose2D::default(), Vec2::new(1.0, 0.0), &obs, &cfg()),
            Err(ApfError::Collision(_))
        ));
    }

    #[test]
    fn speed_law_values() {
        let mut c = cfg();
        assert_eq!(speed_law(0, &c), c.v_max);
        c.v_max = 1.0;
        c.k_gain = 0.2;
        c.v_min = 0.0;
        assert!((speed_law(3, &c) - 0.4).abs() < 1e-12);
        c.v_min = 0.1;
        assert_eq!(speed_law(1000, &c), 0.1);
    }

    #[test]
    fn symmetric_pair_is_a_local_minimum() {
        let c = cfg();
        let obs = [
            Circle::new(Vec2::new(1.0, 0.3), 0.2),
            Circle::new(Vec2::new(1.0, -0.3), 0.2),
        ];
        let pose = Pose2D::new(0.6, 0.0, 0.0);
        let fs = forces(&pose, Vec2::new(3.0, 0.0), &obs, &c).unwrap();
        assert!(fs.f_rep.y.abs() < 1e-12);
        assert!(fs.f_rep.x < 0.0);
        assert!(detect_local_min(&fs, 2.4, &c));
    }

    #[test]
    fn near_threshold_decisions_match_predicates() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let c = cfg();
        for _ in 0..2000 {
            let fs = ForceState {
                f_att: Vec2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)),
                f_rep: Vec2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)),
                ..ForceState::default()
            };
            let d: f64 = rng.random_range(0.0..1.0);
            let sum = fs.f_att + fs.f_rep;
            let small = (sum.x * sum.x + sum.y * sum.y).sqrt() < c.eps_force;
            let na = (fs.f_att.x.powi(2) + fs.f_att.y.powi(2)).sqrt();
            let nr = (fs.f_rep.x.powi(2) + fs.f_rep.y.powi(2)).sqrt();
            let cos = (fs.f_att.x * fs.f_rep.x + fs.f_att.y * fs.f_rep.y) / (na * nr);
            let expected = d > c.goal_tolerance && (small || cos < c.antiparallel_cos);
            assert_eq!(detect_local_min(&fs, d, &c), expected);
        }
    }

    #[test]
    fn goal_ahead_free_space_command() {
        let p = VehicleParams::default();
        let c = cfg();
        let (cmd, fs) = plan_step_apf(
            &Pose2D::default(),
            Vec2::new(3.0, 0.0),
            &[],
            &c,
            &p,
            &ForceState::default(),
        )
        .unwrap();
        assert_eq!(cmd.gamma, 0.0);
        assert_eq!(cmd.v, c.v_max.min(p.v_max));
        assert_eq!(fs.f_escape, Vec2::ZERO);
    }

    #[test]
    fn offset_obstacle_deflects_to_free_side() {
        let p = VehicleParams::default();
        let c = ApfConfig {
            escape_enabled: false,
            ..cfg()
        };
        // Obstacle slightly right of the goal line: turn left.
        let obs = [Circle::new(Vec2::new(0.7, -0.1), 0.2)];
        let (cmd, fs) = plan_step_apf(
            &Pose2D::default(),
            Vec2::new(3.0, 0.0),
            &obs,
            &c,
            &p,
            &ForceState::default(),
        )
        .unwrap();
        assert!(fs.f_rep.y > 0.0);
        assert!(cmd.gamma > 0.0);
        let mirrored = [Circle::new(Vec2::new(0.7, 0.1), 0.2)];
        let (cmd2, _) = plan_step_apf(
            &Pose2D::default(),
            Vec2::new(3.0, 0.0),
            &mirrored,
            &c,
            &p,
            &ForceState::default(),
        )
        .unwrap();
        assert!(cmd2.gamma < 0.0);
        assert!((cmd.gamma + cmd2.gamma).abs() < 1e-12);
    }

    #[test]
    fn escape_holds_for_configured_ticks() {
        let p = VehicleParams::default();
        let c = ApfConfig {
            escape_hold: 3,
            ..cfg()
        };
        let obs = [Circle::new(Vec2::new(0.7, 0.0), 0.2)];
        let pose = Pose2D::default();
        let goal = Vec2::new(3.0, 0.0);
        let (_, s1) = plan_step_apf(&pose, goal, &obs, &c, &p, &ForceState::default()).unwrap();
        assert!(s1.in_local_min);
        assert_eq!(s1.escape_ticks_left, 3);
        assert_eq!(s1.escape_side, 1);
        assert!(s1.f_escape.y > 0.0);
        let (_, s2) = plan_step_apf(&Pose2D::new(0.0, 0.0, 0.0), goal, &[], &c, &p, &s1).unwrap();
        assert_eq!(s2.escape_ticks_left, 2);
        assert!(s2.f_escape.norm() > 0.0);
        let (_, s3) = plan_step_apf(&pose, goal, &[], &c, &p, &s2).unwrap();
        let (_, s4) = plan_step_apf(&pose, goal, &[], &c, &p, &s3).unwrap();
        assert_eq!(s4.escape_ticks_left, 0);
        let (_, s5) = plan_step_apf(&pose, goal, &[], &c, &p, &s4).unwrap();
        assert_eq!(s5.f_escape, Vec2::ZERO);
    }

    proptest! {
        #[test]
        fn forces_rotate_with_the_scene(
            rot in -3.0..3.0f64,
            ox in 0.3..1.0f64, oy in -0.5..0.5f64, gx in 1.0..4.0f64, gy in -2.0..2.0f64,
        ) {
            let c = cfg();
            let obs = [Circle::new(Vec2::new(ox, oy), 0.1)];
            let goal = Vec2::new(gx, gy);
            let a = forces(&Pose2D::default(), goal, &obs, &c).unwrap();
            let obs_r = [Circle::new(obs[0].center.rotate(rot), 0.1)];
            let b = forces(&Pose2D::new(0.0, 0.0, rot), goal.rotate(rot), &obs_r, &c).unwrap();
            prop_assert!((a.f_att.rotate(rot) - b.f_att).norm() < 1e-9);
            prop_assert!((a.f_rep.rotate(rot) - b.f_rep).norm() < 1e-9 * a.f_rep.norm().max(1.0));
        }

        #[test]
        fn push_grows_as_clearance_shrinks(r1 in 0.06..0.59f64, dr in 0.001..0.3f64) {
            let c = cfg();
            let r2 = (r1 + dr).min(c.rho0);
            let obs = Circle::new(Vec2::ZERO, 0.2);
            let near = repulsion(Vec2::new(0.2 + r1, 0.0), &obs, &c).norm();
            let far = repulsion(Vec2::new(0.2 + r2, 0.0), &obs, &c).norm();
            prop_assert!(near > far);
            let outside = repulsion(Vec2::new(0.2 + c.rho0 + dr, 0.0), &obs, &c);
            prop_assert_eq!(outside, Vec2::ZERO);
        }

        #[test]
        fn speed_law_bounded_and_monotone(n in 0usize..100) {
            let c = cfg();
            let v = speed_law(n, &c);
            prop_assert!(v >= c.v_min && v <= c.v_max);
            prop_assert!(speed_law(n + 1, &c) <= v);
        }
    }
}

//! Ackermann bicycle kinematics.
//!
//! The vehicle is reduced to one steered front wheel and one rear wheel
//! separated by the wheelbase `L`; a steering angle `gamma` turns the vehicle
//! on a circle of radius `R` with `tan(gamma) = L / R`. Motion under a
//! constant command is integrated exactly along that arc.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Circle, Vec2};

/// Below this yaw rate a step is integrated as a straight line.
pub const OMEGA_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("command exceeds vehicle limits: {0}")]
    LimitViolation(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

/// Planar vehicle pose. `theta` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Maps a point given in this pose's body frame into the world frame.
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        self.position() + local.rotate(self.theta)
    }

    /// Maps a world point into this pose's body frame.
    pub fn inverse_transform_point(&self, world: Vec2) -> Vec2 {
        (world - self.position()).rotate(-self.theta)
    }

    /// Composes a body-frame pose onto this one.
    pub fn compose(&self, local: &Pose2D) -> Pose2D {
        let p = self.transform_point(local.position());
        Pose2D::new(p.x, p.y, self.theta + local.theta)
    }
}

impl From<[f64; 3]> for Pose2D {
    fn from(a: [f64; 3]) -> Self {
        Pose2D::new(a[0], a[1], a[2])
    }
}

impl From<Pose2D> for [f64; 3] {
    fn from(p: Pose2D) -> Self {
        [p.x, p.y, p.theta]
    }
}

/// Speed and steering angle pair sent to the actuators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Signed linear speed in m/s.
    pub v: f64,
    /// Front wheel steering angle in radians, positive turns left.
    pub gamma: f64,
}

impl ControlCommand {
    pub const STOP: ControlCommand = ControlCommand { v: 0.0, gamma: 0.0 };

    pub fn new(v: f64, gamma: f64) -> Self {
        Self { v, gamma }
    }

    /// Clamps both fields into the vehicle's absolute limits.
    pub fn clamped(self, params: &VehicleParams) -> Self {
        Self {
            v: self.v.clamp(-params.v_max, params.v_max),
            gamma: self.gamma.clamp(-params.gamma_max, params.gamma_max),
        }
    }

    /// Yaw rate produced by this command.
    pub fn omega(&self, params: &VehicleParams) -> f64 {
        self.v * self.gamma.tan() / params.wheelbase
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub v_max: f64,
    pub gamma_max: f64,
    pub a_max: f64,
    /// Yaw-acceleration bound used by the dynamic window.
    pub alpha_max: f64,
    pub body_width: f64,
    pub body_length: f64,
}

impl Default for VehicleParams {
    /// Roughly a 1/10 scale race car. The wheelbase is an assumed value.
    fn default() -> Self {
        Self {
            wheelbase: 0.33,
            v_max: 1.0,
            gamma_max: 0.5,
            a_max: 1.0,
            alpha_max: 4.0,
            body_width: 0.28,
            body_length: 0.5,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let fields = [
            ("wheelbase", self.wheelbase),
            ("v_max", self.v_max),
            ("gamma_max", self.gamma_max),
            ("a_max", self.a_max),
            ("alpha_max", self.alpha_max),
            ("body_width", self.body_width),
            ("body_length", self.body_length),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(VehicleError::InvalidParams(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if self.gamma_max >= std::f64::consts::FRAC_PI_2 {
            return Err(VehicleError::InvalidParams(
                "gamma_max must be below pi/2".into(),
            ));
        }
        Ok(())
    }

    pub fn min_turn_radius(&self) -> f64 {
        self.wheelbase / self.gamma_max.tan()
    }

    /// Largest yaw rate reachable at full speed and full lock.
    pub fn omega_max(&self) -> f64 {
        self.v_max * self.gamma_max.tan() / self.wheelbase
    }

    /// Largest yaw rate reachable at speed `v`.
    pub fn omega_limit_at(&self, v: f64) -> f64 {
        v.abs() * self.gamma_max.tan() / self.wheelbase
    }

    /// Steering angle that produces yaw rate `omega` at speed `v`, clamped.
    pub fn steering_for(&self, v: f64, omega: f64) -> f64 {
        if v.abs() < 1e-9 {
            return 0.0;
        }
        (self.wheelbase * omega / v)
            .atan()
            .clamp(-self.gamma_max, self.gamma_max)
    }

    /// Steering angle that follows a path of signed curvature `kappa`.
    pub fn steering_for_curvature(&self, kappa: f64) -> f64 {
        (self.wheelbase * kappa)
            .atan()
            .clamp(-self.gamma_max, self.gamma_max)
    }
}

/// Turning radius of the bicycle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TurningRadius {
    Straight,
    /// Signed radius, positive for a left turn.
    Arc(f64),
}

impl TurningRadius {
    pub fn curvature(&self) -> f64 {
        match self {
            TurningRadius::Straight => 0.0,
            TurningRadius::Arc(r) => 1.0 / r,
        }
    }
}

/// `R = L / tan(gamma)`.
pub fn turning_radius(params: &VehicleParams, gamma: f64) -> Result<TurningRadius, VehicleError> {
    if !gamma.is_finite() {
        return Err(VehicleError::InvalidState(format!("gamma = {gamma}")));
    }
    if gamma.abs() > params.gamma_max {
        return Err(VehicleError::LimitViolation(format!(
            "|gamma| = {} > gamma_max = {}",
            gamma.abs(),
            params.gamma_max
        )));
    }
    if gamma == 0.0 {
        Ok(TurningRadius::Straight)
    } else {
        Ok(TurningRadius::Arc(params.wheelbase / gamma.tan()))
    }
}

/// Exact constant-velocity, constant-yaw-rate motion for `dt` seconds.
pub fn arc_step(pose: &Pose2D, v: f64, omega: f64, dt: f64) -> Pose2D {
    if omega.abs() > OMEGA_EPS {
        let r = v / omega;
        let th1 = pose.theta + omega * dt;
        Pose2D::new(
            pose.x + r * (th1.sin() - pose.theta.sin()),
            pose.y - r * (th1.cos() - pose.theta.cos()),
            th1,
        )
    } else {
        let d = v * dt;
        Pose2D::new(
            pose.x + d * pose.theta.cos(),
            pose.y + d * pose.theta.sin(),
            pose.theta,
        )
    }
}

/// Advances `pose` by `dt` seconds under `cmd`, integrating along the arc.
pub fn step(
    pose: &Pose2D,
    cmd: &ControlCommand,
    dt: f64,
    params: &VehicleParams,
) -> Result<Pose2D, VehicleError> {
    if !pose.is_finite() || !cmd.v.is_finite() || !cmd.gamma.is_finite() || !dt.is_finite() {
        return Err(VehicleError::InvalidState(format!(
            "non-finite input: pose={pose:?} cmd={cmd:?} dt={dt}"
        )));
    }
    if dt <= 0.0 {
        return Err(VehicleError::InvalidState(format!(
            "dt must be positive, got {dt}"
        )));
    }
    check_limits(cmd, params)?;
    Ok(arc_step(pose, cmd.v, cmd.omega(params), dt))
}

fn check_limits(cmd: &ControlCommand, params: &VehicleParams) -> Result<(), VehicleError> {
    const TOL: f64 = 1e-12;
    if cmd.v.abs() > params.v_max + TOL {
        return Err(VehicleError::LimitViolation(format!(
            "|v| = {} > v_max = {}",
            cmd.v.abs(),
            params.v_max
        )));
    }
    if cmd.gamma.abs() > params.gamma_max + TOL {
        return Err(VehicleError::LimitViolation(format!(
            "|gamma| = {} > gamma_max = {}",
            cmd.gamma.abs(),
            params.gamma_max
        )));
    }
    Ok(())
}

/// Circles whose union covers the body rectangle centered on `pose`.
///
/// The body is cut into equal slices along its length and each slice gets
/// the circle through its corners.
pub fn footprint_circles(pose: &Pose2D, params: &VehicleParams) -> Vec<Circle> {
    let n = if params.body_length <= params.body_width {
        2
    } else {
        3
    };
    let slice = params.body_length / n as f64;
    let radius = (slice / 2.0).hypot(params.body_width / 2.0);
    (0..n)
        .map(|i| {
            let offset = -params.body_length / 2.0 + slice * (i as f64 + 0.5);
            Circle::new(pose.transform_point(Vec2::new(offset, 0.0)), radius)
        })
        .collect()
}

/// Radius of a single disc that bounds the whole body.
pub fn bounding_radius(params: &VehicleParams) -> f64 {
    (params.body_length / 2.0).hypot(params.body_width / 2.0)
}

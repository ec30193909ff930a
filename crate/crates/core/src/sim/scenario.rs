//! Scenario files: TOML with a `format_version` key.
//!
//! Every section except `track` is optional and falls back to defaults.
//! Obstacles are given either by a world `center` or by arc length `s` and
//! signed `lateral` offset along the track.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::track::Track;
use crate::apf::ApfConfig;
use crate::costmap::{InflationParams, PlannerCostParams};
use crate::dwa::DwaConfig;
use crate::geom::{Circle, Vec2};
use crate::teb::TebConfig;
use crate::vehicle::{Pose2D, VehicleParams};
use crate::vision::camera::{Camera, Correspondence, PinholeParams};
use crate::vision::{LaneConfig, LightingNoise};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Dwa,
    Teb,
    Apf,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Dwa, PlannerKind::Teb, PlannerKind::Apf];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Dwa => "dwa",
            PlannerKind::Teb => "teb",
            PlannerKind::Apf => "apf",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dwa" => Ok(PlannerKind::Dwa),
            "teb" => Ok(PlannerKind::Teb),
            "apf" => Ok(PlannerKind::Apf),
            other => Err(format!(
                "unknown planner {other:?} (expected dwa, teb or apf)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub control_points: Vec<Vec2>,
    #[serde(default = "default_lane_width")]
    pub lane_width: f64,
    #[serde(default = "default_line_width")]
    pub line_width: f64,
}

fn default_lane_width() -> f64 {
    0.8
}

fn default_line_width() -> f64 {
    0.1
}

/// Start either from an explicit pose or from a track position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSpec {
    pub pose: Option<Pose2D>,
    pub s: Option<f64>,
    /// Defaults to the right lane center.
    pub lateral: Option<f64>,
    pub heading_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub center: Option<Vec2>,
    pub s: Option<f64>,
    pub lateral: Option<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub correspondences: [Correspondence; 4],
}

impl Default for CameraSpec {
    fn default() -> Self {
        let p = PinholeParams::default();
        Self {
            width: p.width,
            height: p.height,
            correspondences: p.correspondences(),
        }
    }
}

/// The rolling local window used by the global and local planners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalMapSpec {
    pub resolution: f64,
    pub size: f64,
}

impl Default for LocalMapSpec {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            size: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub beams: usize,
    pub max_range: f64,
    /// Consecutive hits further apart than this start a new cluster.
    pub cluster_gap: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            beams: 360,
            max_range: 3.5,
            cluster_gap: 0.15,
        }
    }
}

/// Lane selection and goal placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorSpec {
    /// How far ahead an obstacle can block a lane.
    pub horizon: f64,
    /// Extra lateral clearance added to the obstacle radius and half width.
    pub margin: f64,
    /// Distance behind the rear bumper an obstacle keeps blocking.
    pub clear_behind: f64,
    /// Radius used to pick the interim goal on the global path.
    pub window_radius: f64,
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        Self {
            horizon: 2.6,
            margin: 0.1,
            clear_behind: 0.3,
            window_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_tick")]
    pub tick: f64,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub goal_s: Option<f64>,
    #[serde(default)]
    pub planner: Option<PlannerKind>,
    pub track: TrackSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub lane: LaneConfig,
    #[serde(default)]
    pub lighting: LightingNoise,
    #[serde(default)]
    pub local_map: LocalMapSpec,
    #[serde(default)]
    pub inflation: InflationParams,
    #[serde(default)]
    pub planner_cost: PlannerCostParams,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub behavior: BehaviorSpec,
    #[serde(default)]
    pub dwa: DwaConfig,
    #[serde(default)]
    pub teb: TebConfig,
    #[serde(default)]
    pub apf: ApfConfig,
}

fn default_tick() -> f64 {
    0.05
}

fn default_max_ticks() -> usize {
    2000
}

/// A placed obstacle with its arc-length position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacedObstacle {
    pub circle: Circle,
    pub s: f64,
    pub lateral: f64,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub track: Track,
    pub obstacles: Vec<PlacedObstacle>,
    pub start: Pose2D,
    pub goal_s: f64,
    pub camera: Camera,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut scn = Self::from_toml_str(&text)?;
        if scn.file.name.is_none() {
            if let Some(stem) = path.file_stem() {
                scn.name = stem.to_string_lossy().into_owned();
            }
        }
        Ok(scn)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.format_version != FORMAT_VERSION {
            return Err(ScenarioError::Version(file.format_version));
        }
        if !(file.tick > 0.0 && file.tick.is_finite()) {
            return Err(invalid("tick", "must be positive"));
        }
        if file.max_ticks == 0 {
            return Err(invalid("max_ticks", "must be positive"));
        }
        file.vehicle
            .validate()
            .map_err(|e| invalid("vehicle", e.to_string()))?;
        file.inflation
            .validate()
            .map_err(|e| invalid("inflation", e.to_string()))?;
        file.planner_cost
            .validate()
            .map_err(|e| invalid("planner_cost", e.to_string()))?;
        file.dwa
            .validate()
            .map_err(|e| invalid("dwa", e.to_string()))?;
        file.teb
            .validate()
            .map_err(|e| invalid("teb", e.to_string()))?;
        file.apf
            .validate()
            .map_err(|e| invalid("apf", e.to_string()))?;
        file.lane.validate().map_err(|e| invalid("lane", e))?;
        let lm = &file.local_map;
        if !(lm.resolution > 0.0 && lm.size > 2.0 * lm.resolution) {
            return Err(invalid(
                "local_map",
                "need resolution > 0 and size > 2 * resolution",
            ));
        }
        if file.sensor.beams < 3 || !(file.sensor.max_range > 0.0) {
            return Err(invalid(
                "sensor",
                "need at least 3 beams and a positive range",
            ));
        }
        let tr = &file.track;
        if tr.lane_width <= file.vehicle.body_width {
            return Err(invalid(
                "track.lane_width",
                "must exceed vehicle.body_width",
            ));
        }
        let track = Track::new(tr.control_points.clone(), tr.lane_width, tr.line_width)
            .map_err(|m| invalid("track", m))?;
        let kmax = track.max_curvature();
        if kmax > 1.0 / file.vehicle.min_turn_radius() {
            return Err(invalid(
                "track.control_points",
                format!(
                    "curvature {kmax:.3} 1/m is tighter than the vehicle turning radius {:.3} m",
                    file.vehicle.min_turn_radius()
                ),
            ));
        }
        let mut obstacles = Vec::with_capacity(file.obstacles.len());
        for (i, o) in file.obstacles.iter().enumerate() {
            let field = format!("obstacles[{i}]");
            if !(o.radius > 0.0 && o.radius.is_finite()) {
                return Err(invalid(&field, "radius must be positive"));
            }
            let center = match (o.center, o.s) {
                (Some(c), None) if o.lateral.is_none() => c,
                (None, Some(s)) => {
                    let p = track.pose_at(s, o.lateral.unwrap_or(0.0));
                    Vec2::new(p.x, p.y)
                }
                _ => {
                    return Err(invalid(
                        &field,
                        "give either `center` or `s` (with optional `lateral`)",
                    ))
                }
            };
            let proj = track.project(center);
            obstacles.push(PlacedObstacle {
                circle: Circle::new(center, o.radius),
                s: proj.s,
                lateral: proj.lateral,
            });
        }
        obstacles.sort_by(|a, b| a.s.total_cmp(&b.s));
        let st = &file.start;
        let start = match st.pose {
            Some(p) => {
                if st.s.is_some() || st.lateral.is_some() {
                    return Err(invalid("start", "give either `pose` or `s`/`lateral`"));
                }
                Pose2D::new(p.x, p.y, p.theta + st.heading_offset)
            }
            None => {
                let p = track.pose_at(
                    st.s.unwrap_or(0.3),
                    st.lateral.unwrap_or(-tr.lane_width / 2.0),
                );
                Pose2D::new(p.x, p.y, p.theta + st.heading_offset)
            }
        };
        let goal_s = file.goal_s.unwrap_or(track.length() - 0.5);
        if !(goal_s > 0.0 && goal_s <= track.length()) {
            return Err(invalid(
                "goal_s",
                format!("must lie in (0, {:.3}]", track.length()),
            ));
        }
        let cam = &file.camera;
        let camera = Camera::from_correspondences(cam.width, cam.height, &cam.correspondences)
            .ok_or_else(|| invalid("camera.correspondences", "degenerate correspondences"))?;
        Ok(Self {
            name: file.name.clone().unwrap_or_else(|| "scenario".into()),
            file,
            track,
            obstacles,
            start,
            goal_s,
            camera,
        })
    }

    pub fn circles(&self) -> Vec<Circle> {
        self.obstacles.iter().map(|o| o.circle).collect()
    }

    pub fn tick(&self) -> f64 {
        self.file.tick
    }

    pub fn vehicle(&self) -> &VehicleParams {
        &self.file.vehicle
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
format_version = 1
[track]
control_points = [[0.0, 0.0], [10.0, 0.0]]
"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.tick(), 0.05);
        assert!((s.start.y + 0.4).abs() < 1e-12);
        assert!((s.goal_s - 9.5).abs() < 1e-9);
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn obstacles_by_arc_length_and_center() {
        let text = format!(
            "{MINIMAL}\n[[obstacles]]\ns = 4.0\nlateral = -0.4\nradius = 0.2\n[[obstacles]]\ncenter = [2.0, 0.4]\nradius = 0.1\n"
        );
        let s = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(s.obstacles.len(), 2);
        assert!((s.obstacles[0].s - 2.0).abs() < 1e-9);
        assert!((s.obstacles[1].circle.center.dist(Vec2::new(4.0, -0.4))) < 1e-9);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("format_version = 1", "format_version = 9");
        assert!(matches!(
            Scenario::from_toml_str(&bad),
            Err(ScenarioError::Version(9))
        ));
        let bad = format!("{MINIMAL}\n[[obstacles]]\ns = 1.0\nradius = -1.0\n");
        match Scenario::from_toml_str(&bad) {
            Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "obstacles[0]"),
            other => panic!("{other:?}"),
        }
        let bad = format!("{MINIMAL}\nbogus = 3\n");
        let msg = Scenario::from_toml_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("bogus") && msg.contains("line"), "{msg}");
        let tight = MINIMAL.replace(
            "[[0.0, 0.0], [10.0, 0.0]]",
            "[[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]",
        );
        assert!(matches!(
            Scenario::from_toml_str(&tight),
            Err(ScenarioError::Invalid { .. })
        ));
    }

    #[test]
    fn planner_names_roundtrip() {
        for k in PlannerKind::ALL {
            assert_eq!(k.name().parse::<PlannerKind>().unwrap(), k);
        }
        assert!("rrt".parse::<PlannerKind>().is_err());
    }
}

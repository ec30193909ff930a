//! Ground-plane camera model and synthetic view rendering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::homography::Homography;
use super::image::ImageRGB;
use crate::geom::Vec2;
use crate::vehicle::Pose2D;

pub const LANE_RED: [u8; 3] = [255, 0, 0];
pub const EDGE_BLACK: [u8; 3] = [0, 0, 0];
pub const FLOOR_GRAY: [u8; 3] = [128, 128, 128];
pub const OBSTACLE_BLUE: [u8; 3] = [40, 60, 200];
pub const SKY: [u8; 3] = [190, 200, 215];

/// Anything that can report the color of the floor at a world point.
pub trait GroundScene {
    fn color_at(&self, world: Vec2) -> [u8; 3];
}

/// One ground-to-pixel correspondence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correspondence {
    /// Vehicle-frame `(forward, left)` in meters.
    pub ground: Vec2,
    /// Image `(column, row)` in pixels.
    pub pixel: Vec2,
}

/// Pinhole camera at the vehicle reference point, looking forward and
/// pitched down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinholeParams {
    pub width: usize,
    pub height: usize,
    pub mount_height: f64,
    pub pitch: f64,
    pub focal: f64,
}

impl Default for PinholeParams {
    fn default() -> Self {
        Self {
            width: 160,
            height: 120,
            mount_height: 0.30,
            pitch: 20f64.to_radians(),
            focal: 90.0,
        }
    }
}

impl PinholeParams {
    /// Projects a vehicle-frame ground point; `None` behind the camera.
    pub fn project(&self, g: Vec2) -> Option<Vec2> {
        let (s, c) = self.pitch.sin_cos();
        let depth = g.x * c + self.mount_height * s;
        if depth <= 1e-9 {
            return None;
        }
        let cx = (self.width - 1) as f64 / 2.0;
        let cy = (self.height - 1) as f64 / 2.0;
        Some(Vec2::new(
            cx - self.focal * g.y / depth,
            cy + self.focal * (self.mount_height * c - g.x * s) / depth,
        ))
    }

    pub fn correspondences(&self) -> [Correspondence; 4] {
        [
            Vec2::new(0.5, 0.3),
            Vec2::new(0.5, -0.3),
            Vec2::new(2.0, -0.8),
            Vec2::new(2.0, 0.8),
        ]
        .map(|ground| Correspondence {
            ground,
            pixel: self
                .project(ground)
                .expect("points lie ahead of the camera"),
        })
    }
}

/// Image dimensions plus the ground-to-image homography.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    ground_to_image: Homography,
}

impl Camera {
    /// Solves the homography from four correspondences and fixes its sign so
    /// that points in front of the camera have positive homogeneous scale.
    pub fn from_correspondences(
        width: usize,
        height: usize,
        pairs: &[Correspondence; 4],
    ) -> Option<Self> {
        let h = Homography::from_correspondences(&pairs.map(|c| (c.ground, c.pixel)))?;
        let h = if h.apply_h(pairs[0].ground)[2] < 0.0 {
            h.scaled(-1.0)
        } else {
            h
        };
        Some(Self {
            width,
            height,
            ground_to_image: h,
        })
    }

    pub fn pinhole(p: &PinholeParams) -> Self {
        Self::from_correspondences(p.width, p.height, &p.correspondences())
            .expect("pinhole correspondences are in general position")
    }

    pub fn ground_to_image(&self) -> &Homography {
        &self.ground_to_image
    }
}

impl Default for Camera {
    fn default() -> Self {
        Self::pinhole(&PinholeParams::default())
    }
}

/// Additive brightness field: a smooth flare blob plus per-pixel noise, both
/// in units of full scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightingNoise {
    pub flare: f64,
    pub flare_radius: f64,
    pub grain: f64,
}

impl LightingNoise {
    pub fn is_zero(&self) -> bool {
        self.flare == 0.0 && self.grain == 0.0
    }
}

/// Renders the camera view from `pose` by inverse-mapping every pixel onto
/// the ground. Pixels above the horizon are sky. `seed` drives the noise.
pub fn render_view(
    pose: &Pose2D,
    scene: &dyn GroundScene,
    camera: &Camera,
    noise: &LightingNoise,
    seed: u64,
) -> ImageRGB {
    let inv = camera.ground_to_image.inverse();
    let mut img = ImageRGB::new(camera.width, camera.height);
    for row in 0..camera.height {
        for col in 0..camera.width {
            let [x, y, w] = inv.apply_h(Vec2::new(col as f64, row as f64));
            let color = if w <= 1e-12 {
                SKY
            } else {
                scene.color_at(pose.transform_point(Vec2::new(x / w, y / w)))
            };
            img.set(col, row, color);
        }
    }
    if !noise.is_zero() {
        add_lighting(&mut img, noise, seed);
    }
    img
}

fn add_lighting(img: &mut ImageRGB, noise: &LightingNoise, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (img.width(), img.height());
    let center = Vec2::new(
        rng.random_range(0.0..w as f64),
        rng.random_range(0.0..h as f64),
    );
    let sigma = (noise.flare_radius * w as f64).max(1.0);
    for row in 0..h {
        for col in 0..w {
            let d2 = Vec2::new(col as f64, row as f64).dist(center).powi(2);
            let mut delta = noise.flare * (-d2 / (2.0 * sigma * sigma)).exp();
            if noise.grain > 0.0 {
                delta += noise.grain * rng.random_range(-1.0..1.0);
            }
            let shift = (delta * 255.0).round();
            let px = img
                .get(col, row)
                .map(|c| (f64::from(c) + shift).clamp(0.0, 255.0) as u8);
            img.set(col, row, px);
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Straight road along world +x with the red line at `y = 0`.
    pub(crate) struct StraightRoad {
        pub lane_width: f64,
        pub line_width: f64,
    }

    impl GroundScene for StraightRoad {
        fn color_at(&self, p: Vec2) -> [u8; 3] {
            let d = p.y.abs();
            if d <= self.line_width / 2.0 {
                LANE_RED
            } else if (d - self.lane_width).abs() <= self.line_width / 2.0 {
                EDGE_BLACK
            } else {
                FLOOR_GRAY
            }
        }
    }

    pub(crate) fn road() -> StraightRoad {
        StraightRoad {
            lane_width: 0.8,
            line_width: 0.1,
        }
    }

    fn red_columns(img: &ImageRGB, row: usize) -> Vec<usize> {
        (0..img.width())
            .filter(|c| img.get(*c, row) == LANE_RED)
            .collect()
    }

    #[test]
    fn homography_matches_pinhole_projection() {
        let p = PinholeParams::default();
        let cam = Camera::pinhole(&p);
        for g in [
            Vec2::new(0.3, 0.1),
            Vec2::new(1.7, -0.4),
            Vec2::new(3.0, 1.0),
        ] {
            let a = cam.ground_to_image().apply(g).unwrap();
            let b = p.project(g).unwrap();
            assert!(a.dist(b) < 1e-9);
        }
    }

    #[test]
    fn centered_view_is_symmetric() {
        let cam = Camera::default();
        let img = render_view(
            &Pose2D::new(0.0, 0.0, 0.0),
            &road(),
            &cam,
            &LightingNoise::default(),
            0,
        );
        let mut rows = 0;
        for row in 0..img.height() {
            let cols = red_columns(&img, row);
            if cols.is_empty() {
                continue;
            }
            rows += 1;
            let mid = (cols[0] + cols[cols.len() - 1]) as f64 / 2.0;
            assert!((mid - 79.5).abs() <= 0.5, "row {row}: {cols:?}");
        }
        assert!(rows > 60);
        assert_eq!(img.get(0, 0), SKY);
    }

    #[test]
    fn lateral_offset_shifts_by_projection() {
        let p = PinholeParams::default();
        let cam = Camera::pinhole(&p);
        let d = 0.2;
        let img = render_view(
            &Pose2D::new(0.0, d, 0.0),
            &road(),
            &cam,
            &LightingNoise::default(),
            0,
        );
        for fwd in [0.6, 1.0, 1.5] {
            let predicted = p.project(Vec2::new(fwd, -d)).unwrap();
            let row = predicted.y.round() as usize;
            let cols = red_columns(&img, row);
            let centroid = cols.iter().sum::<usize>() as f64 / cols.len() as f64;
            assert!(
                (centroid - predicted.x).abs() <= 1.0,
                "fwd {fwd}: {centroid} vs {}",
                predicted.x
            );
        }
    }

    #[test]
    fn noise_is_deterministic() {
        let cam = Camera::default();
        let noise = LightingNoise {
            flare: 0.3,
            flare_radius: 0.2,
            grain: 0.05,
        };
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let a = render_view(&pose, &road(), &cam, &noise, 9);
        let b = render_view(&pose, &road(), &cam, &noise, 9);
        let c = render_view(&pose, &road(), &cam, &noise, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

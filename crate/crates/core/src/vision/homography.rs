//! Planar homographies and inverse-mapped warping.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::image::ImageBinary;
use crate::geom::Vec2;

const DET_EPS: f64 = 1e-12;

/// A 3x3 projective map, row-major. `apply` maps source to destination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography {
    m: Matrix3<f64>,
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = String;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, String> {
        Homography::from_rows(rows).ok_or_else(|| "homography is singular".to_string())
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        h.rows()
    }
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    /// Returns `None` when the matrix is singular or not finite.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Option<Self> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Self::from_matrix(m)
    }

    fn from_matrix(m: Matrix3<f64>) -> Option<Self> {
        (m.iter().all(|v| v.is_finite()) && m.determinant().abs() > DET_EPS).then_some(Self { m })
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    /// Direct linear transform from four `(source, destination)` pairs with
    /// the bottom-right entry fixed at 1.
    pub fn from_correspondences(pairs: &[(Vec2, Vec2); 4]) -> Option<Self> {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for (i, (s, d)) in pairs.iter().enumerate() {
            let (r0, r1) = (2 * i, 2 * i + 1);
            a[(r0, 0)] = s.x;
            a[(r0, 1)] = s.y;
            a[(r0, 2)] = 1.0;
            a[(r0, 6)] = -d.x * s.x;
            a[(r0, 7)] = -d.x * s.y;
            b[r0] = d.x;
            a[(r1, 3)] = s.x;
            a[(r1, 4)] = s.y;
            a[(r1, 5)] = 1.0;
            a[(r1, 6)] = -d.y * s.x;
            a[(r1, 7)] = -d.y * s.y;
            b[r1] = d.y;
        }
        let h = a.lu().solve(&b)?;
        Self::from_matrix(Matrix3::new(
            h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0,
        ))
    }

    pub fn inverse(&self) -> Self {
        Self {
            m: self.m.try_inverse().expect("invertible by construction"),
        }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Homography) -> Self {
        Self {
            m: self.m * first.m,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { m: self.m * k }
    }

    /// Homogeneous image of `(p, 1)`.
    pub fn apply_h(&self, p: Vec2) -> [f64; 3] {
        let v = self.m * Vector3::new(p.x, p.y, 1.0);
        [v.x, v.y, v.z]
    }

    /// Returns `None` for points mapped to infinity.
    pub fn apply(&self, p: Vec2) -> Option<Vec2> {
        let [x, y, w] = self.apply_h(p);
        (w.abs() > DET_EPS).then(|| Vec2::new(x / w, y / w))
    }
}

/// Precomputed nearest-neighbor source index for every destination pixel.
#[derive(Debug, Clone)]
pub struct WarpTable {
    width: usize,
    height: usize,
    src: Vec<Option<u32>>,
}

impl WarpTable {
    /// `h` maps source pixel coordinates to destination pixel coordinates.
    pub fn new(h: &Homography, src_w: usize, src_h: usize, width: usize, height: usize) -> Self {
        let inv = h.inverse();
        let mut src = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                let s = inv.apply(Vec2::new(c as f64, r as f64)).and_then(|p| {
                    let (x, y) = (p.x.round(), p.y.round());
                    (x >= 0.0 && y >= 0.0 && x < src_w as f64 && y < src_h as f64)
                        .then(|| (y as usize * src_w + x as usize) as u32)
                });
                src.push(s);
            }
        }
        Self { width, height, src }
    }

    pub fn apply(&self, img: &ImageBinary) -> ImageBinary {
        let px = img.pixels();
        let out = self
            .src
            .iter()
            .map(|s| s.map_or(0, |i| px[i as usize]))
            .collect();
        ImageBinary::from_pixels(self.width, self.height, out).expect("table dimensions")
    }
}

/// Nearest-neighbor warp; destination pixels mapping outside the source are 0.
pub fn warp(img: &ImageBinary, h: &Homography, width: usize, height: usize) -> ImageBinary {
    WarpTable::new(h, img.width(), img.height(), width, height).apply(img)
}

/// Metric top-down frame ahead of the vehicle.
///
/// Column 0 is the leftmost lateral position and the bottom row is the
/// nearest forward distance `near`. The center column sits on the vehicle
/// axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirdEyeFrame {
    pub width: usize,
    pub height: usize,
    pub meters_per_pixel: f64,
    pub near: f64,
}

impl Default for BirdEyeFrame {
    fn default() -> Self {
        Self {
            width: 121,
            height: 121,
            meters_per_pixel: 0.02,
            near: 0.25,
        }
    }
}

impl BirdEyeFrame {
    /// Vehicle-frame `(forward, left)` of a pixel center.
    pub fn pixel_to_metric(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            self.near + (self.height - 1 - row) as f64 * self.meters_per_pixel,
            ((self.width - 1) as f64 / 2.0 - col as f64) * self.meters_per_pixel,
        )
    }

    /// Maps vehicle-frame ground coordinates to pixel coordinates.
    pub fn ground_to_pixel(&self) -> Homography {
        let k = 1.0 / self.meters_per_pixel;
        Homography::from_rows([
            [0.0, -k, (self.width - 1) as f64 / 2.0],
            [-k, 0.0, (self.height - 1) as f64 + self.near * k],
            [0.0, 0.0, 1.0],
        ])
        .expect("positive scale")
    }

    pub fn far(&self) -> f64 {
        self.near + (self.height - 1) as f64 * self.meters_per_pixel
    }
}

/// Warps a camera-space mask into `frame`, given the map from vehicle-frame
/// ground coordinates to camera pixels.
pub fn birdeye(
    img: &ImageBinary,
    ground_to_image: &Homography,
    frame: &BirdEyeFrame,
) -> ImageBinary {
    let h = frame.ground_to_pixel().compose(&ground_to_image.inverse());
    warp(img, &h, frame.width, frame.height)
}

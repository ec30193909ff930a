//! Quadratic lane fit in the bird's-eye frame and lookahead targeting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::homography::BirdEyeFrame;
use super::image::ImageBinary;
use crate::geom::Vec2;

pub const MIN_PIXELS: usize = 30;
pub const MAX_RMS: f64 = 0.15;

/// Affine lookahead law `L_d = l_min + k_v * v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookaheadParams {
    pub l_min: f64,
    pub k_v: f64,
}

impl Default for LookaheadParams {
    fn default() -> Self {
        Self {
            l_min: 0.9,
            k_v: 0.6,
        }
    }
}

impl LookaheadParams {
    pub fn distance(&self, v: f64) -> f64 {
        self.l_min + self.k_v * v.abs()
    }
}

/// Lookahead goal on the detected lane line, in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneTarget {
    pub point: Vec2,
    pub lookahead: f64,
    /// `(a, b, c)` of `lateral = a*forward^2 + b*forward + c`.
    pub poly: [f64; 3],
    pub valid: bool,
    pub pixels: usize,
    pub rms: f64,
}

impl LaneTarget {
    pub fn invalid(lookahead: f64, pixels: usize) -> Self {
        Self {
            point: Vec2::new(lookahead, 0.0),
            lookahead,
            poly: [0.0; 3],
            valid: false,
            pixels,
            rms: f64::INFINITY,
        }
    }

    pub fn lateral_at(&self, forward: f64) -> f64 {
        let [a, b, c] = self.poly;
        (a * forward + b) * forward + c
    }
}

/// Least-squares polynomial through `(forward, lateral)` samples.
///
/// The degree drops to 1 with two distinct forward values and to 0 with one.
/// Returns the coefficients as `(a, b, c)` and the residual RMS.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Option<([f64; 3], f64)> {
    if points.is_empty() {
        return None;
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut degree = xs.len().min(3) - 1;
    loop {
        let cols = degree + 1;
        let a = DMatrix::from_fn(points.len(), cols, |r, c| {
            points[r].0.powi((degree - c) as i32)
        });
        let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;
        if let Some(sol) = ata.cholesky().map(|ch| ch.solve(&atb)) {
            let mut poly = [0.0; 3];
            for (i, v) in sol.iter().enumerate() {
                poly[3 - cols + i] = *v;
            }
            let [qa, qb, qc] = poly;
            let sse: f64 = points
                .iter()
                .map(|(x, y)| ((qa * x + qb) * x + qc - y).powi(2))
                .sum();
            return Some((poly, (sse / points.len() as f64).sqrt()));
        }
        if degree == 0 {
            return None;
        }
        degree -= 1;
    }
}

/// Fits the set pixels of a bird's-eye mask and places the target at the
/// speed-dependent lookahead distance.
pub fn fit_lane(
    mask: &ImageBinary,
    frame: &BirdEyeFrame,
    v: f64,
    lookahead: &LookaheadParams,
) -> LaneTarget {
    let l_d = lookahead.distance(v);
    let mut points = Vec::new();
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            if mask.get(col, row) {
                let m = frame.pixel_to_metric(col, row);
                points.push((m.x, m.y));
            }
        }
    }
    let Some((poly, rms)) = fit_quadratic(&points) else {
        return LaneTarget::invalid(l_d, 0);
    };
    let mut t = LaneTarget {
        point: Vec2::ZERO,
        lookahead: l_d,
        poly,
        valid: points.len() >= MIN_PIXELS && rms <= MAX_RMS,
        pixels: points.len(),
        rms,
    };
    t.point = Vec2::new(l_d, t.lateral_at(l_d));
    t
}

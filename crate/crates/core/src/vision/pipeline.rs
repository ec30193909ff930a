//! The full lane pipeline from camera frame to lookahead target.

use serde::{Deserialize, Serialize};

use super::camera::Camera;
use super::color::{hsv_mask, HsvRange};
use super::components::filter_components;
use super::fit::{fit_lane, LaneTarget, LookaheadParams};
use super::homography::{BirdEyeFrame, WarpTable};
use super::image::{ImageBinary, ImageRGB};
use super::morph::morph_open_close;
use crate::exec::Exec;

/// Detection thresholds. The defaults were calibrated against the
/// synthetic renderer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneConfig {
    pub hsv: HsvRange,
    pub kernel: usize,
    pub min_area: usize,
    pub max_area: usize,
    pub min_aspect: f64,
    pub birdeye: BirdEyeFrame,
    pub lookahead: LookaheadParams,
}

impl Default for LaneConfig {
    fn default() -> Self {
        Self {
            hsv: HsvRange::red(),
            kernel: 3,
            min_area: 25,
            max_area: 12_000,
            min_aspect: 1.5,
            birdeye: BirdEyeFrame::default(),
            lookahead: LookaheadParams::default(),
        }
    }
}

impl LaneConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(format!(
                "lane.kernel must be odd and >= 1, got {}",
                self.kernel
            ));
        }
        if self.min_area > self.max_area {
            return Err("lane.min_area exceeds lane.max_area".into());
        }
        let b = &self.birdeye;
        if b.width == 0 || b.height == 0 || !(b.meters_per_pixel > 0.0) {
            return Err("lane.birdeye dimensions and scale must be positive".into());
        }
        if !(self.lookahead.l_min > 0.0) || self.lookahead.k_v < 0.0 {
            return Err("lane.lookahead requires l_min > 0 and k_v >= 0".into());
        }
        Ok(())
    }
}

/// Intermediate masks, useful for inspection.
#[derive(Debug, Clone)]
pub struct Stages {
    pub mask: ImageBinary,
    pub cleaned: ImageBinary,
    pub filtered: ImageBinary,
    pub birdeye: ImageBinary,
}

/// A configured pipeline with a precomputed bird's-eye lookup table.
#[derive(Debug, Clone)]
pub struct LaneDetector {
    cfg: LaneConfig,
    camera: Camera,
    table: WarpTable,
}

impl LaneDetector {
    pub fn new(cfg: LaneConfig, camera: Camera) -> Self {
        let b = &cfg.birdeye;
        let h = b
            .ground_to_pixel()
            .compose(&camera.ground_to_image().inverse());
        let table = WarpTable::new(&h, camera.width, camera.height, b.width, b.height);
        Self { cfg, camera, table }
    }

    pub fn config(&self) -> &LaneConfig {
        &self.cfg
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn stages(&self, img: &ImageRGB) -> Stages {
        let mask = hsv_mask(img, &self.cfg.hsv);
        let cleaned = morph_open_close(&mask, self.cfg.kernel);
        let filtered = filter_components(
            &cleaned,
            self.cfg.min_area,
            self.cfg.max_area,
            self.cfg.min_aspect,
        );
        let birdeye = self.table.apply(&filtered);
        Stages {
            mask,
            cleaned,
            filtered,
            birdeye,
        }
    }

    pub fn detect(&self, img: &ImageRGB, v: f64) -> LaneTarget {
        fit_lane(
            &self.stages(img).birdeye,
            &self.cfg.birdeye,
            v,
            &self.cfg.lookahead,
        )
    }

    pub fn detect_batch(&self, frames: &[(ImageRGB, f64)], exec: Exec) -> Vec<LaneTarget> {
        exec.map(frames, |(img, v)| self.detect(img, *v))
    }
}

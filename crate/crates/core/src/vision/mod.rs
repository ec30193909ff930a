//! Camera-style lane detection.
//!
//! The pipeline masks the red center line in HSV space, cleans the mask with
//! an opening and a closing, drops blobs that do not look like lane paint,
//! warps the mask into a metric bird's-eye frame, fits a quadratic and puts
//! a target point at a speed-dependent lookahead distance. A small renderer
//! produces the camera view from a ground scene so the pipeline can run
//! without a camera.

pub mod camera;
pub mod color;
pub mod components;
pub mod fit;
pub mod homography;
pub mod image;
pub mod morph;
pub mod pipeline;

pub use camera::{render_view, Camera, Correspondence, GroundScene, LightingNoise, PinholeParams};
pub use color::{hsv_mask, rgb_to_hsv, Hsv, HsvRange};
pub use components::filter_components;
pub use fit::{fit_lane, fit_quadratic, LaneTarget, LookaheadParams};
pub use homography::{birdeye, warp, BirdEyeFrame, Homography, WarpTable};
pub use image::{ImageBinary, ImageError, ImageRGB};
pub use morph::morph_open_close;
pub use pipeline::{LaneConfig, LaneDetector};

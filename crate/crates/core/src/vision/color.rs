//! RGB to HSV conversion and HSV box masking.

use serde::{Deserialize, Serialize};

use super::image::{ImageBinary, ImageRGB};

/// Hue in degrees [0, 360), saturation and value in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl From<[f64; 3]> for Hsv {
    fn from(a: [f64; 3]) -> Self {
        Hsv {
            h: a[0],
            s: a[1],
            v: a[2],
        }
    }
}

impl From<Hsv> for [f64; 3] {
    fn from(c: Hsv) -> Self {
        [c.h, c.s, c.v]
    }
}

/// Hexcone conversion.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> Hsv {
    let r = f64::from(rgb[0]) / 255.0;
    let g = f64::from(rgb[1]) / 255.0;
    let b = f64::from(rgb[2]) / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    Hsv {
        h: h % 360.0,
        s,
        v: max,
    }
}

/// An HSV box. When `lo.h > hi.h` the hue range wraps through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub lo: Hsv,
    pub hi: Hsv,
}

impl HsvRange {
    pub fn contains(&self, c: Hsv) -> bool {
        let hue_ok = if self.lo.h <= self.hi.h {
            c.h >= self.lo.h && c.h <= self.hi.h
        } else {
            c.h >= self.lo.h || c.h <= self.hi.h
        };
        hue_ok && c.s >= self.lo.s && c.s <= self.hi.s && c.v >= self.lo.v && c.v <= self.hi.v
    }

    /// Saturated reds, hue 340..20 degrees.
    pub fn red() -> Self {
        Self {
            lo: Hsv {
                h: 340.0,
                s: 0.5,
                v: 0.3,
            },
            hi: Hsv {
                h: 20.0,
                s: 1.0,
                v: 1.0,
            },
        }
    }
}

pub fn hsv_mask(img: &ImageRGB, range: &HsvRange) -> ImageBinary {
    let pixels = img
        .pixels()
        .chunks_exact(3)
        .map(|p| u8::from(range.contains(rgb_to_hsv([p[0], p[1], p[2]]))))
        .collect();
    ImageBinary::from_pixels(img.width(), img.height(), pixels).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn canonical_colors() {
        let red = rgb_to_hsv([255, 0, 0]);
        assert_eq!((red.h, red.s, red.v), (0.0, 1.0, 1.0));
        let wrapped = HsvRange {
            lo: Hsv {
                h: 350.0,
                s: 0.1,
                v: 0.1,
            },
            hi: Hsv {
                h: 10.0,
                s: 1.0,
                v: 1.0,
            },
        };
        assert!(wrapped.contains(red));
        let gray = rgb_to_hsv([128, 128, 128]);
        assert_eq!(gray.s, 0.0);
        assert!(!wrapped.contains(gray));
        let green = rgb_to_hsv([0, 255, 0]);
        assert_eq!(green.h, 120.0);
        let blue = rgb_to_hsv([0, 0, 255]);
        assert_eq!(blue.h, 240.0);
        let magenta = rgb_to_hsv([255, 0, 128]);
        assert!(magenta.h > 329.0 && magenta.h < 331.0);
    }

    // Independent conversion through the chroma/hue-prime formulation.
    fn oracle_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
        let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
        let v = r.max(g.max(b));
        let c = v - r.min(g.min(b));
        let s = if v > 0.0 { c / v } else { 0.0 };
        let h = if c == 0.0 {
            0.0
        } else {
            let hp = if v == r {
                let x = (g - b) / c;
                if x < 0.0 {
                    x + 6.0
                } else {
                    x
                }
            } else if v == g {
                (b - r) / c + 2.0
            } else {
                (r - g) / c + 4.0
            };
            60.0 * hp
        };
        (if h >= 360.0 { h - 360.0 } else { h }, s, v)
    }

    #[test]
    fn mask_matches_per_pixel_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let range = HsvRange::red();
        let mut img = ImageRGB::new(40, 30);
        for y in 0..30 {
            for x in 0..40 {
                img.set(x, y, [rng.random(), rng.random(), rng.random()]);
            }
        }
        let mask = hsv_mask(&img, &range);
        for y in 0..30 {
            for x in 0..40 {
                let (h, s, v) = oracle_hsv(img.get(x, y));
                let hue_ok = h >= range.lo.h || h <= range.hi.h;
                let expected = hue_ok
                    && s >= range.lo.s
                    && s <= range.hi.s
                    && v >= range.lo.v
                    && v <= range.hi.v;
                assert_eq!(mask.get(x, y), expected, "pixel {:?}", img.get(x, y));
            }
        }
    }
}

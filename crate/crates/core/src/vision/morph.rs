//! Binary morphology with a square structuring element.
//!
//! Pixels outside the image count as 0, so erosion eats into blobs touching
//! the border and dilation never grows from outside.

use super::image::ImageBinary;

/// Separable min (`erode`) or max filter over a `k x k` window.
fn filter(img: &ImageBinary, k: usize, erode: bool) -> ImageBinary {
    let (w, h) = (img.width(), img.height());
    let r = (k / 2) as isize;
    let src = img.pixels();
    let pass = |get: &dyn Fn(isize, isize) -> u8, out: &mut Vec<u8>, horizontal: bool| {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = if erode { 1 } else { 0 };
                for d in -r..=r {
                    let (sx, sy) = if horizontal { (x + d, y) } else { (x, y + d) };
                    let v = if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                        0
                    } else {
                        get(sx, sy)
                    };
                    acc = if erode { acc.min(v) } else { acc.max(v) };
                }
                out.push(acc);
            }
        }
    };
    let mut tmp = Vec::with_capacity(w * h);
    pass(&|x, y| src[y as usize * w + x as usize], &mut tmp, true);
    let mut out = Vec::with_capacity(w * h);
    pass(&|x, y| tmp[y as usize * w + x as usize], &mut out, false);
    ImageBinary::from_pixels(w, h, out).expect("same dimensions")
}

pub fn erode(img: &ImageBinary, kernel: usize) -> ImageBinary {
    filter(img, kernel, true)
}

pub fn dilate(img: &ImageBinary, kernel: usize) -> ImageBinary {
    filter(img, kernel, false)
}

/// Opening followed by closing.
///
/// # Panics
/// Panics if `kernel` is zero or even.
pub fn morph_open_close(img: &ImageBinary, kernel: usize) -> ImageBinary {
    assert!(
        kernel >= 1 && kernel % 2 == 1,
        "kernel must be odd and >= 1"
    );
    let opened = dilate(&erode(img, kernel), kernel);
    erode(&dilate(&opened, kernel), kernel)
}

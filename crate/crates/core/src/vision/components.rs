//! 8-connected component labeling and blob filtering.

use super::image::ImageBinary;

/// Summary of one connected component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub label: u32,
    pub area: usize,
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
    sum: [f64; 5],
}

impl Component {
    fn push(&mut self, x: usize, y: usize) {
        let (fx, fy) = (x as f64, y as f64);
        self.area += 1;
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
        for (s, v) in self.sum.iter_mut().zip([fx, fy, fx * fx, fy * fy, fx * fy]) {
            *s += v;
        }
    }

    /// Ratio of the principal axis lengths, from the pixel covariance with
    /// each pixel treated as a unit square. An axis-aligned `w x h`
    /// rectangle gives `max(w, h) / min(w, h)`.
    pub fn elongation(&self) -> f64 {
        elongation_from_moments(self.area as f64, self.sum)
    }
}

pub(crate) fn elongation_from_moments(n: f64, [sx, sy, sxx, syy, sxy]: [f64; 5]) -> f64 {
    let (mx, my) = (sx / n, sy / n);
    let cxx = sxx / n - mx * mx + 1.0 / 12.0;
    let cyy = syy / n - my * my + 1.0 / 12.0;
    let cxy = sxy / n - mx * my;
    let mid = 0.5 * (cxx + cyy);
    let rad = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    ((mid + rad) / (mid - rad).max(1e-12)).sqrt()
}

/// Labels 8-connected components with a stack-based flood fill. Labels start
/// at 1 in raster order of each component's first pixel; 0 is background.
pub fn label_components(img: &ImageBinary) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = (img.width(), img.height());
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if img.pixels()[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        let mut c = Component {
            label,
            area: 0,
            min_x: usize::MAX,
            min_y: usize::MAX,
            max_x: 0,
            max_y: 0,
            sum: [0.0; 5],
        };
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            c.push(x, y);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if img.pixels()[j] != 0 && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        comps.push(c);
    }
    (labels, comps)
}

/// Keeps components whose area is within `[min_area, max_area]` and whose
/// principal-axis elongation is at least `min_aspect`.
pub fn filter_components(
    img: &ImageBinary,
    min_area: usize,
    max_area: usize,
    min_aspect: f64,
) -> ImageBinary {
    let (labels, comps) = label_components(img);
    let keep: Vec<bool> = std::iter::once(false)
        .chain(
            comps
                .iter()
                .map(|c| c.area >= min_area && c.area <= max_area && c.elongation() >= min_aspect),
        )
        .collect();
    let pixels = labels.iter().map(|l| u8::from(keep[*l as usize])).collect();
    ImageBinary::from_pixels(img.width(), img.height(), pixels).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::{BTreeSet, VecDeque};

    #[test]
    fn empty_stays_empty() {
        let m = ImageBinary::new(8, 8);
        assert_eq!(filter_components(&m, 0, 100, 1.0), m);
    }

    #[test]
    fn small_blob_removed() {
        let mut m = ImageBinary::new(8, 8);
        for x in 1..6 {
            m.set(x, 2, true);
        }
        assert_eq!(filter_components(&m, 10, 100, 1.0).count(), 0);
        assert_eq!(filter_components(&m, 5, 100, 1.0).count(), 5);
        assert_eq!(filter_components(&m, 5, 100, 6.0).count(), 0);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let mut m = ImageBinary::new(4, 4);
        m.set(0, 0, true);
        m.set(1, 1, true);
        m.set(2, 2, true);
        let (_, comps) = label_components(&m);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].area, 3);
    }

    // Breadth-first flood fill over pixel coordinates.
    #[allow(clippy::needless_range_loop)]
    fn oracle_components(m: &ImageBinary) -> Vec<BTreeSet<(usize, usize)>> {
        let mut seen = vec![vec![false; m.width()]; m.height()];
        let mut out = Vec::new();
        for y in 0..m.height() {
            for x in 0..m.width() {
                if !m.get(x, y) || seen[y][x] {
                    continue;
                }
                let mut set = BTreeSet::new();
                let mut q = VecDeque::from([(x, y)]);
                seen[y][x] = true;
                while let Some((cx, cy)) = q.pop_front() {
                    set.insert((cx, cy));
                    for ny in cy.saturating_sub(1)..=(cy + 1).min(m.height() - 1) {
                        for nx in cx.saturating_sub(1)..=(cx + 1).min(m.width() - 1) {
                            if m.get(nx, ny) && !seen[ny][nx] {
                                seen[ny][nx] = true;
                                q.push_back((nx, ny));
                            }
                        }
                    }
                }
                out.push(set);
            }
        }
        out
    }

    // Eigenvalues of the 2x2 covariance via its characteristic polynomial,
    // accumulated in two passes around the centroid.
    fn oracle_elongation(comp: &BTreeSet<(usize, usize)>) -> f64 {
        let n = comp.len() as f64;
        let mx = comp.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let my = comp.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let (mut a, mut d, mut b) = (1.0 / 12.0, 1.0 / 12.0, 0.0);
        for (x, y) in comp {
            let (dx, dy) = (*x as f64 - mx, *y as f64 - my);
            a += dx * dx / n;
            d += dy * dy / n;
            b += dx * dy / n;
        }
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        ((tr / 2.0 + disc) / (tr / 2.0 - disc)).sqrt()
    }

    #[test]
    fn rectangle_elongation_is_side_ratio() {
        let mut m = ImageBinary::new(20, 20);
        for y in 2..5 {
            for x in 1..13 {
                m.set(x, y, true);
            }
        }
        let (_, comps) = label_components(&m);
        assert!((comps[0].elongation() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn kept_set_matches_flood_fill() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let w = rng.random_range(5..40);
            let h = rng.random_range(5..40);
            let px: Vec<u8> = (0..w * h)
                .map(|_| u8::from(rng.random_bool(0.35)))
                .collect();
            let m = ImageBinary::from_pixels(w, h, px).unwrap();
            let (min_a, max_a, aspect) = (
                rng.random_range(1..8),
                rng.random_range(8..200),
                rng.random_range(1.0..3.0),
            );
            let got = filter_components(&m, min_a, max_a, aspect);
            let mut expected = ImageBinary::new(w, h);
            for comp in oracle_components(&m) {
                if comp.len() >= min_a && comp.len() <= max_a && oracle_elongation(&comp) >= aspect
                {
                    for (x, y) in comp {
                        expected.set(x, y, true);
                    }
                }
            }
            assert_eq!(got, expected);
        }
    }
}

//! Dijkstra shortest path over a costmap.
//!
//! The grid is 8-connected. Entering a cell costs its traversal cost times
//! 1 for axial moves and sqrt(2) for diagonal ones. Vehicle kinematics are
//! ignored here; the local planners deal with them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::{Costmap, PlannerCostParams};
use crate::geom::Vec2;
use crate::vehicle::Pose2D;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("{which} point {point:?} is outside the map or on an impassable cell")]
    InvalidEndpoint { which: &'static str, point: Vec2 },
    #[error("goal is unreachable from start")]
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPath {
    pub waypoints: Vec<Vec2>,
    pub total_cost: f64,
}

impl GlobalPath {
    /// A path that is just the straight segment between two points.
    pub fn straight(from: Vec2, to: Vec2) -> Self {
        Self {
            waypoints: vec![from, to],
            total_cost: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

pub(crate) const NEIGHBORS: [(isize, isize, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, std::f64::consts::SQRT_2),
    (1, -1, std::f64::consts::SQRT_2),
    (-1, 1, std::f64::consts::SQRT_2),
    (-1, -1, std::f64::consts::SQRT_2),
];

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Entry {
    cost: f64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (cost, index).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Neighbors of `index` with their step-length factors.
pub(crate) fn neighbors(map: &Costmap, index: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    let (cx, cy) = map.coords(index);
    NEIGHBORS.iter().filter_map(move |&(dx, dy, w)| {
        let nx = cx as isize + dx;
        let ny = cy as isize + dy;
        (nx >= 0 && ny >= 0 && (nx as usize) < map.width() && (ny as usize) < map.height())
            .then(|| (map.index(nx as usize, ny as usize), w))
    })
}

/// Minimum-cost 8-connected path from `start` to `goal`.
pub fn plan(
    map: &Costmap,
    p: &PlannerCostParams,
    start: Vec2,
    goal: Vec2,
) -> Result<GlobalPath, PlanError> {
    let endpoint = |which, point| {
        map.world_to_index(point)
            .filter(|&i| map.traversal_cost(i, p).is_some())
            .ok_or(PlanError::InvalidEndpoint { which, point })
    };
    let s = endpoint("start", start)?;
    let g = endpoint("goal", goal)?;

    let mut dist = vec![f64::INFINITY; map.len()];
    let mut parent = vec![usize::MAX; map.len()];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        index: s,
    });
    while let Some(Entry { cost, index }) = heap.pop() {
        if cost > dist[index] {
            continue;
        }
        if index == g {
            break;
        }
        for (n, w) in neighbors(map, index) {
            let Some(tc) = map.traversal_cost(n, p) else {
                continue;
            };
            let nc = cost + w * tc;
            // Costs within rounding of each other are ties, resolved by the
            // smaller parent index, so rescaling costs keeps the same path.
            let tol = TIE_TOLERANCE * nc;
            if nc < dist[n] - tol {
                dist[n] = nc;
                parent[n] = index;
                heap.push(Entry { cost: nc, index: n });
            } else if nc <= dist[n] + tol && index < parent[n] {
                parent[n] = index;
                if nc < dist[n] {
                    dist[n] = nc;
                    heap.push(Entry { cost: nc, index: n });
                }
            }
        }
    }
    if !dist[g].is_finite() {
        return Err(PlanError::Unreachable);
    }
    let mut cells = vec![g];
    let mut cur = g;
    while cur != s {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    Ok(GlobalPath {
        waypoints: cells.into_iter().map(|i| map.index_center(i)).collect(),
        total_cost: dist[g],
    })
}

/// Interim goal for a local planner: the furthest-along waypoint within
/// `window_radius` of the pose, or the nearest waypoint when none is inside.
///
/// # Panics
/// Panics on an empty path.
pub fn prune_to_window(path: &GlobalPath, pose: &Pose2D, window_radius: f64) -> Vec2 {
    let here = pose.position();
    path.waypoints
        .iter()
        .rev()
        .find(|w| w.dist(here) <= window_radius)
        .copied()
        .unwrap_or_else(|| {
            *path
                .waypoints
                .iter()
                .min_by(|a, b| a.dist(here).total_cmp(&b.dist(here)))
                .expect("non-empty path")
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::LETHAL;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> PlannerCostParams {
        PlannerCostParams {
            cost_factor: 1.0,
            neutral_cost: 50.0,
        }
    }

    #[test]
    fn start_equals_goal() {
        let m = Costmap::new(1.0, 10, 10, Vec2::ZERO).unwrap();
        let p = plan(&m, &params(), Vec2::new(3.5, 3.5), Vec2::new(3.5, 3.5)).unwrap();
        assert_eq!(p.waypoints.len(), 1);
        assert_eq!(p.total_cost, 0.0);
    }

    #[test]
    fn straight_axial_path() {
        let m = Costmap::new(1.0, 10, 10, Vec2::ZERO).unwrap();
        let p = plan(&m, &params(), Vec2::new(1.5, 4.5), Vec2::new(8.5, 4.5)).unwrap();
        assert_eq!(p.total_cost, 7.0 * 50.0);
        assert_eq!(p.waypoints.len(), 8);
        assert!(p.waypoints.iter().all(|w| w.y == 4.5));
    }

    #[test]
    fn endpoint_errors() {
        let mut m = Costmap::new(1.0, 5, 5, Vec2::ZERO).unwrap();
        m.set_cost(2, 2, LETHAL);
        let e = plan(&m, &params(), Vec2::new(2.5, 2.5), Vec2::new(0.5, 0.5));
        assert!(matches!(
            e,
            Err(PlanError::InvalidEndpoint { which: "start", .. })
        ));
        let e = plan(&m, &params(), Vec2::new(0.5, 0.5), Vec2::new(9.5, 0.5));
        assert!(matches!(
            e,
            Err(PlanError::InvalidEndpoint { which: "goal", .. })
        ));
        for cy in 0..5 {
            m.set_cost(2, cy, LETHAL);
        }
        let e = plan(&m, &params(), Vec2::new(0.5, 0.5), Vec2::new(4.5, 0.5));
        assert_eq!(e, Err(PlanError::Unreachable));
    }

    fn bellman_ford(m: &Costmap, p: &PlannerCostParams, s: usize, g: usize) -> f64 {
        let mut d = vec![f64::INFINITY; m.len()];
        d[s] = 0.0;
        for _ in 0..m.len() {
            let mut changed = false;
            for u in 0..m.len() {
                if !d[u].is_finite() {
                    continue;
                }
                let (ux, uy) = m.coords(u);
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (ux as isize + dx, uy as isize + dy);
                        if nx < 0 || ny < 0 || nx >= m.width() as isize || ny >= m.height() as isize
                        {
                            continue;
                        }
                        let v = m.index(nx as usize, ny as usize);
                        let c = m.cost_at_index(v);
                        if c >= 253 {
                            continue;
                        }
                        let step = if dx != 0 && dy != 0 { 2f64.sqrt() } else { 1.0 };
                        let nd = d[u] + step * (p.neutral_cost + p.cost_factor * c as f64);
                        if nd < d[v] {
                            d[v] = nd;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        d[g]
    }

    #[test]
    fn matches_bellman_ford_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let w = rng.random_range(2..=20);
            let h = rng.random_range(2..=20);
            let mut m = Costmap::new(1.0, w, h, Vec2::ZERO).unwrap();
            for i in 0..m.len() {
                let r: f64 = rng.random();
                let c = if r < 0.2 {
                    LETHAL
                } else {
                    rng.random_range(0..=252)
                };
                let (cx, cy) = m.coords(i);
                m.set_cost(cx, cy, c);
            }
            let s = rng.random_range(0..m.len());
            let g = rng.random_range(0..m.len());
            let (sx, sy) = m.coords(s);
            let (gx, gy) = m.coords(g);
            m.set_cost(sx, sy, 0);
            m.set_cost(gx, gy, 0);
            let p = PlannerCostParams {
                cost_factor: rng.random_range(0.0..3.0),
                neutral_cost: rng.random_range(1.0..100.0),
            };
            let oracle = bellman_ford(&m, &p, s, g);
            match plan(&m, &p, m.index_center(s), m.index_center(g)) {
                Ok(path) => {
                    assert!((path.total_cost - oracle).abs() <= 1e-9 * oracle.max(1.0));
                    for w in path.waypoints.windows(2) {
                        let d = w[0].dist(w[1]);
                        assert!(d > 0.99 && d < 1.42);
                    }
                }
                Err(PlanError::Unreachable) => assert!(oracle.is_infinite()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn neutral_cost_rescaling_keeps_cells_on_uniform_field() {
        let m = Costmap::new(1.0, 15, 12, Vec2::ZERO).unwrap();
        let a = Vec2::new(1.5, 2.5);
        let b = Vec2::new(13.5, 9.5);
        let base = plan(
            &m,
            &PlannerCostParams {
                cost_factor: 1.0,
                neutral_cost: 1.0,
            },
            a,
            b,
        )
        .unwrap();
        for nc in [2.0, 66.0, 233.0] {
            let other = plan(
                &m,
                &PlannerCostParams {
                    cost_factor: 1.0,
                    neutral_cost: nc,
                },
                a,
                b,
            )
            .unwrap();
            assert_eq!(base.waypoints, other.waypoints);
        }
    }

    #[test]
    fn prune_returns_final_when_all_inside() {
        let path = GlobalPath {
            waypoints: vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(0.5, 0.0),
                Vec2::new(0.9, 0.1),
            ],
            total_cost: 0.0,
        };
        assert_eq!(
            prune_to_window(&path, &Pose2D::default(), 5.0),
            Vec2::new(0.9, 0.1)
        );
    }

    #[test]
    fn prune_on_straight_path() {
        let path = GlobalPath {
            waypoints: (0..40).map(|i| Vec2::new(i as f64 * 0.1, 0.0)).collect(),
            total_cost: 0.0,
        };
        let g = prune_to_window(&path, &Pose2D::default(), 1.0);
        assert!((g.x - 1.0).abs() < 0.1 + 1e-9);
    }

    #[test]
    fn prune_recovers_to_nearest() {
        let path = GlobalPath {
            waypoints: vec![
                Vec2::new(5.0, 0.0),
                Vec2::new(6.0, 0.0),
                Vec2::new(7.0, 0.0),
            ],
            total_cost: 0.0,
        };
        assert_eq!(
            prune_to_window(&path, &Pose2D::default(), 1.0),
            Vec2::new(5.0, 0.0)
        );
    }

    #[test]
    fn prune_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..30);
            let waypoints: Vec<Vec2> = (0..n)
                .map(|_| Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
                .collect();
            let path = GlobalPath {
                waypoints: waypoints.clone(),
                total_cost: 0.0,
            };
            let pose = Pose2D::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                0.0,
            );
            let r = rng.random_range(0.1..3.0);
            let mut expected = None;
            for w in &waypoints {
                if w.dist(pose.position()) <= r {
                    expected = Some(*w);
                }
            }
            let expected = expected.unwrap_or_else(|| {
                let mut best = waypoints[0];
                for w in &waypoints {
                    if w.dist(pose.position()) < best.dist(pose.position()) {
                        best = *w;
                    }
                }
                best
            });
            assert_eq!(prune_to_window(&path, &pose, r), expected);
        }
    }
}

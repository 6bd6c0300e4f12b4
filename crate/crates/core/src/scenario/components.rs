//! Connected-component count of a particle cloud, used to detect cuts.

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;

use crate::math::{Real, Vec3};

pub const DEFAULT_RADIUS_FACTOR: Real = 1.5;
/// Components smaller than this fraction of the particles are not counted.
pub const MAJOR_FRACTION: f64 = 0.05;

type Cell = [i32; 3];

fn cell_of(x: &Vec3, h: Real) -> Cell {
    [(x.x / h).floor() as i32, (x.y / h).floor() as i32, (x.z / h).floor() as i32]
}

fn bucket(points: &[Vec3], h: Real) -> HashMap<Cell, Vec<u32>> {
    let mut cells: HashMap<Cell, Vec<u32>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(cell_of(p, h)).or_default().push(i as u32);
    }
    cells
}

/// Mean distance from each point to its nearest neighbour. Points with no
/// neighbour within a few typical spacings are skipped.
pub fn mean_nearest_neighbor_spacing(points: &[Vec3]) -> Real {
    if points.len() < 2 {
        return 0.0;
    }
    let (lo, hi) = points.iter().fold(
        (Vec3::repeat(Real::INFINITY), Vec3::repeat(Real::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let extent = hi - lo;
    let filled = extent.iter().filter(|e| **e > 0.0).product::<Real>();
    let dims = extent.iter().filter(|e| **e > 0.0).count().max(1) as Real;
    let h = (filled / points.len() as Real).powf(1.0 / dims).max(1e-9);
    let cells = bucket(points, h);

    let mut sum = 0.0f64;
    let mut counted = 0usize;
    for (i, p) in points.iter().enumerate() {
        let c = cell_of(p, h);
        let mut best = Real::INFINITY;
        for ring in 1..=4i32 {
            for dz in -ring..=ring {
                for dy in -ring..=ring {
                    for dx in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring && ring > 1 {
                            continue;
                        }
                        let Some(ids) = cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                            continue;
                        };
                        for &j in ids {
                            if j as usize != i {
                                best = best.min((points[j as usize] - p).norm());
                            }
                        }
                    }
                }
            }
            // Anything outside the searched rings is farther than `ring * h`.
            if best <= ring as Real * h {
                break;
            }
        }
        if best.is_finite() {
            sum += best as f64;
            counted += 1;
        }
    }
    if counted == 0 {
        0.0
    } else {
        (sum / counted as f64) as Real
    }
}

/// Sizes of all components, largest first. Points closer than
/// `radius_factor * spacing` are connected.
pub fn component_sizes(points: &[Vec3], spacing: Real, radius_factor: Real) -> Vec<usize> {
    let r = spacing * radius_factor;
    if points.is_empty() || !(r > 0.0) {
        return vec![1; points.len()];
    }
    let cells = bucket(points, r);
    let r2 = r * r;
    let mut uf = UnionFind::<u32>::new(points.len());
    for (cell, ids) in &cells {
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let other = [cell[0] + dx, cell[1] + dy, cell[2] + dz];
                    // Each unordered cell pair once.
                    if other < *cell {
                        continue;
                    }
                    let Some(others) = cells.get(&other) else {
                        continue;
                    };
                    let same = other == *cell;
                    for (a_pos, &a) in ids.iter().enumerate() {
                        let candidates = if same { &others[a_pos + 1..] } else { &others[..] };
                        for &b in candidates {
                            if (points[a as usize] - points[b as usize]).norm_squared() <= r2 {
                                uf.union(a, b);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut sizes: HashMap<u32, usize> = HashMap::new();
    for i in 0..points.len() as u32 {
        *sizes.entry(uf.find(i)).or_default() += 1;
    }
    let mut sizes: Vec<usize> = sizes.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Number of components holding at least [`MAJOR_FRACTION`] of the points.
pub fn compute_components(points: &[Vec3], spacing: Real, radius_factor: Real) -> usize {
    let n = points.len();
    component_sizes(points, spacing, radius_factor)
        .into_iter()
        .filter(|&s| s as f64 >= MAJOR_FRACTION * n as f64)
        .count()
}

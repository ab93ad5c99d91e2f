//! Uniform-grid point index for radius and nearest-neighbor queries.
//! Deterministic: results are returned in ascending point-index order.

use std::collections::HashMap;

use crate::geom::Vec3;

pub(crate) struct GridIndex {
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl GridIndex {
    pub fn build(points: &[Vec3], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(*p, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(p: Vec3, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Indices of all points within `radius` of `center`, ascending.
    pub fn within(&self, points: &[Vec3], center: Vec3, radius: f64) -> Vec<usize> {
        let r_cells = (radius / self.cell).ceil() as i64;
        let base = Self::key(center, self.cell);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -r_cells..=r_cells {
            for dy in -r_cells..=r_cells {
                for dz in -r_cells..=r_cells {
                    let key = (base.0 + dx, base.1 + dy, base.2 + dz);
                    if let Some(bucket) = self.cells.get(&key) {
                        for &i in bucket {
                            if (points[i] - center).norm_squared() <= r2 {
                                out.push(i);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Nearest point to `center` within `max_radius`, searched in expanding
    /// shells. Ties resolve to the lowest index.
    pub fn nearest(&self, points: &[Vec3], center: Vec3, max_radius: f64) -> Option<(usize, f64)> {
        let base = Self::key(center, self.cell);
        let max_shell = (max_radius / self.cell).ceil() as i64;
        let mut best: Option<(usize, f64)> = None;
        for shell in 0..=max_shell {
            // Once a candidate is closer than the inner boundary of this
            // shell, no farther shell can beat it.
            if let Some((_, d)) = best {
                if d <= (shell as f64 - 1.0).max(0.0) * self.cell {
                    break;
                }
            }
            for dx in -shell..=shell {
                for dy in -shell..=shell {
                    for dz in -shell..=shell {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                            continue;
                        }
                        let key = (base.0 + dx, base.1 + dy, base.2 + dz);
                        if let Some(bucket) = self.cells.get(&key) {
                            for &i in bucket {
                                let d = (points[i] - center).norm();
                                if d <= max_radius
                                    && best.is_none_or(|(bi, bd)| d < bd || (d == bd && i < bi))
                                {
                                    best = Some((i, d));
                                }
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Keep one point per `voxel`-sized cell, first occurrence wins.
pub(crate) fn voxel_downsample(points: &[Vec3], voxel: f64) -> Vec<Vec3> {
    let mut seen: HashMap<(i64, i64, i64), ()> = HashMap::new();
    let mut out = Vec::new();
    for p in points {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        if seen.insert(key, ()).is_none() {
            out.push(*p);
        }
    }
    out
}

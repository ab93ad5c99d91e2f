//! Point-cloud perception: surface subtraction, density clustering and
//! stair-aligned OBB fitting, composed by [`perceive`].

use thiserror::Error;

use crate::geom::{rotate_z, xy, Obb, Vec3};
use crate::spatial::GridIndex;
use crate::world::WorldModel;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("cannot fit a box to an empty point set")]
    EmptyPoints,
}

/// Camera pose at capture: position plus yaw of the optical axis.
#[derive(Clone, Copy, Debug)]
pub struct SensorPose {
    pub position: Vec3,
    pub yaw: f64,
}

/// Registered point cloud in the world frame.
#[derive(Clone, Debug)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub sensor_pose: SensorPose,
}

/// Clutter cluster with its stair-aligned bounding box.
#[derive(Clone, Debug)]
pub struct Cluster {
    pub points: Vec<Vec3>,
    pub obb: Obb,
}

#[derive(Clone, Copy, Debug)]
pub struct PerceptionParams {
    /// Band around known surfaces removed during subtraction.
    pub subtract_eps: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Degenerate boxes are inflated to this half extent per axis.
    pub min_half_extent: f64,
    /// Maximum gap closed when snapping a fitted box down onto its
    /// supporting surface (subtraction eats the lowest point band).
    pub snap_gap: f64,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            subtract_eps: 0.02,
            dbscan_eps: 0.06,
            dbscan_min_pts: 8,
            min_half_extent: 0.01,
            snap_gap: 0.06,
        }
    }
}

/// Remove points lying on known surfaces: within `eps` vertical distance of
/// a navigable surface whose footprint contains them, or within `eps` of a
/// riser face. Order is preserved; the operation is idempotent.
pub fn subtract_surfaces(points: &[Vec3], world: &WorldModel, eps: f64) -> Vec<Vec3> {
    let surfaces = world.navigable_surfaces();
    points
        .iter()
        .filter(|p| {
            for s in &surfaces {
                if s.rect.contains(xy(**p), eps) && (p.z - s.height).abs() <= eps {
                    return false;
                }
            }
            for stair in &world.staircases {
                // Riser faces, checked in the stair frame.
                let local = rotate_z(**p - stair.origin, -stair.yaw);
                if local.y < -eps || local.y > stair.width + eps {
                    continue;
                }
                for k in 1..=stair.num_steps {
                    let (x, z_lo, z_hi) = stair.riser_plane(k);
                    let z_lo = z_lo - stair.origin.z;
                    let z_hi = z_hi - stair.origin.z;
                    if (local.x - x).abs() <= eps && local.z >= z_lo - eps && local.z <= z_hi + eps
                    {
                        return false;
                    }
                }
            }
            true
        })
        .copied()
        .collect()
}

/// Density clustering. Clusters are connected components of core points
/// (at least `min_pts` neighbors within `eps`, self included); border
/// points join the cluster of their nearest core point, and noise is
/// dropped. The partition is independent of input order.
pub fn dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let index = GridIndex::build(points, eps.max(1e-6));
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| index.within(points, points[i], eps))
        .collect();
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut label = vec![usize::MAX; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if !is_core[i] || label[i] != usize::MAX {
            continue;
        }
        let cluster_id = clusters.len();
        clusters.push(Vec::new());
        let mut queue = vec![i];
        label[i] = cluster_id;
        while let Some(j) = queue.pop() {
            clusters[cluster_id].push(j);
            for &k in &neighbors[j] {
                if is_core[k] && label[k] == usize::MAX {
                    label[k] = cluster_id;
                    queue.push(k);
                }
            }
        }
    }
    // Border points: nearest core neighbor decides the cluster. Distance
    // ties resolve by the core point's coordinates so the assignment does
    // not depend on input order.
    for i in 0..n {
        if is_core[i] || label[i] != usize::MAX {
            continue;
        }
        let mut best: Option<(f64, [f64; 3], usize)> = None;
        for &k in &neighbors[i] {
            if !is_core[k] {
                continue;
            }
            let d = (points[i] - points[k]).norm();
            let coord = [points[k].x, points[k].y, points[k].z];
            let candidate = (d, coord, label[k]);
            let better = match &best {
                None => true,
                Some((bd, bc, _)) => d < *bd || (d == *bd && coord < *bc),
            };
            if better {
                best = Some(candidate);
            }
        }
        if let Some((_, _, c)) = best {
            label[i] = c;
            clusters[c].push(i);
        }
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.retain(|c| !c.is_empty());
    clusters
}

/// Minimal bounding box containing `points` with its yaw constrained to the
/// given stair yaw: rotate into the stair frame, take the axis-aligned
/// min/max box, rotate back.
pub fn fit_stair_aligned_obb(points: &[Vec3], yaw: f64) -> Result<Obb, PerceptionError> {
    if points.is_empty() {
        return Err(PerceptionError::EmptyPoints);
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        let local = rotate_z(*p, -yaw);
        lo = lo.inf(&local);
        hi = hi.sup(&local);
    }
    let center_local = (lo + hi) / 2.0;
    Ok(Obb::new(
        rotate_z(center_local, yaw),
        (hi - lo) / 2.0,
        yaw,
    ))
}

/// Full pipeline: subtraction, clustering, stair-aligned box fitting.
/// Each cluster takes the yaw of the staircase containing its centroid
/// (nearest staircase for ground-resting clusters). Fitted boxes are
/// inflated to a minimum extent and snapped down onto their supporting
/// surface to recover the band eaten by subtraction.
pub fn perceive(cloud: &PointCloud, world: &WorldModel, params: &PerceptionParams) -> Vec<Cluster> {
    let object_points = subtract_surfaces(&cloud.points, world, params.subtract_eps);
    let clusters = dbscan(&object_points, params.dbscan_eps, params.dbscan_min_pts);
    let mut out = Vec::with_capacity(clusters.len());
    for indices in clusters {
        let points: Vec<Vec3> = indices.iter().map(|&i| object_points[i]).collect();
        let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
        let yaw = world.stair_yaw_at(xy(centroid)).unwrap_or(0.0);
        let mut obb = match fit_stair_aligned_obb(&points, yaw) {
            Ok(o) => o,
            Err(_) => continue,
        };
        for k in 0..3 {
            if obb.half_extents[k] < params.min_half_extent {
                obb.half_extents[k] = params.min_half_extent;
            }
        }
        obb = snap_to_surface(obb, world, params.snap_gap);
        out.push(Cluster { points, obb });
    }
    out
}

/// Extend the bottom of a box down to the highest surface underneath it
/// when the gap is at most `max_gap`. Surface subtraction eats the lowest
/// band of points, so fitted boxes float by about the subtraction eps.
pub fn snap_to_surface(obb: Obb, world: &WorldModel, max_gap: f64) -> Obb {
    let z_min = obb.z_min();
    let mut best: Option<f64> = None;
    for s in world.navigable_surfaces() {
        if s.rect.contains(xy(obb.center), 1e-9)
            && s.height <= z_min + 1e-9
            && z_min - s.height <= max_gap
        {
            best = Some(best.map_or(s.height, |b: f64| b.max(s.height)));
        }
    }
    match best {
        Some(h) if z_min - h > 1e-12 => {
            let z_max = obb.z_max();
            let half_z = (z_max - h) / 2.0;
            Obb::new(
                Vec3::new(obb.center.x, obb.center.y, h + half_z),
                Vec3::new(obb.half_extents.x, obb.half_extents.y, half_z),
                obb.yaw,
            )
        }
        _ => obb,
    }
}

/// Dump points as whitespace-separated x y z lines.
pub fn save_xyz(points: &[Vec3]) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&format!("{:.6} {:.6} {:.6}\n", p.x, p.y, p.z));
    }
    out
}

/// Parse whitespace-separated x y z lines; blank lines are skipped.
pub fn load_xyz(text: &str) -> Result<Vec<Vec3>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {}", lineno + 1, e))?;
        if vals.len() != 3 {
            return Err(format!("line {}: expected 3 values", lineno + 1));
        }
        out.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

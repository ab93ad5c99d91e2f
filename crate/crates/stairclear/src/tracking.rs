//! Object identity across scans and through occluded pushes: IoU data
//! association, ICP cloud merging, and the proprioceptive predict-correct
//! cycle used while the camera cannot see the pushed object.

use thiserror::Error;

use crate::geom::{project_on_polyline, rotate_z, xy, Obb, Vec3};
use crate::perception::{fit_stair_aligned_obb, Cluster};
use crate::primitives::{generate_primitives, MotionPrimitive};
use crate::spatial::{voxel_downsample, GridIndex};
use crate::world::{Movability, WorldModel};

#[derive(Debug, Error, PartialEq)]
pub enum TrackingError {
    #[error("obb yaws differ by more than 1e-6 rad")]
    YawMismatch,
    #[error("object is static")]
    ObjectStatic,
    #[error("unknown object id {0}")]
    UnknownObject(u64),
    #[error("prediction state is inactive")]
    Inactive,
}

/// Exact intersection-over-union volume ratio for two equal-yaw boxes.
pub fn obb_iou(a: &Obb, b: &Obb) -> Result<f64, TrackingError> {
    if (a.yaw - b.yaw).abs() > 1e-6 {
        return Err(TrackingError::YawMismatch);
    }
    // Both boxes are axis-aligned in the shared rotated frame.
    let ca = rotate_z(a.center, -a.yaw);
    let cb = rotate_z(b.center, -a.yaw);
    let mut inter = 1.0;
    for k in 0..3 {
        let lo = (ca[k] - a.half_extents[k]).max(cb[k] - b.half_extents[k]);
        let hi = (ca[k] + a.half_extents[k]).min(cb[k] + b.half_extents[k]);
        let overlap = hi - lo;
        if overlap <= 0.0 {
            return Ok(0.0);
        }
        inter *= overlap;
    }
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        // Degenerate boxes: identical zero-volume boxes are a perfect match.
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok(inter / union)
}

#[derive(Clone, Debug, Default)]
pub struct Association {
    /// (cluster index, object id) pairs.
    pub matches: Vec<(usize, u64)>,
    pub unmatched_clusters: Vec<usize>,
}

/// Greedy best-first matching by descending IoU. Pairs below `iou_min`
/// stay unmatched; each cluster and each target is used at most once.
/// Yaw-mismatched pairs score zero rather than erroring.
pub fn associate(clusters: &[Cluster], targets: &[(u64, Obb)], iou_min: f64) -> Association {
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, cluster) in clusters.iter().enumerate() {
        for (ti, (_, target)) in targets.iter().enumerate() {
            let iou = obb_iou(&cluster.obb, target).unwrap_or(0.0);
            if iou >= iou_min {
                scored.push((iou, ci, ti));
            }
        }
    }
    // Descending IoU; deterministic tie-break on indices.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut cluster_used = vec![false; clusters.len()];
    let mut target_used = vec![false; targets.len()];
    let mut matches = Vec::new();
    for (_, ci, ti) in scored {
        if cluster_used[ci] || target_used[ti] {
            continue;
        }
        cluster_used[ci] = true;
        target_used[ti] = true;
        matches.push((ci, targets[ti].0));
    }
    let unmatched_clusters = (0..clusters.len()).filter(|&i| !cluster_used[i]).collect();
    Association {
        matches,
        unmatched_clusters,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IcpParams {
    pub max_iter: usize,
    pub tol: f64,
    /// Correspondences farther than this are ignored.
    pub max_correspondence: f64,
    /// Merged clouds are downsampled at this voxel size.
    pub voxel: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iter: 30,
            tol: 1e-6,
            max_correspondence: 0.08,
            voxel: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IcpMerge {
    pub merged: Vec<Vec3>,
    pub obb: Obb,
    /// Translation applied to the incoming cloud.
    pub translation: Vec3,
    /// Yaw correction applied to the incoming cloud (about its centroid).
    pub yaw_correction: f64,
}

/// Align `incoming` to `existing` with a translation + yaw point-to-point
/// ICP, then merge: the union of both clouds, voxel-downsampled, with a
/// stair-aligned box refit at `obb_yaw`. Incoming sets of fewer than three
/// points skip alignment and are unioned directly.
pub fn icp_merge(
    existing: &[Vec3],
    incoming: &[Vec3],
    obb_yaw: f64,
    params: &IcpParams,
) -> IcpMerge {
    assert!(!existing.is_empty() && !incoming.is_empty());
    let (translation, yaw_correction) = if incoming.len() < 3 {
        (Vec3::zeros(), 0.0)
    } else {
        align_translation_yaw(existing, incoming, params)
    };
    let pivot = centroid(incoming);
    // Pure translations (and the identity) skip the pivot round-trip so
    // exact copies stay bitwise identical for deduplication.
    let transformed: Vec<Vec3> = if yaw_correction == 0.0 {
        incoming.iter().map(|p| p + translation).collect()
    } else {
        incoming
            .iter()
            .map(|p| rotate_z(*p - pivot, yaw_correction) + pivot + translation)
            .collect()
    };
    let mut merged: Vec<Vec3> = existing.to_vec();
    merged.extend(transformed);
    let merged = voxel_downsample(&merged, params.voxel);
    let obb = fit_stair_aligned_obb(&merged, obb_yaw).expect("merged cloud non-empty");
    IcpMerge {
        merged,
        obb,
        translation,
        yaw_correction,
    }
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Iterative closest point restricted to horizontal yaw plus 3D translation.
/// Both clouds are voxel-balanced before matching and only mutual nearest
/// neighbors form correspondences (faces visible in one cloud but not the
/// other would otherwise torque the fit). Runs coarse to fine: translation
/// only until it settles, then a joint translation-yaw pass gated to
/// near-locked pairs so the rotation cannot absorb a residual shift.
fn align_translation_yaw(existing: &[Vec3], incoming: &[Vec3], params: &IcpParams) -> (Vec3, f64) {
    const MAX_YAW: f64 = 0.1;
    let existing = voxel_downsample(existing, params.voxel);
    let incoming = voxel_downsample(incoming, params.voxel);
    let (existing, incoming) = (existing.as_slice(), incoming.as_slice());
    let index = GridIndex::build(existing, (params.voxel * 4.0).max(0.02));
    let pivot = centroid(incoming);
    // The caller provides the coarse alignment (tracking prediction or a
    // shared frame); the search starts at identity and refines within the
    // correspondence gate.
    let mut translation = Vec3::zeros();
    let mut yaw = 0.0;

    for phase in 0..2 {
        let estimate_yaw = phase == 1;
        let gate = if estimate_yaw {
            (3.0 * params.voxel).min(params.max_correspondence)
        } else {
            params.max_correspondence
        };
        let mut prev_mean = f64::INFINITY;
        for _ in 0..params.max_iter {
            let moved: Vec<Vec3> = incoming
                .iter()
                .map(|p| rotate_z(*p - pivot, yaw) + pivot + translation)
                .collect();
            let moved_index = GridIndex::build(&moved, (params.voxel * 4.0).max(0.02));
            let mut pairs: Vec<(Vec3, Vec3)> = Vec::new();
            let mut mean_dist = 0.0;
            for (i, p) in moved.iter().enumerate() {
                let Some((j, d)) = index.nearest(existing, *p, gate) else {
                    continue;
                };
                // Mutual nearest neighbors only.
                match moved_index.nearest(&moved, existing[j], gate) {
                    Some((back, _)) if back == i => {
                        pairs.push((*p, existing[j]));
                        mean_dist += d;
                    }
                    _ => {}
                }
            }
            if pairs.len() < 6 {
                break;
            }
            mean_dist /= pairs.len() as f64;
            if (prev_mean - mean_dist).abs() < params.tol {
                break;
            }
            prev_mean = mean_dist;

            // Closed-form 2D Procrustes for the yaw increment, mean shift
            // for the translation.
            let src_c = centroid(&pairs.iter().map(|(s, _)| *s).collect::<Vec<_>>());
            let dst_c = centroid(&pairs.iter().map(|(_, d)| *d).collect::<Vec<_>>());
            let mut dyaw = 0.0;
            if estimate_yaw {
                let mut sin_sum = 0.0;
                let mut cos_sum = 0.0;
                for (s, d) in &pairs {
                    let sv = xy(*s - src_c);
                    let dv = xy(*d - dst_c);
                    cos_sum += sv.dot(&dv);
                    sin_sum += sv.x * dv.y - sv.y * dv.x;
                }
                if cos_sum.abs() + sin_sum.abs() > 0.0 {
                    dyaw = sin_sum.atan2(cos_sum);
                }
                dyaw = dyaw.clamp(-MAX_YAW - yaw, MAX_YAW - yaw);
                yaw += dyaw;
            }
            if dyaw == 0.0 {
                translation += dst_c - src_c;
            } else {
                // Recompose so rotated source centroids map onto dst.
                let rotated_src_c = rotate_z(src_c - pivot - translation, dyaw) + pivot + translation;
                translation += dst_c - rotated_src_c;
            }
        }
    }
    (translation, yaw)
}

/// Proprioceptive prediction over one push: the object's box is assumed to
/// translate along the commanded primitive by the foot's progress.
#[derive(Clone, Debug)]
pub struct PredictionState {
    pub object_id: u64,
    pub active: bool,
    pub predicted_obb: Obb,
    pub primitive: MotionPrimitive,
    /// Arc length along the primitive, monotone non-decreasing.
    pub displacement: f64,
    base_obb: Obb,
    contact_path: Vec<Vec3>,
}

impl PredictionState {
    /// Inactive state used when no contact was ever confirmed: the target
    /// for re-association stays at the last known box.
    pub fn inactive(object_id: u64, obb: Obb, primitive: MotionPrimitive) -> Self {
        Self {
            object_id,
            active: false,
            predicted_obb: obb,
            contact_path: primitive.contact_path(),
            primitive,
            displacement: 0.0,
            base_obb: obb,
        }
    }

    /// Force the displacement to the full primitive length (the open-loop
    /// baseline prediction).
    pub fn predict_full_push(&mut self) {
        self.displacement = self.primitive.length();
        self.predicted_obb = self
            .base_obb
            .translated(self.primitive.axis * self.displacement);
    }
}

/// Start proprioceptive tracking for a push on `object` along `primitive`.
pub fn begin_interaction(
    world: &WorldModel,
    object_id: u64,
    primitive: &MotionPrimitive,
) -> Result<PredictionState, TrackingError> {
    let object = world
        .object(object_id)
        .ok_or(TrackingError::UnknownObject(object_id))?;
    if object.movability.is_static() {
        return Err(TrackingError::ObjectStatic);
    }
    Ok(PredictionState {
        object_id,
        active: true,
        predicted_obb: object.obb,
        contact_path: primitive.contact_path(),
        primitive: primitive.clone(),
        displacement: 0.0,
        base_obb: object.obb,
    })
}

/// Update the prediction from the foot position: project the foot onto the
/// commanded contact path and translate the box by that arc length.
/// Sideways foot offsets are ignored and transient retractions are clamped
/// out (displacement never decreases).
pub fn update_prediction(state: &mut PredictionState, foot_pos: Vec3) -> Result<(), TrackingError> {
    if !state.active {
        return Err(TrackingError::Inactive);
    }
    let (arc, _) = project_on_polyline(&state.contact_path, foot_pos);
    if arc > state.displacement {
        state.displacement = arc;
    }
    state.predicted_obb = state
        .base_obb
        .translated(state.primitive.axis * state.displacement);
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum FinalizeOutcome {
    /// The pushed object was re-detected; carries the corrected box.
    Matched(Obb),
    /// No cluster matched the prediction; the object keeps its predicted
    /// box, flagged low confidence.
    Lost,
}

#[derive(Clone, Copy, Debug)]
pub struct TrackerParams {
    pub iou_min: f64,
    pub icp: IcpParams,
    /// Step size used when regenerating primitives after a move.
    pub primitive_step: f64,
    /// Merged boxes snap down onto their supporting surface within this
    /// gap, mirroring the perception fit.
    pub snap_gap: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            iou_min: 0.25,
            icp: IcpParams::default(),
            primitive_step: 0.02,
            snap_gap: 0.06,
        }
    }
}

/// Post-push visual update. Association runs against the proprioceptively
/// predicted box for the pushed object and the last known boxes for all
/// others. On a match the fresh cluster anchors the merge (the stored
/// cloud, shifted to the predicted pose, is aligned into the measurement)
/// so the corrected state follows the camera, not the prediction. On a
/// miss the object is left at the predicted box and flagged. Unmatched
/// clusters initialize new objects.
pub fn finalize_interaction(
    state: &PredictionState,
    clusters: &[Cluster],
    world: &mut WorldModel,
    params: &TrackerParams,
    now: f64,
) -> FinalizeOutcome {
    let targets: Vec<(u64, Obb)> = world
        .objects
        .iter()
        .map(|o| {
            if o.id == state.object_id {
                (o.id, state.predicted_obb)
            } else {
                (o.id, o.obb)
            }
        })
        .collect();
    let assoc = associate(clusters, &targets, params.iou_min);

    let mut pushed_matched = None;
    for (ci, id) in &assoc.matches {
        let cluster = &clusters[*ci];
        let is_pushed = *id == state.object_id;
        let Some(object) = world.object(*id) else { continue };
        let mut merge = if is_pushed {
            // Bring the prior geometry into the measured frame.
            let shift = state.predicted_obb.center - state.base_obb.center;
            let prior: Vec<Vec3> = object.cloud.iter().map(|p| p + shift).collect();
            icp_merge(&cluster.points, &prior, cluster.obb.yaw, &params.icp)
        } else {
            icp_merge(&object.cloud, &cluster.points, object.obb.yaw, &params.icp)
        };
        merge.obb = crate::perception::snap_to_surface(merge.obb, world, params.snap_gap);
        let support = world.find_support(&merge.obb);
        let object = world.object_mut(*id).expect("checked above");
        object.cloud = merge.merged;
        object.obb = merge.obb;
        object.supporting = support;
        object.last_update_time = now;
        object.predicted_only = false;
        if is_pushed {
            pushed_matched = Some(merge.obb);
        }
    }

    // New objects from unmatched clusters; interpenetrating or otherwise
    // invalid ones are skipped.
    for ci in &assoc.unmatched_clusters {
        let cluster = &clusters[*ci];
        let _ = world.insert_object(cluster.points.clone(), cluster.obb, now);
    }

    let outcome = match pushed_matched {
        Some(obb) => FinalizeOutcome::Matched(obb),
        None => {
            if state.active {
                if let Some(object) = world.object_mut(state.object_id) {
                    let shift = state.predicted_obb.center - object.obb.center;
                    for p in &mut object.cloud {
                        *p += shift;
                    }
                    object.obb = state.predicted_obb;
                    object.predicted_only = true;
                }
                if let Some(object) = world.object(state.object_id) {
                    let support = world.find_support(&object.obb);
                    world.object_mut(state.object_id).unwrap().supporting = support;
                }
            }
            FinalizeOutcome::Lost
        }
    };

    // Regenerate primitives for the pushed object at its updated pose.
    if let Some(object) = world.object(state.object_id) {
        if let Movability::PotentiallyMovable { .. } = object.movability {
            if let Ok(prims) = generate_primitives(object, world, params.primitive_step) {
                let _ = world.set_primitives(state.object_id, prims);
            }
        }
    }
    outcome
}

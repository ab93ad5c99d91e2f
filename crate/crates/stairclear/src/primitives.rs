//! Movable-primitive generation: collision-free, support-stable push paths
//! from an object's pose to the traversable-area boundary.

use thiserror::Error;

use crate::geom::{boxes_intersect, Obb, Vec2, Vec3};
use crate::world::{TrackedObject, WorldModel, COLLISION_PEN_TOL, SUPPORT_HEIGHT_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum PrimitiveError {
    #[error("object is static and has no push primitives")]
    ObjectStatic,
}

/// Push direction relative to the step axis: Left is +step_axis, Right is
/// -step_axis (the robot faces up the ascent).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushDirection {
    Left,
    Right,
}

impl PushDirection {
    pub fn sign(self) -> f64 {
        match self {
            PushDirection::Left => 1.0,
            PushDirection::Right => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PushDirection::Left => "left",
            PushDirection::Right => "right",
        }
    }
}

/// A straight incremental push path. `path` holds OBB center positions
/// starting at the current pose; consecutive points are `step_size` apart
/// along the push axis.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionPrimitive {
    pub object_id: u64,
    pub direction: PushDirection,
    /// Center of the OBB face farthest from the motion direction (the face
    /// the foot pushes against), at the starting pose.
    pub contact_point: Vec3,
    pub path: Vec<Vec3>,
    pub expected_end: Vec3,
    /// Horizontal unit vector of the push motion.
    pub axis: Vec3,
}

impl MotionPrimitive {
    pub fn length(&self) -> f64 {
        crate::geom::polyline_length(&self.path)
    }

    /// The path the pushing foot follows: the center path translated back
    /// to the trailing face, starting at `contact_point`.
    pub fn contact_path(&self) -> Vec<Vec3> {
        let offset = self.contact_point - self.path[0];
        self.path.iter().map(|p| p + offset).collect()
    }

    #[cfg(test)]
    pub(crate) fn stub_for_tests(object_id: u64) -> Self {
        MotionPrimitive {
            object_id,
            direction: PushDirection::Left,
            contact_point: Vec3::zeros(),
            path: vec![Vec3::zeros(), Vec3::new(0.0, 0.02, 0.0)],
            expected_end: Vec3::new(0.0, 0.02, 0.0),
            axis: Vec3::new(0.0, 1.0, 0.0),
        }
    }
}

/// True when `obb` penetrates no staircase solid and no other object's box
/// (any movability) by more than the 1 mm tolerance. Face touch counts as
/// collision-free.
pub fn check_collision_free(obb: &Obb, world: &WorldModel, ignore_id: Option<u64>) -> bool {
    for solid in world.stair_solids() {
        if boxes_intersect(obb, &solid, COLLISION_PEN_TOL) {
            return false;
        }
    }
    for other in &world.objects {
        if Some(other.id) == ignore_id {
            continue;
        }
        if boxes_intersect(obb, &other.obb, COLLISION_PEN_TOL) {
            return false;
        }
    }
    true
}

/// True when all four bottom-face vertices rest on some navigable surface:
/// the vertex projects into the surface footprint (closed) and sits within
/// the height tolerance of the surface plane.
pub fn check_support(obb: &Obb, world: &WorldModel) -> bool {
    let surfaces = world.navigable_surfaces();
    obb.bottom_corners().iter().all(|corner| {
        surfaces.iter().any(|s| {
            s.rect.contains(Vec2::new(corner.x, corner.y), 1e-9)
                && (corner.z - s.height).abs() <= SUPPORT_HEIGHT_TOL
        })
    })
}

/// Generate up to two primitives (push left, push right along the step
/// axis). Each path is the maximal prefix of `step_size` translations that
/// stays collision-free and supported at every pose; directions in which
/// the object cannot move at all are omitted.
pub fn generate_primitives(
    object: &TrackedObject,
    world: &WorldModel,
    step_size: f64,
) -> Result<Vec<MotionPrimitive>, PrimitiveError> {
    if object.movability.is_static() {
        return Err(PrimitiveError::ObjectStatic);
    }
    let step_axis = world
        .stair_yaw_at(Vec2::new(object.obb.center.x, object.obb.center.y))
        .map(|yaw| crate::geom::rotate2(Vec2::new(0.0, 1.0), yaw))
        .unwrap_or_else(|| Vec2::new(0.0, 1.0));

    // Sweep is bounded by the world extent; no primitive can be longer.
    let extent = world.ground.extent.1 - world.ground.extent.0;
    let max_steps = ((extent.x.max(extent.y)) / step_size).ceil() as usize + 2;

    let mut out = Vec::new();
    for direction in [PushDirection::Left, PushDirection::Right] {
        let axis2 = step_axis * direction.sign();
        let axis = Vec3::new(axis2.x, axis2.y, 0.0);
        let mut path = vec![object.obb.center];
        for k in 1..=max_steps {
            let pose = object.obb.translated(axis * (k as f64 * step_size));
            if !check_collision_free(&pose, world, Some(object.id))
                || !check_support(&pose, world)
            {
                break;
            }
            path.push(pose.center);
        }
        if path.len() < 2 {
            continue;
        }
        // Trailing face: the one farthest from the motion direction.
        let half_along = object.obb.half_extents.y;
        let contact_point = object.obb.center - axis * half_along;
        out.push(MotionPrimitive {
            object_id: object.id,
            direction,
            contact_point,
            expected_end: *path.last().unwrap(),
            path,
            axis,
        });
    }
    Ok(out)
}

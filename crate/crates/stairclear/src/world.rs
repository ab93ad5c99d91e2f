//! Persistent environment representation: staircases, ground plane and
//! tracked objects with movability state. Every other module queries or
//! mutates the world through this one.

use thiserror::Error;

use crate::geom::{rotate2, xy, Obb, Vec2, Vec3, YawedRect};
use crate::primitives::MotionPrimitive;

/// Vertical slack when deciding whether a bottom vertex rests on a surface.
pub const SUPPORT_HEIGHT_TOL: f64 = 0.02;
/// Minimum interpenetration treated as a collision between boxes.
pub const COLLISION_PEN_TOL: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("object cloud must be non-empty")]
    EmptyCloud,
    #[error("obb yaw {0} does not match any staircase yaw")]
    NotStairAligned(f64),
    #[error("cloud point outside obb by more than the noise margin")]
    CloudOutsideObb,
    #[error("obb interpenetrates object {0} beyond tolerance")]
    Interpenetration(u64),
    #[error("unknown object id {0}")]
    UnknownId(u64),
    #[error("objects may not transition from static back to movable")]
    StaticIsFinal,
}

/// Parametric staircase. The stair frame has +x pointing up the ascent,
/// +y lateral across the steps, origin at the foot of the first riser on
/// the left edge. Tread k (1-based) lies at `k * riser_height` above the
/// origin.
#[derive(Clone, Debug)]
pub struct Staircase {
    pub id: u32,
    pub num_steps: u32,
    pub tread_depth: f64,
    pub riser_height: f64,
    pub width: f64,
    /// Front-left corner of the first step, at ground level.
    pub origin: Vec3,
    pub yaw: f64,
    pub left_wall: bool,
    pub right_wall: bool,
}

impl Staircase {
    /// Lateral unit direction of the steps in the world frame.
    pub fn step_axis(&self) -> Vec2 {
        rotate2(Vec2::new(0.0, 1.0), self.yaw)
    }

    /// Horizontal unit direction up the ascent in the world frame.
    pub fn ascent_axis(&self) -> Vec2 {
        rotate2(Vec2::new(1.0, 0.0), self.yaw)
    }

    fn to_world(&self, local: Vec2, z: f64) -> Vec3 {
        let w = xy(self.origin) + rotate2(local, self.yaw);
        Vec3::new(w.x, w.y, self.origin.z + z)
    }

    /// Top surface of tread k (1-based).
    pub fn tread_rect(&self, k: u32) -> YawedRect {
        let cx = (k as f64 - 0.5) * self.tread_depth;
        let center = self.to_world(Vec2::new(cx, self.width / 2.0), 0.0);
        YawedRect::new(
            xy(center),
            Vec2::new(self.tread_depth / 2.0, self.width / 2.0),
            self.yaw,
        )
    }

    pub fn tread_height(&self, k: u32) -> f64 {
        self.origin.z + k as f64 * self.riser_height
    }

    /// Whole-staircase footprint.
    pub fn footprint(&self) -> YawedRect {
        let depth = self.num_steps as f64 * self.tread_depth;
        let center = self.to_world(Vec2::new(depth / 2.0, self.width / 2.0), 0.0);
        YawedRect::new(xy(center), Vec2::new(depth / 2.0, self.width / 2.0), self.yaw)
    }

    /// Solid geometry as upright boxes: one column per step plus any
    /// configured side walls.
    pub fn solids(&self) -> Vec<Obb> {
        let mut out = Vec::with_capacity(self.num_steps as usize + 2);
        for k in 1..=self.num_steps {
            let cx = (k as f64 - 0.5) * self.tread_depth;
            let top = k as f64 * self.riser_height;
            let center = self.to_world(Vec2::new(cx, self.width / 2.0), top / 2.0);
            out.push(Obb::new(
                center,
                Vec3::new(self.tread_depth / 2.0, self.width / 2.0, top / 2.0),
                self.yaw,
            ));
        }
        let depth = self.num_steps as f64 * self.tread_depth;
        let wall_height = self.num_steps as f64 * self.riser_height + 0.6;
        let wall_thickness = 0.05;
        for (enabled, y) in [
            (self.right_wall, -wall_thickness / 2.0),
            (self.left_wall, self.width + wall_thickness / 2.0),
        ] {
            if enabled {
                let center = self.to_world(Vec2::new(depth / 2.0, y), wall_height / 2.0);
                out.push(Obb::new(
                    center,
                    Vec3::new(depth / 2.0, wall_thickness / 2.0, wall_height / 2.0),
                    self.yaw,
                ));
            }
        }
        out
    }

    /// Front face of riser k (1-based) as (rect in the vertical plane):
    /// returns the stair-frame x of the plane and the z span.
    pub fn riser_plane(&self, k: u32) -> (f64, f64, f64) {
        let x = (k as f64 - 1.0) * self.tread_depth;
        let z_lo = self.origin.z + (k as f64 - 1.0) * self.riser_height;
        let z_hi = self.origin.z + k as f64 * self.riser_height;
        (x, z_lo, z_hi)
    }
}

#[derive(Clone, Debug)]
pub struct GroundPlane {
    pub height: f64,
    /// Axis-aligned extent in the world frame: (min, max).
    pub extent: (Vec2, Vec2),
}

impl GroundPlane {
    pub fn rect(&self) -> YawedRect {
        let center = (self.extent.0 + self.extent.1) / 2.0;
        let half = (self.extent.1 - self.extent.0) / 2.0;
        YawedRect::new(center, half, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Ground,
    Step { staircase: u32, step: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceKind {
    Ground,
    Tread { staircase: u32, step: u32 },
}

/// Horizontal rectangle the robot or an object may rest on.
#[derive(Clone, Debug)]
pub struct NavSurface {
    pub height: f64,
    pub rect: YawedRect,
    pub kind: SurfaceKind,
}

/// Movability tag without payload, used for classification and transitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MovabilityTag {
    PotentiallyMovable,
    Static,
}

#[derive(Clone, Debug)]
pub enum Movability {
    PotentiallyMovable { primitives: Vec<MotionPrimitive> },
    Static,
}

impl Movability {
    pub fn tag(&self) -> MovabilityTag {
        match self {
            Movability::PotentiallyMovable { .. } => MovabilityTag::PotentiallyMovable,
            Movability::Static => MovabilityTag::Static,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Movability::Static)
    }

    pub fn primitives(&self) -> &[MotionPrimitive] {
        match self {
            Movability::PotentiallyMovable { primitives } => primitives,
            Movability::Static => &[],
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrackedObject {
    pub id: u64,
    pub cloud: Vec<Vec3>,
    pub obb: Obb,
    pub movability: Movability,
    pub supporting: Support,
    pub last_update_time: f64,
    /// True while the pose rests on a proprioceptive prediction that was
    /// never confirmed visually.
    pub predicted_only: bool,
}

#[derive(Clone, Debug)]
pub struct WorldModel {
    pub staircases: Vec<Staircase>,
    pub ground: GroundPlane,
    pub objects: Vec<TrackedObject>,
    pub next_id: u64,
    /// Full-extent limits for the size gate, per axis (x, y, z).
    pub size_limits: [f64; 3],
    /// Margin allowed between cloud points and the stored OBB.
    pub point_noise_margin: f64,
}

impl WorldModel {
    pub fn new(staircases: Vec<Staircase>, ground: GroundPlane) -> Self {
        Self {
            staircases,
            ground,
            objects: Vec::new(),
            next_id: 0,
            size_limits: [0.60, 0.60, 0.50],
            point_noise_margin: 0.03,
        }
    }

    pub fn object(&self, id: u64) -> Option<&TrackedObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: u64) -> Option<&mut TrackedObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    /// One rectangle per tread of every staircase, then the ground.
    pub fn navigable_surfaces(&self) -> Vec<NavSurface> {
        let mut out = Vec::new();
        for s in &self.staircases {
            for k in 1..=s.num_steps {
                out.push(NavSurface {
                    height: s.tread_height(k),
                    rect: s.tread_rect(k),
                    kind: SurfaceKind::Tread {
                        staircase: s.id,
                        step: k,
                    },
                });
            }
        }
        out.push(NavSurface {
            height: self.ground.height,
            rect: self.ground.rect(),
            kind: SurfaceKind::Ground,
        });
        out
    }

    /// All solid staircase boxes.
    pub fn stair_solids(&self) -> Vec<Obb> {
        self.staircases.iter().flat_map(|s| s.solids()).collect()
    }

    /// Walking height at a 2D point: the highest navigable surface whose
    /// footprint contains it.
    pub fn surface_height_at(&self, p: Vec2) -> Option<f64> {
        self.navigable_surfaces()
            .iter()
            .filter(|s| s.rect.contains(p, 1e-9))
            .map(|s| s.height)
            .fold(None, |acc, h| Some(acc.map_or(h, |a: f64| a.max(h))))
    }

    /// Supporting surface for an OBB: the highest surface containing its
    /// center footprint no higher than the box bottom (with tolerance).
    pub fn find_support(&self, obb: &Obb) -> Support {
        let p = xy(obb.center);
        let z = obb.z_min();
        let mut best: Option<(f64, Support)> = None;
        for s in self.navigable_surfaces() {
            if !s.rect.contains(p, 1e-9) || s.height > z + SUPPORT_HEIGHT_TOL {
                continue;
            }
            let sup = match s.kind {
                SurfaceKind::Ground => Support::Ground,
                SurfaceKind::Tread { staircase, step } => Support::Step { staircase, step },
            };
            if best.is_none_or(|(h, _)| s.height > h) {
                best = Some((s.height, sup));
            }
        }
        best.map(|(_, s)| s).unwrap_or(Support::Ground)
    }

    /// Yaw of the staircase supporting a point, falling back to the
    /// nearest staircase for ground-resting positions.
    pub fn stair_yaw_at(&self, p: Vec2) -> Option<f64> {
        for s in &self.staircases {
            if s.footprint().contains(p, 1e-9) {
                return Some(s.yaw);
            }
        }
        self.staircases
            .iter()
            .map(|s| (s.footprint().distance(p), s.yaw))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, yaw)| yaw)
    }

    /// Insert a new tracked object. New objects start potentially movable
    /// with no primitives unless the size gate classifies them static.
    pub fn insert_object(&mut self, cloud: Vec<Vec3>, obb: Obb, now: f64) -> Result<u64, WorldError> {
        if cloud.is_empty() {
            return Err(WorldError::EmptyCloud);
        }
        if !self.staircases.is_empty()
            && !self.staircases.iter().any(|s| s.yaw == obb.yaw)
        {
            return Err(WorldError::NotStairAligned(obb.yaw));
        }
        if !cloud
            .iter()
            .all(|p| obb.contains(*p, self.point_noise_margin))
        {
            return Err(WorldError::CloudOutsideObb);
        }
        for other in &self.objects {
            if crate::geom::boxes_intersect(&obb, &other.obb, 0.01) {
                return Err(WorldError::Interpenetration(other.id));
            }
        }
        let movability = match classify_by_size(&obb, self.size_limits) {
            MovabilityTag::Static => Movability::Static,
            MovabilityTag::PotentiallyMovable => Movability::PotentiallyMovable {
                primitives: Vec::new(),
            },
        };
        let id = self.next_id;
        self.next_id += 1;
        let supporting = self.find_support(&obb);
        self.objects.push(TrackedObject {
            id,
            cloud,
            obb,
            movability,
            supporting,
            last_update_time: now,
            predicted_only: false,
        });
        Ok(id)
    }

    /// Apply a movability transition. Static is final: once set, an object
    /// never becomes movable again and its primitives are cleared.
    pub fn set_movability(&mut self, id: u64, tag: MovabilityTag) -> Result<(), WorldError> {
        let obj = self.object_mut(id).ok_or(WorldError::UnknownId(id))?;
        match (&obj.movability, tag) {
            (_, MovabilityTag::Static) => {
                obj.movability = Movability::Static;
                Ok(())
            }
            (Movability::PotentiallyMovable { .. }, MovabilityTag::PotentiallyMovable) => Ok(()),
            (Movability::Static, MovabilityTag::PotentiallyMovable) => {
                Err(WorldError::StaticIsFinal)
            }
        }
    }

    /// Replace the primitive set of a movable object. No-op for static
    /// objects, which never reacquire primitives.
    pub fn set_primitives(
        &mut self,
        id: u64,
        primitives: Vec<MotionPrimitive>,
    ) -> Result<(), WorldError> {
        let obj = self.object_mut(id).ok_or(WorldError::UnknownId(id))?;
        if let Movability::PotentiallyMovable { primitives: p } = &mut obj.movability {
            *p = primitives;
        }
        Ok(())
    }
}

/// Static iff any full extent exceeds the corresponding limit. Ties go to
/// potentially movable: pushing is attempted optimistically and stall
/// detection reclassifies if needed.
pub fn classify_by_size(obb: &Obb, limits: [f64; 3]) -> MovabilityTag {
    let full = obb.half_extents * 2.0;
    if full.x > limits[0] || full.y > limits[1] || full.z > limits[2] {
        MovabilityTag::Static
    } else {
        MovabilityTag::PotentiallyMovable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_world() -> WorldModel {
        let stair = Staircase {
            id: 0,
            num_steps: 5,
            tread_depth: 0.3,
            riser_height: 0.16,
            width: 1.2,
            origin: Vec3::zeros(),
            yaw: 0.0,
            left_wall: false,
            right_wall: false,
        };
        let ground = GroundPlane {
            height: 0.0,
            extent: (Vec2::new(-2.0, -2.0), Vec2::new(4.0, 3.0)),
        };
        WorldModel::new(vec![stair], ground)
    }

    fn cube_cloud(center: Vec3, half: f64, n_per_face: usize) -> Vec<Vec3> {
        // Points on the surface of a cube, corners included.
        let mut out = Vec::new();
        let step = 2.0 * half / (n_per_face as f64 - 1.0);
        for i in 0..n_per_face {
            for j in 0..n_per_face {
                let a = -half + i as f64 * step;
                let b = -half + j as f64 * step;
                out.push(center + Vec3::new(a, b, half));
                out.push(center + Vec3::new(a, half, b));
                out.push(center + Vec3::new(half, a, b));
            }
        }
        out
    }

    #[test]
    fn first_insert_gets_id_zero() {
        let mut world = test_world();
        let obb = Obb::new(Vec3::new(0.15, 0.6, 0.26), Vec3::new(0.1, 0.1, 0.1), 0.0);
        let id = world
            .insert_object(vec![obb.center], obb, 0.0)
            .expect("insert");
        assert_eq!(id, 0);
        assert_eq!(world.objects.len(), 1);
    }

    #[test]
    fn ids_unique_and_retrievable() {
        let mut world = test_world();
        let a = Obb::new(Vec3::new(0.15, 0.3, 0.26), Vec3::new(0.08, 0.08, 0.1), 0.0);
        let b = Obb::new(Vec3::new(0.15, 0.9, 0.26), Vec3::new(0.08, 0.08, 0.1), 0.0);
        let ia = world.insert_object(vec![a.center], a, 0.0).unwrap();
        let ib = world.insert_object(vec![b.center], b, 0.0).unwrap();
        assert_eq!((ia, ib), (0, 1));
        assert!(world.object(ia).is_some());
        assert!(world.object(ib).is_some());
    }

    #[test]
    fn insert_cube_cloud_keeps_points_and_extents() {
        let mut world = test_world();
        let center = Vec3::new(0.45, 0.6, 0.32 + 0.15);
        let cloud = cube_cloud(center, 0.15, 5);
        let n = cloud.len();
        let obb = crate::perception::fit_stair_aligned_obb(&cloud, 0.0).unwrap();
        let id = world.insert_object(cloud, obb, 0.0).unwrap();
        let obj = world.object(id).unwrap();
        assert_eq!(obj.cloud.len(), n);
        for k in 0..3 {
            assert_relative_eq!(obj.obb.half_extents[k], 0.15, epsilon = 1e-9);
        }
        assert_eq!(obj.supporting, Support::Step { staircase: 0, step: 2 });
    }

    #[test]
    fn insert_rejects_empty_cloud() {
        let mut world = test_world();
        let obb = Obb::new(Vec3::new(0.15, 0.6, 0.26), Vec3::new(0.1, 0.1, 0.1), 0.0);
        assert_eq!(
            world.insert_object(vec![], obb, 0.0),
            Err(WorldError::EmptyCloud)
        );
    }

    #[test]
    fn size_gate_boundaries() {
        let limits = [0.6, 0.6, 0.6];
        let small = Obb::new(Vec3::zeros(), Vec3::new(0.15, 0.15, 0.15), 0.0);
        assert_eq!(classify_by_size(&small, limits), MovabilityTag::PotentiallyMovable);
        let long = Obb::new(Vec3::zeros(), Vec3::new(0.35, 0.15, 0.15), 0.0);
        assert_eq!(classify_by_size(&long, limits), MovabilityTag::Static);
        let exact = Obb::new(Vec3::zeros(), Vec3::new(0.3, 0.3, 0.3), 0.0);
        assert_eq!(classify_by_size(&exact, limits), MovabilityTag::PotentiallyMovable);
    }

    #[test]
    fn movability_transitions_one_way() {
        let mut world = test_world();
        let obb = Obb::new(Vec3::new(0.15, 0.6, 0.26), Vec3::new(0.1, 0.1, 0.1), 0.0);
        let id = world.insert_object(vec![obb.center], obb, 0.0).unwrap();
        world
            .set_primitives(id, vec![MotionPrimitive::stub_for_tests(id)])
            .unwrap();
        world.set_movability(id, MovabilityTag::Static).unwrap();
        assert!(world.object(id).unwrap().movability.primitives().is_empty());
        // Idempotent.
        world.set_movability(id, MovabilityTag::Static).unwrap();
        assert_eq!(
            world.set_movability(id, MovabilityTag::PotentiallyMovable),
            Err(WorldError::StaticIsFinal)
        );
        // Primitives are not reacquired.
        world
            .set_primitives(id, vec![MotionPrimitive::stub_for_tests(id)])
            .unwrap();
        assert!(world.object(id).unwrap().movability.primitives().is_empty());
    }

    #[test]
    fn navigable_surface_counts_and_heights() {
        let world = test_world();
        let surfaces = world.navigable_surfaces();
        assert_eq!(surfaces.len(), 6);
        for k in 1..=5u32 {
            let s = surfaces
                .iter()
                .find(|s| s.kind == SurfaceKind::Tread { staircase: 0, step: k })
                .unwrap();
            assert_relative_eq!(s.height, k as f64 * 0.16, epsilon = 1e-12);
        }
    }

    #[test]
    fn surfaces_of_two_staircases_concatenate() {
        let mut world = test_world();
        let mut second = world.staircases[0].clone();
        second.id = 1;
        second.num_steps = 3;
        second.origin = Vec3::new(3.0, 0.0, 0.0);
        world.staircases.push(second);
        assert_eq!(world.navigable_surfaces().len(), 5 + 3 + 1);
    }

    #[test]
    fn obb_yaw_matches_staircase_yaw_bitwise() {
        let mut world = test_world();
        world.staircases[0].yaw = 0.37;
        let yaw = world.stair_yaw_at(Vec2::new(0.3, 0.6)).unwrap();
        assert!(yaw == 0.37);
    }
}

//! Foot path planning: world voxelization and 26-connected A* search,
//! assembled into approach / push / return trajectories.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::geom::{boxes_intersect, Obb, Vec3};
use crate::primitives::MotionPrimitive;
use crate::world::WorldModel;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("no path between start and goal")]
    NoPath,
    #[error("start or goal voxel is outside the grid or occupied")]
    InvalidEndpoint,
    #[error("unknown object id {0}")]
    UnknownObject(u64),
}

#[derive(Clone, Debug)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Self {
        assert!(resolution > 0.0 && dims.iter().all(|&d| d > 0));
        Self {
            origin,
            resolution,
            dims,
            occupancy: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    #[inline]
    pub fn index(&self, v: [usize; 3]) -> usize {
        (v[2] * self.dims[1] + v[1]) * self.dims[0] + v[0]
    }

    pub fn is_occupied(&self, v: [usize; 3]) -> bool {
        self.occupancy[self.index(v)]
    }

    pub fn set_occupied(&mut self, v: [usize; 3], occupied: bool) {
        let i = self.index(v);
        self.occupancy[i] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// Center of a voxel in world coordinates.
    pub fn center(&self, v: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(
                (v[0] as f64 + 0.5) * self.resolution,
                (v[1] as f64 + 0.5) * self.resolution,
                (v[2] as f64 + 0.5) * self.resolution,
            )
    }

    /// Voxel containing a world point, if inside the grid.
    pub fn voxel_of(&self, p: Vec3) -> Option<[usize; 3]> {
        let rel = (p - self.origin) / self.resolution;
        let v = [rel.x.floor(), rel.y.floor(), rel.z.floor()];
        for k in 0..3 {
            if v[k] < 0.0 || v[k] >= self.dims[k] as f64 {
                return None;
            }
        }
        Some([v[0] as usize, v[1] as usize, v[2] as usize])
    }

    fn voxel_box(&self, v: [usize; 3]) -> Obb {
        Obb::new(
            self.center(v),
            Vec3::repeat(self.resolution / 2.0),
            0.0,
        )
    }

    /// Mark every voxel intersecting `solid` (touch counts) as occupied.
    pub fn mark_solid(&mut self, solid: &Obb) {
        let (lo, hi) = solid.aabb();
        let lo_v = ((lo - self.origin) / self.resolution).map(|x| x.floor() as i64);
        let hi_v = ((hi - self.origin) / self.resolution).map(|x| x.floor() as i64);
        for x in lo_v.x.max(0)..=(hi_v.x.min(self.dims[0] as i64 - 1)) {
            for y in lo_v.y.max(0)..=(hi_v.y.min(self.dims[1] as i64 - 1)) {
                for z in lo_v.z.max(0)..=(hi_v.z.min(self.dims[2] as i64 - 1)) {
                    let v = [x as usize, y as usize, z as usize];
                    if !self.is_occupied(v) && boxes_intersect(&self.voxel_box(v), solid, -1e-9) {
                        self.set_occupied(v, true);
                    }
                }
            }
        }
    }
}

/// Exact path cost as counts of straight, planar-diagonal and cubic-
/// diagonal moves. Two optimal paths always share the same counts, so cost
/// comparisons are exact across algorithms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PathCost {
    pub straight: u32,
    pub planar: u32,
    pub cubic: u32,
}

impl PathCost {
    pub fn meters(&self, resolution: f64) -> f64 {
        resolution
            * (self.straight as f64
                + self.planar as f64 * std::f64::consts::SQRT_2
                + self.cubic as f64 * 3.0_f64.sqrt())
    }

    fn plus(&self, class: u32) -> PathCost {
        let mut c = *self;
        match class {
            1 => c.straight += 1,
            2 => c.planar += 1,
            _ => c.cubic += 1,
        }
        c
    }

    fn value(&self) -> f64 {
        self.straight as f64
            + self.planar as f64 * std::f64::consts::SQRT_2
            + self.cubic as f64 * 3.0_f64.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelPath {
    pub voxels: Vec<[usize; 3]>,
    pub cost: PathCost,
}

struct HeapEntry {
    f: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.index == other.index
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap; lexicographic index breaks ties.
        other
            .f
            .total_cmp(&self.f)
            .then(other.index.cmp(&self.index))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBOR_OFFSETS: [(i64, i64, i64); 26] = {
    let mut out = [(0, 0, 0); 26];
    let mut i = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if dx != 0 || dy != 0 || dz != 0 {
                    out[i] = (dx, dy, dz);
                    i += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// 26-connected shortest path under Euclidean edge costs with an
/// admissible straight-line heuristic. Tie-breaking is deterministic
/// (lexicographic voxel index); optimality matches Dijkstra exactly.
pub fn astar(grid: &VoxelGrid, start: [usize; 3], goal: [usize; 3]) -> Result<VoxelPath, PlanError> {
    shortest_path(grid, start, goal, true)
}

/// Same search without the heuristic; exposed so oracle comparisons can
/// share the grid plumbing while exercising a different expansion order.
pub fn dijkstra(
    grid: &VoxelGrid,
    start: [usize; 3],
    goal: [usize; 3],
) -> Result<VoxelPath, PlanError> {
    shortest_path(grid, start, goal, false)
}

fn shortest_path(
    grid: &VoxelGrid,
    start: [usize; 3],
    goal: [usize; 3],
    use_heuristic: bool,
) -> Result<VoxelPath, PlanError> {
    for v in [start, goal] {
        for k in 0..3 {
            if v[k] >= grid.dims[k] {
                return Err(PlanError::InvalidEndpoint);
            }
        }
        if grid.is_occupied(v) {
            return Err(PlanError::InvalidEndpoint);
        }
    }
    let n = grid.dims[0] * grid.dims[1] * grid.dims[2];
    let mut g: Vec<Option<PathCost>> = vec![None; n];
    let mut came: Vec<usize> = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();

    let heuristic = |v: [usize; 3]| -> f64 {
        if !use_heuristic {
            return 0.0;
        }
        let dx = v[0] as f64 - goal[0] as f64;
        let dy = v[1] as f64 - goal[1] as f64;
        let dz = v[2] as f64 - goal[2] as f64;
        (dx * dx + dy * dy + dz * dz).sqrt()
    };

    let start_i = grid.index(start);
    let goal_i = grid.index(goal);
    g[start_i] = Some(PathCost::default());
    heap.push(HeapEntry {
        f: heuristic(start),
        index: start_i,
    });

    while let Some(entry) = heap.pop() {
        let cur = entry.index;
        let cur_v = [
            cur % grid.dims[0],
            (cur / grid.dims[0]) % grid.dims[1],
            cur / (grid.dims[0] * grid.dims[1]),
        ];
        let cur_g = g[cur].expect("queued nodes have g-values");
        // Stale heap entry.
        if entry.f > cur_g.value() + heuristic(cur_v) + 1e-9 {
            continue;
        }
        if cur == goal_i {
            let mut voxels = vec![cur_v];
            let mut node = cur;
            while node != start_i {
                node = came[node];
                voxels.push([
                    node % grid.dims[0],
                    (node / grid.dims[0]) % grid.dims[1],
                    node / (grid.dims[0] * grid.dims[1]),
                ]);
            }
            voxels.reverse();
            return Ok(VoxelPath {
                voxels,
                cost: cur_g,
            });
        }
        for (dx, dy, dz) in NEIGHBOR_OFFSETS {
            let nx = cur_v[0] as i64 + dx;
            let ny = cur_v[1] as i64 + dy;
            let nz = cur_v[2] as i64 + dz;
            if nx < 0
                || ny < 0
                || nz < 0
                || nx >= grid.dims[0] as i64
                || ny >= grid.dims[1] as i64
                || nz >= grid.dims[2] as i64
            {
                continue;
            }
            let nv = [nx as usize, ny as usize, nz as usize];
            if grid.is_occupied(nv) {
                continue;
            }
            let class = (dx.abs() + dy.abs() + dz.abs()) as u32;
            let cand = cur_g.plus(class);
            let ni = grid.index(nv);
            let better = match g[ni] {
                None => true,
                Some(old) => cand.value() < old.value(),
            };
            if better {
                g[ni] = Some(cand);
                came[ni] = cur;
                heap.push(HeapEntry {
                    f: cand.value() + heuristic(nv),
                    index: ni,
                });
            }
        }
    }
    Err(PlanError::NoPath)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Approach,
    Push,
    Return,
}

/// Foot waypoints with per-waypoint phase tags. Consecutive waypoints stay
/// within one voxel diagonal.
#[derive(Clone, Debug)]
pub struct FootTrajectory {
    pub waypoints: Vec<(Vec3, Phase)>,
}

#[derive(Clone, Copy, Debug)]
pub struct PlanParams {
    pub resolution: f64,
    /// Obstacle inflation (foot radius).
    pub inflate: f64,
    /// Extra margin added around the world bounds.
    pub margin: f64,
    /// Headroom above the tallest obstacle.
    pub headroom: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            resolution: 0.025,
            inflate: 0.04,
            margin: 0.2,
            headroom: 0.8,
        }
    }
}

/// Voxelize the world: a voxel is occupied iff it intersects a staircase
/// solid or an object box inflated by `inflate`. The grid floor sits at
/// the ground height so paths cannot dive below the walkable plane.
pub fn voxelize(world: &WorldModel, resolution: f64, inflate: f64) -> VoxelGrid {
    voxelize_with(world, &PlanParams {
        resolution,
        inflate,
        ..PlanParams::default()
    }, &[])
}

/// Voxelization with extra points the grid must cover (foot positions).
pub fn voxelize_with(world: &WorldModel, params: &PlanParams, cover: &[Vec3]) -> VoxelGrid {
    let mut lo = Vec3::new(
        world.ground.extent.0.x,
        world.ground.extent.0.y,
        world.ground.height,
    );
    let mut hi = Vec3::new(
        world.ground.extent.1.x,
        world.ground.extent.1.y,
        world.ground.height,
    );
    let mut solids: Vec<Obb> = world.stair_solids();
    for o in &world.objects {
        solids.push(o.obb);
    }
    for s in &solids {
        let (slo, shi) = s.inflated(params.inflate).aabb();
        lo = lo.inf(&slo);
        hi = hi.sup(&shi);
    }
    for p in cover {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    lo -= Vec3::repeat(params.margin);
    hi += Vec3::repeat(params.margin);
    // Keep the floor at ground height: there is nothing to plan below it.
    lo.z = world.ground.height;
    hi.z += params.headroom;
    let dims = [
        (((hi.x - lo.x) / params.resolution).ceil() as usize).max(1),
        (((hi.y - lo.y) / params.resolution).ceil() as usize).max(1),
        (((hi.z - lo.z) / params.resolution).ceil() as usize).max(1),
    ];
    let mut grid = VoxelGrid::new(lo, params.resolution, dims);
    for s in &solids {
        grid.mark_solid(&s.inflated(params.inflate));
    }
    grid
}

fn voxel_path_to_waypoints(grid: &VoxelGrid, path: &VoxelPath, phase: Phase) -> Vec<(Vec3, Phase)> {
    path.voxels.iter().map(|v| (grid.center(*v), phase)).collect()
}

/// Straight-line fill between two points at spacing at most `step`,
/// excluding `from`, including `to`.
fn bridge(from: Vec3, to: Vec3, step: f64, phase: Phase) -> Vec<(Vec3, Phase)> {
    let d = to - from;
    let len = d.norm();
    if len < 1e-12 {
        return vec![(to, phase)];
    }
    let n = (len / step).ceil() as usize;
    (1..=n)
        .map(|i| (from + d * (i as f64 / n as f64), phase))
        .collect()
}

/// Plan the full manipulation trajectory for a primitive: an A* approach
/// from the resting foot position to a standoff point just short of the
/// contact point (the target object is an obstacle here — the approach
/// must not disturb it), then the push path itself, offset from OBB
/// centers to the trailing face so the foot stays on the object.
pub fn plan_foot_trajectory(
    foot_pos: Vec3,
    primitive: &MotionPrimitive,
    world: &WorldModel,
    params: &PlanParams,
) -> Result<FootTrajectory, PlanError> {
    world
        .object(primitive.object_id)
        .ok_or(PlanError::UnknownObject(primitive.object_id))?;
    // Standoff clears the inflated obstacle around the target face.
    let standoff = params.inflate + 2.0 * params.resolution;
    let standoff_point = primitive.contact_point - primitive.axis * standoff;

    let grid = voxelize_with(world, params, &[foot_pos, standoff_point]);
    let start = grid.voxel_of(foot_pos).ok_or(PlanError::InvalidEndpoint)?;
    let goal = grid
        .voxel_of(standoff_point)
        .ok_or(PlanError::InvalidEndpoint)?;
    let approach = astar(&grid, start, goal)?;

    let mut waypoints = voxel_path_to_waypoints(&grid, &approach, Phase::Approach);
    let last = waypoints.last().expect("approach path non-empty").0;
    waypoints.extend(bridge(
        last,
        primitive.contact_point,
        params.resolution,
        Phase::Approach,
    ));
    // Push phase: primitive centers shifted to the trailing face.
    let contact_path = primitive.contact_path();
    for p in contact_path.iter().skip(1) {
        waypoints.push((*p, Phase::Push));
    }
    Ok(FootTrajectory { waypoints })
}

/// Plan the retraction path back to the resting pose with every object as
/// an obstacle (the pushed object at its current world pose).
pub fn plan_return(
    foot_pos: Vec3,
    rest_pos: Vec3,
    world: &WorldModel,
    params: &PlanParams,
) -> Result<FootTrajectory, PlanError> {
    let grid = voxelize_with(world, params, &[foot_pos, rest_pos]);
    let start = grid.voxel_of(foot_pos).ok_or(PlanError::InvalidEndpoint)?;
    let goal = grid.voxel_of(rest_pos).ok_or(PlanError::InvalidEndpoint)?;
    let path = astar(&grid, start, goal)?;
    Ok(FootTrajectory {
        waypoints: voxel_path_to_waypoints(&grid, &path, Phase::Return),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::world::{GroundPlane, WorldModel};
    use approx::assert_relative_eq;

    fn empty_grid(n: usize) -> VoxelGrid {
        VoxelGrid::new(Vec3::zeros(), 0.05, [n, n, n])
    }

    #[test]
    fn start_equals_goal() {
        let grid = empty_grid(5);
        let path = astar(&grid, [2, 2, 2], [2, 2, 2]).unwrap();
        assert_eq!(path.voxels.len(), 1);
        assert_relative_eq!(path.cost.meters(0.05), 0.0);
    }

    #[test]
    fn free_grid_corner_to_corner_matches_dijkstra() {
        let grid = empty_grid(20);
        let a = astar(&grid, [0, 0, 0], [19, 19, 19]).unwrap();
        let d = dijkstra(&grid, [0, 0, 0], [19, 19, 19]).unwrap();
        assert_eq!(a.cost, d.cost);
        // 19 cubic diagonals.
        assert_eq!(a.cost, PathCost { straight: 0, planar: 0, cubic: 19 });
    }

    #[test]
    fn walled_goal_is_unreachable() {
        let mut grid = empty_grid(7);
        for x in 0..7 {
            for y in 0..7 {
                grid.set_occupied([x, y, 3], true);
            }
        }
        assert_eq!(astar(&grid, [3, 3, 0], [3, 3, 6]), Err(PlanError::NoPath));
        grid.set_occupied([3, 3, 6], true);
        assert_eq!(
            astar(&grid, [3, 3, 0], [3, 3, 6]),
            Err(PlanError::InvalidEndpoint)
        );
    }

    #[test]
    fn cost_invariant_under_origin_translation() {
        let mut a = empty_grid(10);
        let mut b = VoxelGrid::new(Vec3::new(5.0, -3.0, 2.0), 0.05, [10, 10, 10]);
        for v in [[2usize, 3, 1], [7, 7, 7], [4, 0, 6]] {
            a.set_occupied(v, true);
            b.set_occupied(v, true);
        }
        let pa = astar(&a, [0, 0, 0], [9, 9, 9]).unwrap();
        let pb = astar(&b, [0, 0, 0], [9, 9, 9]).unwrap();
        assert_eq!(pa.cost, pb.cost);
        assert_eq!(pa.voxels, pb.voxels);
    }

    fn flat_world() -> WorldModel {
        WorldModel::new(
            vec![],
            GroundPlane {
                height: 0.0,
                extent: (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)),
            },
        )
    }

    #[test]
    fn empty_world_voxelizes_all_free() {
        let world = flat_world();
        let grid = voxelize(&world, 0.05, 0.04);
        assert_eq!(grid.occupied_count(), 0);
    }

    #[test]
    fn cube_occupies_expected_block() {
        let mut world = flat_world();
        let half = 0.15;
        let inflate = 0.04;
        let obb = Obb::new(Vec3::new(0.0, 0.0, 0.3), Vec3::repeat(half), 0.0);
        world.objects.push(crate::world::TrackedObject {
            id: 0,
            cloud: vec![obb.center],
            obb,
            movability: crate::world::Movability::Static,
            supporting: crate::world::Support::Ground,
            last_update_time: 0.0,
            predicted_only: false,
        });
        let res = 0.05;
        let grid = voxelize(&world, res, inflate);
        let expected_side = (2.0 * (half + inflate)) / res; // 7.6 voxels
        let count = grid.occupied_count() as f64;
        let side = count.cbrt();
        assert!(
            (side - expected_side).abs() <= 1.0,
            "side {side} vs expected {expected_side}"
        );
    }

    #[test]
    fn straddling_object_occupies_both_voxels() {
        let mut grid = empty_grid(4);
        // A thin slab crossing the boundary between voxel columns 1 and 2.
        let slab = Obb::new(
            Vec3::new(0.10, 0.1, 0.025),
            Vec3::new(0.002, 0.02, 0.02),
            0.0,
        );
        grid.mark_solid(&slab);
        assert!(grid.is_occupied([1, 1, 0]) && grid.is_occupied([2, 1, 0]));
    }
}

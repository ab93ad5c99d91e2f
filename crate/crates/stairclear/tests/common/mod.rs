//! Shared fixtures and independent oracle implementations for the
//! integration tests. Oracles deliberately avoid the library's own code
//! paths wherever they check one.
#![allow(dead_code)] // each test binary uses its own subset

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stairclear::contact::LegModel;
use stairclear::geom::{Obb, Vec2, Vec3};
use stairclear::planning::VoxelGrid;
use stairclear::world::{GroundPlane, Staircase, WorldModel};

pub fn world_with_stair(num_steps: u32, tread: f64, riser: f64, width: f64, yaw: f64) -> WorldModel {
    let stair = Staircase {
        id: 0,
        num_steps,
        tread_depth: tread,
        riser_height: riser,
        width,
        origin: Vec3::zeros(),
        yaw,
        left_wall: false,
        right_wall: false,
    };
    WorldModel::new(
        vec![stair],
        GroundPlane {
            height: 0.0,
            extent: (Vec2::new(-2.8, -2.8), Vec2::new(4.0, 4.0)),
        },
    )
}

/// Monte-Carlo IoU estimate over the union's bounding box.
pub fn mc_iou(a: &Obb, b: &Obb, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (lo_a, hi_a) = a.aabb();
    let (lo_b, hi_b) = b.aabb();
    let lo = lo_a.inf(&lo_b);
    let hi = hi_a.sup(&hi_b);
    let mut in_union = 0usize;
    let mut in_both = 0usize;
    for _ in 0..samples {
        let p = Vec3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        let ia = a.contains(p, 0.0);
        let ib = b.contains(p, 0.0);
        if ia || ib {
            in_union += 1;
        }
        if ia && ib {
            in_both += 1;
        }
    }
    if in_union == 0 {
        0.0
    } else {
        in_both as f64 / in_union as f64
    }
}

/// Plain Dijkstra over the same 26-connected voxel graph, with the cost
/// accumulated as exact move-class counts. Independent of the A* code.
pub fn dijkstra_cost(grid: &VoxelGrid, start: [usize; 3], goal: [usize; 3]) -> Option<f64> {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Entry {
        cost: f64,
        idx: usize,
    }
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            other
                .cost
                .total_cmp(&self.cost)
                .then(other.idx.cmp(&self.idx))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let dims = grid.dims;
    let n = dims[0] * dims[1] * dims[2];
    let index = |v: [usize; 3]| (v[2] * dims[1] + v[1]) * dims[0] + v[0];
    if grid.is_occupied(start) || grid.is_occupied(goal) {
        return None;
    }
    // Counts of straight / planar / cubic moves per node.
    let mut counts: Vec<Option<[u32; 3]>> = vec![None; n];
    let value = |c: [u32; 3]| {
        c[0] as f64 + c[1] as f64 * std::f64::consts::SQRT_2 + c[2] as f64 * 3.0_f64.sqrt()
    };
    counts[index(start)] = Some([0, 0, 0]);
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        cost: 0.0,
        idx: index(start),
    });
    while let Some(e) = heap.pop() {
        let cur = e.idx;
        let cur_counts = counts[cur].unwrap();
        if e.cost > value(cur_counts) + 1e-12 {
            continue;
        }
        if cur == index(goal) {
            return Some(value(cur_counts) * grid.resolution);
        }
        let v = [
            cur % dims[0],
            (cur / dims[0]) % dims[1],
            cur / (dims[0] * dims[1]),
        ];
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let nx = v[0] as i64 + dx;
                    let ny = v[1] as i64 + dy;
                    let nz = v[2] as i64 + dz;
                    if nx < 0
                        || ny < 0
                        || nz < 0
                        || nx >= dims[0] as i64
                        || ny >= dims[1] as i64
                        || nz >= dims[2] as i64
                    {
                        continue;
                    }
                    let nv = [nx as usize, ny as usize, nz as usize];
                    if grid.is_occupied(nv) {
                        continue;
                    }
                    let class = (dx.abs() + dy.abs() + dz.abs()) as usize - 1;
                    let mut cand = cur_counts;
                    cand[class] += 1;
                    let ni = index(nv);
                    let better = match counts[ni] {
                        None => true,
                        Some(old) => value(cand) < value(old),
                    };
                    if better {
                        counts[ni] = Some(cand);
                        heap.push(Entry {
                            cost: value(cand),
                            idx: ni,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Kinetic plus potential energy of the leg chain from pure kinematics.
pub fn leg_energy(model: &LegModel, q: &[f64; 3], qd: &[f64; 3]) -> (f64, f64) {
    let mut theta = 0.0;
    let mut omega = 0.0;
    let mut joint = Vec2::zeros();
    let mut joint_vel = Vec2::zeros();
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 0..3 {
        theta += q[i];
        omega += qd[i];
        let u = Vec2::new(theta.cos(), theta.sin());
        let perp = Vec2::new(-u.y, u.x);
        let com = joint + u * model.link_com_offsets[i];
        let com_vel = joint_vel + perp * (omega * model.link_com_offsets[i]);
        kinetic += 0.5 * model.link_masses[i] * com_vel.norm_squared();
        potential += model.link_masses[i] * model.gravity * com.y;
        joint += u * model.link_lengths[i];
        joint_vel += perp * (omega * model.link_lengths[i]);
    }
    (kinetic, potential)
}

/// Joint torques from the Lagrangian, entirely by finite differences over
/// the kinematic energies: tau = M qdd + d/dt(dT/dqd) terms - dT/dq + dV/dq.
pub fn lagrangian_torques(model: &LegModel, q: &[f64; 3], qd: &[f64; 3], qdd: &[f64; 3]) -> [f64; 3] {
    // T is exactly quadratic in the joint rates, so large velocity steps
    // keep the second differences exact while drowning rounding noise.
    let hv = 0.5;
    let hq = 1e-4;
    let hg = 1e-5;
    let t_of = |q: &[f64; 3], qd: &[f64; 3]| leg_energy(model, q, qd).0;
    let v_of = |q: &[f64; 3]| leg_energy(model, q, &[0.0; 3]).1;

    let mass_at = |qq: &[f64; 3], i: usize, j: usize| {
        let mut vpp = *qd;
        let mut vpm = *qd;
        let mut vmp = *qd;
        let mut vmm = *qd;
        vpp[i] += hv;
        vpp[j] += hv;
        vpm[i] += hv;
        vpm[j] -= hv;
        vmp[i] -= hv;
        vmp[j] += hv;
        vmm[i] -= hv;
        vmm[j] -= hv;
        (t_of(qq, &vpp) - t_of(qq, &vpm) - t_of(qq, &vmp) + t_of(qq, &vmm)) / (4.0 * hv * hv)
    };

    let mut mass = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            mass[i][j] = mass_at(q, i, j);
        }
    }
    // dM/dt along the trajectory: central difference in q along qd.
    let mut m_dot = [[0.0; 3]; 3];
    let mut qp = *q;
    let mut qm = *q;
    for k in 0..3 {
        qp[k] += hq * qd[k];
        qm[k] -= hq * qd[k];
    }
    for i in 0..3 {
        for j in 0..3 {
            m_dot[i][j] = (mass_at(&qp, i, j) - mass_at(&qm, i, j)) / (2.0 * hq);
        }
    }
    let mut tau = [0.0; 3];
    for i in 0..3 {
        // M qdd + Mdot qd
        for j in 0..3 {
            tau[i] += mass[i][j] * qdd[j] + m_dot[i][j] * qd[j];
        }
        // - dT/dq_i + dV/dq_i
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += hg;
        qm[i] -= hg;
        tau[i] -= (t_of(&qp, qd) - t_of(&qm, qd)) / (2.0 * hg);
        tau[i] += (v_of(&qp) - v_of(&qm)) / (2.0 * hg);
    }
    tau
}

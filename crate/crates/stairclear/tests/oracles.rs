//! Oracle comparisons: independent implementations checking the library's
//! numeric kernels at moderate scale. The acceptance suite in the CLI
//! crate re-runs these at the full mandated scale.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stairclear::contact::{inverse_dynamics, LegModel};
use stairclear::geom::{Obb, Vec3};
use stairclear::planning::{astar, VoxelGrid};
use stairclear::primitives::{check_collision_free, check_support, generate_primitives};
use stairclear::tracking::obb_iou;
use stairclear::world::{Movability, Support, TrackedObject};

#[test]
fn astar_matches_dijkstra_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..40 {
        let mut grid = VoxelGrid::new(Vec3::zeros(), 0.05, [15, 15, 15]);
        for x in 0..15 {
            for y in 0..15 {
                for z in 0..15 {
                    if (x, y, z) != (0, 0, 0)
                        && (x, y, z) != (14, 14, 14)
                        && rng.random::<f64>() < 0.2
                    {
                        grid.set_occupied([x, y, z], true);
                    }
                }
            }
        }
        let a = astar(&grid, [0, 0, 0], [14, 14, 14]);
        let d = common::dijkstra_cost(&grid, [0, 0, 0], [14, 14, 14]);
        match (a, d) {
            (Ok(path), Some(cost)) => {
                assert_eq!(path.cost.meters(0.05), cost, "cost mismatch");
            }
            (Err(_), None) => {}
            (a, d) => panic!("reachability mismatch: {a:?} vs {d:?}"),
        }
    }
}

#[test]
fn iou_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let yaw = rng.random_range(-1.0..1.0);
        let a = Obb::new(
            Vec3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            ),
            Vec3::new(
                rng.random_range(0.1..0.4),
                rng.random_range(0.1..0.4),
                rng.random_range(0.1..0.4),
            ),
            yaw,
        );
        let b = Obb::new(
            a.center
                + Vec3::new(
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                ),
            Vec3::new(
                rng.random_range(0.1..0.4),
                rng.random_range(0.1..0.4),
                rng.random_range(0.1..0.4),
            ),
            yaw,
        );
        let exact = obb_iou(&a, &b).unwrap();
        let mc = common::mc_iou(&a, &b, 200_000, &mut rng);
        assert!(
            (exact - mc).abs() < 0.01,
            "exact {exact} vs monte carlo {mc}"
        );
    }
}

#[test]
fn inverse_dynamics_matches_lagrangian_oracle() {
    let model = LegModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..100 {
        let q = [
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        ];
        let qd = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ];
        let qdd = [
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
        ];
        let tau = inverse_dynamics(&model, &q, &qd, &qdd);
        let oracle = common::lagrangian_torques(&model, &q, &qd, &qdd);
        for k in 0..3 {
            assert!(
                (tau[k] - oracle[k]).abs() < 1e-6,
                "joint {k}: {} vs oracle {}",
                tau[k],
                oracle[k]
            );
        }
    }
}

#[test]
fn free_swing_conserves_energy() {
    // Forward dynamics built by inverting the mass matrix from the tested
    // recursion; the energies come from independent kinematics.
    let model = LegModel::default();
    let mass_matrix = |q: &[f64; 3]| {
        let zero_g = LegModel {
            gravity: 0.0,
            ..model
        };
        let mut m = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            let col = inverse_dynamics(&zero_g, q, &[0.0; 3], &e);
            for i in 0..3 {
                m[i][j] = col[i];
            }
        }
        m
    };
    let accel = |q: &[f64; 3], qd: &[f64; 3]| -> [f64; 3] {
        let bias = inverse_dynamics(&model, q, qd, &[0.0; 3]);
        let m = mass_matrix(q);
        solve3(m, [-bias[0], -bias[1], -bias[2]])
    };
    let mut q = [0.4, -0.9, 0.6];
    let mut qd = [0.0; 3];
    let (t0, v0) = common::leg_energy(&model, &q, &qd);
    let e0 = t0 + v0;
    let dt = 5e-4;
    for _ in 0..4000 {
        // RK4 on (q, qd).
        let k1q = qd;
        let k1v = accel(&q, &qd);
        let q2 = add(q, scale(k1q, dt / 2.0));
        let v2 = add(qd, scale(k1v, dt / 2.0));
        let k2q = v2;
        let k2v = accel(&q2, &v2);
        let q3 = add(q, scale(k2q, dt / 2.0));
        let v3 = add(qd, scale(k2v, dt / 2.0));
        let k3q = v3;
        let k3v = accel(&q3, &v3);
        let q4 = add(q, scale(k3q, dt));
        let v4 = add(qd, scale(k3v, dt));
        let k4q = v4;
        let k4v = accel(&q4, &v4);
        for i in 0..3 {
            q[i] += dt / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
            qd[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    let (t1, v1) = common::leg_energy(&model, &q, &qd);
    assert!(
        ((t1 + v1) - e0).abs() < 1e-6 * e0.abs().max(1.0),
        "energy drifted from {e0} to {}",
        t1 + v1
    );
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    // Cramer's rule.
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    let mut out = [0.0; 3];
    for k in 0..3 {
        let mut mk = m;
        for r in 0..3 {
            mk[r][k] = b[r];
        }
        out[k] = det(mk) / d;
    }
    out
}

#[test]
fn primitives_pass_brute_force_sweep_on_random_scenes() {
    // Smaller version of the acceptance sweep: every pose along every
    // primitive passes both checks at 1 mm resolution, one more step fails.
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for scene in 0..25 {
        let width = rng.random_range(0.8..1.5);
        let tread = rng.random_range(0.26..0.36);
        let mut world = common::world_with_stair(
            rng.random_range(3..6),
            tread,
            rng.random_range(0.14..0.19),
            width,
            rng.random_range(-0.9..0.9),
        );
        let num_steps = world.staircases[0].num_steps;
        let yaw = world.staircases[0].yaw;
        let mut next_id = 0u64;
        for _ in 0..rng.random_range(1..3usize) {
            let step = rng.random_range(1..=num_steps);
            let half = Vec3::new(
                rng.random_range(0.05..(tread / 2.0 - 0.02)),
                rng.random_range(0.06..0.16),
                rng.random_range(0.06..0.14),
            );
            let lateral = rng.random_range((half.y + 0.02)..(width - half.y - 0.02));
            let stair = &world.staircases[0];
            let local_x = (step as f64 - 0.5) * stair.tread_depth;
            let center2 = stairclear::geom::rotate2(
                stairclear::geom::Vec2::new(local_x, lateral),
                yaw,
            );
            let obb = Obb::new(
                Vec3::new(center2.x, center2.y, stair.tread_height(step) + half.z),
                half,
                yaw,
            );
            if !check_collision_free(&obb, &world, None) {
                continue;
            }
            world.objects.push(TrackedObject {
                id: next_id,
                cloud: vec![obb.center],
                obb,
                movability: Movability::PotentiallyMovable { primitives: vec![] },
                supporting: Support::Step {
                    staircase: 0,
                    step,
                },
                last_update_time: 0.0,
                predicted_only: false,
            });
            next_id += 1;
        }
        for object in world.objects.clone() {
            let prims = generate_primitives(&object, &world, 0.02).unwrap();
            for prim in prims {
                let total = prim.length();
                let mut d = 0.0;
                while d <= total + 1e-9 {
                    let pose = object.obb.translated(prim.axis * d);
                    assert!(
                        check_collision_free(&pose, &world, Some(object.id))
                            && check_support(&pose, &world),
                        "scene {scene}: invalid pose at {d} of {total}"
                    );
                    d += 0.001;
                }
                let beyond = object.obb.translated(prim.axis * (total + 0.02));
                assert!(
                    !check_collision_free(&beyond, &world, Some(object.id))
                        || !check_support(&beyond, &world),
                    "scene {scene}: primitive not maximal"
                );
            }
        }
    }
}

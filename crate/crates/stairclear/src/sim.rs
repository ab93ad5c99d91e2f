//! Deterministic environment oracle: quasi-static push physics, synthetic
//! occlusion-aware depth sensing, and noise/drift injection. Produces the
//! phenomena the pipeline must survive — partial pushes, slips, immovable
//! objects, objects lost outside the field of view.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::contact::{inverse_dynamics, jt_force, LegModel, LegState};
use crate::geom::{rotate2, xy, Obb, Vec2, Vec3};
use crate::perception::{PointCloud, SensorPose};
use crate::world::WorldModel;

/// How a push is allowed to degrade for one object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlipPlan {
    /// Rigid coupling for the entire push.
    None,
    /// The object follows the foot until it has covered this fraction of
    /// the commanded path, then detaches (the foot slides past).
    StopAtFraction(f64),
    /// The object covers (1 - f) of each foot increment until contact
    /// breaks.
    PerTickFraction(f64),
}

/// Scenario-level slip behavior, resolved into a [`SlipPlan`] per push.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlipSpec {
    Fixed(SlipPlan),
    /// With `probability`, stop at a fraction drawn uniformly from the
    /// given range; otherwise couple rigidly.
    Random { probability: f64, fraction: (f64, f64) },
}

impl SlipSpec {
    pub const NONE: SlipSpec = SlipSpec::Fixed(SlipPlan::None);
}

/// Ground-truth description of one object.
#[derive(Clone, Debug)]
pub struct ObjectTruth {
    pub name: String,
    pub obb: Obb,
    pub mass: f64,
    pub movable_truth: bool,
    /// Resistance force magnitude (N) felt by the foot while pushing.
    pub contact_force: f64,
    pub slip: SlipSpec,
    /// Surface sampling density for the synthetic depth sensor, points/m^2.
    pub density: f64,
}

/// Synthetic depth camera model.
#[derive(Clone, Copy, Debug)]
pub struct SensorModel {
    /// Full horizontal field of view, radians.
    pub fov: f64,
    pub range: f64,
    /// Per-coordinate Gaussian noise sigma, meters.
    pub noise_sigma: f64,
    /// Stair/ground sampling density, points/m^2.
    pub density: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            fov: 110.0_f64.to_radians(),
            range: 4.0,
            noise_sigma: 0.01,
            density: 2500.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimClock {
    pub t: f64,
    pub dt: f64,
}

impl SimClock {
    pub fn new(dt: f64) -> Self {
        assert!(dt > 0.0);
        Self { t: 0.0, dt }
    }

    pub fn tick(&mut self) {
        self.t += self.dt;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    Navigation,
    /// The manipulated object is fully hidden by the leg during a push.
    Pushing { hidden: usize },
}

/// Per-push coupling state between the foot and one truth object.
#[derive(Clone, Debug)]
pub struct PushProgress {
    /// Commanded primitive length for this push.
    pub commanded: f64,
    /// Object travel so far.
    pub travel: f64,
    /// Slip plan resolved for this push.
    pub slip: SlipPlan,
    /// Object no longer follows the foot (slip consumed its budget).
    pub detached: bool,
}

impl PushProgress {
    pub fn new(commanded: f64, slip: SlipPlan) -> Self {
        Self {
            commanded,
            travel: 0.0,
            slip,
            detached: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StepResult {
    /// Foot pressed a non-yielding object this tick.
    pub resisting: bool,
    /// Object displacement applied this tick (along the push axis).
    pub moved: f64,
}

/// Contact tolerance between the foot point and the trailing face.
pub const CONTACT_TOL: f64 = 0.01;

/// True when the foot point touches the trailing face of `obb` for a push
/// along `axis`.
pub fn foot_on_trailing_face(obb: &Obb, axis: Vec3, foot: Vec3) -> bool {
    let half_along = obb.half_extents.y;
    let face_center = obb.center - axis * half_along;
    let offset = foot - face_center;
    let along = offset.dot(&axis);
    // Slight penetration is allowed: the face moves with the foot.
    if !(-CONTACT_TOL..=CONTACT_TOL).contains(&along) {
        return false;
    }
    // Within the face rectangle (ascent width and height), with margin.
    let lateral = offset - axis * along;
    let horiz = xy(lateral).norm();
    horiz <= obb.half_extents.x + 0.02 && offset.z.abs() <= obb.half_extents.z + 0.02
}

/// Advance one object for one foot increment. Immovable objects (or those
/// beyond the capability mass) never move and resist; movable objects
/// translate with the foot under the slip plan, stopping rather than
/// interpenetrating static geometry or another object, and falling when
/// support is lost.
pub fn step_push(
    truth: &mut ObjectTruth,
    foot: Vec3,
    foot_prev: Vec3,
    axis: Vec3,
    capability_mass: f64,
    world: &WorldModel,
    other_objects: &[Obb],
    progress: &mut PushProgress,
) -> StepResult {
    if !truth.movable_truth || truth.mass > capability_mass {
        return StepResult {
            resisting: true,
            moved: 0.0,
        };
    }
    if progress.detached {
        return StepResult::default();
    }
    let delta = (foot - foot_prev).dot(&axis);
    if delta <= 0.0 {
        return StepResult::default();
    }
    let mut allowed = match progress.slip {
        SlipPlan::None => delta,
        SlipPlan::StopAtFraction(f) => {
            let budget = (f * progress.commanded - progress.travel).max(0.0);
            if budget <= 1e-12 {
                progress.detached = true;
                return StepResult::default();
            }
            delta.min(budget)
        }
        SlipPlan::PerTickFraction(f) => delta * (1.0 - f).clamp(0.0, 1.0),
    };
    // Never interpenetrate static geometry or another truth object.
    let candidate = truth.obb.translated(axis * allowed);
    let blocked = world
        .stair_solids()
        .iter()
        .any(|s| crate::geom::boxes_intersect(&candidate, s, crate::world::COLLISION_PEN_TOL))
        || other_objects
            .iter()
            .any(|o| crate::geom::boxes_intersect(&candidate, o, crate::world::COLLISION_PEN_TOL));
    if blocked {
        allowed = 0.0;
    }
    if allowed <= 0.0 {
        return StepResult {
            resisting: true,
            moved: 0.0,
        };
    }
    truth.obb = truth.obb.translated(axis * allowed);
    progress.travel += allowed;
    if let SlipPlan::StopAtFraction(f) = progress.slip {
        if progress.travel >= f * progress.commanded - 1e-12 {
            progress.detached = true;
        }
    }
    // Support loss: drop to the highest surface below the footprint center.
    if !crate::primitives::check_support(&truth.obb, world) {
        if let Some(h) = world.surface_height_at(xy(truth.obb.center)) {
            let new_z = h + truth.obb.half_extents.z;
            if new_z < truth.obb.center.z {
                truth.obb.center.z = new_z;
            }
        }
    }
    StepResult {
        resisting: false,
        moved: allowed,
    }
}

/// Sample the visible surfaces of the scene into a registered point cloud.
/// Back faces are culled per surface normal; points outside the horizontal
/// field of view or beyond range are dropped; in pushing mode the
/// manipulated object contributes nothing (the leg hides it).
#[allow(clippy::too_many_arguments)]
pub fn render_cloud(
    truths: &[ObjectTruth],
    world: &WorldModel,
    sensor: &SensorModel,
    camera: &SensorPose,
    mode: RenderMode,
    registration_offset: Vec2,
    rng: &mut ChaCha8Rng,
) -> PointCloud {
    let mut points = Vec::new();
    let cam = camera.position;
    let noise = Normal::new(0.0, sensor.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut emit = |p: Vec3, rng: &mut ChaCha8Rng| {
        let rel = p - cam;
        if rel.norm() > sensor.range {
            return;
        }
        let angle = wrap_angle(rel.y.atan2(rel.x) - camera.yaw);
        if angle.abs() > sensor.fov / 2.0 {
            return;
        }
        let noisy = if sensor.noise_sigma > 0.0 {
            p + Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng))
        } else {
            p
        };
        points.push(noisy - Vec3::new(registration_offset.x, registration_offset.y, 0.0));
    };

    // Ground patch around the camera, clipped to the extent.
    let g = &world.ground;
    let lo = Vec2::new(
        g.extent.0.x.max(cam.x - sensor.range),
        g.extent.0.y.max(cam.y - sensor.range),
    );
    let hi = Vec2::new(
        g.extent.1.x.min(cam.x + sensor.range),
        g.extent.1.y.min(cam.y + sensor.range),
    );
    if hi.x > lo.x && hi.y > lo.y && cam.z > g.height {
        sample_rect_grid(lo, hi, sensor.density, |x, y, rng| {
            emit(Vec3::new(x, y, g.height), rng)
        }, rng);
    }

    for stair in &world.staircases {
        let ascent = stair.ascent_axis();
        // Tread tops (visible from above).
        for k in 1..=stair.num_steps {
            if cam.z > stair.tread_height(k) {
                let rect = stair.tread_rect(k);
                sample_yawed_rect(&rect, sensor.density, |p2, rng| {
                    emit(Vec3::new(p2.x, p2.y, stair.tread_height(k)), rng)
                }, rng);
            }
            // Riser front faces (visible from downhill).
            let (x_local, z_lo, z_hi) = stair.riser_plane(k);
            let face_center2 = xy(stair.origin)
                + ascent * x_local
                + stair.step_axis() * (stair.width / 2.0);
            if (xy(cam) - face_center2).dot(&ascent) < 0.0 {
                let nx = ((stair.width * (z_hi - z_lo)) * sensor.density).sqrt();
                let n_w = (stair.width / (z_hi - z_lo)).sqrt() * nx;
                let n_h = (nx * nx / n_w).ceil().max(2.0) as usize;
                let n_w = n_w.ceil().max(2.0) as usize;
                for i in 0..n_w {
                    for j in 0..n_h {
                        let w = (i as f64 + 0.5) / n_w as f64 * stair.width;
                        let z = z_lo + (j as f64 + 0.5) / n_h as f64 * (z_hi - z_lo);
                        let p2 = xy(stair.origin) + ascent * x_local + stair.step_axis() * w;
                        emit(Vec3::new(p2.x, p2.y, z), rng);
                    }
                }
            }
        }
    }

    for (i, truth) in truths.iter().enumerate() {
        if let RenderMode::Pushing { hidden } = mode {
            if hidden == i {
                continue;
            }
        }
        sample_box_faces(&truth.obb, truth.density, cam, &mut emit, rng);
    }

    PointCloud {
        points,
        sensor_pose: SensorPose {
            position: cam - Vec3::new(registration_offset.x, registration_offset.y, 0.0),
            yaw: camera.yaw,
        },
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

fn sample_rect_grid(
    lo: Vec2,
    hi: Vec2,
    density: f64,
    mut f: impl FnMut(f64, f64, &mut ChaCha8Rng),
    rng: &mut ChaCha8Rng,
) {
    let w = hi.x - lo.x;
    let h = hi.y - lo.y;
    let nx = ((w * density.sqrt()).ceil() as usize).max(1);
    let ny = ((h * density.sqrt()).ceil() as usize).max(1);
    for i in 0..nx {
        for j in 0..ny {
            f(
                lo.x + (i as f64 + 0.5) / nx as f64 * w,
                lo.y + (j as f64 + 0.5) / ny as f64 * h,
                rng,
            );
        }
    }
}

fn sample_yawed_rect(
    rect: &crate::geom::YawedRect,
    density: f64,
    mut f: impl FnMut(Vec2, &mut ChaCha8Rng),
    rng: &mut ChaCha8Rng,
) {
    let nx = ((2.0 * rect.half.x * density.sqrt()).ceil() as usize).max(1);
    let ny = ((2.0 * rect.half.y * density.sqrt()).ceil() as usize).max(1);
    for i in 0..nx {
        for j in 0..ny {
            let local = Vec2::new(
                -rect.half.x + (i as f64 + 0.5) / nx as f64 * 2.0 * rect.half.x,
                -rect.half.y + (j as f64 + 0.5) / ny as f64 * 2.0 * rect.half.y,
            );
            f(rect.center + rotate2(local, rect.yaw), rng);
        }
    }
}

/// Sample the top and the camera-facing side faces of an upright box.
fn sample_box_faces(
    obb: &Obb,
    density: f64,
    cam: Vec3,
    emit: &mut impl FnMut(Vec3, &mut ChaCha8Rng),
    rng: &mut ChaCha8Rng,
) {
    // Top face.
    if cam.z > obb.z_max() {
        let rect = obb.footprint();
        sample_yawed_rect(&rect, density, |p2, rng| {
            emit(Vec3::new(p2.x, p2.y, obb.z_max()), rng)
        }, rng);
    }
    // Side faces: local +x, -x, +y, -y.
    let h = obb.half_extents;
    for (normal_local, u_local, half_u, half_v) in [
        (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), h.y, h.z),
        (Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0), h.y, h.z),
        (Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0), h.x, h.z),
        (Vec2::new(0.0, -1.0), Vec2::new(1.0, 0.0), h.x, h.z),
    ] {
        let normal = rotate2(normal_local, obb.yaw);
        let u = rotate2(u_local, obb.yaw);
        let offset = match normal_local {
            n if n.x.abs() > 0.0 => h.x,
            _ => h.y,
        };
        let face_center2 = xy(obb.center) + normal * offset;
        if (xy(cam) - face_center2).dot(&normal) <= 0.0 {
            continue;
        }
        let nu = ((2.0 * half_u * density.sqrt()).ceil() as usize).max(1);
        let nv = ((2.0 * half_v * density.sqrt()).ceil() as usize).max(1);
        for i in 0..nu {
            for j in 0..nv {
                let a = -half_u + (i as f64 + 0.5) / nu as f64 * 2.0 * half_u;
                let b = -half_v + (j as f64 + 0.5) / nv as f64 * 2.0 * half_v;
                let p2 = face_center2 + u * a;
                emit(Vec3::new(p2.x, p2.y, obb.center.z + b), rng);
            }
        }
    }
}

/// Measured actuator torques: the rigid-body model torques plus the foot
/// force mapped through the Jacobian transpose plus Gaussian noise.
pub fn measured_torques(
    model: &LegModel,
    state: &LegState,
    external_force: Vec2,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> [f64; 3] {
    let tau_model = inverse_dynamics(model, &state.q, &state.qd, &state.qdd);
    let jt = jt_force(model, &state.q, external_force);
    let mut out = [0.0; 3];
    for k in 0..3 {
        let noise = if noise_sigma > 0.0 {
            Normal::new(0.0, noise_sigma).unwrap().sample(rng)
        } else {
            0.0
        };
        out[k] = tau_model[k] + jt[k] + noise;
    }
    out
}

/// Derive a per-trial seed stream from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    // SplitMix64 over the combined words.
    let mut z = master
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Everything the executor needs from the environment for one trial.
#[derive(Clone, Debug)]
pub struct TrialSim {
    pub truths: Vec<ObjectTruth>,
    /// world object id -> truth index.
    pub id_map: std::collections::BTreeMap<u64, usize>,
    pub sensor: SensorModel,
    pub clock: SimClock,
    pub leg: LegModel,
    pub torque_noise_sigma: f64,
    pub force_scale: f64,
    pub capability_mass: f64,
    pub drift_sigma: f64,
    /// Scan-to-map registration residual sigma: scans are matched against
    /// the staircase model, leaving only a small residual on the cloud.
    pub registration_sigma: f64,
    /// Current odometry error: physical poses sit at believed + drift.
    pub drift: Vec2,
    pub robot: Option<crate::executor::RobotPose>,
    rng_noise: ChaCha8Rng,
    rng_event: ChaCha8Rng,
}

impl TrialSim {
    pub fn new(truths: Vec<ObjectTruth>, sensor: SensorModel, dt: f64, seed: u64) -> Self {
        use rand::SeedableRng;
        Self {
            truths,
            id_map: Default::default(),
            sensor,
            clock: SimClock::new(dt),
            leg: LegModel::default(),
            torque_noise_sigma: 0.3,
            force_scale: 1.0,
            capability_mass: 8.0,
            drift_sigma: 0.01,
            registration_sigma: 0.002,
            drift: Vec2::zeros(),
            robot: None,
            rng_noise: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
            rng_event: ChaCha8Rng::seed_from_u64(derive_seed(seed, 2)),
        }
    }

    pub fn truth_of(&self, object_id: u64) -> Option<&ObjectTruth> {
        self.id_map.get(&object_id).map(|&i| &self.truths[i])
    }

    /// Redraw the odometry drift, as happens at each navigation alignment.
    pub fn redraw_drift(&mut self) {
        if self.drift_sigma > 0.0 {
            let n = Normal::new(0.0, self.drift_sigma).unwrap();
            self.drift = Vec2::new(n.sample(&mut self.rng_event), n.sample(&mut self.rng_event));
        }
    }

    /// Resolve the slip plan for the coming push on `truth_idx`.
    pub fn draw_slip(&mut self, truth_idx: usize) -> SlipPlan {
        match self.truths[truth_idx].slip {
            SlipSpec::Fixed(plan) => plan,
            SlipSpec::Random { probability, fraction } => {
                let roll: f64 = self.rng_event.random();
                if roll < probability {
                    let f = if fraction.1 > fraction.0 {
                        self.rng_event.random_range(fraction.0..fraction.1)
                    } else {
                        fraction.0
                    };
                    SlipPlan::StopAtFraction(f)
                } else {
                    SlipPlan::None
                }
            }
        }
    }

    /// Render from the believed camera pose. The physical camera sits at
    /// the believed pose plus the odometry drift; the cloud is registered
    /// against the staircase model, leaving only a small residual offset.
    pub fn render_with_world(
        &mut self,
        world: &WorldModel,
        camera: &SensorPose,
        mode: RenderMode,
    ) -> PointCloud {
        let physical = SensorPose {
            position: camera.position + Vec3::new(self.drift.x, self.drift.y, 0.0),
            yaw: camera.yaw,
        };
        let registration = if self.registration_sigma > 0.0 {
            let n = Normal::new(0.0, self.registration_sigma).unwrap();
            Vec2::new(n.sample(&mut self.rng_noise), n.sample(&mut self.rng_noise))
        } else {
            Vec2::zeros()
        };
        render_cloud(
            &self.truths,
            world,
            &self.sensor,
            &physical,
            mode,
            registration,
            &mut self.rng_noise,
        )
    }

    pub fn measured_torques(&mut self, state: &LegState, external_force: Vec2) -> [f64; 3] {
        measured_torques(
            &self.leg,
            state,
            external_force,
            self.torque_noise_sigma,
            &mut self.rng_noise,
        )
    }
}

//! Turn a parsed scenario into the world model, ground-truth objects and
//! executor configuration for one trial.

use stairclear::executor::{ExecutorConfig, PredictionMode, RobotPose};
use stairclear::geom::{rotate2, xy, Obb, Vec2, Vec3};
use stairclear::sim::{ObjectTruth, SensorModel, SlipPlan, SlipSpec, TrialSim};
use stairclear::world::{GroundPlane, Staircase, WorldModel};

use crate::config::{ObjectConfig, ScenarioConfig};

pub fn build_world(cfg: &ScenarioConfig) -> WorldModel {
    let staircases = cfg
        .staircases
        .iter()
        .enumerate()
        .map(|(i, s)| Staircase {
            id: i as u32,
            num_steps: s.num_steps,
            tread_depth: s.tread_depth,
            riser_height: s.riser_height,
            width: s.width,
            origin: Vec3::new(s.origin[0], s.origin[1], s.origin[2]),
            yaw: s.yaw,
            left_wall: s.left_wall,
            right_wall: s.right_wall,
        })
        .collect();
    let ground = GroundPlane {
        height: cfg.ground.height,
        extent: (
            Vec2::new(cfg.ground.extent[0], cfg.ground.extent[1]),
            Vec2::new(cfg.ground.extent[2], cfg.ground.extent[3]),
        ),
    };
    let mut world = WorldModel::new(staircases, ground);
    world.size_limits = cfg.size_limits;
    world
}

/// World-frame pose of a configured object on the first staircase.
pub fn object_truth_obb(cfg: &ScenarioConfig, o: &ObjectConfig) -> Obb {
    let s = &cfg.staircases[0];
    let origin = Vec3::new(s.origin[0], s.origin[1], s.origin[2]);
    let (x_local, z) = if o.step == 0 {
        (o.ascent_offset, cfg.ground.height + o.dims[2] / 2.0)
    } else {
        (
            (o.step as f64 - 0.5) * s.tread_depth + o.ascent_offset,
            origin.z + o.step as f64 * s.riser_height + o.dims[2] / 2.0,
        )
    };
    let local = Vec2::new(x_local, o.lateral);
    let world2 = xy(origin) + rotate2(local, s.yaw);
    Obb::new(
        Vec3::new(world2.x, world2.y, z),
        Vec3::new(o.dims[0] / 2.0, o.dims[1] / 2.0, o.dims[2] / 2.0),
        s.yaw,
    )
}

pub fn build_truths(cfg: &ScenarioConfig) -> Vec<ObjectTruth> {
    cfg.objects
        .iter()
        .map(|o| ObjectTruth {
            name: o.name.clone(),
            obb: object_truth_obb(cfg, o),
            mass: o.mass,
            movable_truth: o.movable,
            contact_force: o.contact_force,
            slip: if o.slip_prob > 0.0 {
                SlipSpec::Random {
                    probability: o.slip_prob,
                    fraction: o.slip_frac,
                }
            } else {
                SlipSpec::Fixed(SlipPlan::None)
            },
            density: o.density,
        })
        .collect()
}

pub fn build_sensor(cfg: &ScenarioConfig) -> SensorModel {
    SensorModel {
        fov: cfg.sensor.fov_deg.to_radians(),
        range: cfg.sensor.range,
        noise_sigma: cfg.sensor.noise_sigma,
        density: cfg.sensor.density,
    }
}

pub fn build_executor_config(cfg: &ScenarioConfig, mode: PredictionMode) -> ExecutorConfig {
    ExecutorConfig {
        partial_push_thresh: cfg.executor.partial_push_thresh,
        stall_window: cfg.executor.stall_window,
        stall_motion_eps: cfg.executor.stall_motion_eps,
        max_retries: cfg.executor.max_retries,
        foot_speed: cfg.executor.foot_speed,
        standoff: cfg.executor.standoff,
        mode,
        detector_threshold: cfg.detector.threshold,
        detector_sustain: cfg.detector.sustain,
        ..ExecutorConfig::default()
    }
}

pub fn build_sim(cfg: &ScenarioConfig, trial_seed: u64) -> TrialSim {
    let mut sim = TrialSim::new(build_truths(cfg), build_sensor(cfg), cfg.sim.dt, trial_seed);
    sim.torque_noise_sigma = cfg.detector.torque_noise_sigma;
    sim.force_scale = cfg.sim.force_scale;
    sim.capability_mass = cfg.sim.capability_mass;
    sim.drift_sigma = cfg.sim.drift_sigma;
    sim.registration_sigma = cfg.sim.registration_sigma;
    sim
}

/// Survey pose in front of the first staircase, facing up the ascent.
pub fn initial_robot_pose(cfg: &ScenarioConfig) -> RobotPose {
    let s = &cfg.staircases[0];
    let origin = Vec3::new(s.origin[0], s.origin[1], s.origin[2]);
    let local = Vec2::new(-1.2, s.width / 2.0);
    let world2 = xy(origin) + rotate2(local, s.yaw);
    RobotPose {
        position: Vec3::new(world2.x, world2.y, cfg.ground.height),
        yaw: s.yaw,
    }
}

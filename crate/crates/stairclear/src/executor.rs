//! Per-push task execution: align, plan, push with contact monitoring and
//! stall-based reclassification, retract, re-perceive, and retry partial
//! pushes from the top.

use thiserror::Error;

use crate::contact::{norm3, ContactDetector, LegState};
use crate::geom::{rotate2, xy, Vec2, Vec3};
use crate::perception::{perceive, PerceptionParams, SensorPose};
use crate::planning::{plan_foot_trajectory, plan_return, Phase, PlanError, PlanParams};
use crate::primitives::{MotionPrimitive, PushDirection};
use crate::sim::{
    foot_on_trailing_face, step_push, PushProgress, RenderMode, SlipPlan, TrialSim,
};
use crate::tracking::{
    begin_interaction, finalize_interaction, obb_iou, update_prediction, FinalizeOutcome,
    PredictionState, TrackerParams,
};
use crate::world::{MovabilityTag, WorldModel};

#[derive(Debug, Error, PartialEq)]
pub enum ExecutorError {
    #[error("no valid standoff pose for alignment")]
    NoStandoffPose,
    #[error("unknown object id {0}")]
    UnknownObject(u64),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// One entry of a task plan: push `object_id` along its `primitive_index`-th
/// primitive.
#[derive(Clone, Debug)]
pub struct ManipulationTask {
    pub object_id: u64,
    pub primitive_index: usize,
    pub retries_used: u32,
}

impl ManipulationTask {
    pub fn new(object_id: u64, primitive_index: usize) -> Self {
        Self {
            object_id,
            primitive_index,
            retries_used: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionMode {
    /// Proprioceptive prediction driven by contact feedback.
    Feedback,
    /// Open-loop baseline: the object is predicted at the primitive end.
    OpenLoopBaseline,
}

#[derive(Clone, Debug)]
pub struct ExecutorConfig {
    /// Distance between the tracked pose and the expected end above which
    /// the push counts as partial and is retried.
    pub partial_push_thresh: f64,
    /// Contact with no foot motion for this long reclassifies the object.
    pub stall_window: f64,
    /// Foot motion below this over the window counts as unchanged.
    pub stall_motion_eps: f64,
    pub max_retries: u32,
    pub foot_speed: f64,
    /// Robot standoff from the object along the ascent axis.
    pub standoff: f64,
    pub mode: PredictionMode,
    pub detector_threshold: f64,
    pub detector_sustain: f64,
    pub plan: PlanParams,
    pub perception: PerceptionParams,
    pub tracker: TrackerParams,
    pub collect_ticks: bool,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            partial_push_thresh: 0.10,
            stall_window: 5.0,
            stall_motion_eps: 0.01,
            max_retries: 3,
            foot_speed: 0.1,
            standoff: 0.45,
            mode: PredictionMode::Feedback,
            detector_threshold: 4.0,
            detector_sustain: 0.1,
            plan: PlanParams::default(),
            perception: PerceptionParams::default(),
            tracker: TrackerParams::default(),
            collect_ticks: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushOutcome {
    /// Tracked pose reached the expected end (possibly after retries).
    Completed,
    /// Stall detected; the object is now static in the world model.
    ReclassifiedStatic,
    /// Retries exhausted with the object still short of the expected end.
    Retried(u32),
    /// Re-detection failed and retries are exhausted.
    LostTrack,
    /// Alignment or path planning failed.
    PlanFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leg {
    FrontLeft,
    FrontRight,
}

/// Pushing right moves the object toward the robot's right, so the foot
/// starts at the object's left face: the front-left leg. Mirrored for
/// pushing left.
pub fn select_manipulation_leg(primitive: &MotionPrimitive) -> Leg {
    match primitive.direction {
        PushDirection::Right => Leg::FrontLeft,
        PushDirection::Left => Leg::FrontRight,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotPose {
    pub position: Vec3,
    pub yaw: f64,
}

impl RobotPose {
    /// Front-mounted camera pose.
    pub fn camera(&self) -> SensorPose {
        let fwd = rotate2(Vec2::new(1.0, 0.0), self.yaw);
        SensorPose {
            position: self.position + Vec3::new(fwd.x * 0.05, fwd.y * 0.05, 0.85),
            yaw: self.yaw,
        }
    }

    /// Shoulder of the manipulating leg, origin of the leg plane.
    pub fn shoulder(&self) -> Vec3 {
        self.position + Vec3::new(0.0, 0.0, 0.62)
    }
}

/// Place the robot at the standoff distance from the object along the
/// ascent axis, facing it, and redraw the odometry drift (the navigation
/// move re-registers the world).
pub fn align_robot(
    world: &WorldModel,
    object_id: u64,
    sim: &mut TrialSim,
    standoff: f64,
) -> Result<RobotPose, ExecutorError> {
    let object = world
        .object(object_id)
        .ok_or(ExecutorError::UnknownObject(object_id))?;
    let yaw = world.stair_yaw_at(xy(object.obb.center)).unwrap_or(0.0);
    let ascent = rotate2(Vec2::new(1.0, 0.0), yaw);
    let base2 = xy(object.obb.center) - ascent * standoff;
    let height = world
        .surface_height_at(base2)
        .ok_or(ExecutorError::NoStandoffPose)?;
    let pose = RobotPose {
        position: Vec3::new(base2.x, base2.y, height),
        yaw,
    };
    // The stance footprint must not sit inside another object.
    let body = crate::geom::Obb::new(
        pose.position + Vec3::new(0.0, 0.0, 0.30),
        Vec3::new(0.14, 0.14, 0.25),
        yaw,
    );
    for other in &world.objects {
        if other.id != object_id && crate::geom::boxes_intersect(&body, &other.obb, 1e-3) {
            return Err(ExecutorError::NoStandoffPose);
        }
    }
    sim.redraw_drift();
    sim.robot = Some(pose);
    Ok(pose)
}

/// Resting foot position in front of the robot, clear of surface inflation.
fn rest_foot_position(pose: &RobotPose, world: &WorldModel, plan: &PlanParams) -> Vec3 {
    let fwd = rotate2(Vec2::new(1.0, 0.0), pose.yaw);
    let p2 = xy(pose.position) + fwd * 0.25;
    let h = world.surface_height_at(p2).unwrap_or(pose.position.z);
    Vec3::new(p2.x, p2.y, h + plan.inflate + 1.5 * plan.resolution)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushEvent {
    Matched,
    Lost,
    Stalled,
    PlanFailed,
}

/// One record per push attempt: the prediction, the visual correction, and
/// the simulator truth for error metrics.
#[derive(Clone, Debug)]
pub struct PushRecord {
    pub task_index: usize,
    pub object_id: u64,
    pub attempt: u32,
    pub event: PushEvent,
    /// Predicted object center used as the association target (odom frame).
    pub predicted_center: Vec3,
    pub corrected_center: Option<Vec3>,
    /// Ground-truth object center (world frame).
    pub truth_center: Option<Vec3>,
    /// |predicted - truth| with the registration offset removed.
    pub prediction_error: Option<f64>,
    pub iou: Option<f64>,
    pub contact_detected: bool,
    pub contact_truth: bool,
    /// Contact time with the foot position unchanged, at abort.
    pub stall_time: f64,
    pub displacement_predicted: f64,
    pub displacement_truth: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct TickRecord {
    pub t: f64,
    pub foot: Vec3,
    pub contact: bool,
    pub residual_norm: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PushReport {
    pub outcome: Option<PushOutcome>,
    pub pushes: Vec<PushRecord>,
    pub ticks: Vec<TickRecord>,
}

#[derive(Clone, Debug, Default)]
pub struct PlanRunReport {
    pub outcomes: Vec<PushOutcome>,
    pub pushes: Vec<PushRecord>,
    pub ticks: Vec<TickRecord>,
}

struct AttemptResult {
    event: PushEvent,
    finalize: Option<FinalizeOutcome>,
    record: PushRecord,
}

/// Execute one manipulation task end to end, retrying partial pushes from
/// alignment, up to the retry cap.
pub fn execute_push(
    task: &mut ManipulationTask,
    world: &mut WorldModel,
    cfg: &ExecutorConfig,
    sim: &mut TrialSim,
    task_index: usize,
) -> PushReport {
    let mut report = PushReport::default();
    let mut lost_previously = false;
    // Resolve the requested direction from the primitive index up front;
    // retries re-fetch the regenerated primitive by direction.
    let direction = match world.object(task.object_id) {
        Some(o) => match o.movability.primitives().get(task.primitive_index) {
            Some(p) => p.direction,
            None => {
                report.outcome = Some(PushOutcome::PlanFailure);
                return report;
            }
        },
        None => {
            report.outcome = Some(PushOutcome::PlanFailure);
            return report;
        }
    };

    loop {
        let attempt = task.retries_used;
        let primitive = match world.object(task.object_id) {
            Some(o) => o
                .movability
                .primitives()
                .iter()
                .find(|p| p.direction == direction)
                .cloned(),
            None => None,
        };
        let Some(primitive) = primitive else {
            if std::env::var_os("STAIRCLEAR_DEBUG").is_some() {
                eprintln!("push attempt {attempt}: no primitive for direction {direction:?}");
            }
            // A dead end right after a failed re-detection is the lost
            // track's fault, not the planner's.
            report.outcome = Some(if lost_previously {
                PushOutcome::LostTrack
            } else {
                PushOutcome::PlanFailure
            });
            return report;
        };

        match run_attempt(task, world, cfg, sim, &primitive, attempt, task_index, &mut report) {
            Err(e) => {
                if std::env::var_os("STAIRCLEAR_DEBUG").is_some() {
                    eprintln!("push attempt {attempt} failed: {e}");
                }
                report.outcome = Some(PushOutcome::PlanFailure);
                return report;
            }
            Ok(result) => {
                let done = match result.event {
                    PushEvent::Stalled => {
                        report.pushes.push(result.record);
                        report.outcome = Some(PushOutcome::ReclassifiedStatic);
                        return report;
                    }
                    _ => result,
                };
                report.pushes.push(done.record);
                match done.finalize {
                    Some(FinalizeOutcome::Matched(new_obb)) => {
                        let dist = (new_obb.center - primitive.expected_end).norm();
                        if dist <= cfg.partial_push_thresh {
                            report.outcome = Some(PushOutcome::Completed);
                            return report;
                        }
                        if task.retries_used < cfg.max_retries {
                            task.retries_used += 1;
                            continue;
                        }
                        report.outcome = Some(PushOutcome::Retried(task.retries_used));
                        return report;
                    }
                    Some(FinalizeOutcome::Lost) | None => {
                        lost_previously = true;
                        if task.retries_used < cfg.max_retries {
                            task.retries_used += 1;
                            continue;
                        }
                        report.outcome = Some(PushOutcome::LostTrack);
                        return report;
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_attempt(
    task: &ManipulationTask,
    world: &mut WorldModel,
    cfg: &ExecutorConfig,
    sim: &mut TrialSim,
    primitive: &MotionPrimitive,
    attempt: u32,
    task_index: usize,
    report: &mut PushReport,
) -> Result<AttemptResult, ExecutorError> {
    let robot = align_robot(world, task.object_id, sim, cfg.standoff)?;
    let _leg = select_manipulation_leg(primitive);
    let rest = rest_foot_position(&robot, world, &cfg.plan);
    let traj = plan_foot_trajectory(rest, primitive, world, &cfg.plan)?;

    let truth_idx = sim.id_map.get(&task.object_id).copied();
    let slip = match truth_idx {
        Some(i) => sim.draw_slip(i),
        None => SlipPlan::None,
    };
    let mut progress = PushProgress::new(primitive.length(), slip);
    let mut detector = ContactDetector::new(cfg.detector_threshold, cfg.detector_sustain);
    let mut prediction: Option<PredictionState> = None;
    let mut leg = LegTracker::new(sim, &robot, primitive.axis, rest);
    let mut foot = rest;
    let mut stall_anchor: Option<(f64, Vec3)> = None;
    let mut contact_detected_ever = false;
    let mut contact_truth_ever = false;
    let mut stalled = false;
    let mut stall_time = 0.0;
    let drift3 = Vec3::new(sim.drift.x, sim.drift.y, 0.0);

    'waypoints: for (wp, phase) in &traj.waypoints {
        let mut guard = 0u32;
        let max_ticks = ((cfg.stall_window + 20.0) / sim.clock.dt) as u32;
        while (foot - wp).norm() > 1e-9 {
            guard += 1;
            if guard > max_ticks {
                return Err(ExecutorError::Plan(PlanError::NoPath));
            }
            sim.clock.tick();
            let t = sim.clock.t;
            let to = wp - foot;
            let dist = to.norm();
            let step = cfg.foot_speed * sim.clock.dt;
            let motion = if dist <= step { to } else { to * (step / dist) };
            let mut next = foot + motion;

            // Physical interaction with the target object.
            let mut f_ext = Vec2::zeros();
            let mut pressing = false;
            if let Some(ti) = truth_idx {
                let advancing = motion.dot(&primitive.axis) > 1e-12;
                let phys_prev = foot + drift3;
                let phys_next = next + drift3;
                let on_face = !progress.detached
                    && foot_on_trailing_face(&sim.truths[ti].obb, primitive.axis, phys_next);
                // Contact engages whenever the advancing foot crosses the
                // face, including late in the approach: perception error
                // can put the believed face on either side of the true one.
                if on_face && advancing && *phase != Phase::Return {
                    let truth_world = world.clone();
                    let others: Vec<crate::geom::Obb> = sim
                        .truths
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != ti)
                        .map(|(_, t)| t.obb)
                        .collect();
                    let mut truth = sim.truths[ti].clone();
                    let result = step_push(
                        &mut truth,
                        phys_next,
                        phys_prev,
                        primitive.axis,
                        sim.capability_mass,
                        &truth_world,
                        &others,
                        &mut progress,
                    );
                    sim.truths[ti] = truth;
                    // Reaction on the foot: push-back along the axis plus
                    // a downward friction component from the face.
                    let f = sim.truths[ti].contact_force * sim.force_scale;
                    if result.resisting {
                        next = foot; // pinned at the face
                        f_ext = Vec2::new(-f, -0.35 * f);
                        pressing = true;
                    } else if result.moved > 0.0 {
                        f_ext = Vec2::new(-f, -0.35 * f);
                        pressing = true;
                    }
                }
            }
            if pressing {
                contact_truth_ever = true;
            }

            // Leg state and residual-based contact detection.
            let leg_state = leg.track(sim, next + drift3);
            let tau_measured = sim.measured_torques(&leg_state, f_ext);
            let residual = crate::contact::residual(
                &tau_measured,
                &sim.leg,
                &leg_state.q,
                &leg_state.qd,
                &leg_state.qdd,
            );
            let in_contact = detector.detect(&residual, t).unwrap_or(false);
            if cfg.collect_ticks {
                report.ticks.push(TickRecord {
                    t,
                    foot: next,
                    contact: in_contact,
                    residual_norm: norm3(&residual),
                });
            }

            if in_contact {
                contact_detected_ever = true;
                if prediction.is_none() {
                    prediction = begin_interaction(world, task.object_id, primitive).ok();
                }
                if cfg.mode == PredictionMode::Feedback {
                    if let Some(state) = prediction.as_mut() {
                        let _ = update_prediction(state, next);
                    }
                }
                // Stall check: contact with the foot position unchanged.
                match stall_anchor {
                    None => stall_anchor = Some((t, next)),
                    Some((t0, p0)) => {
                        if (next - p0).norm() > cfg.stall_motion_eps {
                            stall_anchor = Some((t, next));
                        } else if t - t0 >= cfg.stall_window {
                            stall_time = t - t0;
                            stalled = true;
                            foot = next;
                            break 'waypoints;
                        }
                    }
                }
            } else {
                stall_anchor = None;
            }
            foot = next;
        }
    }

    if stalled {
        let _ = world.set_movability(task.object_id, MovabilityTag::Static);
        retract_best_effort(foot, rest, world, cfg, sim, primitive);
        let truth_center = truth_idx.map(|i| sim.truths[i].obb.center);
        let predicted_center = prediction
            .as_ref()
            .map(|p| p.predicted_obb.center)
            .unwrap_or_else(|| world.object(task.object_id).map(|o| o.obb.center).unwrap_or(foot));
        let record = PushRecord {
            task_index,
            object_id: task.object_id,
            attempt,
            event: PushEvent::Stalled,
            predicted_center,
            corrected_center: None,
            truth_center,
            prediction_error: truth_center.map(|tc| (predicted_center + drift3 - tc).norm()),
            iou: None,
            contact_detected: contact_detected_ever,
            contact_truth: contact_truth_ever,
            stall_time,
            displacement_predicted: prediction.as_ref().map(|p| p.displacement).unwrap_or(0.0),
            displacement_truth: 0.0,
        };
        return Ok(AttemptResult {
            event: PushEvent::Stalled,
            finalize: None,
            record,
        });
    }

    // Push finished: retract with the pushed object assumed at the
    // predicted pose, then take a fresh look.
    let mut return_world = world.clone();
    if let Some(state) = prediction.as_ref() {
        if let Some(o) = return_world.object_mut(task.object_id) {
            o.obb = state.predicted_obb;
        }
    }
    retract_best_effort(foot, rest, &return_world, cfg, sim, primitive);

    let camera = robot.camera();
    let cloud = sim.render_with_world(world, &camera, RenderMode::Navigation);
    let clusters = perceive(&cloud, world, &cfg.perception);

    let mut state = match prediction {
        Some(p) => p,
        None => {
            let obb = world
                .object(task.object_id)
                .map(|o| o.obb)
                .unwrap_or(primitive_start_obb(primitive));
            PredictionState::inactive(task.object_id, obb, primitive.clone())
        }
    };
    if cfg.mode == PredictionMode::OpenLoopBaseline {
        // The baseline always predicts the primitive end, contact or not.
        state.predict_full_push();
    }

    let best_iou = clusters
        .iter()
        .filter_map(|c| obb_iou(&c.obb, &state.predicted_obb).ok())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));

    let outcome = finalize_interaction(&state, &clusters, world, &cfg.tracker, sim.clock.t);
    let truth_center = truth_idx.map(|i| sim.truths[i].obb.center);
    let predicted_center = state.predicted_obb.center;
    let corrected_center = match &outcome {
        FinalizeOutcome::Matched(o) => Some(o.center),
        FinalizeOutcome::Lost => None,
    };
    let event = match &outcome {
        FinalizeOutcome::Matched(_) => PushEvent::Matched,
        FinalizeOutcome::Lost => PushEvent::Lost,
    };
    let record = PushRecord {
        task_index,
        object_id: task.object_id,
        attempt,
        event,
        predicted_center,
        corrected_center,
        truth_center,
        prediction_error: truth_center.map(|tc| (predicted_center + drift3 - tc).norm()),
        iou: best_iou,
        contact_detected: contact_detected_ever,
        contact_truth: contact_truth_ever,
        stall_time: 0.0,
        displacement_predicted: state.displacement,
        displacement_truth: progress.travel,
    };
    Ok(AttemptResult {
        event,
        finalize: Some(outcome),
        record,
    })
}

fn primitive_start_obb(primitive: &MotionPrimitive) -> crate::geom::Obb {
    crate::geom::Obb::new(primitive.path[0], Vec3::new(0.1, 0.1, 0.1), 0.0)
}

/// Retract the foot to the rest pose. Starts with a straight back-off from
/// the face, then an A* path; a vertical lift is tried once when planning
/// fails, and the stub finally just places the foot at rest (the policy
/// layer owns recovery in the real system).
fn retract_best_effort(
    foot: Vec3,
    rest: Vec3,
    world: &WorldModel,
    cfg: &ExecutorConfig,
    sim: &mut TrialSim,
    primitive: &MotionPrimitive,
) {
    let back = foot - primitive.axis * (cfg.plan.inflate + 2.0 * cfg.plan.resolution);
    let starts = [back, back + Vec3::new(0.0, 0.0, 0.1)];
    for start in starts {
        if let Ok(traj) = plan_return(start, rest, world, &cfg.plan) {
            // Time advances with the retraction; nothing else to simulate.
            let mut pos = foot;
            for (wp, _) in traj.waypoints {
                let d = (wp - pos).norm();
                let ticks = (d / (cfg.foot_speed * sim.clock.dt)).ceil() as u64;
                for _ in 0..ticks {
                    sim.clock.tick();
                }
                pos = wp;
            }
            return;
        }
    }
    let d = (rest - foot).norm();
    let ticks = (d / (cfg.foot_speed * sim.clock.dt)).ceil() as u64;
    for _ in 0..ticks {
        sim.clock.tick();
    }
}

/// Kinematic leg-state tracker: damped least-squares IK follows the foot
/// in the vertical plane spanned by the push axis, producing joint
/// trajectories for the torque model.
struct LegTracker {
    axis: Vec3,
    shoulder: Vec3,
    q: [f64; 3],
    qd: [f64; 3],
}

impl LegTracker {
    fn new(sim: &TrialSim, robot: &RobotPose, axis: Vec3, foot: Vec3) -> Self {
        let shoulder = robot.shoulder();
        let mut tracker = Self {
            axis,
            shoulder,
            q: [0.6, -1.8, 0.9],
            qd: [0.0; 3],
        };
        // Settle onto the initial foot position without dynamics.
        let target = tracker.plane_of(foot);
        for _ in 0..200 {
            let cur = crate::contact::foot_position(&sim.leg, &tracker.q);
            let err = target - cur;
            if err.norm() < 1e-6 {
                break;
            }
            let qd = crate::contact::ik_velocity(&sim.leg, &tracker.q, err * 4.0, 0.05);
            for k in 0..3 {
                tracker.q[k] += qd[k] * 0.05;
            }
        }
        tracker.qd = [0.0; 3];
        tracker
    }

    fn plane_of(&self, p: Vec3) -> Vec2 {
        let rel = p - self.shoulder;
        Vec2::new(rel.dot(&self.axis), rel.z)
    }

    fn track(&mut self, sim: &TrialSim, foot: Vec3) -> LegState {
        let dt = sim.clock.dt;
        let target = self.plane_of(foot);
        let cur = crate::contact::foot_position(&sim.leg, &self.q);
        let v_des = (target - cur) / dt;
        // Cap the commanded speed so teleports cannot blow up the state.
        let v_des = if v_des.norm() > 2.0 {
            v_des * (2.0 / v_des.norm())
        } else {
            v_des
        };
        let qd = crate::contact::ik_velocity(&sim.leg, &self.q, v_des, 0.01);
        let mut qdd = [0.0; 3];
        for k in 0..3 {
            qdd[k] = (qd[k] - self.qd[k]) / dt;
            self.q[k] += qd[k] * dt;
        }
        self.qd = qd;
        LegState {
            q: self.q,
            qd,
            qdd,
            tau_measured: [0.0; 3],
        }
    }
}

/// Run a task plan in order. A reclassification or failure never halts the
/// plan: each task gets its own isolated outcome.
pub fn run_task_plan(
    tasks: &mut [ManipulationTask],
    world: &mut WorldModel,
    cfg: &ExecutorConfig,
    sim: &mut TrialSim,
) -> PlanRunReport {
    let mut out = PlanRunReport::default();
    for (i, task) in tasks.iter_mut().enumerate() {
        let report = execute_push(task, world, cfg, sim, i);
        out.outcomes
            .push(report.outcome.unwrap_or(PushOutcome::PlanFailure));
        out.pushes.extend(report.pushes);
        out.ticks.extend(report.ticks);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::PushDirection;

    #[test]
    fn leg_selection_mirrors_direction() {
        let mut prim = MotionPrimitive::stub_for_tests(0);
        prim.direction = PushDirection::Right;
        assert_eq!(select_manipulation_leg(&prim), Leg::FrontLeft);
        prim.direction = PushDirection::Left;
        assert_eq!(select_manipulation_leg(&prim), Leg::FrontRight);
    }
}

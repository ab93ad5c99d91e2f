//! Trial runner: executes a scenario's task plan over many seeded trials,
//! writes per-push and per-trial records plus aggregate summaries, and
//! pairs feedback against the open-loop baseline on identical seeds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use stairclear::executor::{
    run_task_plan, ManipulationTask, PredictionMode, PushOutcome, PushRecord,
};
use stairclear::geom::xy;
use stairclear::perception::perceive;
use stairclear::primitives::{generate_primitives, PushDirection};
use stairclear::sim::{derive_seed, RenderMode};
use stairclear::world::Movability;

use crate::config::ScenarioConfig;
use crate::scenario;

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: u32,
    pub seed: u64,
    pub outcomes: Vec<PushOutcome>,
    pub task_successes: Vec<bool>,
    pub success: bool,
    pub pushes: Vec<PushRecord>,
    pub ticks: Vec<stairclear::executor::TickRecord>,
    /// Object-class name per task index.
    pub task_objects: Vec<String>,
}

pub fn outcome_label(o: &PushOutcome) -> String {
    match o {
        PushOutcome::Completed => "completed".into(),
        PushOutcome::ReclassifiedStatic => "reclassified_static".into(),
        PushOutcome::Retried(k) => format!("retried_{k}"),
        PushOutcome::LostTrack => "lost_track".into(),
        PushOutcome::PlanFailure => "plan_failure".into(),
    }
}

/// Run a single trial of the scenario with the given prediction mode.
/// Trial seeds derive from the master seed only, so feedback and baseline
/// runs of the same trial index share all random draws.
pub fn run_trial(cfg: &ScenarioConfig, mode: PredictionMode, trial: u32) -> TrialResult {
    run_trial_with(cfg, mode, trial, false)
}

/// As [`run_trial`], optionally collecting per-tick executor records.
pub fn run_trial_with(
    cfg: &ScenarioConfig,
    mode: PredictionMode,
    trial: u32,
    collect_ticks: bool,
) -> TrialResult {
    let seed = derive_seed(cfg.seed, trial as u64);
    let mut world = scenario::build_world(cfg);
    let mut sim = scenario::build_sim(cfg, seed);
    let mut exec_cfg = scenario::build_executor_config(cfg, mode);
    exec_cfg.collect_ticks = collect_ticks;

    // Survey scan: discover the clutter and generate primitives.
    let robot = scenario::initial_robot_pose(cfg);
    sim.robot = Some(robot);
    sim.redraw_drift();
    let cloud = sim.render_with_world(&world, &robot.camera(), RenderMode::Navigation);
    let clusters = perceive(&cloud, &world, &exec_cfg.perception);
    for cluster in &clusters {
        let _ = world.insert_object(cluster.points.clone(), cluster.obb, 0.0);
    }
    let ids: Vec<u64> = world.objects.iter().map(|o| o.id).collect();
    for id in ids {
        let object = world.object(id).unwrap();
        if let Movability::PotentiallyMovable { .. } = object.movability {
            if let Ok(prims) = generate_primitives(object, &world, exec_cfg.tracker.primitive_step)
            {
                let _ = world.set_primitives(id, prims);
            }
        }
    }

    // Associate world objects with simulator truths by proximity.
    for object in &world.objects {
        let mut best: Option<(usize, f64)> = None;
        for (ti, truth) in sim.truths.iter().enumerate() {
            let d = (xy(object.obb.center) - xy(truth.obb.center)).norm();
            if d < 0.3 && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((ti, d));
            }
        }
        if let Some((ti, _)) = best {
            sim.id_map.insert(object.id, ti);
        }
    }

    // Resolve the plan: object names to world ids and primitive indices.
    let mut tasks = Vec::new();
    let mut task_objects = Vec::new();
    let mut unresolved = Vec::new();
    for entry in &cfg.plan {
        let want = match entry.direction.as_str() {
            "left" => PushDirection::Left,
            _ => PushDirection::Right,
        };
        let truth_idx = sim.truths.iter().position(|t| t.name == entry.object);
        let world_id = truth_idx.and_then(|ti| {
            sim.id_map
                .iter()
                .find(|(_, &v)| v == ti)
                .map(|(&k, _)| k)
        });
        let resolved = world_id.and_then(|id| {
            world.object(id).and_then(|o| {
                o.movability
                    .primitives()
                    .iter()
                    .position(|p| p.direction == want)
                    .map(|idx| (id, idx))
            })
        });
        match resolved {
            Some((id, idx)) => {
                tasks.push(ManipulationTask::new(id, idx));
                task_objects.push(entry.object.clone());
            }
            None => {
                unresolved.push(entry.object.clone());
                task_objects.push(entry.object.clone());
            }
        }
    }

    let mut report = run_task_plan(&mut tasks, &mut world, &exec_cfg, &mut sim);
    // Unresolved plan entries are plan failures appended in order.
    for _ in &unresolved {
        report.outcomes.push(PushOutcome::PlanFailure);
    }

    // Success per task: pushed to the edge with tracking intact the whole
    // way (an identity loss on any attempt fails the trial even when a
    // blind retry recovers), or a truly immovable object correctly
    // reclassified.
    let task_successes: Vec<bool> = report
        .outcomes
        .iter()
        .enumerate()
        .map(|(i, outcome)| {
            let lost_any = report
                .pushes
                .iter()
                .any(|p| p.task_index == i && p.event == stairclear::executor::PushEvent::Lost);
            match outcome {
                PushOutcome::Completed => !lost_any,
                PushOutcome::ReclassifiedStatic => {
                    let name = task_objects.get(i);
                    !lost_any
                        && sim
                            .truths
                            .iter()
                            .find(|t| Some(&t.name) == name)
                            .map(|t| !t.movable_truth || t.mass > sim.capability_mass)
                            .unwrap_or(false)
                }
                _ => false,
            }
        })
        .collect();
    let success = !task_successes.is_empty() && task_successes.iter().all(|&s| s);

    TrialResult {
        trial,
        seed,
        outcomes: report.outcomes,
        task_successes,
        success,
        pushes: report.pushes,
        ticks: report.ticks,
        task_objects,
    }
}

#[derive(Clone, Debug)]
pub struct ClassStats {
    pub object: String,
    pub pushes: usize,
    pub mean_error: f64,
    pub std_error: f64,
    /// Detector recall: detected / physically-contacted pushes.
    pub recall: f64,
}

#[derive(Clone, Debug)]
pub struct BatchSummary {
    pub scenario: String,
    pub mode: PredictionMode,
    pub trials: u32,
    pub successes: u32,
    pub success_rate: f64,
    pub class_stats: Vec<ClassStats>,
    pub results: Vec<TrialResult>,
}

pub fn mode_label(mode: PredictionMode) -> &'static str {
    match mode {
        PredictionMode::Feedback => "feedback",
        PredictionMode::OpenLoopBaseline => "baseline",
    }
}

/// Population mean and standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn class_statistics(results: &[TrialResult]) -> Vec<ClassStats> {
    let mut names: Vec<String> = Vec::new();
    for r in results {
        for name in &r.task_objects {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
    }
    names
        .iter()
        .map(|name| {
            let mut errors = Vec::new();
            let mut contact_truth = 0usize;
            let mut contact_detected = 0usize;
            let mut pushes = 0usize;
            for r in results {
                for p in &r.pushes {
                    if r.task_objects.get(p.task_index) != Some(name) {
                        continue;
                    }
                    pushes += 1;
                    if let Some(e) = p.prediction_error {
                        errors.push(e);
                    }
                    if p.contact_truth {
                        contact_truth += 1;
                        if p.contact_detected {
                            contact_detected += 1;
                        }
                    }
                }
            }
            let (mean_error, std_error) = mean_std(&errors);
            ClassStats {
                object: name.clone(),
                pushes,
                mean_error,
                std_error,
                recall: if contact_truth > 0 {
                    contact_detected as f64 / contact_truth as f64
                } else {
                    1.0
                },
            }
        })
        .collect()
}

/// Run all trials of a scenario in one mode.
pub fn run_batch_in_memory(cfg: &ScenarioConfig, mode: PredictionMode) -> BatchSummary {
    run_batch_in_memory_with(cfg, mode, false)
}

pub fn run_batch_in_memory_with(
    cfg: &ScenarioConfig,
    mode: PredictionMode,
    collect_ticks: bool,
) -> BatchSummary {
    let results: Vec<TrialResult> = (0..cfg.trials)
        .map(|t| run_trial_with(cfg, mode, t, collect_ticks))
        .collect();
    let successes = results.iter().filter(|r| r.success).count() as u32;
    BatchSummary {
        scenario: cfg.name.clone(),
        mode,
        trials: cfg.trials,
        successes,
        success_rate: successes as f64 / cfg.trials.max(1) as f64,
        class_stats: class_statistics(&results),
        results,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

fn fmt_opt_vec(v: Option<stairclear::Vec3>) -> String {
    match v {
        Some(v) => format!("{:.6},{:.6},{:.6}", v.x, v.y, v.z),
        None => ",,".into(),
    }
}

pub const RECORD_HEADER: &str = "trial,task,object,attempt,event,pred_x,pred_y,pred_z,corr_x,corr_y,corr_z,truth_x,truth_y,truth_z,pred_err,iou,contact_detected,contact_truth,stall_s,disp_pred,disp_truth";

/// Per-push CSV records for a batch.
pub fn records_csv(summary: &BatchSummary) -> String {
    let mut out = String::new();
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for r in &summary.results {
        for p in &r.pushes {
            let event = match p.event {
                stairclear::executor::PushEvent::Matched => "matched",
                stairclear::executor::PushEvent::Lost => "lost",
                stairclear::executor::PushEvent::Stalled => "stalled",
                stairclear::executor::PushEvent::PlanFailed => "plan_failed",
            };
            let object = r
                .task_objects
                .get(p.task_index)
                .cloned()
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{},{},{:.3},{:.6},{:.6}",
                r.trial,
                p.task_index,
                object,
                p.attempt,
                event,
                p.predicted_center.x,
                p.predicted_center.y,
                p.predicted_center.z,
                fmt_opt_vec(p.corrected_center),
                fmt_opt_vec(p.truth_center),
                fmt_opt(p.prediction_error),
                fmt_opt(p.iou),
                p.contact_detected,
                p.contact_truth,
                p.stall_time,
                p.displacement_predicted,
                p.displacement_truth,
            );
        }
    }
    out
}

/// Per-trial CSV: outcome sequence and success flag.
pub fn trials_csv(summary: &BatchSummary) -> String {
    let mut out = String::from("trial,seed,outcomes,success\n");
    for r in &summary.results {
        let outcomes: Vec<String> = r.outcomes.iter().map(outcome_label).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.trial,
            r.seed,
            outcomes.join(";"),
            r.success
        );
    }
    out
}

pub fn summary_csv(summary: &BatchSummary) -> String {
    let mut out =
        String::from("scenario,mode,trials,successes,success_rate,object,pushes,mean_err,std_err,recall\n");
    for c in &summary.class_stats {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{:.6},{:.6},{:.6}",
            summary.scenario,
            mode_label(summary.mode),
            summary.trials,
            summary.successes,
            summary.success_rate,
            c.object,
            c.pushes,
            c.mean_error,
            c.std_error,
            c.recall,
        );
    }
    out
}

pub fn summary_table(summary: &BatchSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {}  mode {}  trials {}  successes {}  success rate {:.1}%",
        summary.scenario,
        mode_label(summary.mode),
        summary.trials,
        summary.successes,
        100.0 * summary.success_rate
    );
    let _ = writeln!(
        out,
        "{:<12} {:>7} {:>12} {:>12} {:>8}",
        "object", "pushes", "mean err (m)", "std err (m)", "recall"
    );
    for c in &summary.class_stats {
        let _ = writeln!(
            out,
            "{:<12} {:>7} {:>12.4} {:>12.4} {:>8.3}",
            c.object, c.pushes, c.mean_error, c.std_error, c.recall
        );
    }
    out
}

/// Output files for one batch run.
pub fn write_batch(summary: &BatchSummary, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let stem = format!("{}_{}", summary.scenario, mode_label(summary.mode));
    let files = [
        (format!("{stem}_records.csv"), records_csv(summary)),
        (format!("{stem}_trials.csv"), trials_csv(summary)),
        (format!("{stem}_summary.csv"), summary_csv(summary)),
        (format!("{stem}_summary.txt"), summary_table(summary)),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}

/// Per-tick CSV for all trials of a batch (empty unless ticks were
/// collected).
pub fn ticks_csv(summary: &BatchSummary) -> String {
    let mut out = String::from("trial,t,foot_x,foot_y,foot_z,contact,residual_norm\n");
    for r in &summary.results {
        for t in &r.ticks {
            let _ = writeln!(
                out,
                "{},{:.3},{:.6},{:.6},{:.6},{},{:.6}",
                r.trial, t.t, t.foot.x, t.foot.y, t.foot.z, t.contact, t.residual_norm
            );
        }
    }
    out
}

/// Parsed scenario, run in the configured mode, results written to disk.
pub fn run_batch(cfg: &ScenarioConfig, out_dir: &Path) -> Result<BatchSummary> {
    run_batch_to(cfg, out_dir, false)
}

pub fn run_batch_to(cfg: &ScenarioConfig, out_dir: &Path, tick_log: bool) -> Result<BatchSummary> {
    let summary = run_batch_in_memory_with(cfg, cfg.mode, tick_log);
    write_batch(&summary, out_dir)?;
    if tick_log {
        let stem = format!("{}_{}", summary.scenario, mode_label(summary.mode));
        fs::write(out_dir.join(format!("{stem}_ticks.csv")), ticks_csv(&summary))?;
    }
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub feedback: BatchSummary,
    pub baseline: BatchSummary,
}

/// Run the same seed set in both prediction modes.
pub fn compare_modes(cfg: &ScenarioConfig) -> CompareReport {
    CompareReport {
        feedback: run_batch_in_memory(cfg, PredictionMode::Feedback),
        baseline: run_batch_in_memory(cfg, PredictionMode::OpenLoopBaseline),
    }
}

pub fn compare_csv(report: &CompareReport) -> String {
    let mut out = String::from(
        "scenario,object,feedback_mean_err,feedback_std_err,baseline_mean_err,baseline_std_err,feedback_success_rate,baseline_success_rate\n",
    );
    for fc in &report.feedback.class_stats {
        let bc = report
            .baseline
            .class_stats
            .iter()
            .find(|c| c.object == fc.object);
        let (bm, bs) = bc.map(|c| (c.mean_error, c.std_error)).unwrap_or((0.0, 0.0));
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            report.feedback.scenario,
            fc.object,
            fc.mean_error,
            fc.std_error,
            bm,
            bs,
            report.feedback.success_rate,
            report.baseline.success_rate,
        );
    }
    out
}

pub fn compare_table(report: &CompareReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {}  trials {}  success rate: feedback {:.1}%  baseline {:.1}%",
        report.feedback.scenario,
        report.feedback.trials,
        100.0 * report.feedback.success_rate,
        100.0 * report.baseline.success_rate
    );
    let _ = writeln!(
        out,
        "{:<12} {:>22} {:>22}",
        "object", "feedback err (m)", "baseline err (m)"
    );
    for fc in &report.feedback.class_stats {
        let bc = report
            .baseline
            .class_stats
            .iter()
            .find(|c| c.object == fc.object);
        let (bm, bs) = bc.map(|c| (c.mean_error, c.std_error)).unwrap_or((0.0, 0.0));
        let _ = writeln!(
            out,
            "{:<12} {:>13.4} ± {:>6.4} {:>13.4} ± {:>6.4}",
            fc.object, fc.mean_error, fc.std_error, bm, bs
        );
    }
    out
}

pub fn write_compare(report: &CompareReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = write_batch(&report.feedback, out_dir)?;
    written.extend(write_batch(&report.baseline, out_dir)?);
    let stem = report.feedback.scenario.clone();
    for (name, contents) in [
        (format!("{stem}_compare.csv"), compare_csv(report)),
        (format!("{stem}_compare.txt"), compare_table(report)),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}

//! Walk one simulated trial end to end and narrate it: survey scan,
//! clutter detection, primitive generation, the push with contact-based
//! tracking, and the post-push visual update.

use stairclear::executor::{execute_push, ManipulationTask, PredictionMode};
use stairclear::perception::perceive;
use stairclear::primitives::{generate_primitives, PushDirection};
use stairclear::sim::{derive_seed, RenderMode};
use stairclear::world::Movability;
use stairclear_cli::{config, scenario};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "scenarios/crate_a.scn".into());
    let text = std::fs::read_to_string(&path).expect("scenario file");
    let (cfg, _) = config::parse(&text).expect("valid scenario");
    println!("scenario `{}`", cfg.name);

    let seed = derive_seed(cfg.seed, 0);
    let mut world = scenario::build_world(&cfg);
    let mut sim = scenario::build_sim(&cfg, seed);
    let exec_cfg = scenario::build_executor_config(&cfg, PredictionMode::Feedback);

    // Survey scan from in front of the staircase.
    let robot = scenario::initial_robot_pose(&cfg);
    sim.robot = Some(robot);
    sim.redraw_drift();
    let cloud = sim.render_with_world(&world, &robot.camera(), RenderMode::Navigation);
    println!("survey scan: {} points", cloud.points.len());

    let clusters = perceive(&cloud, &world, &exec_cfg.perception);
    println!("clutter clusters: {}", clusters.len());
    for c in &clusters {
        let _ = world.insert_object(c.points.clone(), c.obb, 0.0);
    }
    let ids: Vec<u64> = world.objects.iter().map(|o| o.id).collect();
    for id in ids {
        let object = world.object(id).unwrap();
        if let Movability::PotentiallyMovable { .. } = object.movability {
            if let Ok(prims) = generate_primitives(object, &world, exec_cfg.tracker.primitive_step)
            {
                println!(
                    "object {id}: {} primitive(s): {}",
                    prims.len(),
                    prims
                        .iter()
                        .map(|p| format!("{} ({:.2} m)", p.direction.label(), p.length()))
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                let _ = world.set_primitives(id, prims);
            }
        }
    }

    // Pair discovered objects with simulator ground truth.
    let mut target = None;
    for o in &world.objects {
        for (ti, t) in sim.truths.iter().enumerate() {
            if (o.obb.center - t.obb.center).norm() < 0.3 {
                sim.id_map.insert(o.id, ti);
                target = Some(o.id);
            }
        }
    }
    let Some(id) = target else {
        println!("nothing to push");
        return;
    };

    let idx = world
        .object(id)
        .unwrap()
        .movability
        .primitives()
        .iter()
        .position(|p| p.direction == PushDirection::Left)
        .expect("push-left primitive");
    let mut task = ManipulationTask::new(id, idx);
    let report = execute_push(&mut task, &mut world, &exec_cfg, &mut sim, 0);

    println!();
    for p in &report.pushes {
        println!(
            "attempt {}: {:?}  contact detected {}  predicted displacement {:.3} m (truth {:.3} m)",
            p.attempt, p.event, p.contact_detected, p.displacement_predicted, p.displacement_truth
        );
        if let (Some(err), Some(iou)) = (p.prediction_error, p.iou) {
            println!("           prediction error {err:.3} m, association IoU {iou:.2}");
        }
    }
    println!();
    println!(
        "outcome: {:?} after {} retries, {:.1} s simulated",
        report.outcome.unwrap(),
        task.retries_used,
        sim.clock.t
    );
    let object = world.object(id).unwrap();
    println!(
        "tracked object center ({:.3}, {:.3}, {:.3}), truth ({:.3}, {:.3}, {:.3})",
        object.obb.center.x,
        object.obb.center.y,
        object.obb.center.z,
        sim.truths[0].obb.center.x,
        sim.truths[0].obb.center.y,
        sim.truths[0].obb.center.z,
    );
}

//! World-model snapshots in the same line-oriented style as scenario
//! files: sections per staircase and object, point clouds inline.

use stairclear::geom::{Obb, Vec2, Vec3};
use stairclear::world::{
    GroundPlane, Movability, Staircase, Support, TrackedObject, WorldModel,
};

/// Serialize a world model. Primitives are regenerable and not stored.
pub fn world_to_text(world: &WorldModel) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for s in &world.staircases {
        let _ = writeln!(out, "staircase");
        let _ = writeln!(out, "  id {}", s.id);
        let _ = writeln!(out, "  num_steps {}", s.num_steps);
        let _ = writeln!(out, "  tread_depth {:.6}", s.tread_depth);
        let _ = writeln!(out, "  riser_height {:.6}", s.riser_height);
        let _ = writeln!(out, "  width {:.6}", s.width);
        let _ = writeln!(
            out,
            "  origin {:.6} {:.6} {:.6}",
            s.origin.x, s.origin.y, s.origin.z
        );
        let _ = writeln!(out, "  yaw {:.9}", s.yaw);
        let _ = writeln!(out, "  left_wall {}", s.left_wall);
        let _ = writeln!(out, "  right_wall {}", s.right_wall);
        let _ = writeln!(out, "end");
    }
    let _ = writeln!(out, "ground");
    let _ = writeln!(out, "  height {:.6}", world.ground.height);
    let _ = writeln!(
        out,
        "  extent {:.6} {:.6} {:.6} {:.6}",
        world.ground.extent.0.x, world.ground.extent.0.y, world.ground.extent.1.x, world.ground.extent.1.y
    );
    let _ = writeln!(out, "end");
    for o in &world.objects {
        let _ = writeln!(out, "tracked_object {}", o.id);
        let _ = writeln!(
            out,
            "  obb {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.9}",
            o.obb.center.x,
            o.obb.center.y,
            o.obb.center.z,
            o.obb.half_extents.x,
            o.obb.half_extents.y,
            o.obb.half_extents.z,
            o.obb.yaw
        );
        let movability = match o.movability {
            Movability::Static => "static",
            Movability::PotentiallyMovable { .. } => "potentially_movable",
        };
        let _ = writeln!(out, "  movability {movability}");
        match o.supporting {
            Support::Ground => {
                let _ = writeln!(out, "  support ground");
            }
            Support::Step { staircase, step } => {
                let _ = writeln!(out, "  support step {staircase} {step}");
            }
        }
        let _ = writeln!(out, "  last_update {:.6}", o.last_update_time);
        let _ = writeln!(out, "  predicted_only {}", o.predicted_only);
        let _ = writeln!(out, "  cloud {}", o.cloud.len());
        for p in &o.cloud {
            let _ = writeln!(out, "  pt {:.6} {:.6} {:.6}", p.x, p.y, p.z);
        }
        let _ = writeln!(out, "end");
    }
    let _ = writeln!(out, "next_id {}", world.next_id);
    out
}

/// Parse a world snapshot written by [`world_to_text`].
pub fn world_from_text(text: &str) -> Result<WorldModel, String> {
    let mut staircases = Vec::new();
    let mut ground = GroundPlane {
        height: 0.0,
        extent: (Vec2::zeros(), Vec2::new(1.0, 1.0)),
    };
    let mut objects: Vec<TrackedObject> = Vec::new();
    let mut next_id = 0u64;

    let mut lines = text.lines().enumerate().peekable();
    let err = |line: usize, msg: &str| format!("line {}: {}", line + 1, msg);
    while let Some((ln, raw)) = lines.next() {
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "staircase" => {
                let mut s = Staircase {
                    id: 0,
                    num_steps: 1,
                    tread_depth: 0.3,
                    riser_height: 0.16,
                    width: 1.0,
                    origin: Vec3::zeros(),
                    yaw: 0.0,
                    left_wall: false,
                    right_wall: false,
                };
                for (ln, raw) in lines.by_ref() {
                    let t: Vec<&str> = raw.split_whitespace().collect();
                    match t.first().copied() {
                        Some("end") => break,
                        Some("id") => s.id = parse(&t, 1, ln)?,
                        Some("num_steps") => s.num_steps = parse(&t, 1, ln)?,
                        Some("tread_depth") => s.tread_depth = parse(&t, 1, ln)?,
                        Some("riser_height") => s.riser_height = parse(&t, 1, ln)?,
                        Some("width") => s.width = parse(&t, 1, ln)?,
                        Some("origin") => {
                            s.origin =
                                Vec3::new(parse(&t, 1, ln)?, parse(&t, 2, ln)?, parse(&t, 3, ln)?)
                        }
                        Some("yaw") => s.yaw = parse(&t, 1, ln)?,
                        Some("left_wall") => s.left_wall = t.get(1) == Some(&"true"),
                        Some("right_wall") => s.right_wall = t.get(1) == Some(&"true"),
                        _ => return Err(err(ln, "unknown staircase key")),
                    }
                }
                staircases.push(s);
            }
            "ground" => {
                for (ln, raw) in lines.by_ref() {
                    let t: Vec<&str> = raw.split_whitespace().collect();
                    match t.first().copied() {
                        Some("end") => break,
                        Some("height") => ground.height = parse(&t, 1, ln)?,
                        Some("extent") => {
                            ground.extent = (
                                Vec2::new(parse(&t, 1, ln)?, parse(&t, 2, ln)?),
                                Vec2::new(parse(&t, 3, ln)?, parse(&t, 4, ln)?),
                            )
                        }
                        _ => return Err(err(ln, "unknown ground key")),
                    }
                }
            }
            "tracked_object" => {
                let id: u64 = parse(&tokens, 1, ln)?;
                let mut obb = Obb::new(Vec3::zeros(), Vec3::new(0.1, 0.1, 0.1), 0.0);
                let mut movability = Movability::PotentiallyMovable { primitives: vec![] };
                let mut supporting = Support::Ground;
                let mut last_update = 0.0;
                let mut predicted_only = false;
                let mut cloud = Vec::new();
                for (ln, raw) in lines.by_ref() {
                    let t: Vec<&str> = raw.split_whitespace().collect();
                    match t.first().copied() {
                        Some("end") => break,
                        Some("obb") => {
                            obb = Obb::new(
                                Vec3::new(parse(&t, 1, ln)?, parse(&t, 2, ln)?, parse(&t, 3, ln)?),
                                Vec3::new(parse(&t, 4, ln)?, parse(&t, 5, ln)?, parse(&t, 6, ln)?),
                                parse(&t, 7, ln)?,
                            )
                        }
                        Some("movability") => {
                            movability = match t.get(1).copied() {
                                Some("static") => Movability::Static,
                                _ => Movability::PotentiallyMovable { primitives: vec![] },
                            }
                        }
                        Some("support") => {
                            supporting = match t.get(1).copied() {
                                Some("ground") => Support::Ground,
                                Some("step") => Support::Step {
                                    staircase: parse(&t, 2, ln)?,
                                    step: parse(&t, 3, ln)?,
                                },
                                _ => return Err(err(ln, "bad support")),
                            }
                        }
                        Some("last_update") => last_update = parse(&t, 1, ln)?,
                        Some("predicted_only") => predicted_only = t.get(1) == Some(&"true"),
                        Some("cloud") => {}
                        Some("pt") => cloud.push(Vec3::new(
                            parse(&t, 1, ln)?,
                            parse(&t, 2, ln)?,
                            parse(&t, 3, ln)?,
                        )),
                        _ => return Err(err(ln, "unknown object key")),
                    }
                }
                objects.push(TrackedObject {
                    id,
                    cloud,
                    obb,
                    movability,
                    supporting,
                    last_update_time: last_update,
                    predicted_only,
                });
            }
            "next_id" => next_id = parse(&tokens, 1, ln)?,
            _ => return Err(err(ln, "unknown top-level key")),
        }
    }
    let mut world = WorldModel::new(staircases, ground);
    world.objects = objects;
    world.next_id = next_id;
    Ok(world)
}

fn parse<T: std::str::FromStr>(tokens: &[&str], idx: usize, line: usize) -> Result<T, String> {
    tokens
        .get(idx)
        .ok_or_else(|| format!("line {}: missing value", line + 1))?
        .parse()
        .map_err(|_| format!("line {}: bad value `{}`", line + 1, tokens[idx]))
}

//! Perception-to-action stack for clearing movable clutter from staircases
//! with a legged robot, plus the deterministic desk-scale simulator used to
//! exercise it.
//!
//! The pipeline: a depth scan is segmented into stair-aligned clutter boxes
//! ([`perception`]), each potentially movable object gets straight push
//! paths to the staircase edge ([`primitives`]), a task executor pushes
//! along them with one leg while residual joint torques detect contact
//! ([`contact`]) and a proprioceptive predictor tracks the object through
//! the occlusion ([`tracking`]). Foot paths come from A* on a voxelized
//! world ([`planning`]); the whole loop runs against the simulator in
//! [`sim`].

pub mod contact;
pub mod executor;
pub mod geom;
pub mod perception;
pub mod planning;
pub mod primitives;
pub mod sim;
mod spatial;
pub mod tracking;
pub mod world;

pub use geom::{Obb, Vec2, Vec3};
pub use world::WorldModel;

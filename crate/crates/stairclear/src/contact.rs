//! Residual-torque contact detection backed by a simulated planar 3R leg.
//!
//! The manipulating leg is modeled as a serial chain of three point-mass
//! links moving in a vertical plane. Measured torques minus the rigid-body
//! model torques leave the external contact wrench, whose norm drives the
//! sustained-threshold detector.

use thiserror::Error;

use crate::geom::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum ContactError {
    #[error("detector time went backwards: {now} < {last}")]
    TimeRegression { last: f64, now: f64 },
}

/// Planar 3R leg: link lengths, point masses at fixed offsets along each
/// link, gravity acting along the negative plane-vertical axis.
#[derive(Clone, Copy, Debug)]
pub struct LegModel {
    pub link_lengths: [f64; 3],
    pub link_masses: [f64; 3],
    pub link_com_offsets: [f64; 3],
    pub gravity: f64,
}

impl Default for LegModel {
    fn default() -> Self {
        Self {
            link_lengths: [0.11, 0.32, 0.33],
            link_masses: [2.5, 1.5, 0.5],
            link_com_offsets: [0.055, 0.16, 0.165],
            gravity: 9.81,
        }
    }
}

/// Joint-space state of the leg plus the measured actuator torques.
#[derive(Clone, Copy, Debug, Default)]
pub struct LegState {
    pub q: [f64; 3],
    pub qd: [f64; 3],
    pub qdd: [f64; 3],
    pub tau_measured: [f64; 3],
}

fn perp(u: Vec2) -> Vec2 {
    Vec2::new(-u.y, u.x)
}

/// Joint torques of the chain under gravity, by planar recursive
/// Newton-Euler. Equals M(q) qdd + C(q, qd) qd + G(q) for the point-mass
/// model.
pub fn inverse_dynamics(model: &LegModel, q: &[f64; 3], qd: &[f64; 3], qdd: &[f64; 3]) -> [f64; 3] {
    let mut theta = [0.0; 3];
    let mut omega = [0.0; 3];
    let mut alpha = [0.0; 3];
    let mut acc = 0.0;
    let (mut w, mut a) = (0.0, 0.0);
    for i in 0..3 {
        acc += q[i];
        w += qd[i];
        a += qdd[i];
        theta[i] = acc;
        omega[i] = w;
        alpha[i] = a;
    }

    // Forward pass: accelerations of joints and centers of mass. Gravity
    // enters as a fictitious base acceleration.
    let mut a_joint = Vec2::new(0.0, model.gravity);
    let mut u = [Vec2::zeros(); 3];
    let mut a_com = [Vec2::zeros(); 3];
    for i in 0..3 {
        u[i] = Vec2::new(theta[i].cos(), theta[i].sin());
        let p = perp(u[i]);
        let r = model.link_com_offsets[i];
        a_com[i] = a_joint + p * (alpha[i] * r) - u[i] * (omega[i] * omega[i] * r);
        let l = model.link_lengths[i];
        a_joint += p * (alpha[i] * l) - u[i] * (omega[i] * omega[i] * l);
    }

    // Backward pass: joint forces and torques.
    let mut f_next = Vec2::zeros();
    let mut n_next = 0.0;
    let mut tau = [0.0; 3];
    for i in (0..3).rev() {
        let force = a_com[i] * model.link_masses[i];
        let r = u[i] * model.link_com_offsets[i];
        let l = u[i] * model.link_lengths[i];
        let n = n_next + cross2(r, force) + cross2(l, f_next);
        tau[i] = n;
        n_next = n;
        f_next += force;
    }
    tau
}

fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Foot (chain tip) position in the leg plane.
pub fn foot_position(model: &LegModel, q: &[f64; 3]) -> Vec2 {
    let mut theta = 0.0;
    let mut p = Vec2::zeros();
    for i in 0..3 {
        theta += q[i];
        p += Vec2::new(theta.cos(), theta.sin()) * model.link_lengths[i];
    }
    p
}

/// 2x3 foot Jacobian: column j is the in-plane velocity of the foot per
/// unit rate of joint j.
pub fn jacobian(model: &LegModel, q: &[f64; 3]) -> [[f64; 3]; 2] {
    let mut theta = 0.0;
    let mut joint_pos = [Vec2::zeros(); 4];
    for i in 0..3 {
        theta += q[i];
        joint_pos[i + 1] =
            joint_pos[i] + Vec2::new(theta.cos(), theta.sin()) * model.link_lengths[i];
    }
    let tip = joint_pos[3];
    let mut j = [[0.0; 3]; 2];
    for col in 0..3 {
        let arm = perp(tip - joint_pos[col]);
        j[0][col] = arm.x;
        j[1][col] = arm.y;
    }
    j
}

/// Joint torques produced by an in-plane force at the foot: J^T f.
pub fn jt_force(model: &LegModel, q: &[f64; 3], f: Vec2) -> [f64; 3] {
    let j = jacobian(model, q);
    [
        j[0][0] * f.x + j[1][0] * f.y,
        j[0][1] * f.x + j[1][1] * f.y,
        j[0][2] * f.x + j[1][2] * f.y,
    ]
}

/// Residual torque: measured minus model-predicted.
pub fn residual(
    tau_measured: &[f64; 3],
    model: &LegModel,
    q: &[f64; 3],
    qd: &[f64; 3],
    qdd: &[f64; 3],
) -> [f64; 3] {
    let tau_model = inverse_dynamics(model, q, qd, qdd);
    [
        tau_measured[0] - tau_model[0],
        tau_measured[1] - tau_model[1],
        tau_measured[2] - tau_model[2],
    ]
}

pub fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Damped least-squares joint rates tracking a desired in-plane foot
/// velocity. Used by the kinematic waypoint-following stub.
pub fn ik_velocity(model: &LegModel, q: &[f64; 3], v: Vec2, damping: f64) -> [f64; 3] {
    let j = jacobian(model, q);
    // JJ^T + lambda^2 I, a 2x2 system.
    let a11 = j[0][0] * j[0][0] + j[0][1] * j[0][1] + j[0][2] * j[0][2] + damping * damping;
    let a12 = j[0][0] * j[1][0] + j[0][1] * j[1][1] + j[0][2] * j[1][2];
    let a22 = j[1][0] * j[1][0] + j[1][1] * j[1][1] + j[1][2] * j[1][2] + damping * damping;
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-12 {
        return [0.0; 3];
    }
    let y0 = (a22 * v.x - a12 * v.y) / det;
    let y1 = (-a12 * v.x + a11 * v.y) / det;
    [
        j[0][0] * y0 + j[1][0] * y1,
        j[0][1] * y0 + j[1][1] * y1,
        j[0][2] * y0 + j[1][2] * y1,
    ]
}

/// Sustained-threshold contact detector: fires once the residual norm has
/// stayed above `threshold` continuously for at least `sustain` seconds.
#[derive(Clone, Debug)]
pub struct ContactDetector {
    pub threshold: f64,
    pub sustain: f64,
    above_since: Option<f64>,
    last_t: Option<f64>,
}

impl ContactDetector {
    pub fn new(threshold: f64, sustain: f64) -> Self {
        assert!(threshold > 0.0 && sustain > 0.0);
        Self {
            threshold,
            sustain,
            above_since: None,
            last_t: None,
        }
    }

    /// Feed one residual sample at time `t` (non-decreasing across calls).
    /// A dip below the threshold resets the window.
    pub fn detect(&mut self, residual: &[f64; 3], t: f64) -> Result<bool, ContactError> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(ContactError::TimeRegression { last, now: t });
            }
        }
        self.last_t = Some(t);
        if norm3(residual) > self.threshold {
            let since = *self.above_since.get_or_insert(t);
            Ok(t - since >= self.sustain)
        } else {
            self.above_since = None;
            Ok(false)
        }
    }

    pub fn reset(&mut self) {
        self.above_since = None;
    }
}

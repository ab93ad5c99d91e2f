//! Shared geometry: upright boxes (yaw about vertical only), yawed
//! rectangles, and polyline helpers used across perception, tracking and
//! planning.

use nalgebra::{Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Rotate a 2D vector by `yaw` radians.
pub fn rotate2(v: Vec2, yaw: f64) -> Vec2 {
    let (s, c) = yaw.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Rotate a 3D vector by `yaw` radians about the vertical axis.
pub fn rotate_z(v: Vec3, yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

pub fn xy(v: Vec3) -> Vec2 {
    Vec2::new(v.x, v.y)
}

/// Rectangle in the horizontal plane with its own yaw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YawedRect {
    pub center: Vec2,
    pub half: Vec2,
    pub yaw: f64,
}

impl YawedRect {
    pub fn new(center: Vec2, half: Vec2, yaw: f64) -> Self {
        Self { center, half, yaw }
    }

    /// Closed containment check with `eps` slack on the boundary.
    pub fn contains(&self, p: Vec2, eps: f64) -> bool {
        let local = rotate2(p - self.center, -self.yaw);
        local.x.abs() <= self.half.x + eps && local.y.abs() <= self.half.y + eps
    }

    /// Distance from `p` to the rectangle (zero inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        let local = rotate2(p - self.center, -self.yaw);
        let dx = (local.x.abs() - self.half.x).max(0.0);
        let dy = (local.y.abs() - self.half.y).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let mut out = [Vec2::zeros(); 4];
        for (i, (sx, sy)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)]
            .iter()
            .enumerate()
        {
            let local = Vec2::new(sx * self.half.x, sy * self.half.y);
            out[i] = self.center + rotate2(local, self.yaw);
        }
        out
    }

    fn axes(&self) -> [Vec2; 2] {
        let (s, c) = self.yaw.sin_cos();
        [Vec2::new(c, s), Vec2::new(-s, c)]
    }
}

/// Smallest overlap of two yawed rectangles over the four SAT axes.
/// Negative when the rectangles are separated.
pub fn rect_overlap_depth(a: &YawedRect, b: &YawedRect) -> f64 {
    let d = b.center - a.center;
    let ax = a.axes();
    let bx = b.axes();
    let mut min_overlap = f64::INFINITY;
    for axis in ax.into_iter().chain(bx) {
        let ra = a.half.x * ax[0].dot(&axis).abs() + a.half.y * ax[1].dot(&axis).abs();
        let rb = b.half.x * bx[0].dot(&axis).abs() + b.half.y * bx[1].dot(&axis).abs();
        let overlap = ra + rb - d.dot(&axis).abs();
        min_overlap = min_overlap.min(overlap);
    }
    min_overlap
}

/// Oriented bounding box constrained to rotate about the vertical axis only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
}

impl Obb {
    pub fn new(center: Vec3, half_extents: Vec3, yaw: f64) -> Self {
        Self {
            center,
            half_extents,
            yaw,
        }
    }

    pub fn footprint(&self) -> YawedRect {
        YawedRect::new(
            xy(self.center),
            Vec2::new(self.half_extents.x, self.half_extents.y),
            self.yaw,
        )
    }

    pub fn z_min(&self) -> f64 {
        self.center.z - self.half_extents.z
    }

    pub fn z_max(&self) -> f64 {
        self.center.z + self.half_extents.z
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn translated(&self, d: Vec3) -> Obb {
        Obb::new(self.center + d, self.half_extents, self.yaw)
    }

    pub fn inflated(&self, margin: f64) -> Obb {
        Obb::new(
            self.center,
            self.half_extents + Vec3::new(margin, margin, margin),
            self.yaw,
        )
    }

    /// Closed containment with `eps` slack, in the box frame.
    pub fn contains(&self, p: Vec3, eps: f64) -> bool {
        let local = rotate_z(p - self.center, -self.yaw);
        local.x.abs() <= self.half_extents.x + eps
            && local.y.abs() <= self.half_extents.y + eps
            && local.z.abs() <= self.half_extents.z + eps
    }

    /// The four corners of the bottom face.
    pub fn bottom_corners(&self) -> [Vec3; 4] {
        let z = self.z_min();
        let fp = self.footprint().corners();
        [
            Vec3::new(fp[0].x, fp[0].y, z),
            Vec3::new(fp[1].x, fp[1].y, z),
            Vec3::new(fp[2].x, fp[2].y, z),
            Vec3::new(fp[3].x, fp[3].y, z),
        ]
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let bottom = self.bottom_corners();
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in bottom.iter().enumerate() {
            out[i] = *c;
            out[i + 4] = Vec3::new(c.x, c.y, self.z_max());
        }
        out
    }

    /// World-frame axis-aligned bounds.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for c in self.corners() {
            lo = lo.inf(&c);
            hi = hi.sup(&c);
        }
        (lo, hi)
    }
}

/// True when two upright boxes interpenetrate by more than `min_pen` on
/// every separating axis. `min_pen = 0.0` makes face touch count as an
/// intersection; a small positive value makes touch collision-free.
pub fn boxes_intersect(a: &Obb, b: &Obb, min_pen: f64) -> bool {
    let z_overlap = a.z_max().min(b.z_max()) - a.z_min().max(b.z_min());
    if z_overlap <= min_pen {
        return false;
    }
    rect_overlap_depth(&a.footprint(), &b.footprint()) > min_pen
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Arc length of the closest point on a polyline, plus the distance to it.
pub fn project_on_polyline(points: &[Vec3], p: Vec3) -> (f64, f64) {
    assert!(!points.is_empty(), "polyline must be non-empty");
    if points.len() == 1 {
        return (0.0, (p - points[0]).norm());
    }
    let mut best = (0.0, f64::INFINITY);
    let mut arc_start = 0.0;
    for w in points.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        let t = if len > 0.0 {
            ((p - w[0]).dot(&seg) / (len * len)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let closest = w[0] + seg * t;
        let dist = (p - closest).norm();
        if dist < best.1 {
            best = (arc_start + t * len, dist);
        }
        arc_start += len;
    }
    best
}

/// Point at arc length `s` along the polyline, clamped to its ends.
pub fn point_at_arc(points: &[Vec3], s: f64) -> Vec3 {
    assert!(!points.is_empty(), "polyline must be non-empty");
    if s <= 0.0 {
        return points[0];
    }
    let mut remaining = s;
    for w in points.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        if remaining <= len {
            return w[0] + seg * (remaining / len.max(f64::MIN_POSITIVE));
        }
        remaining -= len;
    }
    *points.last().unwrap()
}

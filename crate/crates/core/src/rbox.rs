//! Rotated boxes in the BEV plane and the detection targets built on them.
//!
//! An [`RBox`] is undirected: its angle is the heading of the long side,
//! taken modulo π. Angles are measured from the +x axis towards +y of the
//! frame the box lives in.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{self, CameraError, Extrinsics, Intrinsics};
use crate::projective::{self, Homography, PlanePoint, ProjectiveError};

/// Areas below this are treated as empty in IoU computations.
pub const MIN_AREA: f64 = 1e-12;
/// Anchors per layer, evenly spaced over the half circle.
pub const ANCHOR_ANGLES: usize = 9;
/// Detection layers of the anchor pyramid.
pub const ANCHOR_LAYERS: usize = 3;
/// Bound on the `l` and `w` ratios between a positive anchor and its target.
pub const ANCHOR_SIZE_RATIO: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RBoxError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("{boxes} boxes but {scores} scores")]
    LengthMismatch { boxes: usize, scores: usize },
    #[error("point projects behind the camera (depth {depth})")]
    ProjectionBehindCamera { depth: f64 },
    #[error(transparent)]
    Camera(CameraError),
    #[error(transparent)]
    Projective(#[from] ProjectiveError),
}

impl From<CameraError> for RBoxError {
    fn from(e: CameraError) -> Self {
        match e {
            CameraError::ProjectionBehindCamera { depth } => Self::ProjectionBehindCamera { depth },
            CameraError::Projective(p) => Self::Projective(p),
            other => Self::Camera(other),
        }
    }
}

pub type Result<T, E = RBoxError> = std::result::Result<T, E>;

/// Reduces an angle into `[0, π)`.
pub fn normalize_angle(r: f64) -> f64 {
    let a = r.rem_euclid(PI);
    if a >= PI {
        0.0
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RBox {
    cx: f64,
    cy: f64,
    l: f64,
    w: f64,
    r: f64,
}

impl RBox {
    /// Builds a box, swapping sides so that `l >= w` and reducing `r` into `[0, π)`.
    pub fn new(cx: f64, cy: f64, l: f64, w: f64, r: f64) -> Result<Self> {
        if ![cx, cy, l, w, r].iter().all(|v| v.is_finite()) {
            return Err(RBoxError::InvalidBox("non-finite parameter".into()));
        }
        if !(l > 0.0 && w > 0.0) {
            return Err(RBoxError::InvalidBox(format!(
                "sides must be positive, got l={l} w={w}"
            )));
        }
        let (l, w, r) = if l >= w { (l, w, r) } else { (w, l, r + FRAC_PI_2) };
        Ok(Self {
            cx,
            cy,
            l,
            w,
            r: normalize_angle(r),
        })
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn center(&self) -> PlanePoint {
        PlanePoint::new(self.cx, self.cy)
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn area(&self) -> f64 {
        self.l * self.w
    }

    /// Whether `p` lies inside or on the boundary.
    pub fn contains(&self, p: &PlanePoint) -> bool {
        let (s, c) = self.r.sin_cos();
        let (dx, dy) = (p.x - self.cx, p.y - self.cy);
        let along = dx * c + dy * s;
        let across = -dx * s + dy * c;
        along.abs() <= 0.5 * self.l && across.abs() <= 0.5 * self.w
    }

    fn key_cmp(&self, other: &RBox) -> Ordering {
        let a = [self.cx, self.cy, self.l, self.w, self.r];
        let b = [other.cx, other.cy, other.l, other.w, other.r];
        a.iter()
            .zip(&b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// Corners starting at the `(+l/2, +w/2)` corner, then `(-,+)`, `(-,-)`, `(+,-)`,
/// each rotated by `r` about the center.
pub fn rbox_corners(b: &RBox) -> [PlanePoint; 4] {
    let (s, c) = b.r.sin_cos();
    let (hl, hw) = (0.5 * b.l, 0.5 * b.w);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(dx, dy)| {
        PlanePoint::new(b.cx + dx * c - dy * s, b.cy + dx * s + dy * c)
    })
}

fn cross(o: &PlanePoint, a: &PlanePoint, b: &PlanePoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace area (positive for counterclockwise vertex order).
pub fn polygon_area(poly: &[PlanePoint]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (&poly[i], &poly[(i + 1) % poly.len()]);
        twice += p.x * q.y - q.x * p.y;
    }
    0.5 * twice
}

/// Sutherland–Hodgman clip of `subject` against the convex counterclockwise `clip`.
pub fn clip_convex(subject: &[PlanePoint], clip: &[PlanePoint]) -> Vec<PlanePoint> {
    let mut out: Vec<PlanePoint> = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (e0, e1) = (&clip[i], &clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let d_cur = cross(e0, e1, &cur);
            let d_prev = cross(e0, e1, &prev);
            if d_cur >= 0.0 {
                if d_prev < 0.0 {
                    out.push(intersect(&prev, &cur, d_prev, d_cur));
                }
                out.push(cur);
            } else if d_prev >= 0.0 {
                out.push(intersect(&prev, &cur, d_prev, d_cur));
            }
        }
    }
    out
}

fn intersect(p: &PlanePoint, q: &PlanePoint, dp: f64, dq: f64) -> PlanePoint {
    let t = dp / (dp - dq);
    PlanePoint::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

/// Area of the intersection of two boxes.
pub fn intersection_area(a: &RBox, b: &RBox) -> f64 {
    let (a, b) = if a.key_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    polygon_area(&clip_convex(&rbox_corners(a), &rbox_corners(b))).max(0.0)
}

/// Intersection over union of two rotated boxes; symmetric in its arguments.
pub fn rbox_iou(a: &RBox, b: &RBox) -> f64 {
    let (area_a, area_b) = (a.area(), b.area());
    if area_a < MIN_AREA || area_b < MIN_AREA {
        return 0.0;
    }
    let inter = intersection_area(a, b).min(area_a).min(area_b);
    let union = area_a + area_b - inter;
    if union < MIN_AREA || inter <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy suppression in descending score order; ties go to the lower index.
///
/// A box is suppressed when its IoU with an already kept box exceeds
/// `iou_thresh`.
pub fn rotated_nms(boxes: &[RBox], scores: &[f64], iou_thresh: f64) -> Result<Vec<usize>> {
    if boxes.len() != scores.len() {
        return Err(RBoxError::LengthMismatch {
            boxes: boxes.len(),
            scores: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep
            .iter()
            .all(|&k| rbox_iou(&boxes[k], &boxes[i]) <= iou_thresh)
        {
            keep.push(i);
        }
    }
    Ok(keep)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Angle from a raw network output relative to anchor angle `r0`; the offset
/// is confined to `(-π/4, π/4)`.
pub fn angle_decode(x: f64, r0: f64) -> f64 {
    // sigmoid saturates to exactly 0 or 1 for large |x|
    let limit = FRAC_PI_4 * (1.0 - 1e-12);
    let offset = (FRAC_PI_2 * (sigmoid(x) - 0.5)).clamp(-limit, limit);
    normalize_angle(offset + r0)
}

/// π-periodic signed difference `a - b` in `[-π/2, π/2)`.
pub fn angle_residual(a: f64, b: f64) -> f64 {
    let d = (a - b + FRAC_PI_2).rem_euclid(PI);
    // rem_euclid may round up to exactly π
    let d = if d >= PI { 0.0 } else { d };
    d - FRAC_PI_2
}

/// `sin^2` of the angular residual and its derivative with respect to `r_pred`.
pub fn rotation_loss(r_pred: f64, r_gt: f64) -> (f64, f64) {
    let d = angle_residual(r_pred, r_gt);
    let s = d.sin();
    (s * s, (2.0 * d).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub l: f64,
    pub w: f64,
    pub r: f64,
}

/// Per-layer rotated anchors: one size per layer, nine angles `k·π/9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    layers: Vec<Vec<Anchor>>,
}

impl AnchorSet {
    pub fn from_sizes(sizes: [(f64, f64); ANCHOR_LAYERS]) -> Result<Self> {
        let mut layers = Vec::with_capacity(ANCHOR_LAYERS);
        for (l, w) in sizes {
            if !(l > 0.0 && w > 0.0) {
                return Err(RBoxError::InvalidBox(format!("anchor size {l}x{w}")));
            }
            let (l, w) = if l >= w { (l, w) } else { (w, l) };
            layers.push(
                (0..ANCHOR_ANGLES)
                    .map(|k| Anchor {
                        l,
                        w,
                        r: anchor_angle(k),
                    })
                    .collect(),
            );
        }
        Ok(Self { layers })
    }

    /// Passenger-car to truck footprints (meters) scaled to BEV pixels.
    pub fn vehicle_defaults(ppm: f64) -> Result<Self> {
        Self::from_sizes([
            (3.0 * ppm, 1.5 * ppm),
            (4.5 * ppm, 1.8 * ppm),
            (8.0 * ppm, 2.5 * ppm),
        ])
    }

    pub fn layers(&self) -> &[Vec<Anchor>] {
        &self.layers
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Anchor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(li, layer)| layer.iter().enumerate().map(move |(k, a)| (li, k, a)))
    }
}

pub fn anchor_angle(k: usize) -> f64 {
    k as f64 * PI / ANCHOR_ANGLES as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorMatch {
    pub layer: usize,
    /// Angle index `k` within the layer.
    pub index: usize,
    pub angle_eligible: bool,
    pub positive: bool,
}

/// Angle eligibility is `|angle_residual(r0, r_gt)| < π/4`; eligible anchors
/// are positive when both side ratios stay below [`ANCHOR_SIZE_RATIO`].
pub fn assign_anchors(gt: &RBox, anchors: &AnchorSet) -> Vec<AnchorMatch> {
    anchors
        .iter()
        .map(|(layer, index, a)| {
            let angle_eligible = angle_residual(a.r, gt.r).abs() < FRAC_PI_4;
            let ratio = |x: f64, y: f64| (x / y).max(y / x);
            let size_ok =
                ratio(gt.l, a.l) < ANCHOR_SIZE_RATIO && ratio(gt.w, a.w) < ANCHOR_SIZE_RATIO;
            AnchorMatch {
                layer,
                index,
                angle_eligible,
                positive: angle_eligible && size_ok,
            }
        })
        .collect()
}

/// Rotated box plus the BEV offset from its center to the projected roof center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailedRBox {
    pub rbox: RBox,
    pub u_tail: f64,
    pub v_tail: f64,
}

impl TailedRBox {
    pub fn tail_end(&self) -> PlanePoint {
        PlanePoint::new(self.rbox.cx + self.u_tail, self.rbox.cy + self.v_tail)
    }
}

/// Vehicle cuboid resting on the road plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneBox3D {
    /// Center of the bottom face, world meters.
    pub center_ground: PlanePoint,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    /// Heading of the long side, radians in `[0, 2π)`.
    pub yaw: f64,
}

impl SceneBox3D {
    /// `h = 0` is accepted for flat boxes.
    pub fn new(center_ground: PlanePoint, l: f64, w: f64, h: f64, yaw: f64) -> Result<Self> {
        if !center_ground.is_finite() || ![l, w, h, yaw].iter().all(|v| v.is_finite()) {
            return Err(RBoxError::InvalidBox("non-finite parameter".into()));
        }
        if !(l > 0.0 && w > 0.0 && h >= 0.0) {
            return Err(RBoxError::InvalidBox(format!(
                "dimensions must be positive, got {l}x{w}x{h}"
            )));
        }
        let yaw = yaw.rem_euclid(TAU);
        Ok(Self {
            center_ground,
            l,
            w,
            h,
            yaw: if yaw >= TAU { 0.0 } else { yaw },
        })
    }

    pub fn bottom_center(&self) -> Vector3<f64> {
        Vector3::new(self.center_ground.x, self.center_ground.y, 0.0)
    }

    pub fn top_center(&self) -> Vector3<f64> {
        Vector3::new(self.center_ground.x, self.center_ground.y, self.h)
    }

    /// World-frame footprint.
    pub fn footprint(&self) -> Result<RBox> {
        RBox::new(
            self.center_ground.x,
            self.center_ground.y,
            self.l,
            self.w,
            self.yaw,
        )
    }

    /// Bottom-face corners followed by top-face corners, in footprint order.
    pub fn corners(&self) -> Result<[Vector3<f64>; 8]> {
        let fp = rbox_corners(&self.footprint()?);
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in fp.iter().enumerate() {
            out[i] = Vector3::new(c.x, c.y, 0.0);
            out[i + 4] = Vector3::new(c.x, c.y, self.h);
        }
        Ok(out)
    }
}

/// Tailed r-box target of a vehicle seen by camera `(k, e)`.
///
/// Both the bottom and the top face centers are projected into the
/// original image and then warped by `h_bev_ori`; the first gives the box
/// center, the second the tail end. Size and heading come from the
/// footprint mapped through `H^bev_world = h_bev_ori · K[r1 r2 t]`.
pub fn tailed_rbox_from_scene(
    b: &SceneBox3D,
    k: &Intrinsics,
    e: &Extrinsics,
    h_bev_ori: &Homography,
) -> Result<TailedRBox> {
    let bottom_px = camera::project(k, e, &b.bottom_center())?;
    let top_px = camera::project(k, e, &b.top_center())?;
    let center = projective::apply(h_bev_ori, bottom_px)?;
    let tail_end = projective::apply(h_bev_ori, top_px)?;

    let h_bev_world = projective::compose(h_bev_ori, &camera::homography_from_camera(k, e)?)?;
    let c = b.center_ground;
    let (s, co) = b.yaw.sin_cos();
    let front = PlanePoint::new(c.x + 0.5 * b.l * co, c.y + 0.5 * b.l * s);
    let side = PlanePoint::new(c.x - 0.5 * b.w * s, c.y + 0.5 * b.w * co);
    let c_bev = projective::apply(&h_bev_world, c)?;
    let front_bev = projective::apply(&h_bev_world, front)?;
    let side_bev = projective::apply(&h_bev_world, side)?;
    let l = 2.0 * front_bev.distance(&c_bev);
    let w = 2.0 * side_bev.distance(&c_bev);
    let r = (front_bev.y - c_bev.y).atan2(front_bev.x - c_bev.x);

    Ok(TailedRBox {
        rbox: RBox::new(center.x, center.y, l, w, r)?,
        u_tail: tail_end.x - center.x,
        v_tail: tail_end.y - center.y,
    })
}

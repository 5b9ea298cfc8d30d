//! Synthetic scenes: vehicle cuboids on the road plane, seen by cameras that
//! all reproduce one calibrated homography, with their BEV and original-view
//! labels.
//!
//! Generation is deterministic in `(spec.seed, camera_seed)`.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{self, CameraError, CameraModel};
use crate::eval::Detection;
use crate::projective::{Homography, PlanePoint};
use crate::rbox::{self, rbox_iou, RBox, RBoxError, SceneBox3D, TailedRBox};
use crate::warp::{BevFrame, WarpError};

/// Rejected draws allowed per requested vehicle.
pub const PLACEMENT_ATTEMPTS_PER_VEHICLE: usize = 1000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("placed {placed} of {requested} vehicles before running out of attempts")]
    PlacementExhausted { placed: usize, requested: usize },
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Box(#[from] RBoxError),
    #[error(transparent)]
    Warp(#[from] WarpError),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

fn default_length() -> [f64; 2] {
    [3.5, 5.5]
}

fn default_width() -> [f64; 2] {
    [1.6, 2.1]
}

fn default_height() -> [f64; 2] {
    [1.4, 2.0]
}

/// Scenario description; the JSON form is read by `synth-frames`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Calibrated `H^ori_world`.
    pub homography: Homography,
    pub image_width: usize,
    pub image_height: usize,
    pub bev: BevFrame,
    pub n_vehicles: usize,
    #[serde(default = "default_length")]
    pub length_range: [f64; 2],
    #[serde(default = "default_width")]
    pub width_range: [f64; 2],
    #[serde(default = "default_height")]
    pub height_range: [f64; 2],
    /// Placement region on the road plane, world meters.
    pub placement: Vec<PlanePoint>,
    /// Principal-point sampling radius in pixels; 5% of the image width when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_radius: Option<f64>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        for (name, [lo, hi]) in [
            ("length", self.length_range),
            ("width", self.width_range),
            ("height", self.height_range),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!("{name} range [{lo}, {hi}]"));
            }
        }
        if self.length_range[0] < self.width_range[1] {
            return bad("length range must lie above the width range".into());
        }
        if self.placement.is_empty() || self.placement.iter().any(|p| !p.is_finite()) {
            return bad("placement polygon needs at least one finite vertex".into());
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image size must be positive".into());
        }
        if let Some(r) = self.principal_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("principal radius {r}"));
            }
        }
        self.bev.validate()?;
        Ok(())
    }

    /// Image center under the integer-pixel-center convention.
    pub fn image_center(&self) -> PlanePoint {
        PlanePoint::new(
            (self.image_width as f64 - 1.0) / 2.0,
            (self.image_height as f64 - 1.0) / 2.0,
        )
    }

    pub fn principal_radius(&self) -> f64 {
        self.principal_radius
            .unwrap_or(0.05 * self.image_width as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub camera: CameraModel,
    pub bev: BevFrame,
    pub boxes: Vec<SceneBox3D>,
    pub labels_bev: Vec<TailedRBox>,
    /// Projected bottom corners followed by top corners, per box.
    pub labels_ori: Vec<[PlanePoint; 8]>,
}

struct Region {
    vertices: Vec<PlanePoint>,
    min: PlanePoint,
    max: PlanePoint,
    degenerate: Option<PlanePoint>,
}

impl Region {
    fn new(vertices: &[PlanePoint]) -> Self {
        let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&PlanePoint) -> f64| {
            vertices.iter().map(get).fold(init, f)
        };
        let min = PlanePoint::new(
            fold(f64::min, f64::INFINITY, |p| p.x),
            fold(f64::min, f64::INFINITY, |p| p.y),
        );
        let max = PlanePoint::new(
            fold(f64::max, f64::NEG_INFINITY, |p| p.x),
            fold(f64::max, f64::NEG_INFINITY, |p| p.y),
        );
        let degenerate = (rbox::polygon_area(vertices).abs() < 1e-12).then(|| {
            let n = vertices.len() as f64;
            PlanePoint::new(
                vertices.iter().map(|p| p.x).sum::<f64>() / n,
                vertices.iter().map(|p| p.y).sum::<f64>() / n,
            )
        });
        Self {
            vertices: vertices.to_vec(),
            min,
            max,
            degenerate,
        }
    }

    /// Even-odd point-in-polygon test.
    fn contains(&self, p: &PlanePoint) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (a, b) = (&v[i], &v[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// One candidate draw; `None` when it falls outside the polygon.
    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<PlanePoint> {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        if let Some(c) = self.degenerate {
            return Some(c);
        }
        let p = PlanePoint::new(
            self.min.x + u * (self.max.x - self.min.x),
            self.min.y + v * (self.max.y - self.min.y),
        );
        self.contains(&p).then_some(p)
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Bottom and top corners of `b` in the original image.
fn project_corners(cam: &CameraModel, b: &SceneBox3D) -> Result<[PlanePoint; 8]> {
    let corners = b.corners()?;
    let mut out = [PlanePoint::default(); 8];
    for (o, c) in out.iter_mut().zip(&corners) {
        *o = cam.project(c)?;
    }
    Ok(out)
}

/// Samples one camera reproducing `spec.homography` and places
/// `spec.n_vehicles` non-overlapping vehicles by rejection sampling.
pub fn generate_frame(spec: &ScenarioSpec, camera_seed: u64) -> Result<SyntheticFrame> {
    spec.validate()?;
    let camera = camera::sample_camera_family(
        &spec.homography,
        &spec.image_center(),
        spec.principal_radius(),
        1,
        camera_seed,
    )?[0];
    let h_bev_ori = spec.bev.ori_to_bev(&spec.homography)?;
    let region = Region::new(&spec.placement);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut frame = SyntheticFrame {
        camera,
        bev: spec.bev,
        boxes: Vec::with_capacity(spec.n_vehicles),
        labels_bev: Vec::with_capacity(spec.n_vehicles),
        labels_ori: Vec::with_capacity(spec.n_vehicles),
    };
    let budget = PLACEMENT_ATTEMPTS_PER_VEHICLE * spec.n_vehicles;
    let mut rejected = 0;
    while frame.boxes.len() < spec.n_vehicles {
        if rejected >= budget {
            return Err(SynthError::PlacementExhausted {
                placed: frame.boxes.len(),
                requested: spec.n_vehicles,
            });
        }
        let center = region.draw(&mut rng);
        let l = uniform(&mut rng, spec.length_range);
        let w = uniform(&mut rng, spec.width_range);
        let h = uniform(&mut rng, spec.height_range);
        let yaw = TAU * rng.random::<f64>();
        let Some(center) = center else {
            rejected += 1;
            continue;
        };
        let candidate = SceneBox3D::new(center, l, w, h, yaw)?;
        let placed = project_corners(&camera, &candidate).and_then(|ori| {
            let label = rbox::tailed_rbox_from_scene(
                &candidate,
                &camera.intrinsics,
                &camera.extrinsics,
                &h_bev_ori,
            )?;
            Ok((ori, label))
        });
        let (ori, label) = match placed {
            Ok(v) => v,
            Err(SynthError::Camera(CameraError::ProjectionBehindCamera { .. }))
            | Err(SynthError::Box(RBoxError::ProjectionBehindCamera { .. })) => {
                rejected += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if frame
            .labels_bev
            .iter()
            .any(|t| rbox_iou(&t.rbox, &label.rbox) > 0.0)
        {
            rejected += 1;
            continue;
        }
        frame.boxes.push(candidate);
        frame.labels_bev.push(label);
        frame.labels_ori.push(ori);
    }
    Ok(frame)
}

/// Seeds of frame `index` in a sequence: `(box seed, camera seed)`.
pub fn frame_seeds(base_seed: u64, index: u64) -> (u64, u64) {
    (
        base_seed.wrapping_add(index),
        (base_seed ^ 0x9e37_79b9_7f4a_7c15).wrapping_add(index),
    )
}

/// Frames `0..n` of a sequence, each with its own placement and camera.
pub fn generate_sequence(spec: &ScenarioSpec, n_frames: u64) -> Result<Vec<SyntheticFrame>> {
    (0..n_frames)
        .map(|i| {
            let (box_seed, camera_seed) = frame_seeds(spec.seed, i);
            let spec_i = ScenarioSpec {
                seed: box_seed,
                ..spec.clone()
            };
            generate_frame(&spec_i, camera_seed)
        })
        .collect()
}

/// Noise model of the stand-in detector used to exercise evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    /// Center noise, meters.
    pub sigma_center: f64,
    /// Heading noise, radians.
    pub sigma_angle: f64,
    pub drop_rate: f64,
    pub spurious_rate: f64,
    /// Confidence is `exp(-(|dc| in meters + |dr|) / confidence_scale)`.
    pub confidence_scale: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            sigma_center: 0.0,
            sigma_angle: 0.0,
            drop_rate: 0.0,
            spurious_rate: 0.0,
            confidence_scale: 1.0,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_center >= 0.0
            && self.sigma_angle >= 0.0
            && self.sigma_center.is_finite()
            && self.sigma_angle.is_finite()
            && (0.0..=1.0).contains(&self.drop_rate)
            && (0.0..=1.0).contains(&self.spurious_rate)
            && self.confidence_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidSpec(format!("perturbation {self:?}")))
        }
    }
}

/// Noisy copies of ground-truth BEV boxes plus injected false positives.
///
/// Every ground-truth box consumes the same random draws whether or not it
/// is dropped, so outputs for different rates stay aligned.
pub fn perturb_boxes(
    frame_id: u64,
    gts: &[RBox],
    bev: &BevFrame,
    cfg: &PerturbConfig,
    seed: u64,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center_px = Normal::new(0.0, cfg.sigma_center * bev.ppm)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let angle = Normal::new(0.0, cfg.sigma_angle)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let mut out = Vec::with_capacity(gts.len());
    for gt in gts {
        let drop = rng.random::<f64>() < cfg.drop_rate;
        let (dx, dy, dr) = (
            center_px.sample(&mut rng),
            center_px.sample(&mut rng),
            angle.sample(&mut rng),
        );
        let spurious = rng.random::<f64>() < cfg.spurious_rate;
        let sx = bev.width as f64 * rng.random::<f64>();
        let sy = bev.height as f64 * rng.random::<f64>();
        let sl = uniform(&mut rng, default_length()) * bev.ppm;
        let sw = uniform(&mut rng, default_width()) * bev.ppm;
        let sr = std::f64::consts::PI * rng.random::<f64>();
        let sc = rng.random::<f64>();
        if !drop {
            let magnitude = dx.hypot(dy) / bev.ppm + dr.abs();
            out.push(Detection {
                rbox: RBox::new(gt.cx() + dx, gt.cy() + dy, gt.l(), gt.w(), gt.r() + dr)?,
                confidence: (-magnitude / cfg.confidence_scale).exp(),
                frame: frame_id,
            });
        }
        if spurious {
            out.push(Detection {
                rbox: RBox::new(sx, sy, sl, sw, sr)?,
                confidence: sc,
                frame: frame_id,
            });
        }
    }
    Ok(out)
}

pub fn perturb_labels(
    frame: &SyntheticFrame,
    frame_id: u64,
    cfg: &PerturbConfig,
    seed: u64,
) -> Result<Vec<Detection>> {
    let gts: Vec<RBox> = frame.labels_bev.iter().map(|t| t.rbox).collect();
    perturb_boxes(frame_id, &gts, &frame.bev, cfg, seed)
}

/// Seed used for the detections of frame `index` in a perturbation run.
pub fn perturb_seed(base_seed: u64, frame: u64) -> u64 {
    base_seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(frame)
}

/// World point of a placed box's bottom center, for consistency checks.
pub fn bottom_center(b: &SceneBox3D) -> Vector3<f64> {
    b.bottom_center()
}

//! Pinhole cameras consistent with a road-plane homography.
//!
//! Given `H` mapping the road plane (world `z = 0`) to the image, every
//! zero-skew square-pixel camera `K [r1 r2 t] ~ H` reproduces the same
//! ground-plane appearance. Such cameras have their principal point on one
//! line of the image; choosing a point on it fixes the focal length through
//! the two road-axis vanishing points, after which the extrinsics follow
//! from `K^-1 H`.
//!
//! World coordinates are right-handed with `z` up; a valid camera sits at
//! positive height.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projective::{Frame, Homography, PlanePoint, ProjectiveError};

/// Denominator threshold for a finite vanishing point (canonical scale).
pub const VANISHING_EPS: f64 = 1e-12;
/// Tolerance on `R^T R = I` and `det R = 1`.
pub const ROTATION_TOL: f64 = 1e-9;
/// Frobenius bound for a sampled camera to count as reproducing `H`.
pub const REPRODUCTION_TOL: f64 = 1e-6;
/// Attempts allowed per requested camera in [`sample_camera_family`].
pub const ATTEMPTS_PER_CAMERA: usize = 100;
/// Pixels by which the feasible principal line may miss the sampling disc.
pub const CHORD_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("vanishing point at infinity (world x-axis: {x_axis}, world y-axis: {y_axis})")]
    VanishingAtInfinity { x_axis: bool, y_axis: bool },
    #[error("principal point inconsistent with homography: <U-P, V-P> = {inner} >= 0")]
    ImaginaryFocal { inner: f64 },
    #[error("degenerate homography: {0}")]
    DegenerateHomography(String),
    #[error("no sign choice places the camera above the road plane")]
    BehindPlane,
    #[error("only {found} of {requested} cameras found within the attempt budget")]
    SamplingExhausted { found: usize, requested: usize },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid extrinsics: {0}")]
    InvalidExtrinsics(String),
    #[error("point projects behind the camera (depth {depth})")]
    ProjectionBehindCamera { depth: f64 },
    #[error(transparent)]
    Projective(#[from] ProjectiveError),
}

pub type Result<T, E = CameraError> = std::result::Result<T, E>;

pub type PrincipalPoint = PlanePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub f: f64,
    pub px: f64,
    pub py: f64,
}

impl Intrinsics {
    pub fn new(f: f64, px: f64, py: f64) -> Result<Self> {
        let k = Self { f, px, py };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f.is_finite() && self.px.is_finite() && self.py.is_finite()) {
            return Err(CameraError::InvalidIntrinsics("non-finite value".into()));
        }
        if self.f <= 0.0 {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal length must be positive, got {}",
                self.f
            )));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> PrincipalPoint {
        PlanePoint::new(self.px, self.py)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.f, 0.0, self.px, 0.0, self.f, self.py, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let fi = 1.0 / self.f;
        Matrix3::new(fi, 0.0, -self.px * fi, 0.0, fi, -self.py * fi, 0.0, 0.0, 1.0)
    }
}

/// World-to-camera transform `X_cam = R X_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    r: Matrix3<f64>,
    t: Vector3<f64>,
}

impl Extrinsics {
    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self> {
        if r.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(CameraError::InvalidExtrinsics("non-finite value".into()));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).norm();
        if ortho > ROTATION_TOL {
            return Err(CameraError::InvalidExtrinsics(format!(
                "rotation is not orthonormal (|R^T R - I| = {ortho:e})"
            )));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(CameraError::InvalidExtrinsics(format!(
                "rotation has det {det}"
            )));
        }
        let e = Self { r, t };
        let height = e.center().z;
        if height <= 0.0 {
            return Err(CameraError::InvalidExtrinsics(format!(
                "camera center height {height} is not above the road plane"
            )));
        }
        Ok(e)
    }

    /// Camera at `center` facing compass `heading` (radians from world +x
    /// towards +y), with the optical axis `tilt` radians away from nadir.
    pub fn from_pose(center: Vector3<f64>, heading: f64, tilt: f64) -> Result<Self> {
        let (sh, ch) = heading.sin_cos();
        let (st, ct) = tilt.sin_cos();
        let forward = Vector3::new(st * ch, st * sh, -ct);
        let right = Vector3::new(sh, -ch, 0.0);
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * center);
        Self::new(r, t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }

    /// `C = -R^T t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.r * world + self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, extrinsics: Extrinsics) -> Self {
        Self {
            intrinsics,
            extrinsics,
        }
    }

    /// Pinhole projection of a world point; fails for non-positive depth.
    pub fn project(&self, world: &Vector3<f64>) -> Result<PlanePoint> {
        project(&self.intrinsics, &self.extrinsics, world)
    }

    pub fn homography(&self) -> Result<Homography> {
        homography_from_camera(&self.intrinsics, &self.extrinsics)
    }

    /// Canonical Frobenius distance between this camera's homography and `h`.
    pub fn reproduction_residual(&self, h: &Homography) -> Result<f64> {
        Ok(self.homography()?.distance(h))
    }
}

pub fn project(k: &Intrinsics, e: &Extrinsics, world: &Vector3<f64>) -> Result<PlanePoint> {
    let c = e.to_camera(world);
    if c.z <= 0.0 || !c.z.is_finite() {
        return Err(CameraError::ProjectionBehindCamera { depth: c.z });
    }
    Ok(PlanePoint::new(
        k.f * (c.x / c.z) + k.px,
        k.f * (c.y / c.z) + k.py,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingPair {
    /// Image of the world x-axis direction.
    pub u: PlanePoint,
    /// Image of the world y-axis direction.
    pub v: PlanePoint,
}

/// Vanishing points of the world x and y axes under `h` (world to image).
pub fn vanishing_points(h: &Homography) -> Result<VanishingPair> {
    let m = h.matrix();
    let (h31, h32) = (m[(2, 0)], m[(2, 1)]);
    let x_axis = h31.abs() <= VANISHING_EPS;
    let y_axis = h32.abs() <= VANISHING_EPS;
    if x_axis || y_axis {
        return Err(CameraError::VanishingAtInfinity { x_axis, y_axis });
    }
    Ok(VanishingPair {
        u: PlanePoint::new(m[(0, 0)] / h31, m[(1, 0)] / h31),
        v: PlanePoint::new(m[(0, 1)] / h32, m[(1, 1)] / h32),
    })
}

/// Focal length from orthogonal vanishing points and a principal point.
pub fn focal_from_vps(vp: &VanishingPair, p: &PrincipalPoint) -> Result<f64> {
    let inner = vp.u.sub(p).dot(&vp.v.sub(p));
    if !(inner < 0.0) {
        return Err(CameraError::ImaginaryFocal { inner });
    }
    Ok((-inner).sqrt())
}

/// Inverse square root of a symmetric positive definite 2x2 matrix.
fn inv_sqrt_spd2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let det = m.determinant();
    if !(det > 0.0) {
        return None;
    }
    let delta = det.sqrt();
    let tau = (m.trace() + 2.0 * delta).sqrt();
    let root = (m + Matrix2::identity() * delta) / tau;
    root.try_inverse()
}

/// Extrinsics such that `K [r1 r2 t]` is proportional to `h`.
pub fn recover_extrinsics(h: &Homography, k: &Intrinsics) -> Result<Extrinsics> {
    k.validate()?;
    let m = k.inverse_matrix() * h.matrix();
    let (m1, m2, m3) = (m.column(0), m.column(1), m.column(2));
    let (n1, n2) = (m1.norm(), m2.norm());
    if n1 < 1e-12 || n2 < 1e-12 {
        return Err(CameraError::DegenerateHomography(format!(
            "column norms {n1:e}, {n2:e}"
        )));
    }
    let s = 2.0 / (n1 + n2);
    let a = Matrix3x2::from_columns(&[m1 * s, m2 * s]);
    let t = m3 * s;

    // closest orthonormal pair: A (A^T A)^(-1/2)
    let gram = a.transpose() * a;
    let inv_root = inv_sqrt_spd2(&gram).ok_or_else(|| {
        CameraError::DegenerateHomography("road-plane axes are parallel in the image".into())
    })?;
    let q = a * inv_root;
    let mut r1: Vector3<f64> = q.column(0).into();
    let mut r2: Vector3<f64> = q.column(1).into();
    let r3 = r1.cross(&r2);
    let mut t: Vector3<f64> = t;

    // camera height is -(r3 . t); flipping the sign of s negates r1, r2, t
    let height = -r3.dot(&t);
    if height.abs() <= 1e-12 * t.norm() || height == 0.0 {
        return Err(CameraError::BehindPlane);
    }
    if height < 0.0 {
        r1 = -r1;
        r2 = -r2;
        t = -t;
    }
    let r = Matrix3::from_columns(&[r1, r2, r3]);
    Extrinsics::new(r, t)
}

/// `K [r1 r2 t]`, canonicalized, mapping world to the original image.
pub fn homography_from_camera(k: &Intrinsics, e: &Extrinsics) -> Result<Homography> {
    let r = e.rotation();
    let t = e.translation();
    let m = k.matrix() * Matrix3::from_columns(&[r.column(0).into(), r.column(1).into(), *t]);
    Ok(Homography::new(m, Frame::World, Frame::Ori)?)
}

/// Camera from a homography and a chosen principal point.
pub fn camera_for_principal_point(h: &Homography, p: &PrincipalPoint) -> Result<CameraModel> {
    let vp = vanishing_points(h)?;
    let f = focal_from_vps(&vp, p)?;
    let k = Intrinsics::new(f, p.x, p.y)?;
    let e = recover_extrinsics(h, &k)?;
    Ok(CameraModel::new(k, e))
}

/// Line of principal points admitting a zero-skew square-pixel camera that
/// reproduces `h` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalLine {
    /// Point of the line closest to the reference point it was built around.
    pub foot: PlanePoint,
    /// Unit direction.
    pub direction: PlanePoint,
}

impl PrincipalLine {
    pub fn distance(&self, p: &PrincipalPoint) -> f64 {
        let d = p.sub(&self.foot);
        (d.x * self.direction.y - d.y * self.direction.x).abs()
    }
}

/// Feasible principal points for `h`.
///
/// With `w = K^-T K^-1 ~ [[1,0,a],[0,1,b],[a,b,c]]`, the conditions
/// `h1' w h2 = 0` and `h1' w h1 = h2' w h2` are linear in `(a, b, c)`;
/// eliminating `c` leaves a line in `P = -(a, b)`. Work happens in image
/// coordinates centered on `around` and scaled to unit size.
pub fn principal_line(h: &Homography, around: &PrincipalPoint) -> Result<PrincipalLine> {
    vanishing_points(h)?;
    let s = 1.0 / (around.x.hypot(around.y) + 1.0);
    let t = Matrix3::new(s, 0.0, -s * around.x, 0.0, s, -s * around.y, 0.0, 0.0, 1.0);
    let m = t * h.matrix();
    let (x1, y1, z1) = (m[(0, 0)], m[(1, 0)], m[(2, 0)]);
    let (x2, y2, z2) = (m[(0, 1)], m[(1, 1)], m[(2, 1)]);
    let e1 = [x1 * x2 + y1 * y2, x1 * z2 + z1 * x2, y1 * z2 + z1 * y2, z1 * z2];
    let e2 = [
        x1 * x1 + y1 * y1 - x2 * x2 - y2 * y2,
        2.0 * (x1 * z1 - x2 * z2),
        2.0 * (y1 * z1 - y2 * z2),
        z1 * z1 - z2 * z2,
    ];
    let comb: Vec<f64> = (0..3).map(|i| e2[3] * e1[i] - e1[3] * e2[i]).collect();
    let (gamma, alpha, beta) = (comb[0], comb[1], comb[2]);
    let nn = alpha * alpha + beta * beta;
    if !(nn.sqrt() > 1e-300) || !nn.is_finite() {
        return Err(CameraError::DegenerateHomography(
            "no line of feasible principal points".into(),
        ));
    }
    // alpha * a + beta * b + gamma = 0 with P' = -(a, b)
    let foot = PlanePoint::new(gamma * alpha / nn / s + around.x, gamma * beta / nn / s + around.y);
    let norm = nn.sqrt();
    Ok(PrincipalLine {
        foot,
        direction: PlanePoint::new(-beta / norm, alpha / norm),
    })
}

/// Draws `n` cameras reproducing `h`, with principal points uniform on the
/// chord that the feasible line of [`principal_line`] cuts from the disc of
/// `radius` around `center`. A zero radius always uses `center` itself.
///
/// Draws whose principal point admits no real focal length are skipped; at
/// most `100 * n` draws are made in total.
pub fn sample_camera_family(
    h: &Homography,
    center: &PrincipalPoint,
    radius: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<CameraModel>> {
    if n == 0 {
        return Err(CameraError::InvalidIntrinsics("n must be at least 1".into()));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(CameraError::InvalidIntrinsics(format!(
            "sampling radius must be finite and non-negative, got {radius}"
        )));
    }
    let vp = vanishing_points(h)?;
    let line = principal_line(h, center)?;
    let gap = line.distance(center);
    if radius > 0.0 && gap > radius + CHORD_SLACK {
        return Err(CameraError::SamplingExhausted {
            found: 0,
            requested: n,
        });
    }
    let half = (radius * radius - gap * gap).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cameras = Vec::with_capacity(n);
    for _ in 0..ATTEMPTS_PER_CAMERA * n {
        let u = (2.0 * rng.random::<f64>() - 1.0) * half;
        let p = if radius == 0.0 {
            *center
        } else {
            PlanePoint::new(
                line.foot.x + u * line.direction.x,
                line.foot.y + u * line.direction.y,
            )
        };
        let f = match focal_from_vps(&vp, &p) {
            Ok(f) => f,
            Err(CameraError::ImaginaryFocal { .. }) => continue,
            Err(e) => return Err(e),
        };
        let k = Intrinsics::new(f, p.x, p.y)?;
        let e = match recover_extrinsics(h, &k) {
            Ok(e) => e,
            Err(CameraError::BehindPlane) | Err(CameraError::InvalidExtrinsics(_)) => continue,
            Err(e) => return Err(e),
        };
        let cam = CameraModel::new(k, e);
        if cam.reproduction_residual(h)? > REPRODUCTION_TOL {
            continue;
        }
        cameras.push(cam);
        if cameras.len() == n {
            return Ok(cameras);
        }
    }
    Err(CameraError::SamplingExhausted {
        found: cameras.len(),
        requested: n,
    })
}

/// JSON record of a camera as written by `synth-cameras`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub f: f64,
    pub px: f64,
    pub py: f64,
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
    #[serde(rename = "H_check_residual")]
    pub h_check_residual: f64,
}

impl CameraRecord {
    pub fn new(cam: &CameraModel, h: &Homography) -> Result<Self> {
        let r = cam.extrinsics.rotation();
        let t = cam.extrinsics.translation();
        Ok(Self {
            f: cam.intrinsics.f,
            px: cam.intrinsics.px,
            py: cam.intrinsics.py,
            r: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            t: [t.x, t.y, t.z],
            h_check_residual: cam.reproduction_residual(h)?,
        })
    }

    pub fn to_camera(&self) -> Result<CameraModel> {
        let k = Intrinsics::new(self.f, self.px, self.py)?;
        let r = Matrix3::from_fn(|i, j| self.r[i][j]);
        let e = Extrinsics::new(r, Vector3::from(self.t))?;
        Ok(CameraModel::new(k, e))
    }
}

#[derive(Serialize, Deserialize)]
struct ExtrinsicsDoc {
    #[serde(rename = "R")]
    r: [[f64; 3]; 3],
    t: [f64; 3],
}

impl Serialize for Extrinsics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let r = &self.r;
        ExtrinsicsDoc {
            r: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            t: [self.t.x, self.t.y, self.t.z],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Extrinsics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ExtrinsicsDoc::deserialize(d)?;
        Extrinsics::new(Matrix3::from_fn(|i, j| doc.r[i][j]), Vector3::from(doc.t))
            .map_err(serde::de::Error::custom)
    }
}

//! Planar projective transforms between the road plane and image planes.
//!
//! A [`Homography`] carries the frames it maps between so that compositions
//! cannot silently run in the wrong direction. Matrices are kept in a
//! canonical scale: unit Frobenius norm with the largest-magnitude element
//! positive.

use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold on `|w|` below which a point is treated as mapped to infinity.
pub const INFINITY_EPS: f64 = 1e-12;
/// Threshold on `|det|` of a canonical matrix below which it is singular.
pub const SINGULAR_EPS: f64 = 1e-12;
/// Minimum separation of two landmarks within one plane.
pub const COINCIDENT_EPS: f64 = 1e-9;
/// Minimum spread across the principal axis of a point set.
pub const COLLINEAR_EPS: f64 = 1e-9;
/// Minimum gap between the two smallest singular values of the DLT system.
pub const SPECTRAL_GAP_EPS: f64 = 1e-12;

// Relative deviation of the norm from 1 that is accepted as already normalized.
// Repeated canonicalization therefore never rescales and is exactly idempotent.
const UNIT_NORM_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectiveError {
    #[error("at least 4 correspondences are required, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("point maps to infinity (|w| = {w:e})")]
    PointAtInfinity { w: f64 },
    #[error("frame mismatch: cannot chain {left} after {right}")]
    FrameMismatch { left: String, right: String },
    #[error("singular matrix (|det| = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T, E = ProjectiveError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &PlanePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(&self, other: &PlanePoint) -> PlanePoint {
        PlanePoint::new(self.x - other.x, self.y - other.y)
    }

    pub fn dot(&self, other: &PlanePoint) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl From<[f64; 2]> for PlanePoint {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<PlanePoint> for [f64; 2] {
    fn from(p: PlanePoint) -> Self {
        [p.x, p.y]
    }
}

/// Coordinate frame of a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Road plane, meters.
    World,
    /// Original camera image, pixels.
    Ori,
    /// Bird's-eye-view image, pixels.
    Bev,
    /// Feature map of the original image.
    OriF,
    /// Feature map of the BEV image.
    BevF,
}

impl Frame {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frame::World => "world",
            Frame::Ori => "ori",
            Frame::Bev => "bev",
            Frame::OriF => "ori_f",
            Frame::BevF => "bev_f",
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Canonical representative of a 3x3 projective matrix.
///
/// Divides by the Frobenius norm, then flips the sign so that the first
/// element of largest magnitude (row-major) is positive.
pub fn canonical(m: &Matrix3<f64>) -> Matrix3<f64> {
    let norm = m.norm();
    let mut out = if (norm - 1.0).abs() <= UNIT_NORM_TOL {
        *m
    } else {
        m / norm
    };
    let mut lead = 0.0f64;
    for r in 0..3 {
        for c in 0..3 {
            if out[(r, c)].abs() > lead.abs() {
                lead = out[(r, c)];
            }
        }
    }
    if lead < 0.0 {
        out.neg_mut();
    }
    out
}

/// A plane-to-plane projective map `s * p_dst = m * p_src`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    src: Frame,
    dst: Frame,
}

impl Homography {
    /// Canonicalizes `m` and checks that it is invertible.
    pub fn new(m: Matrix3<f64>, src: Frame, dst: Frame) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(ProjectiveError::NonFinite("homography matrix"));
        }
        if m.norm() == 0.0 {
            return Err(ProjectiveError::SingularMatrix { det: 0.0 });
        }
        let m = canonical(&m);
        let det = m.determinant();
        if det.abs() <= SINGULAR_EPS {
            return Err(ProjectiveError::SingularMatrix { det });
        }
        Ok(Self { m, src, dst })
    }

    pub fn from_rows(rows: [[f64; 3]; 3], src: Frame, dst: Frame) -> Result<Self> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]), src, dst)
    }

    pub fn identity(src: Frame, dst: Frame) -> Self {
        Self::new(Matrix3::identity(), src, dst).expect("identity is invertible")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn src(&self) -> Frame {
        self.src
    }

    pub fn dst(&self) -> Frame {
        self.dst
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Frobenius distance between canonical matrices, ignoring frames.
    pub fn distance(&self, other: &Homography) -> f64 {
        (self.m - other.m).norm()
    }

    pub fn apply(&self, p: PlanePoint) -> Result<PlanePoint> {
        apply(self, p)
    }
}

/// Maps `p` through `h`.
pub fn apply(h: &Homography, p: PlanePoint) -> Result<PlanePoint> {
    let m = &h.m;
    let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    if w.abs() <= INFINITY_EPS || !w.is_finite() {
        return Err(ProjectiveError::PointAtInfinity { w });
    }
    let x = m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)];
    let y = m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)];
    Ok(PlanePoint::new(x / w, y / w))
}

/// Returns `a ∘ b`, i.e. first `b` then `a`.
pub fn compose(a: &Homography, b: &Homography) -> Result<Homography> {
    if b.dst != a.src {
        return Err(ProjectiveError::FrameMismatch {
            left: format!("{}->{}", a.src, a.dst),
            right: format!("{}->{}", b.src, b.dst),
        });
    }
    Homography::new(a.m * b.m, b.src, a.dst)
}

pub fn invert(h: &Homography) -> Result<Homography> {
    let det = h.m.determinant();
    if det.abs() <= SINGULAR_EPS {
        return Err(ProjectiveError::SingularMatrix { det });
    }
    let inv = h
        .m
        .try_inverse()
        .ok_or(ProjectiveError::SingularMatrix { det })?;
    Homography::new(inv, h.dst, h.src)
}

/// One world/image landmark pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub world: PlanePoint,
    pub image: PlanePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Correspondence {
    pub fn new(world: PlanePoint, image: PlanePoint) -> Self {
        Self {
            world,
            image,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<Correspondence>) -> Self {
        Self { pairs }
    }

    pub fn from_points(world: &[PlanePoint], image: &[PlanePoint]) -> Self {
        Self::new(
            world
                .iter()
                .zip(image)
                .map(|(w, i)| Correspondence::new(*w, *i))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn world_points(&self) -> Vec<PlanePoint> {
        self.pairs.iter().map(|p| p.world).collect()
    }

    fn image_points(&self) -> Vec<PlanePoint> {
        self.pairs.iter().map(|p| p.image).collect()
    }

    /// Checks the structural preconditions of estimation.
    pub fn validate(&self) -> Result<()> {
        if self.pairs.len() < 4 {
            return Err(ProjectiveError::TooFewPoints(self.pairs.len()));
        }
        if self
            .pairs
            .iter()
            .any(|p| !p.world.is_finite() || !p.image.is_finite())
        {
            return Err(ProjectiveError::NonFinite("correspondence"));
        }
        check_point_set(&self.world_points(), "world")?;
        check_point_set(&self.image_points(), "image")?;
        Ok(())
    }
}

fn check_point_set(points: &[PlanePoint], which: &str) -> Result<()> {
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate().skip(i + 1) {
            if a.distance(b) <= COINCIDENT_EPS {
                return Err(ProjectiveError::DegenerateConfiguration(format!(
                    "{which} points {i} and {j} coincide"
                )));
            }
        }
    }
    let spread = min_spread(points);
    if spread <= COLLINEAR_EPS {
        return Err(ProjectiveError::DegenerateConfiguration(format!(
            "{which} points are collinear (smallest singular value {spread:e})"
        )));
    }
    Ok(())
}

/// Smallest singular value of the centered `n x 2` point matrix.
fn min_spread(points: &[PlanePoint]) -> f64 {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // eigenvalues of the 2x2 scatter matrix are the squared singular values
    let half_trace = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy).sqrt();
    let lambda_min = half_trace - disc;
    lambda_min.max(0.0).sqrt()
}

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to sqrt(2).
fn normalizing_transform(points: &[PlanePoint]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .sum::<f64>()
        / n;
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform_points(t: &Matrix3<f64>, points: &[PlanePoint]) -> Vec<PlanePoint> {
    points
        .iter()
        .map(|p| {
            let v = t * Vector3::new(p.x, p.y, 1.0);
            PlanePoint::new(v.x / v.z, v.y / v.z)
        })
        .collect()
}

/// Assembles the `2n x 9` system `A h = 0` for `image ~ H world`.
fn design_matrix(world: &[PlanePoint], image: &[PlanePoint]) -> DMatrix<f64> {
    let n = world.len();
    // At least 9 rows so that the SVD exposes the full right singular basis.
    let mut a = DMatrix::<f64>::zeros((2 * n).max(9), 9);
    for (i, (w, p)) in world.iter().zip(image).enumerate() {
        let (x, y, u, v) = (w.x, w.y, p.x, p.y);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }
    a
}

fn sorted_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Condition number `sigma_max / sigma_8` of the DLT design matrix.
///
/// `sigma_8` is the smallest singular value that is nonzero for a
/// well-posed system; the ninth spans the solution. With `normalized` the
/// matrix is built from Hartley-normalized points, as estimation does.
pub fn dlt_condition_number(c: &CorrespondenceSet, normalized: bool) -> f64 {
    let (mut world, mut image) = (c.world_points(), c.image_points());
    if normalized {
        world = transform_points(&normalizing_transform(&world), &world);
        image = transform_points(&normalizing_transform(&image), &image);
    }
    let s = sorted_singular_values(&design_matrix(&world, &image));
    s[0] / s[7]
}

/// Estimates `H` mapping world to original image by normalized DLT.
pub fn estimate_homography_dlt(c: &CorrespondenceSet) -> Result<Homography> {
    c.validate()?;
    let world = c.world_points();
    let image = c.image_points();
    let t_world = normalizing_transform(&world);
    let t_image = normalizing_transform(&image);
    let a = design_matrix(
        &transform_points(&t_world, &world),
        &transform_points(&t_image, &image),
    );

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| ProjectiveError::NumericalFailure("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smallest = order[8];
    let second = order[7];
    let gap = svd.singular_values[second] - svd.singular_values[smallest];
    if gap < SPECTRAL_GAP_EPS {
        return Err(ProjectiveError::NumericalFailure(format!(
            "ambiguous solution: singular value gap {gap:e}"
        )));
    }
    let h = v_t.row(smallest);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    let t_image_inv = t_image
        .try_inverse()
        .ok_or_else(|| ProjectiveError::NumericalFailure("normalization not invertible".into()))?;
    let m = t_image_inv * h_norm * t_world;
    Homography::new(m, Frame::World, Frame::Ori).map_err(|e| match e {
        ProjectiveError::SingularMatrix { det } => ProjectiveError::DegenerateConfiguration(
            format!("estimated homography is singular (|det| = {det:e})"),
        ),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Pixel residual per pair; infinite when the world point maps to infinity.
    pub residuals: Vec<f64>,
    pub rms: f64,
    pub max: f64,
}

pub fn reprojection_report(h: &Homography, c: &CorrespondenceSet) -> ErrorReport {
    let residuals: Vec<f64> = c
        .pairs
        .iter()
        .map(|p| match apply(h, p.world) {
            Ok(q) => q.distance(&p.image),
            Err(_) => f64::INFINITY,
        })
        .collect();
    let (rms, max) = if residuals.is_empty() {
        (0.0, 0.0)
    } else {
        let sq = residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
        (sq.sqrt(), residuals.iter().copied().fold(0.0, f64::max))
    };
    ErrorReport {
        residuals,
        rms,
        max,
    }
}

/// JSON document form of a homography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomographyDoc {
    pub src: Frame,
    pub dst: Frame,
    pub m: [[f64; 3]; 3],
}

impl From<&Homography> for HomographyDoc {
    fn from(h: &Homography) -> Self {
        Self {
            src: h.src,
            dst: h.dst,
            m: h.rows(),
        }
    }
}

impl TryFrom<HomographyDoc> for Homography {
    type Error = ProjectiveError;

    fn try_from(doc: HomographyDoc) -> Result<Self> {
        Homography::from_rows(doc.m, doc.src, doc.dst)
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HomographyDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = HomographyDoc::deserialize(d)?;
        Homography::try_from(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<PlanePoint> {
        vec![
            PlanePoint::new(0.0, 0.0),
            PlanePoint::new(1.0, 0.0),
            PlanePoint::new(1.0, 1.0),
            PlanePoint::new(0.0, 1.0),
        ]
    }

    #[test]
    fn identity_from_unit_square() {
        let sq = unit_square();
        let h = estimate_homography_dlt(&CorrespondenceSet::from_points(&sq, &sq)).unwrap();
        let id = Homography::identity(Frame::World, Frame::Ori);
        assert!(h.distance(&id) < 1e-12, "{}", h.matrix());
    }

    #[test]
    fn scaled_square_gives_similarity() {
        let sq = unit_square();
        let scaled: Vec<_> = sq.iter().map(|p| PlanePoint::new(2.0 * p.x, 2.0 * p.y)).collect();
        let h = estimate_homography_dlt(&CorrespondenceSet::from_points(&sq, &scaled)).unwrap();
        let expected = canonical(&Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0)));
        assert!((h.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let sq = unit_square();
        let c = CorrespondenceSet::from_points(&sq[..3], &sq[..3]);
        assert_eq!(
            estimate_homography_dlt(&c),
            Err(ProjectiveError::TooFewPoints(3))
        );
    }

    #[test]
    fn collinear_world_points_rejected() {
        let world: Vec<_> = (0..5).map(|i| PlanePoint::new(i as f64, 2.0 * i as f64)).collect();
        let image = unit_square()
            .into_iter()
            .chain([PlanePoint::new(3.0, 7.0)])
            .collect::<Vec<_>>();
        let err = estimate_homography_dlt(&CorrespondenceSet::from_points(&world, &image));
        assert!(matches!(err, Err(ProjectiveError::DegenerateConfiguration(_))));
    }

    #[test]
    fn coincident_points_rejected() {
        let mut world = unit_square();
        world.push(PlanePoint::new(1.0, 1.0));
        let mut image = unit_square();
        image.push(PlanePoint::new(5.0, 5.0));
        let err = estimate_homography_dlt(&CorrespondenceSet::from_points(&world, &image));
        assert!(matches!(err, Err(ProjectiveError::DegenerateConfiguration(_))));
    }

    #[test]
    fn ambiguous_system_is_a_numerical_failure() {
        // three of the four points are collinear: rank drops by one
        let world = vec![
            PlanePoint::new(0.0, 0.0),
            PlanePoint::new(1.0, 0.0),
            PlanePoint::new(2.0, 0.0),
            PlanePoint::new(0.0, 1.0),
        ];
        let err = estimate_homography_dlt(&CorrespondenceSet::from_points(&world, &world));
        assert!(matches!(err, Err(ProjectiveError::NumericalFailure(_))), "{err:?}");
    }

    #[test]
    fn apply_examples() {
        let id = Homography::identity(Frame::World, Frame::Ori);
        let q = id.apply(PlanePoint::new(3.5, -2.0)).unwrap();
        assert!((q.x - 3.5).abs() < 1e-15 && (q.y + 2.0).abs() < 1e-15);

        let d = Homography::from_rows(
            [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]],
            Frame::World,
            Frame::Ori,
        )
        .unwrap();
        let q = d.apply(PlanePoint::new(1.0, 1.0)).unwrap();
        assert!((q.x - 2.0).abs() < 1e-15 && (q.y - 2.0).abs() < 1e-15);

        let h = Homography::from_rows(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.01, 0.0, 1.0]],
            Frame::World,
            Frame::Ori,
        )
        .unwrap();
        assert!(matches!(
            h.apply(PlanePoint::new(-100.0, 0.0)),
            Err(ProjectiveError::PointAtInfinity { .. })
        ));
    }

    #[test]
    fn compose_checks_frames() {
        let a = Homography::identity(Frame::World, Frame::Bev);
        let b = Homography::identity(Frame::World, Frame::Ori);
        assert!(matches!(compose(&a, &b), Err(ProjectiveError::FrameMismatch { .. })));
        let ab = compose(&a, &invert(&b).unwrap()).unwrap();
        assert_eq!((ab.src(), ab.dst()), (Frame::Ori, Frame::Bev));
    }

    #[test]
    fn invert_diag() {
        let d = Homography::from_rows(
            [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]],
            Frame::World,
            Frame::Ori,
        )
        .unwrap();
        let inv = invert(&d).unwrap();
        let expected = canonical(&Matrix3::from_diagonal(&Vector3::new(0.5, 0.5, 1.0)));
        assert!((inv.matrix() - expected).norm() < 1e-15);
        assert_eq!((inv.src(), inv.dst()), (Frame::Ori, Frame::World));
    }

    #[test]
    fn singular_matrix_rejected() {
        let err = Homography::from_rows(
            [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]],
            Frame::World,
            Frame::Ori,
        );
        assert!(matches!(err, Err(ProjectiveError::SingularMatrix { .. })));
    }

    #[test]
    fn canonical_sign_and_norm() {
        let m = Matrix3::new(-4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0);
        let c = canonical(&m);
        assert!((c.norm() - 1.0).abs() < 1e-15);
        assert!(c[(0, 0)] > 0.0);
        assert_eq!(canonical(&c), c);
    }

    #[test]
    fn displaced_point_residual() {
        let sq = unit_square();
        let mut image = sq.clone();
        image[2] = PlanePoint::new(image[2].x + 3.0, image[2].y + 4.0);
        let id = Homography::identity(Frame::World, Frame::Ori);
        let rep = reprojection_report(&id, &CorrespondenceSet::from_points(&sq, &image));
        assert_eq!(rep.residuals, vec![0.0, 0.0, 5.0, 0.0]);
        assert_eq!(rep.max, 5.0);
        assert!((rep.rms - 2.5).abs() < 1e-15);
    }

    #[test]
    fn infinite_residual_is_reported_not_raised() {
        let h = Homography::from_rows(
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.01, 0.0, 1.0]],
            Frame::World,
            Frame::Ori,
        )
        .unwrap();
        let c = CorrespondenceSet::from_points(
            &[PlanePoint::new(-100.0, 0.0), PlanePoint::new(0.0, 0.0)],
            &[PlanePoint::new(0.0, 0.0), PlanePoint::new(0.0, 0.0)],
        );
        let rep = reprojection_report(&h, &c);
        assert!(rep.residuals[0].is_infinite());
        assert_eq!(rep.residuals[1], 0.0);
        assert!(rep.rms.is_infinite());
    }

    #[test]
    fn json_schemas() {
        let h: Homography = serde_json::from_str(
            r#"{"src":"world","dst":"ori","m":[[1,0,0],[0,1,0],[0,0,1]]}"#,
        )
        .unwrap();
        assert_eq!(h, Homography::identity(Frame::World, Frame::Ori));
        let back: Homography = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(back, h);

        let c: CorrespondenceSet = serde_json::from_str(
            r#"{"pairs":[{"world":[1.5,2],"image":[100,200],"label":"lamp post"},{"world":[0,0],"image":[1,1]}]}"#,
        )
        .unwrap();
        assert_eq!(c.pairs[0].label.as_deref(), Some("lamp post"));
        assert_eq!(c.pairs[1].image, PlanePoint::new(1.0, 1.0));
    }
}

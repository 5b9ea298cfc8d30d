//! Inverse perspective mapping of images, point sets and feature grids.
//!
//! Pixel `(ix, iy)` has its center at the continuous coordinate `(ix, iy)`.
//! Images are resampled by inverse mapping: every destination pixel center
//! is pulled back through the inverse homography and sampled in the source.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projective::{self, Frame, Homography, PlanePoint, ProjectiveError};
use crate::raster::{RasterError, RasterImage, Samples};

// Pulled-back coordinates this close to an integer are treated as that integer,
// so that identity and integer-translation warps sample pixel centers exactly.
const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum WarpError {
    #[error(transparent)]
    Projective(#[from] ProjectiveError),
    #[error("point {index} maps to infinity")]
    PointAtInfinity { index: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid BEV frame: {0}")]
    InvalidBev(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Nearest,
    Bilinear,
}

impl std::str::FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            other => Err(format!("unknown interpolation {other:?} (nearest|bilinear)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Warps `src` by `h` (destination from source) into an `out_w x out_h` image.
///
/// Destination pixels whose preimage falls outside the source, or maps to
/// infinity, receive `fill` in every channel. Nearest sampling covers
/// `[-0.5, w - 0.5)`; bilinear sampling covers `[0, w - 1]`.
pub fn warp_image(
    src: &RasterImage,
    h: &Homography,
    out_w: usize,
    out_h: usize,
    fill: f32,
    interp: Interpolation,
) -> Result<RasterImage, WarpError> {
    warp_image_with(src, h, out_w, out_h, fill, interp, Execution::Parallel)
}

pub fn warp_image_with(
    src: &RasterImage,
    h: &Homography,
    out_w: usize,
    out_h: usize,
    fill: f32,
    interp: Interpolation,
    exec: Execution,
) -> Result<RasterImage, WarpError> {
    let inv = projective::invert(h)?;
    let ch = src.channels();
    let row_len = out_w * ch;
    let sampler = Sampler {
        src,
        inv: &inv,
        fill,
        interp,
    };
    let samples = match src.samples() {
        Samples::U8(_) => {
            let fill_u8 = to_u8(fill);
            let mut out = vec![fill_u8; row_len * out_h];
            let row = |(y, row): (usize, &mut [u8])| sampler.row_u8(y, row);
            if row_len > 0 {
                match exec {
                    Execution::Serial => out.chunks_mut(row_len).enumerate().for_each(row),
                    Execution::Parallel => out.par_chunks_mut(row_len).enumerate().for_each(row),
                }
            }
            Samples::U8(out)
        }
        Samples::F32(_) => {
            let mut out = vec![fill; row_len * out_h];
            let row = |(y, row): (usize, &mut [f32])| sampler.row_f32(y, row);
            if row_len > 0 {
                match exec {
                    Execution::Serial => out.chunks_mut(row_len).enumerate().for_each(row),
                    Execution::Parallel => out.par_chunks_mut(row_len).enumerate().for_each(row),
                }
            }
            Samples::F32(out)
        }
    };
    Ok(RasterImage::new(out_w, out_h, ch, samples)?)
}

fn to_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

enum Tap {
    Outside,
    Nearest(usize, usize),
    Bilinear {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        fx: f32,
        fy: f32,
    },
}

struct Sampler<'a> {
    src: &'a RasterImage,
    inv: &'a Homography,
    fill: f32,
    interp: Interpolation,
}

impl Sampler<'_> {
    fn tap(&self, x: usize, y: usize) -> Tap {
        let Ok(p) = projective::apply(self.inv, PlanePoint::new(x as f64, y as f64)) else {
            return Tap::Outside;
        };
        let (sx, sy) = (snap(p.x), snap(p.y));
        let (w, h) = (self.src.width() as f64, self.src.height() as f64);
        match self.interp {
            Interpolation::Nearest => {
                if !(sx >= -0.5 && sx < w - 0.5 && sy >= -0.5 && sy < h - 0.5) {
                    return Tap::Outside;
                }
                let ix = ((sx + 0.5).floor() as usize).min(self.src.width() - 1);
                let iy = ((sy + 0.5).floor() as usize).min(self.src.height() - 1);
                Tap::Nearest(ix, iy)
            }
            Interpolation::Bilinear => {
                if !(sx >= 0.0 && sx <= w - 1.0 && sy >= 0.0 && sy <= h - 1.0) {
                    return Tap::Outside;
                }
                let (fx0, fy0) = (sx.floor(), sy.floor());
                let (x0, y0) = (fx0 as usize, fy0 as usize);
                Tap::Bilinear {
                    x0,
                    y0,
                    x1: (x0 + 1).min(self.src.width() - 1),
                    y1: (y0 + 1).min(self.src.height() - 1),
                    fx: (sx - fx0) as f32,
                    fy: (sy - fy0) as f32,
                }
            }
        }
    }

    /// Single-precision lerp along y at both columns, then along x.
    #[allow(clippy::too_many_arguments)]
    fn bilinear(&self, x0: usize, y0: usize, x1: usize, y1: usize, fx: f32, fy: f32, c: usize) -> f32 {
        let a = self.src.get(x0, y0, c);
        let b = self.src.get(x0, y1, c);
        let d = self.src.get(x1, y0, c);
        let e = self.src.get(x1, y1, c);
        let left = a + (b - a) * fy;
        let right = d + (e - d) * fy;
        left + (right - left) * fx
    }

    fn row_u8(&self, y: usize, row: &mut [u8]) {
        let Samples::U8(data) = self.src.samples() else {
            unreachable!()
        };
        let ch = self.src.channels();
        let sw = self.src.width();
        for (x, px) in row.chunks_mut(ch).enumerate() {
            match self.tap(x, y) {
                Tap::Outside => px.fill(to_u8(self.fill)),
                Tap::Nearest(ix, iy) => {
                    let i = (iy * sw + ix) * ch;
                    px.copy_from_slice(&data[i..i + ch]);
                }
                Tap::Bilinear {
                    x0,
                    y0,
                    x1,
                    y1,
                    fx,
                    fy,
                } => {
                    for (c, out) in px.iter_mut().enumerate() {
                        *out = to_u8(self.bilinear(x0, y0, x1, y1, fx, fy, c));
                    }
                }
            }
        }
    }

    fn row_f32(&self, y: usize, row: &mut [f32]) {
        let ch = self.src.channels();
        for (x, px) in row.chunks_mut(ch).enumerate() {
            match self.tap(x, y) {
                Tap::Outside => px.fill(self.fill),
                Tap::Nearest(ix, iy) => {
                    for (c, out) in px.iter_mut().enumerate() {
                        *out = self.src.get(ix, iy, c);
                    }
                }
                Tap::Bilinear {
                    x0,
                    y0,
                    x1,
                    y1,
                    fx,
                    fy,
                } => {
                    for (c, out) in px.iter_mut().enumerate() {
                        *out = self.bilinear(x0, y0, x1, y1, fx, fy, c);
                    }
                }
            }
        }
    }
}

/// Feature-map sampling of an input image: cell `i` is centered at input
/// coordinate `offset + stride * i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub stride: f64,
    pub offset: f64,
}

impl GridSpec {
    pub fn new(stride: f64, offset: f64) -> Result<Self, WarpError> {
        if !(stride > 0.0) || !stride.is_finite() || !offset.is_finite() {
            return Err(WarpError::InvalidGrid(format!(
                "stride {stride}, offset {offset}"
            )));
        }
        Ok(Self { stride, offset })
    }

    /// Grid of a stride-`s` convolution pyramid: offset `(s - 1) / 2`.
    pub fn for_stride(stride: f64) -> Result<Self, WarpError> {
        Self::new(stride, (stride - 1.0) / 2.0)
    }

    /// Maps feature coordinates to input-pixel coordinates.
    pub fn to_input(&self) -> nalgebra::Matrix3<f64> {
        let (s, o) = (self.stride, self.offset);
        nalgebra::Matrix3::new(s, 0.0, o, 0.0, s, o, 0.0, 0.0, 1.0)
    }

    pub fn to_feature(&self) -> nalgebra::Matrix3<f64> {
        let (s, o) = (self.stride, self.offset);
        nalgebra::Matrix3::new(1.0 / s, 0.0, -o / s, 0.0, 1.0 / s, -o / s, 0.0, 0.0, 1.0)
    }
}

/// Homography between the original-view and BEV feature maps.
pub fn grid_homography(
    h_bev_ori: &Homography,
    ori_grid: &GridSpec,
    bev_grid: &GridSpec,
) -> Result<Homography, WarpError> {
    let m = bev_grid.to_feature() * h_bev_ori.matrix() * ori_grid.to_input();
    Ok(Homography::new(m, Frame::OriF, Frame::BevF)?)
}

pub fn warp_points(h: &Homography, pts: &[PlanePoint]) -> Result<Vec<PlanePoint>, WarpError> {
    pts.iter()
        .enumerate()
        .map(|(index, p)| {
            projective::apply(h, *p).map_err(|e| match e {
                ProjectiveError::PointAtInfinity { .. } => WarpError::PointAtInfinity { index },
                other => WarpError::Projective(other),
            })
        })
        .collect()
}

/// Placement of the BEV image on the road plane.
///
/// BEV columns grow east (world +x) and rows grow south (world -y);
/// `origin` is the world coordinate of BEV pixel `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevFrame {
    /// Pixels per meter.
    pub ppm: f64,
    pub origin: PlanePoint,
    pub width: usize,
    pub height: usize,
}

impl BevFrame {
    pub fn new(ppm: f64, origin: PlanePoint, width: usize, height: usize) -> Result<Self, WarpError> {
        let b = Self {
            ppm,
            origin,
            width,
            height,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), WarpError> {
        if !(self.ppm > 0.0) || !self.ppm.is_finite() {
            return Err(WarpError::InvalidBev(format!(
                "pixels per meter must be positive, got {}",
                self.ppm
            )));
        }
        if !self.origin.is_finite() {
            return Err(WarpError::InvalidBev("non-finite origin".into()));
        }
        Ok(())
    }

    /// Similarity `H^bev_world`.
    pub fn world_to_bev(&self) -> Result<Homography, WarpError> {
        let (s, o) = (self.ppm, self.origin);
        Ok(Homography::from_rows(
            [[s, 0.0, -s * o.x], [0.0, -s, s * o.y], [0.0, 0.0, 1.0]],
            Frame::World,
            Frame::Bev,
        )?)
    }

    /// `H^bev_ori` for a calibrated `H^ori_world`.
    pub fn ori_to_bev(&self, h_ori_world: &Homography) -> Result<Homography, WarpError> {
        let world_ori = projective::invert(h_ori_world)?;
        Ok(projective::compose(&self.world_to_bev()?, &world_ori)?)
    }
}

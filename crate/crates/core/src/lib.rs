//! Geometry for turning an uncalibrated traffic camera into a metric
//! bird's-eye-view sensor.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod eval;
pub mod labels;
pub mod projective;
pub mod raster;
pub mod rbox;
pub mod synth;
pub mod warp;

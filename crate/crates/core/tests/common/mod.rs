#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use bevcal_core::camera::{Extrinsics, Intrinsics};
use bevcal_core::projective::{Frame, Homography, PlanePoint};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn point_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> PlanePoint {
    PlanePoint::new(uniform(rng, lo, hi), uniform(rng, lo, hi))
}

/// Homography that keeps `[0, 100]^2` well away from its horizon.
pub fn random_homography(rng: &mut ChaCha8Rng, src: Frame, dst: Frame) -> Homography {
    let m = Matrix3::new(
        uniform(rng, 0.5, 2.0),
        uniform(rng, -0.3, 0.3),
        uniform(rng, -10.0, 10.0),
        uniform(rng, -0.3, 0.3),
        uniform(rng, 0.5, 2.0),
        uniform(rng, -10.0, 10.0),
        uniform(rng, -1e-3, 1e-3),
        uniform(rng, -1e-3, 1e-3),
        1.0,
    );
    Homography::new(m, src, dst).unwrap()
}

/// Heading with both road-axis vanishing points finite.
pub fn oblique_heading(rng: &mut ChaCha8Rng) -> f64 {
    let quadrant = rng.random_range(0..4) as f64;
    quadrant * FRAC_PI_2 + uniform(rng, 0.2, FRAC_PI_2 - 0.2)
}

/// Tilt from nadir in `[10°, 70°]`, height in `[4, 15]` m, f in `[800, 1600]`.
pub fn random_camera(rng: &mut ChaCha8Rng) -> (Intrinsics, Extrinsics) {
    let k = Intrinsics::new(
        uniform(rng, 800.0, 1600.0),
        uniform(rng, 900.0, 1020.0),
        uniform(rng, 500.0, 580.0),
    )
    .unwrap();
    let center = Vector3::new(
        uniform(rng, -20.0, 20.0),
        uniform(rng, -20.0, 20.0),
        uniform(rng, 4.0, 15.0),
    );
    let heading = oblique_heading(rng);
    let tilt = uniform(rng, 10.0, 70.0).to_radians();
    (k, Extrinsics::from_pose(center, heading, tilt).unwrap())
}

/// Road-plane point in front of the camera at roughly `distance` meters.
pub fn ground_ahead(e: &Extrinsics, distance: f64, lateral: f64) -> PlanePoint {
    let r = e.rotation();
    let c = e.center();
    let fwd = Vector3::new(r[(2, 0)], r[(2, 1)], 0.0).normalize();
    let right = Vector3::new(r[(0, 0)], r[(0, 1)], 0.0).normalize();
    let p = c + fwd * distance + right * lateral;
    PlanePoint::new(p.x, p.y)
}

pub fn frob(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm()
}

use std::f64::consts::PI;

use rand::Rng;

use crate::volume::euler::Quaternion;
use crate::volume::EulerZXZ;

/// Uniform random rotation: a uniform unit quaternion (Shoemake's
/// subgroup algorithm) converted to ZXZ angles.
pub fn sample_so3<R: Rng + ?Sized>(rng: &mut R) -> EulerZXZ {
    EulerZXZ::from_matrix(&sample_quaternion(rng).to_matrix())
}

pub fn sample_quaternion<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    Quaternion {
        w: b * (2.0 * PI * u3).cos(),
        x: a * (2.0 * PI * u2).sin(),
        y: a * (2.0 * PI * u2).cos(),
        z: b * (2.0 * PI * u3).sin(),
    }
}

use crate::volume::EulerZXZ;

/// Quasi-uniform ZXZ grid: polar rings every `spacing` degrees, azimuths
/// thinned by `sin θ` so directions stay roughly equidistant, and in-plane
/// angles every `spacing`. The poles carry a single azimuth. The identity
/// is always the first entry.
pub fn orientation_grid(spacing: f64) -> Vec<EulerZXZ> {
    assert!(spacing > 0.0 && spacing <= 180.0, "spacing must lie in (0, 180]");
    let n_theta = (180.0 / spacing).round().max(1.0) as usize;
    let n_psi = (360.0 / spacing).round().max(1.0) as usize;
    let mut out = Vec::new();
    for i in 0..=n_theta {
        let theta = 180.0 * i as f64 / n_theta as f64;
        let ring = (360.0 * theta.to_radians().sin() / spacing).round().max(1.0) as usize;
        let ring = if i == 0 || i == n_theta { 1 } else { ring };
        for j in 0..ring {
            let phi = 360.0 * j as f64 / ring as f64;
            for k in 0..n_psi {
                let psi = 360.0 * k as f64 / n_psi as f64;
                out.push(EulerZXZ::new(phi, theta, psi));
            }
        }
    }
    out
}

//! Cubic B-spline interpolation (prefiltered, mirror boundaries) and the
//! rotations built on it.

use rayon::prelude::*;

use super::euler::{mat_vec, transpose, EulerZXZ, Mat3};
use super::grid::Grid3;
use crate::error::Result;

const POLE: f64 = -0.267_949_192_431_122_7; // sqrt(3) - 2
const TOLERANCE: f64 = 1e-12;

fn init_causal(c: &[f64]) -> f64 {
    let n = c.len();
    let horizon = (TOLERANCE.ln() / POLE.abs().ln()).ceil() as usize;
    if horizon < n {
        let mut zn = POLE;
        let mut sum = c[0];
        for v in &c[1..horizon] {
            sum += zn * v;
            zn *= POLE;
        }
        sum
    } else {
        let iz = 1.0 / POLE;
        let mut zn = POLE;
        let mut z2n = POLE.powi(n as i32 - 1);
        let mut sum = c[0] + z2n * c[n - 1];
        z2n *= z2n * iz;
        for v in &c[1..n - 1] {
            sum += (zn + z2n) * v;
            zn *= POLE;
            z2n *= iz;
        }
        sum / (1.0 - zn * zn)
    }
}

/// Converts samples to cubic B-spline coefficients in place.
pub fn prefilter_line(c: &mut [f64]) {
    let n = c.len();
    if n < 2 {
        return;
    }
    let gain = (1.0 - POLE) * (1.0 - 1.0 / POLE);
    c.iter_mut().for_each(|v| *v *= gain);
    c[0] = init_causal(c);
    for k in 1..n {
        c[k] += POLE * c[k - 1];
    }
    c[n - 1] = (POLE / (POLE * POLE - 1.0)) * (POLE * c[n - 2] + c[n - 1]);
    for k in (0..n - 1).rev() {
        c[k] = POLE * (c[k + 1] - c[k]);
    }
}

fn prefilter_axis(data: &mut [f64], dims: [usize; 3], axis: usize) {
    let [nx, ny, nz] = dims;
    let n = dims[axis];
    if n < 2 {
        return;
    }
    let mut line = vec![0.0; n];
    match axis {
        0 => data.chunks_mut(nx).for_each(prefilter_line),
        1 => {
            for z in 0..nz {
                for x in 0..nx {
                    for (y, l) in line.iter_mut().enumerate() {
                        *l = data[x + nx * (y + ny * z)];
                    }
                    prefilter_line(&mut line);
                    for (y, l) in line.iter().enumerate() {
                        data[x + nx * (y + ny * z)] = *l;
                    }
                }
            }
        }
        _ => {
            for y in 0..ny {
                for x in 0..nx {
                    for (z, l) in line.iter_mut().enumerate() {
                        *l = data[x + nx * (y + ny * z)];
                    }
                    prefilter_line(&mut line);
                    for (z, l) in line.iter().enumerate() {
                        data[x + nx * (y + ny * z)] = *l;
                    }
                }
            }
        }
    }
}

#[inline]
fn mirror(k: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let mut k = k.rem_euclid(period);
    if k >= n as i64 {
        k = period - k;
    }
    k as usize
}

/// Cubic B-spline taps for continuous index `t` on an axis of length `n`.
#[inline]
fn taps(t: f64, n: usize) -> ([usize; 4], [f64; 4]) {
    let f = t.floor();
    let u = t - f;
    let u2 = u * u;
    let u3 = u2 * u;
    let w = [
        (1.0 - u) * (1.0 - u) * (1.0 - u) / 6.0,
        (4.0 - 6.0 * u2 + 3.0 * u3) / 6.0,
        (1.0 + 3.0 * u + 3.0 * u2 - 3.0 * u3) / 6.0,
        u3 / 6.0,
    ];
    let base = f as i64 - 1;
    let idx = [0, 1, 2, 3].map(|j| mirror(base + j, n));
    (idx, w)
}

/// B-spline coefficients of a grid, prefiltered along the chosen axes.
///
/// Axes that are not prefiltered may only be sampled at integer positions
/// (fractional positions are rounded).
#[derive(Debug, Clone)]
pub struct BSplineVolume {
    coeffs: Vec<f64>,
    dims: [usize; 3],
    spline_axes: [bool; 3],
}

impl BSplineVolume {
    pub fn new(g: &Grid3) -> Self {
        Self::with_axes(g, [true, true, true])
    }

    pub fn with_axes(g: &Grid3, spline_axes: [bool; 3]) -> Self {
        let dims = g.dims();
        let spline_axes = [0, 1, 2].map(|a| spline_axes[a] && dims[a] > 1);
        let mut coeffs = g.data().to_vec();
        for axis in 0..3 {
            if spline_axes[axis] {
                prefilter_axis(&mut coeffs, dims, axis);
            }
        }
        Self { coeffs, dims, spline_axes }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Whether continuous index `t` lies inside the box extent on every axis.
    #[inline]
    pub fn contains(&self, t: [f64; 3]) -> bool {
        (0..3).all(|a| t[a] >= -0.5 && t[a] <= self.dims[a] as f64 - 0.5)
    }

    /// Interpolated value at continuous voxel index `t`, or `None` outside
    /// the box extent.
    pub fn sample(&self, t: [f64; 3]) -> Option<f64> {
        if !self.contains(t) {
            return None;
        }
        let [nx, ny, _] = self.dims;
        let axis = |a: usize| -> ([usize; 4], [f64; 4], usize) {
            if self.spline_axes[a] {
                let (i, w) = taps(t[a], self.dims[a]);
                (i, w, 4)
            } else {
                let k = (t[a].round().max(0.0) as usize).min(self.dims[a] - 1);
                ([k, 0, 0, 0], [1.0, 0.0, 0.0, 0.0], 1)
            }
        };
        let (ix, wx, cx) = axis(0);
        let (iy, wy, cy) = axis(1);
        let (iz, wz, cz) = axis(2);
        let mut acc = 0.0;
        for c in 0..cz {
            let mut acc_y = 0.0;
            for b in 0..cy {
                let row = nx * (iy[b] + ny * iz[c]);
                let mut acc_x = 0.0;
                for a in 0..cx {
                    acc_x += wx[a] * self.coeffs[row + ix[a]];
                }
                acc_y += wy[b] * acc_x;
            }
            acc += wz[c] * acc_y;
        }
        Some(acc)
    }
}

/// Resamples `g` on its own grid so that output point `p` takes the value
/// at source point `inv_rot · (p − center) + center` (physical coordinates).
/// Points mapping outside the source box get `fill`.
pub fn resample_rotation(g: &Grid3, inv_rot: &Mat3, center: [f64; 3], fill: f64) -> Result<Grid3> {
    g.check_finite()?;
    let dims = g.dims();
    // Rotations that keep y fixed only need a 2D spline in x-z; the same
    // holds for z-rotations of 2D images.
    let fixes_y = (inv_rot[1][1] - 1.0).abs() < 1e-14
        && inv_rot[0][1].abs() < 1e-14
        && inv_rot[2][1].abs() < 1e-14;
    let fixes_z = (inv_rot[2][2] - 1.0).abs() < 1e-14
        && inv_rot[0][2].abs() < 1e-14
        && inv_rot[1][2].abs() < 1e-14;
    let axes = [true, !fixes_y, !(fixes_z && dims[2] == 1)];
    let spline = BSplineVolume::with_axes(g, axes);
    let c_idx = g.to_index(center);
    let plane = dims[0] * dims[1];
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let d = [x as f64 - c_idx[0], y as f64 - c_idx[1], z as f64 - c_idx[2]];
                let s = mat_vec(inv_rot, d);
                let t = [s[0] + c_idx[0], s[1] + c_idx[1], s[2] + c_idx[2]];
                slab[y * dims[0] + x] = spline.sample(t).unwrap_or(fill);
            }
        }
    });
    Ok(Grid3::from_vec(dims, g.voxel_size(), out)?.with_origin(g.origin()))
}

/// Rotates `g` actively by `r` about the physical point `center`.
pub fn rotate_bspline(g: &Grid3, r: &EulerZXZ, center: [f64; 3], fill: f64) -> Result<Grid3> {
    rotate_matrix(g, &r.to_matrix(), center, fill)
}

/// Active rotation by a matrix about `center`.
pub fn rotate_matrix(g: &Grid3, rot: &Mat3, center: [f64; 3], fill: f64) -> Result<Grid3> {
    resample_rotation(g, &transpose(rot), center, fill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::euler::{rot_y, rot_z};

    fn smooth_field(n: usize) -> Grid3 {
        let c = (n as f64 - 1.0) / 2.0;
        Grid3::from_fn([n, n, n], 1.0, |x, y, z| {
            let (dx, dy, dz) = (x as f64 - c, y as f64 - c, z as f64 - c);
            (-(dx * dx + 0.6 * dy * dy + 1.4 * dz * dz) / 40.0).exp() + 0.3 * (dx / 5.0).sin()
        })
        .unwrap()
    }

    #[test]
    fn prefilter_then_sample_reproduces_nodes() {
        let g = smooth_field(12);
        let s = BSplineVolume::new(&g);
        for (x, y, z) in [(0, 0, 0), (3, 7, 11), (11, 11, 11), (5, 2, 9)] {
            let v = s.sample([x as f64, y as f64, z as f64]).unwrap();
            assert!((v - g.get(x, y, z)).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_rotation_is_identity() {
        let g = smooth_field(16);
        let r = rotate_bspline(&g, &EulerZXZ::IDENTITY, g.center(), 0.0).unwrap();
        let range = g.max() - g.min();
        for (a, b) in g.data().iter().zip(r.data()) {
            assert!((a - b).abs() <= 1e-6 * range);
        }
    }

    #[test]
    fn impulse_follows_rotation() {
        let n = 33;
        let mut g = Grid3::zeros([n, n, n], 1.0).unwrap();
        g.set(26, 16, 16, 1.0);
        let center = g.voxel_center(16, 16, 16);
        let r = rotate_bspline(&g, &EulerZXZ::new(90.0, 0.0, 0.0), center, 0.0).unwrap();
        let [x, y, z] = r.argmax();
        assert!((x as i64 - 16).abs() <= 1 && (y as i64 - 26).abs() <= 1 && (z as i64 - 16).abs() <= 1);
    }

    #[test]
    fn constant_field_stays_constant_inside() {
        let n = 24;
        let g = Grid3::filled([n, n, n], 1.0, 3.25).unwrap();
        let r = rotate_bspline(&g, &EulerZXZ::new(37.0, 61.0, -20.0), g.center(), 0.0).unwrap();
        let c = (n as f64 - 1.0) / 2.0;
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2)).sqrt();
                    if d < c - 1.0 {
                        assert!((r.get(x, y, z) - 3.25).abs() <= 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn rotate_and_back_is_close() {
        let n = 32;
        let g = smooth_field(n);
        let e = EulerZXZ::new(25.0, 40.0, 70.0);
        let fwd = rotate_bspline(&g, &e, g.center(), 0.0).unwrap();
        let back = rotate_bspline(&fwd, &e.inverse(), g.center(), 0.0).unwrap();
        let range = g.max() - g.min();
        let c = (n as f64 - 1.0) / 2.0;
        let (mut se, mut count) = (0.0, 0usize);
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2)).sqrt();
                    if d < 0.35 * n as f64 {
                        se += (back.get(x, y, z) - g.get(x, y, z)).powi(2);
                        count += 1;
                    }
                }
            }
        }
        let rmse = (se / count as f64).sqrt();
        assert!(rmse <= 0.01 * range, "rmse {rmse} range {range}");
    }

    #[test]
    fn y_axis_fast_path_matches_full_spline() {
        let g = smooth_field(14);
        let m = rot_y(33.0);
        let fast = rotate_matrix(&g, &m, g.center(), -1.0).unwrap();
        // Nudge the matrix off the fast path.
        let mut slow_m = m;
        slow_m[1][1] -= 1e-13;
        let slow = rotate_matrix(&g, &slow_m, g.center(), -1.0).unwrap();
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        let img = Grid3::from_fn([16, 16, 1], 1.0, |x, y, _| ((x * y) as f64 / 30.0).sin()).unwrap();
        let r = rotate_matrix(&img, &rot_z(0.0), img.center(), 0.0).unwrap();
        for (a, b) in img.data().iter().zip(r.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let mut g = Grid3::zeros([4, 4, 4], 1.0).unwrap();
        g.set(1, 1, 1, f64::NAN);
        assert!(rotate_bspline(&g, &EulerZXZ::IDENTITY, g.center(), 0.0).is_err());
    }
}

//! Grids, rotations, resampling and Fourier transforms shared by the rest
//! of the crate.

pub mod bspline;
pub mod euler;
pub mod fft;
pub mod grid;

pub use bspline::{rotate_bspline, rotate_matrix, BSplineVolume};
pub use euler::{EulerZXZ, Mat3};
pub use fft::{dft3, idft3};
pub use grid::{ComplexGrid3, Grid3, LabelGrid3, PasteMode};

/// Active rotation of `g` about its box center with zero fill.
pub fn rotate_about_center(g: &Grid3, r: &EulerZXZ) -> crate::Result<Grid3> {
    rotate_bspline(g, r, g.center(), 0.0)
}

/// Separable Gaussian blur with `sigma` in voxels, kernel cut at 3σ and
/// zero outside the box. `sigma <= 0` returns a copy.
pub fn gaussian_smooth(g: &Grid3, sigma: f64) -> Grid3 {
    if !(sigma > 0.0) {
        return g.clone();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let norm: f64 = k.iter().sum();
    let k: Vec<f64> = k.iter().map(|v| v / norm).collect();
    let dims = g.dims();
    let mut cur = g.data().to_vec();
    for axis in 0..3 {
        let stride = [1, dims[0], dims[0] * dims[1]][axis];
        let n = dims[axis] as i64;
        let mut next = vec![0.0; cur.len()];
        for (i, out) in next.iter_mut().enumerate() {
            let pos = (i / stride) as i64 % n;
            let mut acc = 0.0;
            for (j, w) in k.iter().enumerate() {
                let q = pos + j as i64 - r;
                if q >= 0 && q < n {
                    acc += w * cur[(i as i64 + (q - pos) * stride as i64) as usize];
                }
            }
            *out = acc;
        }
        cur = next;
    }
    Grid3::from_vec(dims, g.voxel_size(), cur).expect("same shape").with_origin(g.origin())
}

//! Unitary discrete Fourier transforms over 1, 2 or 3 axes.
//!
//! Both directions scale by `1/sqrt(N)`, so Parseval holds without extra
//! factors. Axes of length 1 are skipped. Frequency bin `k` of an axis of
//! length `n` corresponds to `fft_freq(k, n)` cycles per voxel.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::grid::{ComplexGrid3, Grid3};

/// Signed frequency of bin `k` in cycles per sample.
#[inline]
pub fn fft_freq(k: usize, n: usize) -> f64 {
    let k = k as i64;
    let n_i = n as i64;
    let s = if k <= (n_i - 1) / 2 { k } else { k - n_i };
    s as f64 / n as f64
}

fn transform_axis(data: &mut [Complex64], dims: [usize; 3], axis: usize, dir: FftDirection, planner: &mut FftPlanner<f64>) {
    let n = dims[axis];
    if n == 1 {
        return;
    }
    let fft = planner.plan_fft(n, dir);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let [nx, ny, nz] = dims;
    match axis {
        0 => fft.process_with_scratch(data, &mut scratch),
        1 => {
            let mut buf = vec![Complex64::new(0.0, 0.0); nx * ny];
            for z in 0..nz {
                let plane = &mut data[z * nx * ny..(z + 1) * nx * ny];
                for y in 0..ny {
                    for x in 0..nx {
                        buf[x * ny + y] = plane[y * nx + x];
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for y in 0..ny {
                    for x in 0..nx {
                        plane[y * nx + x] = buf[x * ny + y];
                    }
                }
            }
        }
        _ => {
            let plane = nx * ny;
            let mut buf = vec![Complex64::new(0.0, 0.0); nx * nz];
            for y in 0..ny {
                for z in 0..nz {
                    for x in 0..nx {
                        buf[x * nz + z] = data[z * plane + y * nx + x];
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for z in 0..nz {
                    for x in 0..nx {
                        data[z * plane + y * nx + x] = buf[x * nz + z];
                    }
                }
            }
        }
    }
}

/// In-place unitary transform of a complex buffer laid out x-fastest.
pub fn fft3_inplace(data: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    debug_assert_eq!(data.len(), dims.iter().product::<usize>());
    let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
    let mut planner = FftPlanner::new();
    for axis in 0..3 {
        transform_axis(data, dims, axis, dir, &mut planner);
    }
    let scale = 1.0 / (data.len() as f64).sqrt();
    data.iter_mut().for_each(|c| *c *= scale);
}

/// Unitary 1D transform of every x-row independently.
pub fn fft_rows_inplace(data: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
    let mut planner = FftPlanner::new();
    transform_axis(data, dims, 0, dir, &mut planner);
    let scale = 1.0 / (dims[0] as f64).sqrt();
    data.iter_mut().for_each(|c| *c *= scale);
}

/// Forward unitary DFT of a real grid.
pub fn dft3(g: &Grid3) -> ComplexGrid3 {
    let mut c = ComplexGrid3::from_real(g);
    let dims = c.dims();
    fft3_inplace(c.data_mut(), dims, false);
    c
}

/// Inverse unitary DFT of a complex grid.
pub fn idft3_complex(g: &ComplexGrid3) -> ComplexGrid3 {
    let mut c = g.clone();
    let dims = c.dims();
    fft3_inplace(c.data_mut(), dims, true);
    c
}

/// Inverse unitary DFT keeping the real part.
pub fn idft3(g: &ComplexGrid3) -> Grid3 {
    idft3_complex(g).re()
}

/// Multiplies the spectrum of `g` by `filter(fx, fy, fz)` (cycles per voxel)
/// and returns the real part of the result.
pub fn apply_filter(g: &Grid3, filter: impl Fn(f64, f64, f64) -> Complex64) -> Grid3 {
    let mut c = ComplexGrid3::from_real(g);
    let dims = c.dims();
    fft3_inplace(c.data_mut(), dims, false);
    multiply_spectrum(c.data_mut(), dims, filter);
    fft3_inplace(c.data_mut(), dims, true);
    c.re().with_origin(g.origin())
}

/// Multiplies a spectrum in place by a function of the signed frequencies.
pub fn multiply_spectrum(data: &mut [Complex64], dims: [usize; 3], filter: impl Fn(f64, f64, f64) -> Complex64) {
    let [nx, ny, nz] = dims;
    for z in 0..nz {
        let fz = fft_freq(z, nz);
        for y in 0..ny {
            let fy = fft_freq(y, ny);
            let row = (z * ny + y) * nx;
            for x in 0..nx {
                data[row + x] *= filter(fft_freq(x, nx), fy, fz);
            }
        }
    }
}

/// Translates an image or volume by a (possibly fractional) number of
/// voxels using the Fourier shift theorem. The shift is circular.
pub fn fourier_shift(g: &Grid3, shift: [f64; 3]) -> Grid3 {
    use std::f64::consts::PI;
    apply_filter(g, |fx, fy, fz| {
        let phase = -2.0 * PI * (fx * shift[0] + fy * shift[1] + fz * shift[2]);
        Complex64::from_polar(1.0, phase)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(dims: [usize; 3], seed: u64) -> Grid3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid3::from_fn(dims, 1.0, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    fn max_rel_err(a: &Grid3, b: &Grid3) -> f64 {
        let scale = a.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn round_trip() {
        for dims in [[16, 16, 16], [7, 12, 5], [9, 4, 1]] {
            let g = random_grid(dims, 3);
            let back = idft3(&dft3(&g));
            assert!(max_rel_err(&g, &back) <= 1e-10);
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let mut g = Grid3::zeros([8, 6, 4], 1.0).unwrap();
        g.set(0, 0, 0, 1.0);
        let s = dft3(&g);
        let expect = 1.0 / (g.len() as f64).sqrt();
        for c in s.data() {
            assert!((c.re - expect).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_has_two_bins() {
        let k = 3;
        let g = Grid3::from_fn([16, 4, 4], 1.0, |x, _, _| {
            (2.0 * std::f64::consts::PI * k as f64 * x as f64 / 16.0).cos()
        })
        .unwrap();
        let s = dft3(&g);
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..16 {
                    let mag = s.get(x, y, z).norm();
                    let support = y == 0 && z == 0 && (x == k || x == 16 - k);
                    if support {
                        assert!(mag > 1.0);
                    } else {
                        assert!(mag < 1e-10, "leak at {x},{y},{z}: {mag}");
                    }
                }
            }
        }
    }

    #[test]
    fn parseval() {
        let g = random_grid([10, 12, 6], 5);
        let real: f64 = g.data().iter().map(|v| v * v).sum();
        let spec: f64 = dft3(&g).data().iter().map(|c| c.norm_sqr()).sum();
        assert!(((real - spec) / real).abs() < 1e-9);
    }

    #[test]
    fn linearity_and_shift_theorem() {
        let a = random_grid([16, 16, 16], 11);
        let b = random_grid([16, 16, 16], 12);
        let combo = Grid3::from_vec(
            a.dims(),
            1.0,
            a.data().iter().zip(b.data()).map(|(x, y)| 2.0 * x - 0.5 * y).collect(),
        )
        .unwrap();
        let (sa, sb, sc) = (dft3(&a), dft3(&b), dft3(&combo));
        for i in 0..sa.data().len() {
            let expect = sa.data()[i] * 2.0 - sb.data()[i] * 0.5;
            assert!((sc.data()[i] - expect).norm() < 1e-9);
        }
        // Integer circular shift equals the Fourier-shifted grid.
        let shifted = fourier_shift(&a, [3.0, -2.0, 5.0]);
        for z in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    let src = a.get((x + 16 - 3) % 16, (y + 2) % 16, (z + 16 - 5) % 16);
                    assert!((shifted.get(x, y, z) - src).abs() < 1e-9);
                }
            }
        }
    }
}

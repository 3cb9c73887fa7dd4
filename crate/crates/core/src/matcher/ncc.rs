//! Masked, locally normalized cross-correlation with circular boundaries.
//!
//! For a template `T`, mask weights `M` (sum `W`) and tomogram `f`, the
//! template is standardized under the mask, `a = (T - µ_T) / σ_T`, and
//! the score at `p` is `Σ M a f(p + x) / (W σ_f(p))` with `σ_f(p)` the
//! mask-weighted standard deviation of `f` around `p`. Offsets `x` are
//! taken from the template's central voxel and wrap around the volume.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::fft::fft3_inplace;
use crate::volume::{rotate_about_center, EulerZXZ, Grid3, LabelGrid3};

/// Per-voxel best score and the index of the orientation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NccResult {
    pub scores: Grid3,
    pub orientation: LabelGrid3,
}

/// Mask-weighted standardization of a template. `None` when the template
/// is flat under the mask.
fn standardize(t: &Grid3, m: &Grid3) -> Option<Vec<f64>> {
    let w: f64 = m.data().iter().sum();
    let mean = t.data().iter().zip(m.data()).map(|(a, b)| a * b).sum::<f64>() / w;
    let var = t.data().iter().zip(m.data()).map(|(a, b)| b * (a - mean).powi(2)).sum::<f64>() / w;
    if !(var > 1e-300) {
        return None;
    }
    let sd = var.sqrt();
    Some(t.data().iter().zip(m.data()).map(|(a, b)| b * (a - mean) / sd).collect())
}

fn check_shapes(tomo: &Grid3, t: &Grid3, m: &Grid3) -> Result<()> {
    if t.dims() != m.dims() {
        return Err(Error::ShapeMismatch(format!("template {:?} vs mask {:?}", t.dims(), m.dims())));
    }
    let (td, vd) = (t.dims(), tomo.dims());
    if (0..3).any(|a| td[a] > vd[a]) {
        return Err(Error::ShapeMismatch(format!("template {td:?} larger than tomogram {vd:?}")));
    }
    if m.data().iter().any(|&v| v < 0.0) || !(m.data().iter().sum::<f64>() > 0.0) {
        return Err(Error::Config("mask must be non-negative with positive sum".into()));
    }
    Ok(())
}

/// Places a template-sized array into a volume-sized complex buffer with
/// its central voxel at index 0.
fn wrap_into(values: &[f64], tdims: [usize; 3], vdims: [usize; 3]) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); vdims.iter().product()];
    let c = tdims.map(|n| n / 2);
    for z in 0..tdims[2] {
        let wz = (z + vdims[2] - c[2]) % vdims[2];
        for y in 0..tdims[1] {
            let wy = (y + vdims[1] - c[1]) % vdims[1];
            for x in 0..tdims[0] {
                let wx = (x + vdims[0] - c[0]) % vdims[0];
                buf[(wz * vdims[1] + wy) * vdims[0] + wx] += values[(z * tdims[1] + y) * tdims[0] + x];
            }
        }
    }
    buf
}

fn forward(mut buf: Vec<Complex64>, dims: [usize; 3]) -> Vec<Complex64> {
    fft3_inplace(&mut buf, dims, false);
    buf
}

/// `Σ_x k(x) f(p + x)` for every `p`, from the spectra of the wrapped
/// kernel and of `f`.
fn correlate(kernel_hat: &[Complex64], f_hat: &[Complex64], dims: [usize; 3]) -> Vec<f64> {
    let mut prod: Vec<Complex64> = kernel_hat.iter().zip(f_hat).map(|(k, f)| k.conj() * f).collect();
    fft3_inplace(&mut prod, dims, true);
    let scale = (prod.len() as f64).sqrt();
    prod.iter().map(|c| c.re * scale).collect()
}

/// Tomogram spectra and the local standard deviation under a fixed mask,
/// shared by every orientation.
pub struct SearchContext {
    dims: [usize; 3],
    f_hat: Vec<Complex64>,
    /// `W σ_f(p)`, or 0 where the local variance vanishes.
    denom: Vec<f64>,
}

impl SearchContext {
    pub fn new(tomo: &Grid3, mask: &Grid3) -> Result<Self> {
        tomo.check_finite()?;
        let dims = tomo.dims();
        let w: f64 = mask.data().iter().sum();
        let f_hat = forward(tomo.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(), dims);
        let f2_hat = forward(tomo.data().iter().map(|&v| Complex64::new(v * v, 0.0)).collect(), dims);
        let m_hat = forward(wrap_into(mask.data(), mask.dims(), dims), dims);
        let s1 = correlate(&m_hat, &f_hat, dims);
        let s2 = correlate(&m_hat, &f2_hat, dims);
        let scale = tomo.data().iter().map(|v| v * v).sum::<f64>() / tomo.len() as f64;
        let denom = local_denominators(&s1, &s2, w, scale);
        Ok(Self { dims, f_hat, denom })
    }

    /// Scores of one (already rotated) template.
    pub fn scores(&self, template: &Grid3, mask: &Grid3) -> Vec<f64> {
        let Some(a) = standardize(template, mask) else {
            return vec![0.0; self.denom.len()];
        };
        let t_hat = forward(wrap_into(&a, template.dims(), self.dims), self.dims);
        let c = correlate(&t_hat, &self.f_hat, self.dims);
        finish(&c, &self.denom)
    }
}

/// Flat regions, judged against the tomogram's mean square, get 0.
fn local_denominators(s1: &[f64], s2: &[f64], w: f64, scale: f64) -> Vec<f64> {
    let tol = 1e-10 * scale + 1e-300;
    s1.iter()
        .zip(s2)
        .map(|(&a, &b)| {
            let mean = a / w;
            let var = b / w - mean * mean;
            if var > tol {
                w * var.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

fn finish(c: &[f64], denom: &[f64]) -> Vec<f64> {
    c.iter()
        .zip(denom)
        .map(|(&c, &d)| {
            if d > 0.0 {
                let s = c / d;
                debug_assert!(s.abs() <= 1.0 + 1e-6, "score {s} out of range");
                s.clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Scores of a single template position via the FFT path.
pub fn ncc_fourier(tomo: &Grid3, template: &Grid3, mask: &Grid3) -> Result<Grid3> {
    check_shapes(tomo, template, mask)?;
    let ctx = SearchContext::new(tomo, mask)?;
    Grid3::from_vec(tomo.dims(), tomo.voxel_size(), ctx.scores(template, mask))
}

/// The same scores by explicit summation over the template box; the
/// brute-force reference for small volumes.
pub fn ncc_direct(tomo: &Grid3, template: &Grid3, mask: &Grid3) -> Result<Grid3> {
    check_shapes(tomo, template, mask)?;
    let vd = tomo.dims();
    let td = template.dims();
    let c = td.map(|n| n / 2);
    let w: f64 = mask.data().iter().sum();
    let a = standardize(template, mask);
    let n = tomo.len();
    let mut s0 = vec![0.0; n];
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for pz in 0..vd[2] {
        for py in 0..vd[1] {
            for px in 0..vd[0] {
                let p = tomo.index(px, py, pz);
                for z in 0..td[2] {
                    let fz = (pz + z + vd[2] - c[2]) % vd[2];
                    for y in 0..td[1] {
                        let fy = (py + y + vd[1] - c[1]) % vd[1];
                        for x in 0..td[0] {
                            let fx = (px + x + vd[0] - c[0]) % vd[0];
                            let f = tomo.get(fx, fy, fz);
                            let k = template.index(x, y, z);
                            let m = mask.data()[k];
                            s1[p] += m * f;
                            s2[p] += m * f * f;
                            if let Some(a) = &a {
                                s0[p] += a[k] * f;
                            }
                        }
                    }
                }
            }
        }
    }
    let scale = tomo.data().iter().map(|v| v * v).sum::<f64>() / n as f64;
    let denom = local_denominators(&s1, &s2, w, scale);
    Grid3::from_vec(vd, tomo.voxel_size(), finish(&s0, &denom))
}

/// Best score over `orientations` at every voxel. Each orientation rotates
/// the template about its central voxel; the mask is used unrotated, so it
/// should be spherical. Ties keep the lower orientation index.
pub fn ncc_search(tomo: &Grid3, template: &Grid3, mask: &Grid3, orientations: &[EulerZXZ]) -> Result<NccResult> {
    check_shapes(tomo, template, mask)?;
    if orientations.is_empty() {
        return Err(Error::Config("no orientations to search".into()));
    }
    let ctx = SearchContext::new(tomo, mask)?;
    let n = tomo.len();
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut best_idx = vec![0u32; n];
    // Bounded batches keep memory flat while still using every thread.
    let batch = rayon::current_num_threads().max(1);
    for (b, chunk) in orientations.chunks(batch).enumerate() {
        let results: Vec<Result<Vec<f64>>> = chunk
            .par_iter()
            .map(|r| {
                let rotated = rotate_about_center(template, r)?;
                Ok(ctx.scores(&rotated, mask))
            })
            .collect();
        for (k, r) in results.into_iter().enumerate() {
            let s = r?;
            let idx = (b * batch + k) as u32;
            for i in 0..n {
                if s[i] > best[i] {
                    best[i] = s[i];
                    best_idx[i] = idx;
                }
            }
        }
    }
    Ok(NccResult {
        scores: Grid3::from_vec(tomo.dims(), tomo.voxel_size(), best)?.with_origin(tomo.origin()),
        orientation: LabelGrid3::from_vec(tomo.dims(), tomo.voxel_size(), best_idx)?,
    })
}

/// Voxelwise maximum of two searches; indices of `b` are offset by
/// `offset` so the two handednesses stay distinguishable. Ties keep `a`.
pub fn merge_max(a: &NccResult, b: &NccResult, offset: u32) -> Result<NccResult> {
    if a.scores.dims() != b.scores.dims() {
        return Err(Error::ShapeMismatch("score volumes differ".into()));
    }
    let mut scores = a.scores.clone();
    let mut orientation = a.orientation.clone();
    for i in 0..scores.len() {
        if b.scores.data()[i] > scores.data()[i] {
            scores.data_mut()[i] = b.scores.data()[i];
            orientation.data_mut()[i] = b.orientation.data()[i] + offset;
        }
    }
    Ok(NccResult { scores, orientation })
}

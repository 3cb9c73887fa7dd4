//! Fourier-ring amplitude matching against a reference image, and the
//! variance-based SNR estimate of a tomogram.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::OpticsConfig;
use crate::rng::{substream, REFERENCE};
use crate::volume::fft::{fft3_inplace, fft_freq};
use crate::volume::{ComplexGrid3, Grid3, LabelGrid3};

/// Default ring count for an image: one-pixel rings up to Nyquist.
pub fn default_rings(dims: [usize; 3]) -> usize {
    (dims[0].min(dims[1]) / 2).max(1)
}

/// Ring of a frequency `(fx, fy)` in cycles/pixel. Rings are equally wide
/// from 0 to Nyquist; the corners beyond Nyquist join the last ring.
#[inline]
pub fn ring_index(fx: f64, fy: f64, n_rings: usize) -> usize {
    let r = (fx * fx + fy * fy).sqrt();
    ((r * 2.0 * n_rings as f64) as usize).min(n_rings - 1)
}

/// Per-bin ring labels for an `nx × ny` spectrum, x fastest.
pub fn ring_labels(dims: [usize; 3], n_rings: usize) -> Vec<usize> {
    let [nx, ny, _] = dims;
    let mut out = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        let fy = fft_freq(y, ny);
        for x in 0..nx {
            out.push(ring_index(fft_freq(x, nx), fy, n_rings));
        }
    }
    out
}

/// Ring masks `M_i` and the per-ring mean amplitudes of the simulated and
/// reference images.
#[derive(Debug, Clone, PartialEq)]
pub struct RingScaling {
    pub n_rings: usize,
    pub labels: Vec<usize>,
    pub mu_sim: Vec<f64>,
    pub mu_exp: Vec<f64>,
}

impl RingScaling {
    /// Scale factor of ring `i`; 1 where the simulated ring is empty.
    pub fn factor(&self, i: usize) -> f64 {
        if self.mu_sim[i] > 0.0 {
            self.mu_exp[i] / self.mu_sim[i]
        } else {
            1.0
        }
    }
}

fn check_image(g: &Grid3) -> Result<()> {
    if !g.is_2d() {
        return Err(Error::ShapeMismatch(format!("expected a 2D image, got {:?}", g.dims())));
    }
    Ok(())
}

fn spectrum(g: &Grid3) -> ComplexGrid3 {
    let mut c = ComplexGrid3::from_real(g);
    let dims = c.dims();
    fft3_inplace(c.data_mut(), dims, false);
    c
}

/// Mean Fourier amplitude of every ring.
pub fn ring_means(g: &Grid3, n_rings: usize) -> Result<Vec<f64>> {
    check_image(g)?;
    if n_rings == 0 {
        return Err(Error::Config("n_rings must be at least 1".into()));
    }
    let labels = ring_labels(g.dims(), n_rings);
    Ok(means_by_label(spectrum(g).data(), &labels, n_rings))
}

fn means_by_label(spec: &[Complex64], labels: &[usize], n_rings: usize) -> Vec<f64> {
    let mut sum = vec![0.0; n_rings];
    let mut count = vec![0usize; n_rings];
    for (c, &l) in spec.iter().zip(labels) {
        sum[l] += c.norm();
        count[l] += 1;
    }
    sum.iter().zip(&count).map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 }).collect()
}

/// Scales the Fourier amplitudes of `sim` ring by ring so each ring's mean
/// amplitude matches `target[i]`. Phases are untouched.
pub fn ring_scale_to(sim: &Grid3, target: &[f64]) -> Result<(Grid3, RingScaling)> {
    check_image(sim)?;
    let n_rings = target.len();
    if n_rings == 0 {
        return Err(Error::Config("n_rings must be at least 1".into()));
    }
    let dims = sim.dims();
    let labels = ring_labels(dims, n_rings);
    let mut spec = spectrum(sim);
    let mu_sim = means_by_label(spec.data(), &labels, n_rings);
    let scaling = RingScaling { n_rings, labels, mu_sim, mu_exp: target.to_vec() };
    let empty = scaling.mu_sim.iter().filter(|&&m| m <= 0.0).count();
    if empty > 0 {
        log::warn!("{empty} ring(s) have zero simulated amplitude and pass through unscaled");
    }
    let factors: Vec<f64> = (0..n_rings).map(|i| scaling.factor(i)).collect();
    for (c, &l) in spec.data_mut().iter_mut().zip(&scaling.labels) {
        *c *= factors[l];
    }
    fft3_inplace(spec.data_mut(), dims, true);
    let out = spec.re().with_origin(sim.origin());
    Ok((out, scaling))
}

/// `A_scaled = Σ M_i A_sim µ_exp,i / µ_sim,i` against a reference image of
/// the same size.
pub fn ring_scale(sim: &Grid3, reference: &Grid3, n_rings: usize) -> Result<Grid3> {
    check_image(reference)?;
    if sim.dims() != reference.dims() {
        return Err(Error::ShapeMismatch(format!("sim {:?} vs reference {:?}", sim.dims(), reference.dims())));
    }
    let target = ring_means(reference, n_rings)?;
    Ok(ring_scale_to(sim, &target)?.0)
}

/// Mean amplitude against frequency (cycles/pixel), the text form of a
/// reference spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub frequency: Vec<f64>,
    pub amplitude: Vec<f64>,
}

impl RadialProfile {
    /// Two whitespace-separated columns per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut frequency = Vec::new();
        let mut amplitude = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse { line: n + 1, message: format!("{s:?}: {e}") })
            };
            if cols.len() != 2 {
                return Err(Error::Parse { line: n + 1, message: "expected frequency and amplitude".into() });
            }
            let (f, a) = (parse(cols[0])?, parse(cols[1])?);
            if frequency.last().is_some_and(|&p| f <= p) {
                return Err(Error::Parse { line: n + 1, message: "frequencies must increase".into() });
            }
            if !(a >= 0.0) {
                return Err(Error::Parse { line: n + 1, message: "amplitude must be non-negative".into() });
            }
            frequency.push(f);
            amplitude.push(a);
        }
        if frequency.is_empty() {
            return Err(Error::Parse { line: 0, message: "empty radial profile".into() });
        }
        Ok(Self { frequency, amplitude })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.frequency.iter().zip(&self.amplitude).map(|(f, a)| format!("{f} {a}\n")).collect()
    }

    /// Linear interpolation, clamped at the ends.
    pub fn at(&self, f: f64) -> f64 {
        let n = self.frequency.len();
        if n == 1 || f <= self.frequency[0] {
            return self.amplitude[0];
        }
        if f >= self.frequency[n - 1] {
            return self.amplitude[n - 1];
        }
        let i = self.frequency.partition_point(|&x| x <= f);
        let (x0, x1) = (self.frequency[i - 1], self.frequency[i]);
        let t = (f - x0) / (x1 - x0);
        self.amplitude[i - 1] + t * (self.amplitude[i] - self.amplitude[i - 1])
    }

    /// Profile sampled at ring centers.
    pub fn ring_targets(&self, n_rings: usize) -> Vec<f64> {
        (0..n_rings).map(|i| self.at((i as f64 + 0.5) / (2.0 * n_rings as f64))).collect()
    }

    /// Ring means of an image, placed at ring centers.
    pub fn from_image(g: &Grid3, n_rings: usize) -> Result<Self> {
        let amplitude = ring_means(g, n_rings)?;
        let frequency = (0..n_rings).map(|i| (i as f64 + 0.5) / (2.0 * n_rings as f64)).collect();
        Ok(Self { frequency, amplitude })
    }
}

/// Parameters of the synthetic stand-in for an experimental micrograph:
/// amplitude `(q + q0)^-exponent · (floor + (1 - floor)|sin χ(q)|)` over
/// Gaussian phases, plus a chosen mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSpectrum {
    pub exponent: f64,
    /// Cycles/pixel, keeps the power law finite at DC.
    pub q0: f64,
    /// Share of the amplitude not modulated by Thon rings.
    pub floor: f64,
    /// µm.
    pub defocus: f64,
    /// Overall amplitude scale.
    pub scale: f64,
    /// Mean pixel value.
    pub mean: f64,
}

impl Default for ReferenceSpectrum {
    fn default() -> Self {
        Self { exponent: 1.0, q0: 0.01, floor: 0.3, defocus: 3.5, scale: 1.0, mean: 0.0 }
    }
}

/// Random image with the amplitude envelope of `params`; deterministic in
/// `seed` (reference substream).
pub fn synthetic_reference(dims: [usize; 2], params: &ReferenceSpectrum, optics: &OpticsConfig, seed: u64) -> Result<Grid3> {
    let [nx, ny] = dims;
    let optics = OpticsConfig { defocus: params.defocus, ..optics.clone() };
    let px = optics.pixel_size;
    let mut rng = substream(seed, REFERENCE);
    let noise: Vec<f64> = (0..nx * ny).map(|_| rng.sample(StandardNormal)).collect();
    let white = Grid3::from_vec([nx, ny, 1], px, noise)?;
    let mut spec = spectrum(&white);
    for y in 0..ny {
        let fy = fft_freq(y, ny);
        for x in 0..nx {
            let fx = fft_freq(x, nx);
            let q = (fx * fx + fy * fy).sqrt();
            let thon = optics.chi(fx / px, fy / px).sin().abs();
            let a = params.scale * (q + params.q0).powf(-params.exponent) * (params.floor + (1.0 - params.floor) * thon);
            spec.data_mut()[y * nx + x] *= a;
        }
    }
    spec.data_mut()[0] = Complex64::new(0.0, 0.0);
    fft3_inplace(spec.data_mut(), [nx, ny, 1], true);
    Ok(spec.re().map(|v| v + params.mean))
}

/// Variance split of a tomogram into background and signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub var_noise: f64,
    pub var_noisy_signal: f64,
    pub var_signal: f64,
    pub snr: f64,
    pub n_background: usize,
    pub n_signal: usize,
    /// `var_noisy_signal < var_noise`; `var_signal` was clamped to 0.
    pub clamped: bool,
}

fn variance(values: impl Iterator<Item = f64> + Clone) -> (f64, usize) {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in values.clone() {
        n += 1;
        sum += v;
    }
    if n == 0 {
        return (0.0, 0);
    }
    let mean = sum / n as f64;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64, n)
}

/// `SNR = (σ²_noisysignal - σ²_noise) / σ²_noise`, with the noise measured
/// on background voxels (label 0) and the noisy signal on the whole volume.
pub fn estimate_snr(tomogram: &Grid3, occupancy: &LabelGrid3) -> Result<SnrEstimate> {
    if tomogram.dims() != occupancy.dims() {
        return Err(Error::ShapeMismatch(format!("tomogram {:?} vs mask {:?}", tomogram.dims(), occupancy.dims())));
    }
    let pairs = tomogram.data().iter().zip(occupancy.data());
    let (var_noise, n_background) = variance(pairs.filter(|(_, &l)| l == 0).map(|(&v, _)| v));
    if n_background == 0 {
        return Err(Error::EmptyBackground);
    }
    let (var_noisy_signal, _) = variance(tomogram.data().iter().copied());
    let n_signal = tomogram.len() - n_background;
    if var_noise <= 0.0 {
        return Err(Error::Config("background variance is zero".into()));
    }
    let raw = var_noisy_signal - var_noise;
    let clamped = raw < 0.0;
    if clamped {
        log::warn!("noisy-signal variance below noise variance; signal variance clamped to 0");
    }
    let var_signal = raw.max(0.0);
    Ok(SnrEstimate { var_noise, var_noisy_signal, var_signal, snr: var_signal / var_noise, n_background, n_signal, clamped })
}

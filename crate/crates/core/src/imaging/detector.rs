use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::structchem::table::DATA_DIR_ENV;
use crate::volume::fft::apply_filter;
use crate::volume::{ComplexGrid3, Grid3};

const BUILTIN: &str = include_str!("../../data/k2_summit_dqe.tsv");

/// Detector DQE sampled against frequency as a fraction of Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct DqeCurve {
    fraction: Vec<f64>,
    dqe: Vec<f64>,
}

impl DqeCurve {
    /// Shipped curve, or `k2_summit_dqe.tsv` from the data directory
    /// override when present.
    pub fn standard() -> Result<Self> {
        if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
            let path = Path::new(&dir).join("k2_summit_dqe.tsv");
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                return Self::parse(&text);
            }
        }
        Self::parse(BUILTIN)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fraction = Vec::new();
        let mut dqe = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e: std::num::ParseFloatError| Error::Parse { line: n + 1, message: e.to_string() })?;
            if cols.len() != 2 {
                return Err(Error::Parse { line: n + 1, message: "expected two columns".into() });
            }
            if fraction.last().is_some_and(|&f| cols[0] <= f) {
                return Err(Error::Parse { line: n + 1, message: "frequencies must increase".into() });
            }
            if !(cols[1] > 0.0 && cols[1] <= 1.0) {
                return Err(Error::Parse { line: n + 1, message: "DQE must lie in (0, 1]".into() });
            }
            fraction.push(cols[0]);
            dqe.push(cols[1]);
        }
        if fraction.first() != Some(&0.0) || fraction.last().is_none_or(|&f| f < 1.0) {
            return Err(Error::Parse { line: 0, message: "curve must span 0 to Nyquist".into() });
        }
        Ok(Self { fraction, dqe })
    }

    /// Linear interpolation, clamped to the end values.
    pub fn at(&self, f: f64) -> f64 {
        let f = f.clamp(0.0, *self.fraction.last().unwrap());
        let i = self.fraction.partition_point(|&x| x <= f).clamp(1, self.fraction.len() - 1);
        let (x0, x1) = (self.fraction[i - 1], self.fraction[i]);
        let t = (f - x0) / (x1 - x0);
        self.dqe[i - 1] + t * (self.dqe[i] - self.dqe[i - 1])
    }

    /// Amplitude transfer `sqrt(DQE(f) / DQE(0))`, 1 at zero frequency.
    pub fn transfer(&self, f: f64) -> f64 {
        (self.at(f) / self.dqe[0]).sqrt()
    }
}

/// Expected or sampled counts plus how many pixels were clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub counts: Grid3,
    pub clamped: usize,
}

/// Filters an intensity image by the DQE transfer (frequency relative to
/// the image's own Nyquist).
pub fn dqe_filter(intensity: &Grid3, dqe: &DqeCurve) -> Grid3 {
    apply_filter(intensity, |fx, fy, _| {
        let f = (fx * fx + fy * fy).sqrt() / 0.5;
        Complex64::new(dqe.transfer(f), 0.0)
    })
}

/// Intensity → counts: `|ψ|²`, optional DQE filtering, scaling by
/// `dose_per_pixel`, then Poisson sampling when `rng` is given (expected
/// counts otherwise). Negative expectations after filtering are clamped.
pub fn detect<R: Rng + ?Sized>(
    wave: &ComplexGrid3,
    dose_per_pixel: f64,
    dqe: Option<&DqeCurve>,
    rng: Option<&mut R>,
) -> Result<Detection> {
    let intensity = wave.norm_sqr();
    counts_from_intensity(&intensity, dose_per_pixel, dqe, rng)
}

pub fn counts_from_intensity<R: Rng + ?Sized>(
    intensity: &Grid3,
    dose_per_pixel: f64,
    dqe: Option<&DqeCurve>,
    rng: Option<&mut R>,
) -> Result<Detection> {
    if !(dose_per_pixel >= 0.0 && dose_per_pixel.is_finite()) {
        return Err(Error::Config(format!("dose per pixel must be non-negative, got {dose_per_pixel}")));
    }
    let dims = intensity.dims();
    let vs = intensity.voxel_size();
    if dose_per_pixel == 0.0 {
        return Ok(Detection { counts: Grid3::zeros(dims, vs)?, clamped: 0 });
    }
    let filtered = match dqe {
        Some(c) => dqe_filter(intensity, c),
        None => intensity.clone(),
    };
    let mut clamped = 0;
    let mut expected: Vec<f64> = filtered
        .data()
        .iter()
        .map(|&v| {
            if v < 0.0 {
                clamped += 1;
                0.0
            } else {
                v * dose_per_pixel
            }
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} pixels had negative expected counts and were clamped to zero");
    }
    if let Some(rng) = rng {
        for v in expected.iter_mut() {
            if *v > 0.0 {
                let p = Poisson::new(*v).map_err(|e| Error::Config(e.to_string()))?;
                *v = p.sample(rng);
            }
        }
    }
    Ok(Detection { counts: Grid3::from_vec(dims, vs, expected)?.with_origin(intensity.origin()), clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn flat_wave(n: usize) -> ComplexGrid3 {
        ComplexGrid3::from_vec([n, n, 1], 5.0, vec![Complex64::new(1.0, 0.0); n * n]).unwrap()
    }

    #[test]
    fn shipped_curve() {
        let c = DqeCurve::standard().unwrap();
        assert_eq!(c.transfer(0.0), 1.0);
        assert!(c.at(1.0) < c.at(0.5) && c.at(0.5) < c.at(0.0));
        assert!((c.at(2.0) - c.at(1.0)).abs() < 1e-15);
    }

    #[test]
    fn interpolates_linearly() {
        let c = DqeCurve::parse("0 0.8\n0.5 0.6\n1 0.2\n").unwrap();
        assert!((c.at(0.25) - 0.7).abs() < 1e-12);
        assert!((c.at(0.75) - 0.4).abs() < 1e-12);
        assert!(DqeCurve::parse("0 0.8\n0.5 0.6\n").is_err());
        assert!(DqeCurve::parse("0 0.8\n0.5 0.6\n0.4 0.5\n1 0.2").is_err());
    }

    #[test]
    fn flat_field_mean() {
        let mut rng = substream(2, 0);
        let d = detect(&flat_wave(512), 40.0, Some(&DqeCurve::standard().unwrap()), Some(&mut rng)).unwrap();
        let mean = d.counts.mean();
        assert!((39.5..=40.5).contains(&mean), "{mean}");
    }

    #[test]
    fn poisson_dispersion() {
        let mut rng = substream(8, 0);
        let d = detect(&flat_wave(400), 12.0, None, Some(&mut rng)).unwrap();
        let ratio = d.counts.variance() / d.counts.mean();
        assert!((0.95..=1.05).contains(&ratio), "{ratio}");
    }

    #[test]
    fn zero_dose_is_blank() {
        let mut rng = substream(1, 0);
        let d = detect(&flat_wave(16), 0.0, None, Some(&mut rng)).unwrap();
        assert!(d.counts.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noiseless_is_expectation() {
        let d = detect::<rand_chacha::ChaCha8Rng>(&flat_wave(8), 3.0, None, None).unwrap();
        assert!(d.counts.data().iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }
}

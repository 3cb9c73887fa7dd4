use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::{counts_from_intensity, DqeCurve};
use super::multislice::{multislice_project, Specimen};
use super::optics::{CtfTerms, OpticsConfig};
use crate::error::{Error, Result};
use crate::mrc;
use crate::rng::{substream, ACQUISITION, TILT_BASE};
use crate::volume::fft::fourier_shift;
use crate::volume::Grid3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    /// `defocus` here is ignored unless `fixed_defocus` is set.
    pub optics: OpticsConfig,
    /// µm.
    pub defocus_range: [f64; 2],
    pub fixed_defocus: Option<f64>,
    /// Total e⁻/Å².
    pub dose_range: [f64; 2],
    pub fixed_dose: Option<f64>,
    /// Degrees, inclusive.
    pub tilt_range: [f64; 2],
    pub n_tilts: usize,
    /// Half-width of the uniform per-axis shift, nm.
    pub max_shift: f64,
    /// `None` disables the objective transfer entirely.
    pub ctf: Option<CtfTerms>,
    pub dqe: bool,
    pub noise: bool,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            optics: OpticsConfig::default(),
            defocus_range: [2.0, 5.0],
            fixed_defocus: None,
            dose_range: [100.0, 120.0],
            fixed_dose: None,
            tilt_range: [-60.0, 60.0],
            n_tilts: 61,
            max_shift: 0.5,
            ctf: Some(CtfTerms::default()),
            dqe: true,
            noise: true,
        }
    }
}

impl AcquisitionConfig {
    /// No noise, no detector, no objective transfer, no shifts.
    pub fn ideal() -> Self {
        Self { max_shift: 0.0, ctf: None, dqe: false, noise: false, ..Self::default() }
    }

    pub fn angles(&self) -> Vec<f64> {
        tilt_angles(self.tilt_range[0], self.tilt_range[1], self.n_tilts)
    }

    fn validate(&self) -> Result<()> {
        if self.n_tilts == 0 {
            return Err(Error::EmptySeries);
        }
        let ordered = |r: [f64; 2]| r[0] <= r[1] && r.iter().all(|v| v.is_finite());
        if !ordered(self.defocus_range) || self.defocus_range[0] <= 0.0 {
            return Err(Error::Config("defocus_range must be a positive, ordered range".into()));
        }
        if !ordered(self.dose_range) || self.dose_range[0] < 0.0 {
            return Err(Error::Config("dose_range must be a non-negative, ordered range".into()));
        }
        if !ordered(self.tilt_range) || self.tilt_range.iter().any(|a| a.abs() >= 90.0) {
            return Err(Error::Config("tilt_range must be ordered within (-90, 90)".into()));
        }
        if !(self.max_shift >= 0.0) {
            return Err(Error::Config("max_shift must be non-negative".into()));
        }
        Ok(())
    }
}

/// `n` evenly spaced angles from `lo` to `hi` inclusive.
pub fn tilt_angles(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Everything about a series except the images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltSeriesMeta {
    pub angles: Vec<f64>,
    /// Per-tilt (dx, dy), nm.
    pub shifts: Vec<[f64; 2]>,
    /// e⁻/Å².
    pub per_tilt_dose: f64,
    pub total_dose: f64,
    pub optics: OpticsConfig,
    pub seed: u64,
    /// Model box thickness, Å; the slab the reconstruction should cover.
    pub thickness: f64,
    pub clamped_pixels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltSeries {
    /// One `nx × ny × 1` image of electron counts per tilt.
    pub projections: Vec<Grid3>,
    pub meta: TiltSeriesMeta,
}

impl TiltSeries {
    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn image_dims(&self) -> [usize; 2] {
        let d = self.projections[0].dims();
        [d[0], d[1]]
    }

    pub fn pixel_size(&self) -> f64 {
        self.projections[0].voxel_size()
    }

    /// Writes `<stem>.mrc` (the stack) and `<stem>.json` (metadata).
    pub fn write(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        let stack = Grid3::stack(&self.projections)?;
        mrc::write_stack(stem.with_extension("mrc"), &stack)?;
        let json = serde_json::to_string_pretty(&self.meta)?;
        let path = stem.with_extension("json");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let stack = mrc::read_grid(stem.with_extension("mrc"))?;
        let path = stem.with_extension("json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: TiltSeriesMeta = serde_json::from_str(&text)?;
        let n = stack.dims()[2];
        if n != meta.angles.len() || n != meta.shifts.len() {
            return Err(Error::ShapeMismatch(format!(
                "stack has {n} images, metadata {} angles and {} shifts",
                meta.angles.len(),
                meta.shifts.len()
            )));
        }
        let projections = (0..n).map(|z| stack.section(z)).collect();
        Ok(Self { projections, meta })
    }
}

/// Images the specimen at every tilt: multislice exit wave, objective
/// transfer, per-tilt shift, detector. Defocus, dose and shifts come from
/// the acquisition substream, detector noise from one substream per tilt,
/// so tilts may run in any order.
pub fn simulate_tiltseries(spec: &Specimen, cfg: &AcquisitionConfig, seed: u64) -> Result<TiltSeries> {
    cfg.validate()?;
    let mut rng = substream(seed, ACQUISITION);
    let defocus = match cfg.fixed_defocus {
        Some(d) => d,
        None => rng.gen_range(cfg.defocus_range[0]..=cfg.defocus_range[1]),
    };
    let total_dose = match cfg.fixed_dose {
        Some(d) => d,
        None => rng.gen_range(cfg.dose_range[0]..=cfg.dose_range[1]),
    };
    let angles = cfg.angles();
    let shifts: Vec<[f64; 2]> = angles
        .iter()
        .map(|_| {
            if cfg.max_shift > 0.0 {
                [0, 1].map(|_| rng.gen_range(-cfg.max_shift..=cfg.max_shift))
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    let optics = OpticsConfig { defocus, ..cfg.optics.clone() };
    let per_tilt_dose = total_dose / angles.len() as f64;
    let px = optics.pixel_size;
    let dose_per_pixel = per_tilt_dose * px * px;
    let dqe = if cfg.dqe { Some(DqeCurve::standard()?) } else { None };

    let results: Vec<Result<(Grid3, usize)>> = angles
        .par_iter()
        .zip(&shifts)
        .enumerate()
        .map(|(i, (&angle, shift))| {
            let wave = multislice_project(spec, angle, &optics, cfg.ctf)?;
            let mut intensity = wave.norm_sqr();
            if shift != &[0.0, 0.0] {
                intensity = fourier_shift(&intensity, [shift[0] * 10.0 / px, shift[1] * 10.0 / px, 0.0]);
            }
            let mut tilt_rng = substream(seed, TILT_BASE + i as u64);
            let noise = if cfg.noise { Some(&mut tilt_rng) } else { None };
            let d = counts_from_intensity(&intensity, dose_per_pixel, dqe.as_ref(), noise)?;
            log::debug!("tilt {i} at {angle:.1}° done");
            Ok((d.counts, d.clamped))
        })
        .collect();
    let mut projections = Vec::with_capacity(angles.len());
    let mut clamped_pixels = 0;
    for r in results {
        let (p, c) = r?;
        projections.push(p);
        clamped_pixels += c;
    }
    let thickness = spec.dims()[2] as f64 * spec.voxel_size();
    Ok(TiltSeries {
        projections,
        meta: TiltSeriesMeta { angles, shifts, per_tilt_dose, total_dose, optics, seed, thickness, clamped_pixels },
    })
}

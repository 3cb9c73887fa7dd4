use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::OpticsConfig;
use crate::structchem::PotentialMap;
use crate::volume::fft::apply_filter;
use crate::volume::{BSplineVolume, Grid3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Normal,
    Flipped,
}

/// One search template with its spherical soft-edged mask. Both grids are
/// odd-sized cubes whose central voxel is the particle center.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSpec {
    pub class_id: String,
    pub template: Grid3,
    pub mask: Grid3,
    /// Radius of the flat part of the mask, nm.
    pub mask_radius: f64,
    pub handedness: Handedness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateParams {
    /// Microscope used for the CTF; its own `defocus` is ignored.
    pub optics: OpticsConfig,
    /// µm.
    pub defocus: f64,
    /// Apply the CTF at all.
    pub ctf: bool,
    /// Gaussian low-pass cutoff, Å.
    pub lowpass: f64,
    /// Template sampling, Å.
    pub voxel_size: f64,
    /// Support threshold as a fraction of the potential maximum.
    pub support_threshold: f64,
    /// Extra flat mask radius beyond the support, voxels.
    pub mask_margin: f64,
    /// Gaussian edge width of the mask, voxels.
    pub mask_edge: f64,
}

impl Default for TemplateParams {
    fn default() -> Self {
        Self {
            optics: OpticsConfig::default(),
            defocus: 3.65,
            ctf: true,
            lowpass: 40.0,
            voxel_size: 10.0,
            support_threshold: 0.05,
            mask_margin: 1.0,
            mask_edge: 1.0,
        }
    }
}

/// Gaussian low-pass with `σ_q = q_c / 2` for a cutoff wavelength
/// `cutoff` Å; the power gain at the cutoff is `e⁻⁴`.
pub fn lowpass_gain(q: f64, cutoff: f64) -> f64 {
    let sigma = 0.5 / cutoff;
    (-0.5 * (q / sigma).powi(2)).exp()
}

pub fn lowpass(g: &Grid3, cutoff: f64) -> Grid3 {
    let vs = g.voxel_size();
    apply_filter(g, |fx, fy, fz| {
        let q = (fx * fx + fy * fy + fz * fz).sqrt() / vs;
        Complex64::new(lowpass_gain(q, cutoff), 0.0)
    })
}

/// Isotropic phase-contrast transfer `sin χ(|q|)` followed by the low-pass,
/// both as functions of the 3D frequency. With this crate's sign of χ a
/// positive potential stays positive at low frequency, matching
/// reconstructions normalized to contrast.
pub fn template_filter(g: &Grid3, params: &TemplateParams) -> Grid3 {
    let vs = g.voxel_size();
    let optics = OpticsConfig { defocus: params.defocus, ..params.optics.clone() };
    apply_filter(g, |fx, fy, fz| {
        let q = (fx * fx + fy * fy + fz * fz).sqrt() / vs;
        let t = if params.ctf { optics.chi(q, 0.0).sin() } else { 1.0 };
        Complex64::new(t * lowpass_gain(q, params.lowpass), 0.0)
    })
}

/// Mean of the outermost voxel layer.
fn border_mean(g: &Grid3) -> f64 {
    let [nx, ny, nz] = g.dims();
    let (mut sum, mut n) = (0.0, 0usize);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1 {
                    sum += g.get(x, y, z);
                    n += 1;
                }
            }
        }
    }
    sum / n as f64
}

/// Samples `g` (cubic B-spline) on an odd cube of `side` voxels of size
/// `vs` whose central voxel sits at the physical point `c`; zero outside.
fn resample_centered(g: &Grid3, c: [f64; 3], side: usize, vs: f64) -> Result<Grid3> {
    let spline = BSplineVolume::new(g);
    let half = (side / 2) as f64;
    let out = Grid3::from_fn([side; 3], vs, |x, y, z| {
        let p = [x, y, z].map(|i| i as f64);
        let phys = [0, 1, 2].map(|a| c[a] + (p[a] - half) * vs);
        spline.sample(g.to_index(phys)).unwrap_or(0.0)
    })?;
    let origin = [0, 1, 2].map(|a| c[a] - (half + 0.5) * vs);
    Ok(out.with_origin(origin))
}

/// Spherical mask: 1 inside `radius` voxels of the center, a Gaussian
/// fall-off of width `edge` outside, cut at `radius + 3 edge`.
pub fn spherical_mask(side: usize, vs: f64, radius: f64, edge: f64) -> Result<Grid3> {
    let c = (side / 2) as f64;
    Grid3::from_fn([side; 3], vs, |x, y, z| {
        let r = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2)).sqrt();
        if r <= radius {
            1.0
        } else if edge > 0.0 && r <= radius + 3.0 * edge {
            (-0.5 * ((r - radius) / edge).powi(2)).exp()
        } else {
            0.0
        }
    })
}

/// Mirror image through the central yz plane.
pub fn mirror_x(g: &Grid3) -> Grid3 {
    let [nx, _, _] = g.dims();
    Grid3::from_fn(g.dims(), g.voxel_size(), |x, y, z| g.get(nx - 1 - x, y, z))
        .expect("same dims")
        .with_origin(g.origin())
}

/// Both handednesses of a class template: background-subtracted elastic
/// potential, CTF-modulated and low-passed at the source sampling, then
/// resampled onto an odd cube at `params.voxel_size` large enough for the
/// mask, which covers every voxel above the support threshold.
pub fn build_template(class_id: &str, potential: &PotentialMap, params: &TemplateParams) -> Result<[TemplateSpec; 2]> {
    if !(params.voxel_size > 0.0 && params.lowpass > 0.0) {
        return Err(Error::Config("template voxel size and low-pass must be positive".into()));
    }
    let src = &potential.v_el;
    let bg = border_mean(src);
    let raw = src.map(|v| v - bg);
    let vs = params.voxel_size;
    let sv = src.voxel_size();

    // Support radius in target voxels, from the unfiltered map.
    let max = raw.max();
    if !(max > 0.0) {
        return Err(Error::EmptyThreshold(params.support_threshold));
    }
    let c_idx = raw.to_index(raw.center());
    let mut support = 0.0f64;
    let [nx, ny, nz] = raw.dims();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if raw.get(x, y, z) > params.support_threshold * max {
                    let d = [x as f64 - c_idx[0], y as f64 - c_idx[1], z as f64 - c_idx[2]];
                    // Farthest corner of the voxel.
                    let r = d.iter().map(|v| (v.abs() + 0.5).powi(2)).sum::<f64>().sqrt();
                    support = support.max(r * sv / vs);
                }
            }
        }
    }
    let radius = support + params.mask_margin;
    let half = (radius + 3.0 * params.mask_edge).ceil() as usize + 1;
    let side = 2 * half + 1;

    // Pad the source so the filter's ringing has room, filter, resample.
    let pad_side = ((side as f64 * vs / sv).ceil() as usize).max(nx.max(ny).max(nz)) + 4;
    let mut padded = Grid3::zeros([pad_side; 3], sv)?;
    let off = [nx, ny, nz].map(|n| (pad_side - n) / 2);
    padded.paste(&raw, off.map(|v| v as i64), crate::volume::PasteMode::Replace)?;
    let origin = [0, 1, 2].map(|a| raw.origin()[a] - off[a] as f64 * sv);
    let filtered = template_filter(&padded.with_origin(origin), params);
    let template = resample_centered(&filtered, raw.center(), side, vs)?;
    let mask = spherical_mask(side, vs, radius, params.mask_edge)?;
    let mask_radius = radius * vs / 10.0;
    let normal = TemplateSpec {
        class_id: class_id.to_string(),
        template: template.clone(),
        mask: mask.clone(),
        mask_radius,
        handedness: Handedness::Normal,
    };
    let flipped = TemplateSpec { template: mirror_x(&template), handedness: Handedness::Flipped, ..normal.clone() };
    Ok([normal, flipped])
}

/// Fraction of the spectral power of `g` at `|q| > 1/cutoff` (Å).
pub fn power_above(g: &Grid3, cutoff: f64) -> f64 {
    let spec = crate::volume::dft3(g);
    let [nx, ny, nz] = g.dims();
    let vs = g.voxel_size();
    let (mut above, mut total) = (0.0, 0.0);
    for z in 0..nz {
        let fz = crate::volume::fft::fft_freq(z, nz);
        for y in 0..ny {
            let fy = crate::volume::fft::fft_freq(y, ny);
            for x in 0..nx {
                let fx = crate::volume::fft::fft_freq(x, nx);
                let p = spec.get(x, y, z).norm_sqr();
                total += p;
                if (fx * fx + fy * fy + fz * fz).sqrt() / vs > 1.0 / cutoff {
                    above += p;
                }
            }
        }
    }
    if total > 0.0 {
        above / total
    } else {
        0.0
    }
}

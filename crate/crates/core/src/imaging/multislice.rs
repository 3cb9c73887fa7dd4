use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::optics::{wave_transfer, CtfTerms, OpticsConfig};
use crate::error::{Error, Result};
use crate::phantom::GrandModel;
use crate::structchem::ICE_ABSORPTION;
use crate::volume::fft::{fft3_inplace, multiply_spectrum};
use crate::volume::{BSplineVolume, ComplexGrid3, Grid3};

/// Inelastic mean free path of vitreous ice at 300 kV, Å.
pub const ICE_MEAN_FREE_PATH: f64 = 3500.0;

/// Amplitude attenuation per unit absorptive potential per Å, chosen so
/// ice intensity decays as `exp(-t / ICE_MEAN_FREE_PATH)`.
pub const ABSORPTION_CONSTANT: f64 = 1.0 / (2.0 * ICE_ABSORPTION * ICE_MEAN_FREE_PATH);

/// A specimen ready for projection: spline coefficients of the contrast
/// against a uniform slab background.
#[derive(Debug, Clone)]
pub struct Specimen {
    el: BSplineVolume,
    ab: BSplineVolume,
    dims: [usize; 3],
    voxel_size: f64,
    background_el: f64,
    background_ab: f64,
}

impl Specimen {
    /// `v_el`, `v_ab` are full potentials; the uniform background is
    /// subtracted before interpolation and treated as an infinite slab of
    /// the box thickness.
    pub fn new(v_el: &Grid3, v_ab: &Grid3, background_el: f64, background_ab: f64) -> Result<Self> {
        if !v_el.same_shape(v_ab) {
            return Err(Error::ShapeMismatch("elastic and absorptive potentials differ in shape".into()));
        }
        v_el.check_finite()?;
        v_ab.check_finite()?;
        // Tilts rotate about y, so y is never interpolated.
        let axes = [true, false, true];
        let el = BSplineVolume::with_axes(&v_el.map(|v| v - background_el), axes);
        let ab = BSplineVolume::with_axes(&v_ab.map(|v| v - background_ab), axes);
        Ok(Self { el, ab, dims: v_el.dims(), voxel_size: v_el.voxel_size(), background_el, background_ab })
    }

    pub fn from_model(model: &GrandModel) -> Result<Self> {
        Self::new(&model.potential.v_el, &model.potential.v_ab, model.ice_potential, model.ice_absorption)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    /// Projected contrast (V·Å) of the specimen tilted by `angle` degrees
    /// about y, cut into slabs of `per_slice` voxels along the beam. The
    /// depth covers every voxel of the tilted box.
    pub fn projected_slices(&self, angle: f64, per_slice: usize) -> (Vec<Grid3>, Vec<Grid3>) {
        let [nx, ny, nz] = self.dims;
        let (s, c) = angle.to_radians().sin_cos();
        let depth = (nz as f64 * c.abs() + nx as f64 * s.abs()).ceil() as usize;
        let n_slices = depth.div_ceil(per_slice).max(1);
        let total = n_slices * per_slice;
        let cx = 0.5 * nx as f64 - 0.5;
        let cz = 0.5 * nz as f64 - 0.5;
        let cz_out = 0.5 * total as f64 - 0.5;
        let vs = self.voxel_size;
        // rows[y] holds n_slices × nx values for each potential.
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..ny)
            .into_par_iter()
            .map(|y| {
                let mut el = vec![0.0; n_slices * nx];
                let mut ab = vec![0.0; n_slices * nx];
                for k in 0..total {
                    let dz = k as f64 - cz_out;
                    let slab = (k / per_slice) * nx;
                    for x in 0..nx {
                        let dx = x as f64 - cx;
                        // Inverse of the active tilt R_y(angle).
                        let t = [c * dx - s * dz + cx, y as f64, s * dx + c * dz + cz];
                        if let Some(v) = self.el.sample(t) {
                            el[slab + x] += v * vs;
                            ab[slab + x] += self.ab.sample(t).unwrap_or(0.0) * vs;
                        }
                    }
                }
                (el, ab)
            })
            .collect();
        let mut el_slices = Vec::with_capacity(n_slices);
        let mut ab_slices = Vec::with_capacity(n_slices);
        for sl in 0..n_slices {
            let mut e = Vec::with_capacity(nx * ny);
            let mut a = Vec::with_capacity(nx * ny);
            for row in &rows {
                e.extend_from_slice(&row.0[sl * nx..(sl + 1) * nx]);
                a.extend_from_slice(&row.1[sl * nx..(sl + 1) * nx]);
            }
            el_slices.push(Grid3::from_vec([nx, ny, 1], vs, e).expect("slice dims"));
            ab_slices.push(Grid3::from_vec([nx, ny, 1], vs, a).expect("slice dims"));
        }
        (el_slices, ab_slices)
    }
}

/// Fresnel free-space propagation by `dz` Å, `exp(-iπλ dz q²)`.
pub fn propagate(wave: &mut ComplexGrid3, lambda: f64, dz: f64) {
    let dims = wave.dims();
    let px = wave.voxel_size();
    fft3_inplace(wave.data_mut(), dims, false);
    multiply_spectrum(wave.data_mut(), dims, |fx, fy, _| {
        let q2 = (fx * fx + fy * fy) / (px * px);
        Complex64::from_polar(1.0, -PI * lambda * dz * q2)
    });
    fft3_inplace(wave.data_mut(), dims, true);
}

/// Applies the objective transfer function to a wave in real space.
pub fn apply_ctf(wave: &mut ComplexGrid3, optics: &OpticsConfig, terms: CtfTerms) {
    let dims = wave.dims();
    let px = wave.voxel_size();
    fft3_inplace(wave.data_mut(), dims, false);
    multiply_spectrum(wave.data_mut(), dims, |fx, fy, _| wave_transfer(optics, terms, fx / px, fy / px));
    fft3_inplace(wave.data_mut(), dims, true);
}

fn voxels_per_slice(optics: &OpticsConfig, vs: f64) -> Result<usize> {
    let thickness = optics.slice_thickness * 10.0;
    let ratio = thickness / vs;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-6 {
        return Err(Error::SliceThickness { thickness, voxel_size: vs });
    }
    Ok(n as usize)
}

/// Exit wave of the specimen tilted by `angle` degrees: slice-by-slice
/// transmission and propagation, referred back to the specimen mid-plane,
/// then the objective transfer (skipped when `ctf` is `None`).
pub fn multislice_project(
    spec: &Specimen,
    angle: f64,
    optics: &OpticsConfig,
    ctf: Option<CtfTerms>,
) -> Result<ComplexGrid3> {
    optics.validate()?;
    let vs = spec.voxel_size();
    if (optics.pixel_size - vs).abs() > 1e-9 * vs {
        return Err(Error::Config(format!("pixel size {} Å differs from specimen voxel size {vs} Å", optics.pixel_size)));
    }
    let per_slice = voxels_per_slice(optics, vs)?;
    let dz = per_slice as f64 * vs;
    let lambda = optics.wavelength();
    let sigma = optics.interaction_constant();
    let [nx, ny, nz] = spec.dims();
    let (el, ab) = spec.projected_slices(angle, per_slice);

    let mut wave = ComplexGrid3::from_vec([nx, ny, 1], vs, vec![Complex64::new(1.0, 0.0); nx * ny])?;
    for (i, (e, a)) in el.iter().zip(&ab).enumerate() {
        if i > 0 {
            propagate(&mut wave, lambda, dz);
        }
        for ((w, pe), pa) in wave.data_mut().iter_mut().zip(e.data()).zip(a.data()) {
            *w *= Complex64::new(-ABSORPTION_CONSTANT * pa, sigma * pe).exp();
        }
    }
    let back = -0.5 * (el.len() - 1) as f64 * dz;
    if back != 0.0 {
        propagate(&mut wave, lambda, back);
    }
    // Uniform slab background along the tilted path.
    let path = nz as f64 * vs / angle.to_radians().cos().abs();
    let bg = Complex64::new(-ABSORPTION_CONSTANT * spec.background_ab * path, sigma * spec.background_el * path).exp();
    wave.data_mut().iter_mut().for_each(|w| *w *= bg);
    if let Some(terms) = ctf {
        apply_ctf(&mut wave, optics, terms);
    }
    Ok(wave)
}

/// Plain line integral of the elastic contrast through the tilted
/// specimen, V·Å; the projection-approximation reference.
pub fn ideal_projection(spec: &Specimen, angle: f64) -> Grid3 {
    let (el, _) = spec.projected_slices(angle, 1);
    let mut sum = el[0].clone();
    for s in &el[1..] {
        for (a, b) in sum.data_mut().iter_mut().zip(s.data()) {
            *a += b;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optics() -> OpticsConfig {
        OpticsConfig { slice_thickness: 1.0, ..Default::default() }
    }

    fn specimen(f: impl FnMut(usize, usize, usize) -> f64, dims: [usize; 3]) -> Specimen {
        let v = Grid3::from_fn(dims, 5.0, f).unwrap();
        let ab = Grid3::zeros(dims, 5.0).unwrap();
        Specimen::new(&v, &ab, 0.0, 0.0).unwrap()
    }

    #[test]
    fn empty_specimen_gives_plane_wave() {
        let spec = specimen(|_, _, _| 0.0, [16, 16, 8]);
        for angle in [0.0, 30.0, -60.0] {
            let w = multislice_project(&spec, angle, &optics(), Some(CtfTerms::default())).unwrap();
            assert!(w.data().iter().all(|c| (c.norm() - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn propagation_is_unitary() {
        let spec = specimen(|x, y, z| ((x * 7 + y * 3 + z) % 5) as f64, [16, 16, 8]);
        let w = multislice_project(&spec, 20.0, &optics(), None).unwrap();
        let mean: f64 = w.data().iter().map(|c| c.norm_sqr()).sum::<f64>() / w.data().len() as f64;
        assert!((mean - 1.0).abs() < 1e-6, "{mean}");
    }

    #[test]
    fn weak_phase_object_first_order() {
        // Single slice, phase ≤ 0.05 rad: I ≈ 1 - 2 F⁻¹[sin χ · F[φ]].
        let n = 32;
        let o = OpticsConfig { slice_thickness: 0.5, ..Default::default() };
        let sigma = o.interaction_constant();
        let peak = 0.05 / (sigma * 5.0);
        let spec = specimen(
            |x, y, _| {
                let r2 = (x as f64 - 16.0).powi(2) + (y as f64 - 16.0).powi(2);
                peak * (-r2 / 8.0).exp()
            },
            [n, n, 1],
        );
        let terms = CtfTerms { envelopes: false, ..Default::default() };
        let w = multislice_project(&spec, 0.0, &o, Some(terms)).unwrap();
        let phase = ideal_projection(&spec, 0.0).map(|v| sigma * v);
        let predicted = crate::volume::fft::apply_filter(&phase, |fx, fy, _| {
            let s = o.chi(fx / 5.0, fy / 5.0).sin();
            Complex64::new(-2.0 * s, 0.0)
        });
        let contrast: Vec<f64> = w.data().iter().map(|c| c.norm_sqr() - 1.0).collect();
        let scale = predicted.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
        let err = contrast.iter().zip(predicted.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 0.01 * scale + 0.01 * 0.05, "err {err} vs scale {scale}");
        // Underfocus: a positive phase object images dark at its center.
        assert!(contrast[16 * n + 16] < 0.0);
    }

    #[test]
    fn deterministic() {
        let spec = specimen(|x, _, z| (x + z) as f64 * 0.01, [16, 8, 8]);
        let a = multislice_project(&spec, 0.0, &optics(), Some(CtfTerms::default())).unwrap();
        let b = multislice_project(&spec, 0.0, &optics(), Some(CtfTerms::default())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn slice_thickness_must_divide() {
        let spec = specimen(|_, _, _| 0.0, [8, 8, 8]);
        let o = OpticsConfig { slice_thickness: 0.7, ..Default::default() };
        assert!(matches!(multislice_project(&spec, 0.0, &o, None), Err(Error::SliceThickness { .. })));
    }

    #[test]
    fn tilted_projection_moves_offcenter_point() {
        // A point offset by (0.5, 4.5) voxels in (x, z) lands at x cos θ + z sin θ.
        let dims = [32, 4, 32];
        let spec = specimen(|x, _, z| if x == 16 && z == 20 { 1.0 } else { 0.0 }, dims);
        let p = ideal_projection(&spec, 30.0);
        let row: Vec<f64> = (0..32).map(|x| p.get(x, 1, 0)).collect();
        let peak = (0..32).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        let expect = 15.5 + 4.5 * 0.5 + 0.5 * 3f64.sqrt() * 0.5;
        assert!((peak as f64 - expect).abs() <= 1.0, "peak {peak} expect {expect}");
    }
}

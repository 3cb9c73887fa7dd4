use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::fft::fft_freq;
use crate::volume::ComplexGrid3;

/// Electron rest energy, eV.
const REST_ENERGY: f64 = 510_998.95;
/// h / sqrt(2 m₀ e) in Å·V^½.
const WAVELENGTH_CONSTANT: f64 = 12.264_26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsConfig {
    /// kV.
    pub voltage: f64,
    /// mm.
    pub spherical_aberration: f64,
    /// mm.
    pub chromatic_aberration: f64,
    /// eV.
    pub energy_spread: f64,
    /// Illumination semi-angle treated as a Gaussian rms spread, µrad.
    pub illumination_aperture: f64,
    /// µm.
    pub objective_diameter: f64,
    /// mm.
    pub focal_distance: f64,
    /// µm, positive = underfocus.
    pub defocus: f64,
    /// µm, along the x axis.
    pub astigmatism: f64,
    /// nm.
    pub slice_thickness: f64,
    /// Å.
    pub pixel_size: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            voltage: 300.0,
            spherical_aberration: 2.7,
            chromatic_aberration: 2.7,
            energy_spread: 0.7,
            illumination_aperture: 30.0,
            objective_diameter: 100.0,
            focal_distance: 4.7,
            defocus: 3.5,
            astigmatism: 0.0,
            slice_thickness: 5.0,
            pixel_size: 5.0,
        }
    }
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("voltage", self.voltage),
            ("spherical_aberration", self.spherical_aberration),
            ("chromatic_aberration", self.chromatic_aberration),
            ("energy_spread", self.energy_spread),
            ("illumination_aperture", self.illumination_aperture),
            ("objective_diameter", self.objective_diameter),
            ("focal_distance", self.focal_distance),
            ("defocus", self.defocus),
            ("slice_thickness", self.slice_thickness),
            ("pixel_size", self.pixel_size),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("optics.{name} must be positive, got {v}")));
            }
        }
        if !self.astigmatism.is_finite() {
            return Err(Error::Config("optics.astigmatism must be finite".into()));
        }
        Ok(())
    }

    /// Relativistic electron wavelength, Å.
    pub fn wavelength(&self) -> f64 {
        electron_wavelength(self.voltage * 1e3)
    }

    /// Interaction constant σ_e, rad / (V·Å).
    pub fn interaction_constant(&self) -> f64 {
        interaction_constant(self.voltage * 1e3)
    }

    fn cs(&self) -> f64 {
        self.spherical_aberration * 1e7
    }

    fn defocus_a(&self) -> f64 {
        self.defocus * 1e4
    }

    /// Aberration phase χ at spatial frequency `(qx, qy)` in 1/Å.
    pub fn chi(&self, qx: f64, qy: f64) -> f64 {
        let lambda = self.wavelength();
        let q2 = qx * qx + qy * qy;
        let df = if q2 > 0.0 {
            self.defocus_a() + 0.5 * self.astigmatism * 1e4 * (qx * qx - qy * qy) / q2
        } else {
            self.defocus_a()
        };
        PI * lambda * q2 * df - 0.5 * PI * self.cs() * lambda.powi(3) * q2 * q2
    }

    /// Defocus-spread envelope, `exp(-½ (π λ δ q²)²)` with
    /// `δ = Cc ΔE / E`.
    pub fn temporal_envelope(&self, q: f64) -> f64 {
        let delta = self.chromatic_aberration * 1e7 * self.energy_spread / (self.voltage * 1e3);
        let a = PI * self.wavelength() * delta * q * q;
        (-0.5 * a * a).exp()
    }

    /// Partial spatial coherence: Gaussian spread of incidence angles with
    /// rms `α` shifts frequencies by `α/λ`, giving
    /// `exp(-½ (α/λ)² (dχ/dq)²)`.
    pub fn spatial_envelope(&self, q: f64) -> f64 {
        let lambda = self.wavelength();
        let alpha = self.illumination_aperture * 1e-6;
        let dchi = 2.0 * PI * lambda * self.defocus_a() * q - 2.0 * PI * self.cs() * lambda.powi(3) * q.powi(3);
        (-0.5 * (alpha / lambda * dchi).powi(2)).exp()
    }

    /// Objective aperture cutoff `D / (2 f λ)`, 1/Å.
    pub fn aperture_cutoff(&self) -> f64 {
        (self.objective_diameter * 1e4) / (2.0 * self.focal_distance * 1e7 * self.wavelength())
    }

    /// First `q > 0` where `sin χ` vanishes (χ = π), 1/Å, for a round beam.
    pub fn first_zero(&self) -> f64 {
        let lambda = self.wavelength();
        let a = 0.5 * self.cs() * lambda.powi(3);
        let b = lambda * self.defocus_a();
        // a u² - b u + 1 = 0 with u = q².
        let u = (b - (b * b - 4.0 * a).sqrt()) / (2.0 * a);
        u.sqrt()
    }
}

pub fn electron_wavelength(volts: f64) -> f64 {
    WAVELENGTH_CONSTANT / (volts * (1.0 + volts / (2.0 * REST_ENERGY))).sqrt()
}

/// `σ = 2π / (λ V) · (m c² + eV) / (2 m c² + eV)`.
pub fn interaction_constant(volts: f64) -> f64 {
    2.0 * PI / (electron_wavelength(volts) * volts) * (REST_ENERGY + volts) / (2.0 * REST_ENERGY + volts)
}

/// Which parts of the transfer function to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtfTerms {
    pub phase: bool,
    pub envelopes: bool,
    pub aperture: bool,
}

impl Default for CtfTerms {
    fn default() -> Self {
        Self { phase: true, envelopes: true, aperture: true }
    }
}

/// Wave transfer at one frequency: `exp(iχ) · E_t · E_s`, zero beyond
/// the aperture. With this sign a weak positive phase object images dark
/// in underfocus.
pub fn wave_transfer(optics: &OpticsConfig, terms: CtfTerms, qx: f64, qy: f64) -> Complex64 {
    let q = (qx * qx + qy * qy).sqrt();
    if terms.aperture && q > optics.aperture_cutoff() {
        return Complex64::new(0.0, 0.0);
    }
    let mut h = if terms.phase { Complex64::from_polar(1.0, optics.chi(qx, qy)) } else { Complex64::new(1.0, 0.0) };
    if terms.envelopes {
        h *= optics.temporal_envelope(q) * optics.spatial_envelope(q);
    }
    h
}

/// Transfer function sampled on the FFT layout of an `nx × ny` image with
/// the optics' pixel size.
pub fn ctf(dims: [usize; 2], optics: &OpticsConfig, terms: CtfTerms) -> Result<ComplexGrid3> {
    let px = optics.pixel_size;
    let mut data = Vec::with_capacity(dims[0] * dims[1]);
    for y in 0..dims[1] {
        let qy = fft_freq(y, dims[1]) / px;
        for x in 0..dims[0] {
            data.push(wave_transfer(optics, terms, fft_freq(x, dims[0]) / px, qy));
        }
    }
    ComplexGrid3::from_vec([dims[0], dims[1], 1], px, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_and_sigma_at_300kv() {
        let o = OpticsConfig::default();
        assert!((o.wavelength() - 0.019_687).abs() < 2e-6);
        assert!((o.interaction_constant() - 6.526e-4).abs() < 2e-6);
    }

    #[test]
    fn zero_frequency() {
        let o = OpticsConfig::default();
        assert_eq!(o.chi(0.0, 0.0), 0.0);
        assert_eq!(o.temporal_envelope(0.0), 1.0);
        assert_eq!(o.spatial_envelope(0.0), 1.0);
        let h = wave_transfer(&o, CtfTerms::default(), 0.0, 0.0);
        assert!((h - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn first_zero_matches_root_find() {
        let o = OpticsConfig::default();
        // Bisection on χ(q) - π over the first lobe.
        let f = |q: f64| o.chi(q, 0.0) - PI;
        let (mut lo, mut hi) = (1e-6, 0.05);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((o.first_zero() - lo).abs() < 1e-10);
        // No earlier sign change of sin χ.
        for k in 1..1000 {
            let q = lo * k as f64 / 1000.0;
            assert!(o.chi(q, 0.0).sin() >= 0.0);
        }
        // Roughly 1 / sqrt(λ Δf) for large defocus.
        assert!((lo - 1.0 / (o.wavelength() * 3.5e4).sqrt()).abs() / lo < 0.02, "{lo}");
    }

    #[test]
    fn wider_energy_spread_tightens_envelope() {
        let a = OpticsConfig::default();
        let b = OpticsConfig { energy_spread: 2.0 * a.energy_spread, ..a.clone() };
        for k in 1..100 {
            let q = 0.002 * k as f64;
            assert!(b.temporal_envelope(q) < a.temporal_envelope(q));
        }
    }

    #[test]
    fn aperture_cuts_off() {
        let o = OpticsConfig { objective_diameter: 10.0, ..Default::default() };
        let qc = o.aperture_cutoff();
        assert_eq!(wave_transfer(&o, CtfTerms::default(), 1.01 * qc, 0.0), Complex64::new(0.0, 0.0));
        assert!(wave_transfer(&o, CtfTerms::default(), 0.99 * qc, 0.0).norm() > 0.0);
    }

    #[test]
    fn rejects_nonpositive() {
        let o = OpticsConfig { defocus: 0.0, ..Default::default() };
        assert!(o.validate().is_err());
    }
}

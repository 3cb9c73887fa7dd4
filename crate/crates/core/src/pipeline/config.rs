use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::catalog::CatalogConfig;
use crate::bench::EvalConfig;
use crate::error::{Error, Result};
use crate::imaging::AcquisitionConfig;
use crate::matcher::TemplateParams;
use crate::phantom::PlacementConfig;
use crate::recon::ReconConfig;
use crate::spectral::ReferenceSpectrum;

/// Optional amplitude matching of the projections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    /// Two-column radial amplitude profile of an experimental micrograph.
    pub reference_profile: Option<PathBuf>,
    /// Generate a synthetic reference instead.
    pub synthetic_reference: Option<ReferenceSpectrum>,
    /// Defaults to half the smaller image side.
    pub n_rings: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Tm,
    /// Adds the cross-class overlap filter.
    TmF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    pub variant: Variant,
    /// Degrees.
    pub angular_spacing: f64,
    /// Peaks kept per class before thresholding.
    pub candidates_per_class: usize,
    /// Threshold at `mu - sigmas * sigma` of the fitted score population.
    pub sigmas: f64,
    /// Low-pass the tomogram with the template cutoff first.
    pub lowpass_tomogram: bool,
    pub template: TemplateParams,
    /// Run the LoG bead detector and report `fiducial` entries.
    pub fiducials: bool,
    /// LoG scale, voxels. Defaults to the bead radius over √3.
    pub fiducial_sigma: Option<f64>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Tm,
            angular_spacing: 30.0,
            candidates_per_class: 1000,
            sigmas: 2.0,
            lowpass_tomogram: true,
            template: TemplateParams::default(),
            fiducials: true,
            fiducial_sigma: None,
        }
    }
}

/// Every tunable of a run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub catalog: CatalogConfig,
    pub placement: PlacementConfig,
    pub acquisition: AcquisitionConfig,
    pub spectral: SpectralConfig,
    pub recon: ReconConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub evaluation: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            catalog: CatalogConfig::default(),
            placement: PlacementConfig::desk(),
            acquisition: AcquisitionConfig::default(),
            spectral: SpectralConfig::default(),
            recon: ReconConfig::default(),
            matching: MatchConfig::default(),
            evaluation: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Cross-section checks that no single section can make.
    pub fn validate(&self) -> Result<()> {
        let px = self.acquisition.optics.pixel_size;
        if (px - self.placement.voxel_size).abs() > 1e-9 * px {
            return Err(Error::Config(format!(
                "pixel size {px} Å differs from the model voxel size {} Å",
                self.placement.voxel_size
            )));
        }
        if self.recon.bin_factor == 0 {
            return Err(Error::Config("bin_factor must be at least 1".into()));
        }
        if !(self.matching.angular_spacing > 0.0 && self.matching.angular_spacing <= 180.0) {
            return Err(Error::Config("angular_spacing must lie in (0, 180]".into()));
        }
        Ok(())
    }
}

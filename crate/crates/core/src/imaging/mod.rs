//! Tilt-series simulation: multislice propagation, objective transfer,
//! detector response and counting noise.

pub mod detector;
pub mod multislice;
pub mod optics;
pub mod tiltseries;

pub use detector::{detect, Detection, DqeCurve};
pub use multislice::{ideal_projection, multislice_project, Specimen};
pub use optics::{ctf, CtfTerms, OpticsConfig};
pub use tiltseries::{simulate_tiltseries, tilt_angles, AcquisitionConfig, TiltSeries, TiltSeriesMeta};

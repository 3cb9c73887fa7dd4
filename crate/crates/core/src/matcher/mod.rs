//! Template matching baseline: template preparation, masked NCC search,
//! candidate extraction, score thresholding, overlap filtering and gold
//! bead detection.

pub mod candidates;
pub mod fiducial;
pub mod ncc;
pub mod orientations;
pub mod template;

pub use candidates::{
    apply_threshold, candidates_to_text, extract_candidates, fit_threshold, overlap_filter, Candidate, ScoreThreshold,
};
pub use fiducial::log_fiducial_detect;
pub use ncc::{merge_max, ncc_direct, ncc_fourier, ncc_search, NccResult};
pub use orientations::orientation_grid;
pub use template::{build_template, lowpass, Handedness, TemplateParams, TemplateSpec};

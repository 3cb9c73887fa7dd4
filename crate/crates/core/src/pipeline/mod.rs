//! The end-to-end workflows behind the command-line tool.

pub mod catalog;
pub mod config;
pub mod run;

pub use catalog::{build_catalog, synthetic_shape, CatalogConfig};
pub use config::{MatchConfig, RunConfig, SpectralConfig, Variant};
pub use run::{
    candidates_to_predictions, describe_structure, evaluate_files, files, match_file, match_tomogram, reconstruct, run_simulation, simulate,
    ClassSearch, MatchOutput, Simulation, SimulationSummary,
};

pub mod error;
pub mod mrc;
pub mod volume;

pub use error::{Error, Result};
pub mod structchem;
pub mod phantom;
pub mod rng;
pub mod imaging;
pub mod recon;
pub mod spectral;
pub mod matcher;
pub mod bench;
pub mod pipeline;

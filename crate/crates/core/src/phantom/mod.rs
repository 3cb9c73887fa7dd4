//! Randomized grandmodels: placed particles plus class and occupancy masks.

pub mod placement;
pub mod so3;

use std::fmt::Write as _;

pub use placement::{
    place_particles, GrandModel, ParticleClass, ParticleInstance, ParticleKind, PlacementConfig, FIDUCIAL_CLASS,
    VESICLE_CLASS,
};
pub use so3::sample_so3;

/// Position of a model-frame point in voxel-index coordinates of a frame
/// binned `bin` times (voxel centers at integers).
pub fn to_final_frame(model: &GrandModel, p: [f64; 3], bin: usize) -> [f64; 3] {
    let origin = model.potential.v_el.origin();
    let vs = model.voxel_size() * bin as f64;
    [0, 1, 2].map(|a| (p[a] - origin[a]) / vs - 0.5)
}

/// One `class x y z phi theta psi` line per instance, coordinates in
/// voxels of the model binned `bin` times. Values print at full precision
/// so parsing recovers them exactly.
pub fn export_ground_truth(model: &GrandModel, bin: usize) -> String {
    let mut out = String::new();
    for inst in &model.instances {
        let [x, y, z] = to_final_frame(model, inst.center, bin);
        let o = inst.orientation;
        let _ = writeln!(out, "{} {x} {y} {z} {} {} {}", inst.class_id, o.phi, o.theta, o.psi);
    }
    out
}

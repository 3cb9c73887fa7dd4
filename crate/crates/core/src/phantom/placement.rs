use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::so3::sample_so3;
use crate::error::{Error, Result};
use crate::rng::{substream, PLACEMENT, VESICLES};
use crate::structchem::{MoleculeKind, PotentialMap, ICE_ABSORPTION, ICE_POTENTIAL};
use crate::volume::{gaussian_smooth, rotate_bspline, EulerZXZ, Grid3, LabelGrid3};

pub const FIDUCIAL_CLASS: &str = "fiducial";
pub const VESICLE_CLASS: &str = "vesicle";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticleKind {
    Protein,
    Fiducial,
    Vesicle,
}

impl ParticleKind {
    pub fn molecule_kind(self) -> MoleculeKind {
        match self {
            ParticleKind::Protein => MoleculeKind::Protein,
            ParticleKind::Fiducial => MoleculeKind::Gold,
            ParticleKind::Vesicle => MoleculeKind::Membrane,
        }
    }
}

/// One catalog entry: a protein potential sampled at the model voxel size,
/// centered in its box.
#[derive(Debug, Clone)]
pub struct ParticleClass {
    pub id: String,
    pub kind: ParticleKind,
    pub potential: PotentialMap,
    /// kDa.
    pub molecular_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleInstance {
    pub class_id: String,
    /// Physical center, Å, in the model frame.
    pub center: [f64; 3],
    pub orientation: EulerZXZ,
    pub instance_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementConfig {
    /// Model size in voxels.
    pub dims: [usize; 3],
    /// Å.
    pub voxel_size: f64,
    /// Inclusive count ranges.
    pub proteins: [usize; 2],
    pub fiducials: [usize; 2],
    pub vesicles: [usize; 2],
    /// Å.
    pub fiducial_radius: f64,
    /// Range of the mid-wall radius, Å.
    pub vesicle_radius: [f64; 2],
    /// Å.
    pub vesicle_wall: f64,
    /// Position draws per particle before giving up.
    pub max_attempts: usize,
    /// Fraction of the smoothed density's maximum that defines a
    /// particle's footprint.
    pub footprint_threshold: f64,
    /// Gaussian σ of that smoothing, Å; 0 thresholds the raw potential.
    pub footprint_smoothing: f64,
    /// Mean inner potentials, V.
    pub gold_potential: f64,
    pub membrane_potential: f64,
    pub ice_potential: f64,
    pub ice_absorption: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            dims: [1024, 1024, 400],
            voxel_size: 5.0,
            proteins: [1000, 3000],
            fiducials: [7, 14],
            vesicles: [2, 7],
            fiducial_radius: 50.0,
            vesicle_radius: [150.0, 400.0],
            vesicle_wall: 50.0,
            max_attempts: 1000,
            footprint_threshold: 0.5,
            footprint_smoothing: 5.0,
            gold_potential: 25.0,
            membrane_potential: 5.4,
            ice_potential: ICE_POTENTIAL,
            ice_absorption: ICE_ABSORPTION,
        }
    }
}

impl PlacementConfig {
    /// 128 nm cube at 5 Å with 30 particles.
    pub fn desk() -> Self {
        Self {
            dims: [256, 256, 256],
            proteins: [26, 26],
            fiducials: [2, 2],
            vesicles: [2, 2],
            vesicle_radius: [120.0, 200.0],
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dims.contains(&0) {
            return bad("placement dims must be positive");
        }
        if !(self.voxel_size > 0.0) {
            return Err(Error::InvalidVoxelSize(self.voxel_size));
        }
        for (name, r) in [("proteins", self.proteins), ("fiducials", self.fiducials), ("vesicles", self.vesicles)] {
            if r[0] > r[1] {
                return bad(&format!("{name} range is reversed"));
            }
        }
        if !(self.vesicle_radius[0] > 0.0 && self.vesicle_radius[0] <= self.vesicle_radius[1]) {
            return bad("vesicle_radius must be a positive, ordered range");
        }
        if !(self.fiducial_radius > 0.0 && self.vesicle_wall > 0.0) {
            return bad("fiducial_radius and vesicle_wall must be positive");
        }
        if !(self.footprint_threshold > 0.0 && self.footprint_threshold < 1.0) {
            return bad("footprint_threshold must lie in (0, 1)");
        }
        if !(self.footprint_smoothing >= 0.0) {
            return bad("footprint_smoothing must be non-negative");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        Ok(())
    }
}

/// The assembled ground-truth volume.
#[derive(Debug, Clone)]
pub struct GrandModel {
    pub potential: PotentialMap,
    /// 0 = background, else 1-based index into `class_names`.
    pub class_mask: LabelGrid3,
    /// 0 = background, else `instance_id`.
    pub occupancy_mask: LabelGrid3,
    pub instances: Vec<ParticleInstance>,
    pub class_names: Vec<String>,
    pub rng_seed: u64,
    /// Uniform background already included in `potential`.
    pub ice_potential: f64,
    pub ice_absorption: f64,
}

impl GrandModel {
    pub fn dims(&self) -> [usize; 3] {
        self.potential.dims()
    }

    pub fn voxel_size(&self) -> f64 {
        self.potential.voxel_size()
    }

    pub fn class_label(&self, class_id: &str) -> Option<u32> {
        self.class_names.iter().position(|c| c == class_id).map(|i| i as u32 + 1)
    }
}

/// Spherical shell (or ball when `inner` is 0) with erf edges, sampled at
/// voxel centers of a cube just large enough to hold it.
fn radial_template(outer: f64, inner: f64, value: f64, vs: f64) -> Result<Grid3> {
    let edge = 0.5 * vs;
    let n = 2 * ((outer + 2.0 * vs) / vs).ceil() as usize + 1;
    let half = 0.5 * n as f64 * vs;
    let profile = |r: f64| {
        let outer_part = 0.5 * (1.0 - erf((r - outer) / edge));
        let inner_part = if inner > 0.0 { 0.5 * (1.0 - erf((r - inner) / edge)) } else { 0.0 };
        value * (outer_part - inner_part)
    };
    let g = Grid3::from_fn([n; 3], vs, |x, y, z| {
        let p = [x, y, z].map(|i| (i as f64 + 0.5) * vs - half);
        profile((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
    })?;
    Ok(g.with_origin([-half; 3]))
}

struct Request {
    class_index: usize,
    kind: ParticleKind,
    /// Only for vesicles: their own template.
    own: Option<Grid3>,
    size: f64,
}

struct Placed {
    offset: [i64; 3],
    v_el: Grid3,
    footprint: Vec<bool>,
}

fn bounding_box(mask: &[bool], dims: [usize; 3]) -> Option<([usize; 3], [usize; 3])> {
    let mut lo = dims;
    let mut hi = [0usize; 3];
    let mut any = false;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                if mask[x + dims[0] * (y + dims[1] * z)] {
                    any = true;
                    for (a, v) in [x, y, z].into_iter().enumerate() {
                        lo[a] = lo[a].min(v);
                        hi[a] = hi[a].max(v);
                    }
                }
            }
        }
    }
    any.then_some((lo, hi))
}

/// Draws particle counts, orientations and positions, then assembles the
/// potential, masks and instance list. Particles never overlap (their
/// footprints are disjoint) and lie fully inside the box.
pub fn place_particles(catalog: &[ParticleClass], cfg: &PlacementConfig, seed: u64) -> Result<GrandModel> {
    cfg.validate()?;
    let vs = cfg.voxel_size;
    for c in catalog {
        if (c.potential.voxel_size() - vs).abs() > 1e-9 * vs {
            return Err(Error::Config(format!(
                "class {} is sampled at {} Å, model at {} Å",
                c.id,
                c.potential.voxel_size(),
                vs
            )));
        }
    }
    let mut rng = substream(seed, PLACEMENT);
    let n_prot = rng.gen_range(cfg.proteins[0]..=cfg.proteins[1]);
    let n_fid = rng.gen_range(cfg.fiducials[0]..=cfg.fiducials[1]);
    let n_ves = rng.gen_range(cfg.vesicles[0]..=cfg.vesicles[1]);
    if n_prot > 0 && catalog.is_empty() {
        return Err(Error::Config("protein catalog is empty".into()));
    }

    let mut class_names: Vec<String> = catalog.iter().map(|c| c.id.clone()).collect();
    let fid_index = class_names.len();
    class_names.push(FIDUCIAL_CLASS.into());
    let ves_index = class_names.len();
    class_names.push(VESICLE_CLASS.into());

    let wall_half = 0.5 * cfg.vesicle_wall;
    let fiducial_tpl = radial_template(cfg.fiducial_radius, 0.0, cfg.gold_potential - cfg.ice_potential, vs)?;
    let sigma = cfg.footprint_smoothing / vs;
    let footprint_of = |g: &Grid3| -> Vec<bool> {
        let d = gaussian_smooth(g, sigma);
        let level = cfg.footprint_threshold * d.max();
        d.data().iter().map(|&v| v > level).collect()
    };
    let footprint_size = |g: &Grid3| footprint_of(g).iter().filter(|&&b| b).count() as f64;
    let protein_sizes: Vec<f64> = catalog.iter().map(|c| footprint_size(&c.potential.v_el)).collect();

    let mut requests = Vec::with_capacity(n_prot + n_fid + n_ves);
    for _ in 0..n_prot {
        let i = rng.gen_range(0..catalog.len());
        requests.push(Request { class_index: i, kind: ParticleKind::Protein, own: None, size: protein_sizes[i] });
    }
    let fid_size = footprint_size(&fiducial_tpl);
    for _ in 0..n_fid {
        requests.push(Request { class_index: fid_index, kind: ParticleKind::Fiducial, own: None, size: fid_size });
    }
    let mut ves_rng = substream(seed, VESICLES);
    for _ in 0..n_ves {
        let r = ves_rng.gen_range(cfg.vesicle_radius[0]..=cfg.vesicle_radius[1]);
        let g = radial_template(r + wall_half, (r - wall_half).max(0.0), cfg.membrane_potential - cfg.ice_potential, vs)?;
        let size = footprint_size(&g);
        requests.push(Request { class_index: ves_index, kind: ParticleKind::Vesicle, own: Some(g), size });
    }
    // Larger first; the stable sort keeps draw order among equals.
    requests.sort_by(|a, b| b.size.total_cmp(&a.size));

    let dims = cfg.dims;
    let mut v_el = Grid3::zeros(dims, vs)?;
    let mut v_ab = Grid3::zeros(dims, vs)?;
    let mut class_mask = LabelGrid3::zeros(dims, vs)?;
    let mut occupancy = LabelGrid3::zeros(dims, vs)?;
    let mut instances = Vec::with_capacity(requests.len());

    for (n, req) in requests.iter().enumerate() {
        let template = match (&req.own, req.kind) {
            (Some(g), _) => g,
            (None, ParticleKind::Fiducial) => &fiducial_tpl,
            (None, _) => &catalog[req.class_index].potential.v_el,
        };
        let orientation = sample_so3(&mut rng);
        let rotated = if req.kind == ParticleKind::Protein {
            rotate_bspline(template, &orientation, template.center(), 0.0)?
        } else {
            // Radially symmetric; the drawn orientation is still recorded.
            template.clone()
        };
        let footprint = footprint_of(&rotated);
        let td = rotated.dims();
        let (lo, hi) = bounding_box(&footprint, td).ok_or_else(|| Error::EmptyThreshold(cfg.footprint_threshold))?;
        let range: Vec<(i64, i64)> = (0..3).map(|a| (-(lo[a] as i64), dims[a] as i64 - 1 - hi[a] as i64)).collect();
        if range.iter().any(|(a, b)| a > b) {
            return Err(Error::PlacementFailed {
                placed: instances.len(),
                requested: requests.len(),
                class: class_names[req.class_index].clone(),
                attempts: 0,
            });
        }
        let mut placed = None;
        for _ in 0..cfg.max_attempts {
            let offset = [0, 1, 2].map(|a| rng.gen_range(range[a].0..=range[a].1));
            if !collides(&occupancy, &footprint, td, lo, hi, offset) {
                placed = Some(offset);
                break;
            }
        }
        let Some(offset) = placed else {
            return Err(Error::PlacementFailed {
                placed: instances.len(),
                requested: requests.len(),
                class: class_names[req.class_index].clone(),
                attempts: cfg.max_attempts,
            });
        };
        let instance_id = n as u32 + 1;
        let p = Placed { offset, v_el: rotated, footprint };
        stamp(&mut v_el, &mut v_ab, &mut class_mask, &mut occupancy, &p, req, cfg, instance_id);
        let rel = [0, 1, 2].map(|a| template.center()[a] - template.origin()[a]);
        instances.push(ParticleInstance {
            class_id: class_names[req.class_index].clone(),
            center: [0, 1, 2].map(|a| offset[a] as f64 * vs + rel[a]),
            orientation,
            instance_id,
        });
        log::debug!("placed {} #{instance_id} at offset {:?}", class_names[req.class_index], offset);
    }

    for v in v_el.data_mut() {
        *v += cfg.ice_potential;
    }
    for v in v_ab.data_mut() {
        *v += cfg.ice_absorption;
    }
    Ok(GrandModel {
        potential: PotentialMap::new(v_el, v_ab)?,
        class_mask,
        occupancy_mask: occupancy,
        instances,
        class_names,
        rng_seed: seed,
        ice_potential: cfg.ice_potential,
        ice_absorption: cfg.ice_absorption,
    })
}

fn collides(occ: &LabelGrid3, fp: &[bool], td: [usize; 3], lo: [usize; 3], hi: [usize; 3], off: [i64; 3]) -> bool {
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                if fp[x + td[0] * (y + td[1] * z)] {
                    let g = [x as i64 + off[0], y as i64 + off[1], z as i64 + off[2]];
                    if occ.get(g[0] as usize, g[1] as usize, g[2] as usize) != 0 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn stamp(
    v_el: &mut Grid3,
    v_ab: &mut Grid3,
    class_mask: &mut LabelGrid3,
    occ: &mut LabelGrid3,
    p: &Placed,
    req: &Request,
    cfg: &PlacementConfig,
    instance_id: u32,
) {
    let dims = v_el.dims();
    let td = p.v_el.dims();
    let ab = req.kind.molecule_kind().absorption_constant() - cfg.ice_absorption;
    let label = req.class_index as u32 + 1;
    for z in 0..td[2] {
        let gz = z as i64 + p.offset[2];
        if gz < 0 || gz >= dims[2] as i64 {
            continue;
        }
        for y in 0..td[1] {
            let gy = y as i64 + p.offset[1];
            if gy < 0 || gy >= dims[1] as i64 {
                continue;
            }
            for x in 0..td[0] {
                let gx = x as i64 + p.offset[0];
                if gx < 0 || gx >= dims[0] as i64 {
                    continue;
                }
                let (gx, gy, gz) = (gx as usize, gy as usize, gz as usize);
                let i = v_el.index(gx, gy, gz);
                let t = x + td[0] * (y + td[1] * z);
                v_el.data_mut()[i] += p.v_el.data()[t];
                if p.footprint[t] {
                    v_ab.data_mut()[i] += ab;
                    class_mask.set(gx, gy, gz, label);
                    occ.set(gx, gy, gz, instance_id);
                }
            }
        }
    }
}

//! Interaction potential synthesis.
//!
//! The elastic part is a superposition of per-atom five-Gaussian
//! potentials, averaged over each voxel analytically (the Gaussians are
//! separable, so each voxel integral is a product of erf differences).
//! Solvent exclusion subtracts the ice potential times an erf-edged sphere
//! of the atom's Van der Waals radius.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use super::parse::AtomRecord;
use super::table::ScatteringTable;
use crate::error::{Error, Result};
use crate::volume::Grid3;

/// h² / (2π m₀ e) in V·Å²; converts electron scattering factors (Å) to
/// projected potentials.
pub const POTENTIAL_PREFACTOR: f64 = 47.877_9;

/// Elastic potential of amorphous ice, V.
pub const ICE_POTENTIAL: f64 = 4.530;

/// Absorptive fraction of amorphous ice at 300 kV.
pub const ICE_ABSORPTION: f64 = 0.208;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoleculeKind {
    Protein,
    Membrane,
    Gold,
    Ice,
}

impl MoleculeKind {
    /// Absorptive potential per unit of shape mask (dimensionless).
    ///
    /// Ice is fixed; the others scale ice by mass density and, for gold,
    /// by its much larger inelastic cross-section.
    pub fn absorption_constant(self) -> f64 {
        match self {
            MoleculeKind::Ice => ICE_ABSORPTION,
            MoleculeKind::Protein => 0.302,
            MoleculeKind::Membrane => 0.250,
            MoleculeKind::Gold => 6.000,
        }
    }
}

/// `kind constant × mask`.
pub fn absorption_potential(kind: MoleculeKind, mask: &Grid3) -> Grid3 {
    let k = kind.absorption_constant();
    mask.map(|m| k * m.clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct PotentialOptions {
    /// Å.
    pub voxel_size: f64,
    /// V. Zero disables solvent exclusion.
    pub ice_potential: f64,
    /// Width of the erf edge of the excluded sphere, Å.
    pub exclusion_edge: f64,
    /// Per-atom cutoff of the Gaussian terms, Å.
    pub truncation: f64,
    /// Margin around the atoms' bounding box for auto-sized grids, Å.
    pub margin: f64,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        Self { voxel_size: 5.0, ice_potential: ICE_POTENTIAL, exclusion_edge: 1.0, truncation: 5.0, margin: 10.0 }
    }
}

/// Paired elastic (V) and absorptive (dimensionless) potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMap {
    pub v_el: Grid3,
    pub v_ab: Grid3,
}

impl PotentialMap {
    pub fn new(v_el: Grid3, v_ab: Grid3) -> Result<Self> {
        if !v_el.same_shape(&v_ab) {
            return Err(Error::ShapeMismatch("elastic and absorptive grids differ".into()));
        }
        v_el.check_finite()?;
        v_ab.check_finite()?;
        Ok(Self { v_el, v_ab })
    }

    pub fn voxel_size(&self) -> f64 {
        self.v_el.voxel_size()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.v_el.dims()
    }
}

/// Real-space potential (V) of one atom's Gaussian sum at distance `r` Å.
pub fn atom_potential_at(a: &[f64; 5], b: &[f64; 5], r: f64) -> f64 {
    POTENTIAL_PREFACTOR
        * (0..5)
            .map(|i| a[i] * (4.0 * PI / b[i]).powf(1.5) * (-4.0 * PI * PI * r * r / b[i]).exp())
            .sum::<f64>()
}

/// Grid geometry covering the atoms' bounding box plus the margin, centered
/// on the box center.
pub fn auto_grid(atoms: &[AtomRecord], opts: &PotentialOptions) -> Result<Grid3> {
    let vs = opts.voxel_size;
    if atoms.is_empty() {
        let n = ((2.0 * opts.margin / vs).ceil() as usize).max(1);
        let half = 0.5 * n as f64 * vs;
        return Ok(Grid3::zeros([n; 3], vs)?.with_origin([-half; 3]));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for a in atoms {
        for k in 0..3 {
            lo[k] = lo[k].min(a.position[k]);
            hi[k] = hi[k].max(a.position[k]);
        }
    }
    let dims = [0, 1, 2].map(|k| (((hi[k] - lo[k]) + 2.0 * opts.margin) / vs).ceil().max(1.0) as usize);
    let origin = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]) - 0.5 * dims[k] as f64 * vs);
    Ok(Grid3::zeros(dims, vs)?.with_origin(origin))
}

/// Elastic potential on an auto-sized grid.
pub fn electrostatic_potential(atoms: &[AtomRecord], table: &ScatteringTable, opts: &PotentialOptions) -> Result<Grid3> {
    let grid = auto_grid(atoms, opts)?;
    electrostatic_potential_on(atoms, table, opts, grid)
}

/// Voxel-range and 1D integrals of `exp(-alpha (x - c)^2)` averaged over
/// each voxel on one axis.
fn axis_integrals(c: f64, alpha: f64, origin: f64, vs: f64, n: usize, reach: f64) -> (usize, Vec<f64>) {
    let lo = (((c - reach - origin) / vs).floor().max(0.0)) as usize;
    let hi = ((((c + reach - origin) / vs).floor()) as i64).clamp(0, n as i64 - 1) as usize;
    if lo > hi || lo >= n {
        return (0, Vec::new());
    }
    let s = alpha.sqrt();
    let norm = (PI / alpha).sqrt() / (2.0 * vs);
    let vals = (lo..=hi)
        .map(|i| {
            let x0 = origin + i as f64 * vs - c;
            let x1 = x0 + vs;
            norm * (erf(s * x1) - erf(s * x0))
        })
        .collect();
    (lo, vals)
}

fn radial_profile_volume(radius: f64, edge: f64) -> f64 {
    // Integral of 4π r² · ½ erfc((r − R)/w) dr by Simpson's rule.
    let r_max = radius + 8.0 * edge;
    let n = 2000;
    let h = r_max / n as f64;
    let f = |r: f64| 4.0 * PI * r * r * 0.5 * erfc((r - radius) / edge);
    let mut acc = f(0.0) + f(r_max);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Elastic potential sampled on the given grid geometry (its values are
/// overwritten).
pub fn electrostatic_potential_on(
    atoms: &[AtomRecord],
    table: &ScatteringTable,
    opts: &PotentialOptions,
    mut grid: Grid3,
) -> Result<Grid3> {
    let mut unknown: Vec<String> = atoms.iter().filter(|a| !table.contains(&a.element)).map(|a| a.element.clone()).collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(Error::UnknownElements(unknown));
    }
    grid.data_mut().iter_mut().for_each(|v| *v = 0.0);
    let dims = grid.dims();
    let vs = grid.voxel_size();
    let origin = grid.origin();
    let voxel_volume = vs * vs * vs;

    let mut excluded_volume = std::collections::HashMap::new();
    // Fraction of each voxel displacing ice; overlapping spheres count once.
    let mut excluded = vec![0.0; grid.len()];
    let sub = ((vs / 1.0).ceil() as usize).clamp(1, 4);
    let mut weights: Vec<(usize, f64)> = Vec::new();

    for atom in atoms {
        let p = &table.get(&atom.element).expect("checked above");
        let c = atom.position;
        for i in 0..5 {
            let alpha = 4.0 * PI * PI / p.b[i];
            let amp = POTENTIAL_PREFACTOR * p.a[i] * (4.0 * PI / p.b[i]).powf(1.5) * atom.occupancy;
            let (x0, wx) = axis_integrals(c[0], alpha, origin[0], vs, dims[0], opts.truncation);
            let (y0, wy) = axis_integrals(c[1], alpha, origin[1], vs, dims[1], opts.truncation);
            let (z0, wz) = axis_integrals(c[2], alpha, origin[2], vs, dims[2], opts.truncation);
            for (k, fz) in wz.iter().enumerate() {
                for (j, fy) in wy.iter().enumerate() {
                    let row = grid.index(x0, y0 + j, z0 + k);
                    let f = amp * fz * fy;
                    for (i, fx) in wx.iter().enumerate() {
                        grid.data_mut()[row + i] += f * fx;
                    }
                }
            }
        }

        if opts.ice_potential > 0.0 {
            let radius = p.vdw_radius;
            let edge = opts.exclusion_edge;
            let total = *excluded_volume
                .entry(atom.element.clone())
                .or_insert_with(|| radial_profile_volume(radius, edge));
            // Distribute the exact excluded volume over nearby voxels in
            // proportion to a supersampled profile.
            let reach = radius + 3.0 * edge;
            let lo = [0, 1, 2].map(|k| (((c[k] - reach - origin[k]) / vs).floor().max(0.0)) as usize);
            let hi = [0, 1, 2].map(|k| ((((c[k] + reach - origin[k]) / vs).floor()) as i64).clamp(0, dims[k] as i64 - 1) as usize);
            weights.clear();
            let mut sum_w = 0.0;
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let mut w = 0.0;
                        for sz in 0..sub {
                            for sy in 0..sub {
                                for sx in 0..sub {
                                    let q = [
                                        origin[0] + (x as f64 + (sx as f64 + 0.5) / sub as f64) * vs,
                                        origin[1] + (y as f64 + (sy as f64 + 0.5) / sub as f64) * vs,
                                        origin[2] + (z as f64 + (sz as f64 + 0.5) / sub as f64) * vs,
                                    ];
                                    let r = ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2) + (q[2] - c[2]).powi(2)).sqrt();
                                    w += 0.5 * erfc((r - radius) / edge);
                                }
                            }
                        }
                        if w > 0.0 {
                            weights.push((grid.index(x, y, z), w));
                            sum_w += w;
                        }
                    }
                }
            }
            if sum_w > 0.0 {
                let scale = atom.occupancy * total / (sum_w * voxel_volume);
                for &(i, w) in &weights {
                    excluded[i] += scale * w;
                }
            }
        }
    }
    for (v, f) in grid.data_mut().iter_mut().zip(&excluded) {
        *v -= opts.ice_potential * f.min(1.0);
    }
    Ok(grid)
}

/// Elastic potential plus a protein absorption map derived from the
/// thresholded footprint of the elastic part.
pub fn molecule_potential(atoms: &[AtomRecord], table: &ScatteringTable, opts: &PotentialOptions) -> Result<PotentialMap> {
    let v_el = electrostatic_potential(atoms, table, opts)?;
    let mask = footprint(&v_el, 0.5);
    let v_ab = absorption_potential(MoleculeKind::Protein, &mask);
    PotentialMap::new(v_el, v_ab)
}

/// Binary mask of voxels above `threshold` of the grid maximum.
pub fn footprint(g: &Grid3, threshold: f64) -> Grid3 {
    let max = g.max();
    if !(max > 0.0) {
        return g.map(|_| 0.0);
    }
    g.map(|v| if v / max > threshold { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(el: &str, p: [f64; 3]) -> AtomRecord {
        AtomRecord { element: el.into(), position: p, occupancy: 1.0 }
    }

    fn table() -> ScatteringTable {
        ScatteringTable::standard().unwrap()
    }

    #[test]
    fn zero_atoms_zero_grid() {
        let g = electrostatic_potential(&[], &table(), &PotentialOptions::default()).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn carbon_decays_radially() {
        // Direct evaluation of the Gaussian sum at sample radii.
        let t = table();
        let c = t.get("C").unwrap();
        let peak = atom_potential_at(&c.a, &c.b, 0.0);
        let mut prev = atom_potential_at(&c.a, &c.b, 0.5);
        for k in 1..40 {
            let r = 0.5 + 0.25 * k as f64;
            let v = atom_potential_at(&c.a, &c.b, r);
            assert!(v < prev);
            prev = v;
        }
        assert!(atom_potential_at(&c.a, &c.b, 10.0) <= 0.01 * peak);

        // The voxelized field on a fine grid follows the same profile.
        let opts = PotentialOptions { voxel_size: 0.25, ice_potential: 0.0, truncation: 6.0, ..Default::default() };
        let g = electrostatic_potential(&[atom("C", [0.0; 3])], &t, &opts).unwrap();
        let center = g.to_index([0.0; 3]).map(|v| v.round() as usize);
        let mut last = f64::INFINITY;
        for step in 2..22 {
            let v = g.get(center[0] + step, center[1], center[2]);
            assert!(v <= last);
            last = v;
        }
        assert!(g.max() > 0.0);
    }

    #[test]
    fn superposition() {
        let t = table();
        let opts = PotentialOptions::default();
        let a = atom("C", [1.0, 2.0, -0.5]);
        let b = atom("C", [6.5, -3.0, 4.0]);
        let geom = auto_grid(&[a.clone(), b.clone()], &opts).unwrap();
        let ga = electrostatic_potential_on(&[a.clone()], &t, &opts, geom.clone()).unwrap();
        let gb = electrostatic_potential_on(&[b.clone()], &t, &opts, geom.clone()).unwrap();
        let gab = electrostatic_potential_on(&[a, b], &t, &opts, geom).unwrap();
        for i in 0..gab.len() {
            assert!((gab.data()[i] - ga.data()[i] - gb.data()[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn voxel_average_integrates_gaussian_sum() {
        // Integral of the potential over space is 47.88 · Σ a_i (V·Å³).
        let t = table();
        let opts = PotentialOptions { ice_potential: 0.0, truncation: 10.0, ..Default::default() };
        let g = electrostatic_potential(&[atom("O", [0.3, -0.7, 1.1])], &t, &opts).unwrap();
        let integral = g.sum() * 125.0;
        let expect = POTENTIAL_PREFACTOR * t.get("O").unwrap().a.iter().sum::<f64>();
        assert!(((integral - expect) / expect).abs() < 1e-6, "{integral} vs {expect}");
    }

    #[test]
    fn solvent_exclusion_lowers_integral() {
        let t = table();
        let atoms = [atom("C", [0.0; 3]), atom("N", [1.4, 0.0, 0.0]), atom("S", [0.0, 2.0, 1.0])];
        let with = electrostatic_potential(&atoms, &t, &PotentialOptions::default()).unwrap();
        let without = electrostatic_potential(&atoms, &t, &PotentialOptions { ice_potential: 0.0, ..Default::default() }).unwrap();
        assert!(with.sum() < without.sum());
        // The removed amount equals ice × the excluded volumes.
        let removed = (without.sum() - with.sum()) * 125.0;
        let expect: f64 = atoms
            .iter()
            .map(|a| ICE_POTENTIAL * radial_profile_volume(t.get(&a.element).unwrap().vdw_radius, 1.0))
            .sum();
        assert!(((removed - expect) / expect).abs() < 1e-9);
    }

    #[test]
    fn packed_atoms_exclude_at_most_the_voxel() {
        // Heavy-atom packing of a folded protein: spheres overlap, but no
        // voxel can displace more than its own volume of ice.
        let t = table();
        let mut atoms = Vec::new();
        for z in 0..12 {
            for y in 0..12 {
                for x in 0..12 {
                    atoms.push(atom("C", [x as f64 * 2.6, y as f64 * 2.6, z as f64 * 2.6]));
                }
            }
        }
        let opts = PotentialOptions::default();
        let with = electrostatic_potential(&atoms, &t, &opts).unwrap();
        let without = electrostatic_potential(&atoms, &t, &PotentialOptions { ice_potential: 0.0, ..opts }).unwrap();
        let drop = with.data().iter().zip(without.data()).map(|(a, b)| b - a).fold(0.0, f64::max);
        assert!(drop <= ICE_POTENTIAL + 1e-9);
        let c = with.to_index([14.3; 3]).map(|v| v.round() as usize);
        assert!(with.get(c[0], c[1], c[2]) > 0.0);
    }

    #[test]
    fn unknown_element_errors() {
        let err = electrostatic_potential(&[atom("Xe", [0.0; 3])], &table(), &PotentialOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownElements(ref v) if v == &vec!["Xe".to_string()]));
    }

    #[test]
    fn absorption_constants() {
        let ones = Grid3::filled([3, 3, 3], 5.0, 1.0).unwrap();
        let ice = absorption_potential(MoleculeKind::Ice, &ones);
        assert!(ice.data().iter().all(|&v| (v - 0.208).abs() < 1e-15));
        let empty = Grid3::zeros([3, 3, 3], 5.0).unwrap();
        assert!(absorption_potential(MoleculeKind::Gold, &empty).data().iter().all(|&v| v == 0.0));
        assert!(MoleculeKind::Gold.absorption_constant() > MoleculeKind::Protein.absorption_constant());
    }
}

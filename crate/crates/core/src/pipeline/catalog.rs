use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bench::tables::{catalog_row, CatalogRow, CATALOG};
use crate::error::{Error, Result};
use crate::phantom::{ParticleClass, ParticleKind};
use crate::structchem::synthetic::PROTEIN_ATOM_DENSITY;
use crate::structchem::{
    molecule_potential, parse_structure, ParseOptions, PotentialOptions, ScatteringTable, SyntheticShape,
};

/// Mean heavy-atom mass with hydrogens folded in, Da.
const MASS_PER_ATOM: f64 = 14.0;

/// Below this sphericity a class gets a two-lobed stand-in.
const ELONGATED_BELOW: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogConfig {
    /// Class ids from the reference catalog.
    pub classes: Vec<String>,
    /// Directory with `<id>.pdb` or `<id>.xyz` files. Without it every
    /// class is a synthetic stand-in sized by its molecular weight.
    pub structure_dir: Option<PathBuf>,
    pub shape_seed: u64,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self { classes: CATALOG.iter().map(|r| r.pdb.to_string()).collect(), structure_dir: None, shape_seed: 0 }
    }
}

/// Pseudo-atomic stand-in with the row's mass: a sphere, or an unequal
/// dumbbell for elongated classes.
pub fn synthetic_shape(row: &CatalogRow, seed: u64) -> SyntheticShape {
    let volume = row.molecular_weight * 1000.0 / MASS_PER_ATOM / PROTEIN_ATOM_DENSITY;
    let r = (3.0 * volume / (4.0 * std::f64::consts::PI)).cbrt();
    if row.sphericity >= ELONGATED_BELOW {
        SyntheticShape::globular(r, seed)
    } else {
        // r1³ + r2³ = r³ with r2 = 0.7 r1.
        let r1 = r / (1.0f64 + 0.343).cbrt();
        SyntheticShape::dumbbell(r1, 0.7 * r1, seed)
    }
}

/// Potentials of the configured classes at `voxel_size` Å.
pub fn build_catalog(cfg: &CatalogConfig, voxel_size: f64) -> Result<Vec<ParticleClass>> {
    let table = ScatteringTable::standard()?;
    let opts = PotentialOptions { voxel_size, ..PotentialOptions::default() };
    let mut out = Vec::with_capacity(cfg.classes.len());
    for (i, id) in cfg.classes.iter().enumerate() {
        let row = catalog_row(id);
        let atoms = match &cfg.structure_dir {
            Some(dir) => {
                let path = ["pdb", "xyz"]
                    .iter()
                    .map(|ext| dir.join(format!("{id}.{ext}")))
                    .find(|p| p.is_file())
                    .ok_or_else(|| Error::Config(format!("no structure file for class {id} in {}", dir.display())))?;
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let parsed = parse_structure(&text, &ParseOptions::default())?;
                for w in &parsed.warnings {
                    log::warn!("{}: {w}", path.display());
                }
                parsed.atoms
            }
            None => {
                let row = row.ok_or_else(|| Error::Config(format!("class {id} is not in the catalog")))?;
                synthetic_shape(row, cfg.shape_seed + i as u64).atoms()
            }
        };
        let potential = molecule_potential(&atoms, &table, &opts)?;
        let molecular_weight = row.map_or(0.0, |r| r.molecular_weight);
        log::debug!("class {id}: {} atoms, box {:?}", atoms.len(), potential.dims());
        out.push(ParticleClass { id: id.clone(), kind: ParticleKind::Protein, potential, molecular_weight });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stand_in_mass_tracks_weight() {
        for row in [&CATALOG[0], &CATALOG[9]] {
            let atoms = synthetic_shape(row, 3).atoms();
            let mass = atoms.len() as f64 * MASS_PER_ATOM / 1000.0;
            // The dumbbell lobes overlap a little.
            assert!(mass > 0.8 * row.molecular_weight && mass < 1.05 * row.molecular_weight, "{} {mass}", row.pdb);
        }
    }

    #[test]
    fn unknown_class_or_missing_file() {
        let cfg = CatalogConfig { classes: vec!["zzzz".into()], ..Default::default() };
        assert!(matches!(build_catalog(&cfg, 5.0), Err(Error::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        let cfg = CatalogConfig { classes: vec!["1s3x".into()], structure_dir: Some(dir.path().into()), shape_seed: 0 };
        assert!(matches!(build_catalog(&cfg, 5.0), Err(Error::Config(_))));
    }
}

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::catalog::build_catalog;
use super::config::{MatchConfig, RunConfig, SpectralConfig, Variant};
use crate::bench::tables::catalog_row;
use crate::bench::{class_table, evaluate, localization_table, EvalConfig, Evaluation, GroundTruth, PredictionSet};
use crate::error::{Error, Result};
use crate::imaging::{simulate_tiltseries, Specimen, TiltSeries};
use crate::matcher::candidates::MIN_CANDIDATES;
use crate::matcher::fiducial::log_response;
use crate::matcher::{
    apply_threshold, build_template, extract_candidates, fit_threshold, log_fiducial_detect, lowpass, merge_max,
    ncc_search, orientation_grid, overlap_filter, Candidate, ScoreThreshold,
};
use crate::mrc;
use crate::phantom::{export_ground_truth, place_particles, GrandModel, ParticleClass, FIDUCIAL_CLASS};
use crate::recon::{weighted_backprojection, ReconConfig};
use crate::spectral::{default_rings, estimate_snr, ring_means, ring_scale_to, synthetic_reference, RadialProfile, SnrEstimate};
use crate::structchem::{molecule_potential, parse_structure, shape_descriptors, ParseOptions, PotentialOptions, ScatteringTable, ShapeDescriptors};
use crate::volume::Grid3;

/// File names written by [`simulate`].
pub mod files {
    pub const GRANDMODEL: &str = "grandmodel.mrc";
    pub const CLASS_MASK: &str = "class_mask.mrc";
    pub const OCCUPANCY_MASK: &str = "occupancy_mask.mrc";
    pub const CLASS_NAMES: &str = "class_names.txt";
    pub const GROUND_TRUTH: &str = "ground_truth.txt";
    /// Stem: `.mrc` stack plus `.json` metadata.
    pub const TILTSERIES: &str = "tiltseries";
    pub const TOMOGRAM: &str = "tomogram.mrc";
    pub const SNR: &str = "snr.json";
    pub const SUMMARY: &str = "summary.json";
    pub const CONFIG: &str = "config.toml";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub model_dims: [usize; 3],
    pub tomogram_dims: [usize; 3],
    /// Å.
    pub tomogram_voxel_size: f64,
    pub particles: BTreeMap<String, usize>,
    /// µm.
    pub defocus: f64,
    /// e⁻/Å².
    pub total_dose: f64,
    pub snr: SnrEstimate,
}

pub struct Simulation {
    pub model: GrandModel,
    pub series: TiltSeries,
    pub tomogram: Grid3,
    /// In the tomogram frame.
    pub truth: GroundTruth,
    pub summary: SimulationSummary,
}

/// Matches every projection's ring amplitudes to the configured
/// reference. No reference configured leaves the series untouched.
pub fn scale_series(series: &mut TiltSeries, cfg: &SpectralConfig, seed: u64) -> Result<()> {
    let Some(first) = series.projections.first() else {
        return Err(Error::EmptySeries);
    };
    let dims = first.dims();
    let n = cfg.n_rings.unwrap_or_else(|| default_rings(dims));
    let targets = match (&cfg.reference_profile, &cfg.synthetic_reference) {
        (Some(path), _) => RadialProfile::read(path)?.ring_targets(n),
        (None, Some(params)) => {
            let img = synthetic_reference([dims[0], dims[1]], params, &series.meta.optics, seed)?;
            ring_means(&img, n)?
        }
        (None, None) => return Ok(()),
    };
    for p in series.projections.iter_mut() {
        *p = ring_scale_to(p, &targets)?.0;
    }
    Ok(())
}

/// Phantom, tilt-series, reconstruction and SNR, all in memory.
pub fn run_simulation(cfg: &RunConfig, catalog: &[ParticleClass]) -> Result<Simulation> {
    cfg.validate()?;
    let t = Instant::now();
    let model = place_particles(catalog, &cfg.placement, cfg.seed)?;
    log::info!("placed {} particles in {:.1} s", model.instances.len(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let mut series = simulate_tiltseries(&Specimen::from_model(&model)?, &cfg.acquisition, cfg.seed)?;
    log::info!("imaged {} tilts in {:.1} s", series.len(), t.elapsed().as_secs_f64());
    scale_series(&mut series, &cfg.spectral, cfg.seed)?;
    let t = Instant::now();
    let tomogram = weighted_backprojection(&series, &cfg.recon)?;
    log::info!("reconstructed {:?} in {:.1} s", tomogram.dims(), t.elapsed().as_secs_f64());
    let truth = GroundTruth::from_model(&model, cfg.recon.bin_factor)?;
    let occupancy = truth.occupancy.as_ref().expect("built from a model");
    if occupancy.dims() != tomogram.dims() {
        return Err(Error::ShapeMismatch(format!(
            "tomogram {:?} vs binned masks {:?}; leave recon.output_dims unset for simulations",
            tomogram.dims(),
            occupancy.dims()
        )));
    }
    let snr = estimate_snr(&tomogram, occupancy)?;
    log::info!("estimated SNR {:.4}", snr.snr);
    let mut particles = BTreeMap::new();
    for i in &model.instances {
        *particles.entry(i.class_id.clone()).or_insert(0) += 1;
    }
    let summary = SimulationSummary {
        seed: cfg.seed,
        model_dims: model.dims(),
        tomogram_dims: tomogram.dims(),
        tomogram_voxel_size: tomogram.voxel_size(),
        particles,
        defocus: series.meta.optics.defocus,
        total_dose: series.meta.total_dose,
        snr,
    };
    Ok(Simulation { model, series, tomogram, truth, summary })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// End-to-end simulation into `out`: grandmodel, masks and ground truth in
/// the tomogram frame, tilt stack, tomogram, SNR report, resolved config.
/// The same config and seed give byte-identical files.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<SimulationSummary> {
    let catalog = build_catalog(&cfg.catalog, cfg.placement.voxel_size)?;
    let sim = run_simulation(cfg, &catalog)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let bin = cfg.recon.bin_factor;
    mrc::write_grid(out.join(files::GRANDMODEL), &sim.model.potential.v_el)?;
    let class_mask = if bin == 1 { sim.model.class_mask.clone() } else { sim.model.class_mask.bin_majority(bin)? };
    mrc::write_labels(out.join(files::CLASS_MASK), &class_mask)?;
    mrc::write_labels(out.join(files::OCCUPANCY_MASK), sim.truth.occupancy.as_ref().expect("built from a model"))?;
    let names: String = sim.model.class_names.iter().map(|c| format!("{c}\n")).collect();
    write_text(&out.join(files::CLASS_NAMES), &names)?;
    write_text(&out.join(files::GROUND_TRUTH), &export_ground_truth(&sim.model, bin))?;
    sim.series.write(out.join(files::TILTSERIES))?;
    mrc::write_grid(out.join(files::TOMOGRAM), &sim.tomogram)?;
    write_json(&out.join(files::SNR), &sim.summary.snr)?;
    write_json(&out.join(files::SUMMARY), &sim.summary)?;
    write_text(&out.join(files::CONFIG), &cfg.to_toml())?;
    Ok(sim.summary)
}

/// Reconstructs a stored tilt-series (`stem.mrc` + `stem.json`).
pub fn reconstruct(series_stem: &Path, cfg: &ReconConfig, out: &Path) -> Result<Grid3> {
    let series = TiltSeries::read(series_stem)?;
    let tomogram = weighted_backprojection(&series, cfg)?;
    mrc::write_grid(out, &tomogram)?;
    Ok(tomogram)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSearch {
    pub class_id: String,
    /// Candidates before thresholding.
    pub n_candidates: usize,
    /// `None` when too few candidates to fit; all were kept.
    pub threshold: Option<ScoreThreshold>,
    pub n_kept: usize,
    /// Particle radius used for peak suppression and overlap, voxels.
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutput {
    pub candidates: Vec<Candidate>,
    pub classes: Vec<ClassSearch>,
}

/// Order for the overlap filter: round classes first.
fn overlap_order(classes: &[String]) -> Vec<String> {
    let mut v: Vec<(usize, &String)> = classes.iter().enumerate().collect();
    let s = |c: &str| catalog_row(c).map_or(0.0, |r| r.sphericity);
    v.sort_by(|a, b| s(b.1).total_cmp(&s(a.1)).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(_, c)| c.clone()).collect()
}

/// The template-matching baseline over `catalog`, plus LoG bead detection
/// when enabled. `bead_radius` is in Å.
pub fn match_tomogram(tomogram: &Grid3, catalog: &[ParticleClass], cfg: &MatchConfig, bead_radius: f64) -> Result<MatchOutput> {
    let vs = tomogram.voxel_size();
    let params = crate::matcher::TemplateParams { voxel_size: vs, ..cfg.template.clone() };
    let search_in = if cfg.lowpass_tomogram { lowpass(tomogram, params.lowpass) } else { tomogram.clone() };
    let orientations = orientation_grid(cfg.angular_spacing);
    let n_orient = orientations.len();
    log::info!("searching {n_orient} orientations per handedness");
    let mut candidates = Vec::new();
    let mut classes = Vec::new();
    let mut radii = HashMap::new();
    for class in catalog {
        let t = Instant::now();
        let [normal, flipped] = build_template(&class.id, &class.potential, &params)?;
        if (0..3).any(|a| normal.template.dims()[a] > tomogram.dims()[a]) {
            log::warn!("template of {} ({:?}) exceeds the tomogram; class skipped", class.id, normal.template.dims());
            continue;
        }
        let a = ncc_search(&search_in, &normal.template, &normal.mask, &orientations)?;
        let b = ncc_search(&search_in, &flipped.template, &flipped.mask, &orientations)?;
        let merged = merge_max(&a, &b, n_orient as u32)?;
        let radius = (normal.mask_radius * 10.0 / vs - params.mask_margin).max(1.0);
        let found = extract_candidates(&class.id, &merged, cfg.candidates_per_class, radius, n_orient);
        let n_candidates = found.len();
        let (kept, threshold) = if n_candidates >= MIN_CANDIDATES {
            let mut t = fit_threshold(&found.iter().map(|c| c.score).collect::<Vec<_>>())?;
            t.cutoff = t.mu - cfg.sigmas * t.sigma;
            (apply_threshold(found, &t), Some(t))
        } else {
            log::warn!("{}: only {n_candidates} candidates; keeping all without a threshold", class.id);
            (found, None)
        };
        log::info!(
            "{}: {} of {n_candidates} candidates kept in {:.1} s",
            class.id,
            kept.len(),
            t.elapsed().as_secs_f64()
        );
        classes.push(ClassSearch { class_id: class.id.clone(), n_candidates, threshold, n_kept: kept.len(), radius });
        radii.insert(class.id.clone(), radius);
        candidates.extend(kept);
    }
    if cfg.variant == Variant::TmF {
        let ids: Vec<String> = catalog.iter().map(|c| c.id.clone()).collect();
        let before = candidates.len();
        candidates = overlap_filter(&candidates, &radii, &overlap_order(&ids));
        log::info!("overlap filter kept {} of {before}", candidates.len());
    }
    if cfg.fiducials {
        let sigma = cfg.fiducial_sigma.unwrap_or(bead_radius / vs / 3f64.sqrt());
        let response = log_response(&search_in, sigma);
        for p in log_fiducial_detect(&search_in, sigma, None) {
            candidates.push(Candidate {
                class_id: FIDUCIAL_CLASS.into(),
                position: p,
                orientation: 0,
                flipped: false,
                score: response.get(p[0], p[1], p[2]),
            });
        }
    }
    Ok(MatchOutput { candidates, classes })
}

pub fn candidates_to_predictions(candidates: &[Candidate], source: &str) -> PredictionSet {
    PredictionSet {
        source: source.to_string(),
        entries: candidates
            .iter()
            .map(|c| crate::bench::Prediction {
                class_id: c.class_id.clone(),
                position: c.position.map(|v| v as f64),
                score: Some(c.score),
            })
            .collect(),
    }
}

/// Reads a tomogram, runs [`match_tomogram`] and writes the predictions.
pub fn match_file(tomogram: &Path, cfg: &RunConfig, out: &Path) -> Result<MatchOutput> {
    let tomo = mrc::read_grid(tomogram)?;
    let catalog = build_catalog(&cfg.catalog, cfg.placement.voxel_size)?;
    let result = match_tomogram(&tomo, &catalog, &cfg.matching, cfg.placement.fiducial_radius)?;
    let source = match cfg.matching.variant {
        Variant::Tm => "TM",
        Variant::TmF => "TM-F",
    };
    write_text(out, &candidates_to_predictions(&result.candidates, source).to_text())?;
    Ok(result)
}

/// Scores a prediction file and writes `report.json`, `localization.txt`,
/// `classes.txt` and `confusion.txt` into `out`.
pub fn evaluate_files(
    predictions: &Path,
    truth: &Path,
    occupancy: Option<&Path>,
    cfg: &EvalConfig,
    out: &Path,
) -> Result<Evaluation> {
    let preds = PredictionSet::read(predictions)?;
    let gt = GroundTruth::read(truth, occupancy)?;
    let e = evaluate(&preds, &gt, cfg)?;
    std::fs::create_dir_all(out).map_err(|err| Error::io(out, err))?;
    write_json(&out.join("report.json"), &e)?;
    write_text(&out.join("localization.txt"), &localization_table(std::slice::from_ref(&e)))?;
    write_text(&out.join("classes.txt"), &class_table(&e))?;
    write_text(&out.join("confusion.txt"), &confusion_text(&e))?;
    Ok(e)
}

pub fn confusion_text(e: &Evaluation) -> String {
    let c = &e.confusion;
    let w = c.labels.iter().map(String::len).max().unwrap_or(0).max(10);
    let mut s = format!("{:<w$}", "");
    for l in &c.labels {
        s += &format!(" {l:>w$}");
    }
    s.push('\n');
    for (i, row) in c.counts.iter().enumerate() {
        let name = c.labels.get(i).map_or("background", String::as_str);
        s += &format!("{name:<w$}");
        for v in row {
            s += &format!(" {v:>w$}");
        }
        s.push('\n');
    }
    s
}

/// Shape descriptors of a structure file's potential, thresholded at
/// `threshold` of its maximum.
pub fn describe_structure(path: &Path, voxel_size: f64, threshold: f64) -> Result<ShapeDescriptors> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_structure(&text, &ParseOptions::default())?;
    let table = ScatteringTable::standard()?;
    let unknown = parsed.unknown_elements(&table);
    if !unknown.is_empty() {
        return Err(Error::UnknownElements(unknown));
    }
    let mw = parsed.molecular_weight_kda(&table);
    let opts = PotentialOptions { voxel_size, ice_potential: 0.0, ..PotentialOptions::default() };
    let map = molecule_potential(&parsed.atoms, &table, &opts)?;
    shape_descriptors(&map.v_el, threshold, mw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_classes_filtered_first() {
        let ids: Vec<String> = ["4cr2", "1bxn", "zzzz", "1s3x"].iter().map(|s| s.to_string()).collect();
        assert_eq!(overlap_order(&ids), vec!["1s3x", "1bxn", "4cr2", "zzzz"]);
    }
}

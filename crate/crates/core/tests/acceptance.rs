//! Acceptance runner: one `criterion N: PASS|FAIL|SOFT-FAIL` line per
//! criterion. Exits nonzero when any hard criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tomobench::bench::tables::{
    catalog_row, CATALOG, CLASS_COLUMNS, CLASS_F1, GROUP_F1, LOCALIZATION, TEST_PARTICLES,
};
use tomobench::bench::{
    check_published_row, group_f1, match_predictions, ClassScore, GroundTruth, Metrics, Prediction, PredictionSet,
    TruthParticle,
};
use tomobench::imaging::detector::counts_from_intensity;
use tomobench::imaging::{simulate_tiltseries, AcquisitionConfig, Specimen};
use tomobench::matcher::ncc::{ncc_direct, ncc_fourier};
use tomobench::matcher::orientations::orientation_grid;
use tomobench::matcher::template::build_template;
use tomobench::matcher::TemplateParams;
use tomobench::phantom::sample_so3;
use tomobench::pipeline::{
    build_catalog, candidates_to_predictions, match_tomogram, run_simulation, simulate, CatalogConfig, MatchConfig,
    RunConfig,
};
use tomobench::recon::{weighted_backprojection, ReconConfig};
use tomobench::spectral::ring_scale_to;
use tomobench::structchem::shape::{effective_radius, sphericity};
use tomobench::volume::euler::rotation_angle;
use tomobench::volume::{dft3, idft3, rotate_about_center, Grid3, LabelGrid3, PasteMode};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn shape_descriptors() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for r in &CATALOG {
        worst.0 = worst.0.max((sphericity(r.volume, r.area) - r.sphericity).abs());
        worst.1 = worst.1.max((effective_radius(r.volume, r.area) - r.effective_radius).abs());
    }
    check(
        worst.0 <= 0.005 && worst.1 <= 0.005,
        format!("12 classes, max |dΨ| {:.4}, max |dr_eff| {:.4} nm", worst.0, worst.1),
    )
}

fn metric_arithmetic() -> Outcome {
    let mut worst = 0.0f64;
    let mut flagged = Vec::new();
    for row in &LOCALIZATION {
        let (m, notes) = check_published_row(row, TEST_PARTICLES);
        let pairs = [(row.recall, m.recall), (row.precision, m.precision), (row.miss_rate, m.miss_rate), (row.f1, m.f1)];
        for (i, (printed, ours)) in pairs.into_iter().enumerate() {
            // The one printed value the counts contradict is expected to be flagged.
            if row.method == "YOPO" && i == 0 {
                continue;
            }
            worst = worst.max((printed - ours).abs());
        }
        if !notes.is_empty() {
            flagged.push(row.method);
        }
    }
    check(
        worst <= 0.001 && flagged == ["YOPO"],
        format!("8 rows, max deviation {worst:.4}, flagged {flagged:?}"),
    )
}

fn size_group_means() -> Outcome {
    let weight = |c: &str| catalog_row(c).map(|r| r.molecular_weight);
    let mut worst = 0.0f64;
    for ((method, f1s), (_, published)) in CLASS_F1.iter().zip(&GROUP_F1) {
        let scores: Vec<ClassScore> = CLASS_COLUMNS
            .iter()
            .zip(f1s)
            .map(|(c, &f1)| ClassScore {
                class_id: c.to_string(),
                n_truth: 1,
                rr: 1,
                tp: 1,
                metrics: Some(Metrics { recall: f1, precision: f1, miss_rate: 1.0 - f1, f1 }),
            })
            .collect();
        for (g, p) in group_f1(&scores, weight).iter().zip(published) {
            let Some(f1) = g.f1 else { return Err(format!("{method}: group {} is empty", g.name)) };
            worst = worst.max((f1 - p).abs());
        }
    }
    check(worst <= 0.005, format!("8 methods x 3 groups, max deviation {worst:.4}"))
}

/// Width at half maximum of `line` around `peak`, linear between samples.
fn fwhm(line: &[f64], peak: usize) -> f64 {
    let half = 0.5 * line[peak];
    let side = |step: i64| {
        let mut i = peak as i64;
        loop {
            let j = i + step;
            if j < 0 || j as usize >= line.len() {
                return (i - peak as i64).abs() as f64;
            }
            let (a, b) = (line[i as usize], line[j as usize]);
            if b < half {
                return (i - peak as i64).abs() as f64 + (a - half) / (a - b);
            }
            i = j;
        }
    };
    side(-1) + side(1)
}

fn point_spread() -> Outcome {
    let n = 64;
    let c = n / 2;
    let point = |v: f64| Grid3::from_fn([n; 3], 5.0, |x, y, z| if [x, y, z] == [c; 3] { v } else { 0.0 }).unwrap();
    // Gold-like, so absorption gives contrast without an objective transfer.
    let spec = Specimen::new(&point(25.0), &point(2.5), 0.0, 0.0).map_err(|e| e.to_string())?;
    let acq = AcquisitionConfig { fixed_dose: Some(110.0), ..AcquisitionConfig::ideal() };
    let ts = simulate_tiltseries(&spec, &acq, 1).map_err(|e| e.to_string())?;
    let tomo = weighted_backprojection(&ts, &ReconConfig { bin_factor: 1, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let m = tomo.argmax();
    let off = (0..3).map(|a| (m[a] as f64 - c as f64).abs()).fold(0.0, f64::max);
    let xs: Vec<f64> = (0..n).map(|x| tomo.get(x, m[1], m[2])).collect();
    let zs: Vec<f64> = (0..n).map(|z| tomo.get(m[0], m[1], z)).collect();
    let (fx, fz) = (fwhm(&xs, m[0]), fwhm(&zs, m[2]));
    check(
        off <= 1.0 && fz >= fx,
        format!("{} tilts, max at {m:?} (truth [{c}, {c}, {c}]), FWHM x {fx:.2} z {fz:.2} voxels", ts.len()),
    )
}

fn ncc_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let dims = [0; 3].map(|_| rng.gen_range(6..=12usize));
        let t = 2 * rng.gen_range(1..=2usize) + 1;
        let tomo = Grid3::from_fn(dims, 1.0, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
        let tpl = Grid3::from_fn([t; 3], 1.0, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
        let mask = Grid3::from_fn([t; 3], 1.0, |_, _, _| if rng.gen_bool(0.8) { 1.0 } else { rng.gen_range(0.0..1.0) })
            .unwrap();
        let a = ncc_fourier(&tomo, &tpl, &mask).map_err(|e| e.to_string())?;
        let b = ncc_direct(&tomo, &tpl, &mask).map_err(|e| e.to_string())?;
        for (x, y) in a.data().iter().zip(b.data()) {
            worst = worst.max((x - y).abs());
        }
    }
    check(worst <= 1e-6, format!("20 pairs, max |Fourier - direct| {worst:.2e}"))
}

fn planted_templates() -> Outcome {
    let vs = 10.0;
    let dims = [96; 3];
    let ids = ["1bxn", "4cr2"];
    let catalog = build_catalog(&CatalogConfig { classes: ids.map(String::from).to_vec(), ..Default::default() }, vs)
        .map_err(|e| e.to_string())?;
    let params = TemplateParams { voxel_size: vs, ..Default::default() };
    let spacing = 60.0;
    let grid = orientation_grid(spacing);
    let plants = [(0, [24, 24, 24], 3), (1, [72, 24, 48], 7), (0, [48, 72, 26], 11), (1, [22, 68, 70], 5), (0, [72, 72, 72], 17)];
    let mut tomo = Grid3::zeros(dims, vs).unwrap();
    let mut occ = LabelGrid3::zeros(dims, vs).unwrap();
    let mut particles = Vec::new();
    for (k, &(class, center, o)) in plants.iter().enumerate() {
        let [spec, _] = build_template(ids[class], &catalog[class].potential, &params).map_err(|e| e.to_string())?;
        let rotated = rotate_about_center(&spec.template, &grid[o % grid.len()]).map_err(|e| e.to_string())?;
        let half = (rotated.dims()[0] / 2) as i64;
        tomo.paste(&rotated, center.map(|v| v as i64 - half), PasteMode::Add).map_err(|e| e.to_string())?;
        let r = spec.mask_radius * 10.0 / vs - params.mask_margin;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let d2: f64 = [x, y, z].iter().zip(&center).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
                    if d2 <= r * r {
                        occ.set(x, y, z, k as u32 + 1);
                    }
                }
            }
        }
        particles.push(TruthParticle {
            instance_id: k as u32 + 1,
            class_id: ids[class].into(),
            position: center.map(|v| v as f64),
        });
    }
    let cfg = MatchConfig { angular_spacing: spacing, lowpass_tomogram: false, fiducials: false, ..Default::default() };
    let out = match_tomogram(&tomo, &catalog, &cfg, 0.0).map_err(|e| e.to_string())?;
    let gt = GroundTruth { particles, occupancy: Some(occ) };
    let report = match_predictions(&candidates_to_predictions(&out.candidates, "tm"), &gt, &[]).map_err(|e| e.to_string())?;
    let right_class = report
        .assignments
        .iter()
        .filter(|a| a.true_class.as_deref() == Some(a.predicted_class.as_str()))
        .count();
    let searched: Vec<String> = out.classes.iter().map(|c| format!("{} {}/{}", c.class_id, c.n_kept, c.n_candidates)).collect();
    check(
        report.tp == 5 && report.fp == 0 && report.ad == 0.0 && right_class == 5,
        format!(
            "{} orientations x 2 hands; kept/candidates {searched:?}; TP {} FP {} MH {} AD {} same-class hits {right_class}",
            grid.len(),
            report.tp,
            report.fp,
            report.mh,
            report.ad
        ),
    )
}

/// Counts the occupancy rule yields, derived by scanning every voxel.
fn brute_force(preds: &[[f64; 3]], occ: &LabelGrid3, n_truth: usize) -> [usize; 5] {
    let [nx, ny, nz] = occ.dims();
    let mut hits = vec![0usize; n_truth + 1];
    let mut fp = 0;
    for p in preds {
        let mut label = 0;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if [x, y, z].iter().zip(p).all(|(&i, &q)| (q - i as f64).abs() < 0.5) {
                        label = occ.get(x, y, z);
                    }
                }
            }
        }
        if label == 0 {
            fp += 1;
        } else {
            hits[label as usize] += 1;
        }
    }
    let tp = hits.iter().filter(|&&h| h > 0).count();
    let mh = hits.iter().filter(|&&h| h > 1).count();
    [preds.len(), tp, fp, n_truth - tp, mh]
}

fn matching_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..100 {
        let dims = [0; 3].map(|_| rng.gen_range(4..=10usize));
        let n_truth = rng.gen_range(1..=10usize);
        let mut occ = LabelGrid3::zeros(dims, 1.0).unwrap();
        let mut particles = Vec::new();
        for id in 1..=n_truth as u32 {
            let c = dims.map(|d| rng.gen_range(0..d));
            let r = rng.gen_range(0.0..2.0f64);
            for z in 0..dims[2] {
                for y in 0..dims[1] {
                    for x in 0..dims[0] {
                        let d2: f64 = [x, y, z].iter().zip(&c).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
                        if d2 <= r * r {
                            occ.set(x, y, z, id);
                        }
                    }
                }
            }
            particles.push(TruthParticle { instance_id: id, class_id: "a".into(), position: c.map(|v| v as f64) });
        }
        let n_pred = rng.gen_range(0..=20usize);
        let positions: Vec<[f64; 3]> = (0..n_pred)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    let t = &particles[rng.gen_range(0..n_truth)].position;
                    t.map(|v| v + rng.gen_range(-1.5..1.5))
                } else {
                    dims.map(|d| rng.gen_range(-1.0..d as f64 + 0.5))
                }
            })
            .collect();
        let preds = PredictionSet {
            source: "toy".into(),
            entries: positions.iter().map(|&position| Prediction { class_id: "a".into(), position, score: None }).collect(),
        };
        let expected = brute_force(&positions, &occ, n_truth);
        let gt = GroundTruth { particles, occupancy: Some(occ) };
        let r = match_predictions(&preds, &gt, &[]).map_err(|e| e.to_string())?;
        let got = [r.rr, r.tp, r.fp, r.fn_, r.mh];
        if got != expected {
            return Err(format!("case {case}: RR TP FP FN MH {got:?}, brute force {expected:?}"));
        }
    }
    Ok("100 toy instances, RR TP FP FN MH identical".into())
}

fn statistical_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut notes = Vec::new();
    let mut ok = true;

    let flat = Grid3::filled([128, 128, 1], 5.0, 1.0).unwrap();
    let mut ratios = Vec::new();
    for dose in [2.0, 45.0] {
        let c = counts_from_intensity(&flat, dose, None, Some(&mut rng)).map_err(|e| e.to_string())?.counts;
        ratios.push(c.variance() / c.mean());
    }
    ok &= ratios.iter().all(|r| (0.95..=1.05).contains(r));
    notes.push(format!("Poisson var/mean {:.3} {:.3}", ratios[0], ratios[1]));

    let img = Grid3::from_fn([48, 48, 1], 5.0, |_, _, _| rng.gen_range(0.0..1.0)).unwrap();
    let target: Vec<f64> = (0..24).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let (once, _) = ring_scale_to(&img, &target).map_err(|e| e.to_string())?;
    let (twice, _) = ring_scale_to(&once, &target).map_err(|e| e.to_string())?;
    let idem = once.data().iter().zip(twice.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ok &= idem <= 1e-7;
    notes.push(format!("ring scaling twice vs once {idem:.1e}"));

    let g = Grid3::from_fn([17, 12, 9], 1.0, |_, _, _| rng.gen_range(-1.0..1.0)).unwrap();
    let back = idft3(&dft3(&g));
    let round = g.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ok &= round <= 1e-10;
    notes.push(format!("DFT round trip {round:.1e}"));

    let n = 20_000;
    let mean = (0..n).map(|_| rotation_angle(&sample_so3(&mut rng).to_matrix())).sum::<f64>() / n as f64;
    ok &= (mean - 126.5).abs() <= 1.0;
    notes.push(format!("SO(3) mean angle {mean:.2} deg"));
    check(ok, notes.join(", "))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let mut cfg = RunConfig { seed: 17, ..Default::default() };
    cfg.catalog.classes = vec!["1s3x".into(), "3qm1".into()];
    cfg.placement.dims = [64; 3];
    cfg.placement.proteins = [3, 3];
    cfg.placement.fiducials = [1, 1];
    cfg.placement.vesicles = [0, 0];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    simulate(&cfg, &a).map_err(|e| e.to_string())?;
    simulate(&cfg, &b).map_err(|e| e.to_string())?;
    let (fa, fb) = (read_dir_bytes(&a), read_dir_bytes(&b));
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    check(
        fa.len() == fb.len() && fa.len() >= 10 && differing.is_empty(),
        format!("{} files compared, differing {differing:?}", fa.len()),
    )
}

fn desk_snr() -> Outcome {
    let cfg = RunConfig { seed: 1, ..Default::default() };
    let catalog = build_catalog(&cfg.catalog, cfg.placement.voxel_size).map_err(|e| e.to_string())?;
    let sim = run_simulation(&cfg, &catalog).map_err(|e| e.to_string())?;
    let s = &sim.summary;
    let snr = s.snr.snr;
    check(
        (0.05..=1.0).contains(&snr),
        format!(
            "tomogram {:?} at {} Å, {} particles, defocus {:.2} µm, dose {:.1} e/Å², SNR {snr:.3} (band 0.05 to 1.0)",
            s.tomogram_dims,
            s.tomogram_voxel_size,
            s.particles.values().sum::<usize>(),
            s.defocus,
            s.total_dose
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome, Option<f64>, bool); 10] = [
        (1, shape_descriptors, Some(1.0), true),
        (2, metric_arithmetic, Some(1.0), true),
        (3, size_group_means, Some(1.0), true),
        (4, point_spread, Some(120.0), true),
        (5, ncc_equivalence, Some(60.0), true),
        (6, planted_templates, Some(300.0), true),
        (7, matching_oracle, Some(10.0), true),
        (8, statistical_suites, Some(60.0), true),
        (9, determinism, None, true),
        (10, desk_snr, None, false),
    ];
    let filter: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut times = HashMap::new();
    let mut hard_failures = 0;
    for (n, run, budget, hard) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let result = run();
        let secs = t.elapsed().as_secs_f64();
        times.insert(n, secs);
        let over = budget.is_some_and(|b| secs > b);
        let timing = match budget {
            Some(b) => format!("{secs:.1} s, budget {b} s"),
            None if n == 9 => match times.get(&4) {
                Some(t4) => format!("{secs:.1} s, {:.1}x criterion 4", secs / t4),
                None => format!("{secs:.1} s"),
            },
            None => format!("{secs:.1} s"),
        };
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the time budget")),
            (Err(d), _) => (if hard { "FAIL" } else { "SOFT-FAIL" }, d.clone()),
        };
        if status == "FAIL" {
            hard_failures += 1;
        }
        println!("criterion {n}: {status} ({timing}) {detail}");
    }
    if hard_failures > 0 {
        println!("{hard_failures} criterion(s) failed");
        std::process::exit(1);
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tomobench::bench::tables::{CATALOG, LOCALIZATION, TEST_PARTICLES};
use tomobench::bench::check_published_row;
use tomobench::pipeline::{self, RunConfig, Variant};
use tomobench::recon::Weighting;
use tomobench::structchem::shape::{effective_radius, sphericity};
use tomobench::Error;

/// Simulated cryo-ET tomograms and particle-picking benchmarks.
#[derive(Parser)]
#[command(name = "tomobench", version)]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random substream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 is the reference behaviour.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Directory with the scattering and detector tables.
    #[arg(long, global = true, env = "TOMOBENCH_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phantom, tilt-series, tomogram, masks, ground truth and SNR report.
    Simulate(SimulateArgs),
    /// Weighted back-projection of a stored tilt-series.
    Reconstruct(ReconstructArgs),
    /// Template matching (and bead detection) on a tomogram.
    Match(MatchArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Shape descriptors of a structure file or of the reference catalog.
    Describe(DescribeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Model size in voxels.
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"])]
    dims: Option<Vec<usize>>,
    /// Exact number of proteins.
    #[arg(long)]
    proteins: Option<usize>,
    #[arg(long)]
    n_tilts: Option<usize>,
    /// Reference profile for ring scaling of the projections.
    #[arg(long)]
    reference_profile: Option<PathBuf>,
    /// Comma-separated class ids.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Directory with `<class>.pdb` files.
    #[arg(long)]
    structure_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Ramp,
    Exact,
    None,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Tilt-series stem (`STEM.mrc` and `STEM.json`).
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bin: Option<usize>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Tm,
    TmF,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    tomogram: PathBuf,
    /// Prediction file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Degrees.
    #[arg(long)]
    angular_spacing: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long)]
    structure_dir: Option<PathBuf>,
    #[arg(long)]
    no_fiducials: bool,
    /// Only run bead detection.
    #[arg(long)]
    fiducials_only: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, required_unless_present = "published")]
    predictions: Option<PathBuf>,
    /// Ground-truth particle list.
    #[arg(long, required_unless_present = "published")]
    truth: Option<PathBuf>,
    /// Occupancy mask MRC in the tomogram frame.
    #[arg(long)]
    occupancy: Option<PathBuf>,
    /// Report directory.
    #[arg(long, required_unless_present = "published")]
    out: Option<PathBuf>,
    /// Drop a class from predictions and ground truth; repeatable.
    #[arg(long = "exclude-class")]
    exclude_class: Vec<String>,
    /// Match within this many voxels when there is no occupancy mask.
    #[arg(long)]
    fallback_radius: Option<f64>,
    /// Re-derive the published localization table instead.
    #[arg(long)]
    published: bool,
}

#[derive(Args)]
struct DescribeArgs {
    /// PDB or XYZ file.
    #[arg(required_unless_present = "catalog")]
    structure: Option<PathBuf>,
    /// Å.
    #[arg(long, default_value_t = 5.0)]
    voxel_size: f64,
    /// Fraction of the potential maximum bounding the particle.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Recompute the catalog's sphericity and effective radius.
    #[arg(long)]
    catalog: bool,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(dir) = &cli.data_dir {
        std::env::set_var("TOMOBENCH_DATA_DIR", dir);
    }
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global().context("thread pool")?;
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Simulate(a) => {
            if let Some(d) = &a.dims {
                cfg.placement.dims = [d[0], d[1], d[2]];
            }
            if let Some(n) = a.proteins {
                cfg.placement.proteins = [n, n];
            }
            if let Some(n) = a.n_tilts {
                cfg.acquisition.n_tilts = n;
            }
            if let Some(p) = &a.reference_profile {
                cfg.spectral.reference_profile = Some(p.clone());
            }
            if let Some(c) = &a.classes {
                cfg.catalog.classes = c.clone();
            }
            if let Some(d) = &a.structure_dir {
                cfg.catalog.structure_dir = Some(d.clone());
            }
            log::info!("seed {}; resolved config:\n{}", cfg.seed, cfg.to_toml());
            let s = pipeline::simulate(&cfg, &a.out)?;
            let total: usize = s.particles.values().sum();
            println!(
                "{total} particles, tomogram {:?} at {} Å, SNR {:.4}, written to {}",
                s.tomogram_dims,
                s.tomogram_voxel_size,
                s.snr.snr,
                a.out.display()
            );
        }
        Command::Reconstruct(a) => {
            if let Some(b) = a.bin {
                cfg.recon.bin_factor = b;
            }
            if let Some(w) = a.weighting {
                cfg.recon.weighting = match w {
                    WeightingArg::Ramp => Weighting::Ramp,
                    WeightingArg::Exact => Weighting::Exact,
                    WeightingArg::None => Weighting::None,
                };
            }
            log::info!("resolved recon config: {:?}", cfg.recon);
            let t = pipeline::reconstruct(&a.series, &cfg.recon, &a.out)?;
            println!("tomogram {:?} at {} Å written to {}", t.dims(), t.voxel_size(), a.out.display());
        }
        Command::Match(a) => {
            if let Some(v) = a.variant {
                cfg.matching.variant = match v {
                    VariantArg::Tm => Variant::Tm,
                    VariantArg::TmF => Variant::TmF,
                };
            }
            if let Some(s) = a.angular_spacing {
                cfg.matching.angular_spacing = s;
            }
            if let Some(c) = &a.classes {
                cfg.catalog.classes = c.clone();
            }
            if let Some(d) = &a.structure_dir {
                cfg.catalog.structure_dir = Some(d.clone());
            }
            if a.no_fiducials {
                cfg.matching.fiducials = false;
            }
            if a.fiducials_only {
                cfg.catalog.classes.clear();
                cfg.matching.fiducials = true;
            }
            cfg.validate()?;
            log::info!("seed {}; resolved config:\n{}", cfg.seed, cfg.to_toml());
            let out = pipeline::match_file(&a.tomogram, &cfg, &a.out)?;
            for c in &out.classes {
                println!("{:<10} {:>6} candidates {:>6} kept", c.class_id, c.n_candidates, c.n_kept);
            }
            println!("{} predictions written to {}", out.candidates.len(), a.out.display());
        }
        Command::Evaluate(a) => {
            if a.published {
                for row in &LOCALIZATION {
                    let (m, notes) = check_published_row(row, TEST_PARTICLES);
                    println!(
                        "{:<11} recall {:.3} precision {:.3} miss rate {:.3} F1 {:.3}",
                        row.method, m.recall, m.precision, m.miss_rate, m.f1
                    );
                    for n in notes {
                        println!("  inconsistent: {n}");
                    }
                }
                return Ok(());
            }
            if !a.exclude_class.is_empty() {
                cfg.evaluation.exclude = a.exclude_class.clone();
            }
            if let Some(r) = a.fallback_radius {
                cfg.evaluation.fallback_radius = Some(r);
            }
            let (p, t, o) = (a.predictions.as_ref().unwrap(), a.truth.as_ref().unwrap(), a.out.as_ref().unwrap());
            let e = pipeline::evaluate_files(p, t, a.occupancy.as_deref(), &cfg.evaluation, o)?;
            print!("{}", tomobench::bench::localization_table(std::slice::from_ref(&e)));
        }
        Command::Describe(a) => {
            if a.catalog {
                println!("{:<6} {:>10} {:>8}", "class", "sphericity", "r_eff");
                for r in &CATALOG {
                    println!("{:<6} {:>10.3} {:>8.3}", r.pdb, sphericity(r.volume, r.area), effective_radius(r.volume, r.area));
                }
                return Ok(());
            }
            let path = a.structure.as_ref().unwrap();
            let d = pipeline::describe_structure(path, a.voxel_size, a.threshold)?;
            println!(
                "MW {:.2} kDa, V {:.1} nm³, A {:.1} nm², sphericity {:.3}, r_eff {:.3} nm",
                d.molecular_weight, d.volume, d.area, d.sphericity, d.effective_radius
            );
        }
    }
    Ok(())
}

/// 2 usage and configuration, 3 malformed input, 4 file access,
/// 5 failures during processing.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::Parse { .. } | Error::Mrc(_) | Error::Json(_) | Error::UnknownElements(_)) => 3,
        Some(Error::Io { .. } | Error::IoBare(_)) => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

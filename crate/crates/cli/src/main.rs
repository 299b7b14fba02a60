//! `meshreg` command-line tool.
//!
//! Exit codes: 0 success, 1 bad arguments or configuration, 2 file errors,
//! 3 registration failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use meshreg::export;
use meshreg::io::{self, RunManifest, DEFAULT_THRESHOLD};
use meshreg::optimizer::{register_detailed, Placement, RegistrationConfig};
use meshreg::synth::{synth_pair, ShapeFamily, SynthConfig};
use meshreg::{compute_distance_transform, mutual_distance_stats, Error};

#[derive(Parser)]
#[command(name = "meshreg", version, about = "Nonrigid 2-D shape registration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register a source contour image onto a target contour image.
    Register(RegisterArgs),
    /// Generate a seeded synthetic shape pair with its ground-truth field.
    Synth(SynthArgs),
    /// Distance transform of a contour image as CSV and PNG.
    Dt(DtArgs),
    /// Mutual contour distance between two contour images, printed as JSON.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RegisterArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// TOML or JSON registration config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    placement: Option<PlacementArg>,
    #[arg(long)]
    basis_order: Option<usize>,
    /// 8-bit intensity at or above which an input pixel is contour.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Regular,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Ellipse,
    Star,
    Polyline,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Peak bump displacement in pixels.
    #[arg(long, default_value_t = 10.0)]
    peak: f64,
    #[arg(long, default_value_t = 150)]
    size: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift_x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shift_y: f64,
    /// Fraction of the contour removed from both shapes.
    #[arg(long, default_value_t = 0.0)]
    occlusion: f64,
}

#[derive(Args)]
struct DtArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
}

enum Failure {
    Usage(String),
    Io(String),
    Registration(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::Parse { .. } => Failure::Usage(e.to_string()),
            e if e.is_io() => Failure::Io(e.to_string()),
            Error::Json(_) => Failure::Io(e.to_string()),
            e => Failure::Registration(e.to_string()),
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn run_register(args: RegisterArgs) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("register", &args.out);
    manifest.inputs = vec![args.source.clone(), args.target.clone()];
    manifest.config = args.config.clone();
    manifest.check_inputs()?;

    let mut config = match &args.config {
        Some(p) => io::load_config(p)?,
        None => RegistrationConfig::default(),
    };
    if let Some(l) = args.levels {
        config.pyramid_levels = l;
    }
    if let Some(l) = args.lambda {
        config.lambda = l;
    }
    if let Some(p) = args.placement {
        config.placement = match p {
            PlacementArg::Regular => Placement::Regular,
            PlacementArg::Adaptive => Placement::Adaptive,
        };
    }
    if let Some(m) = args.basis_order {
        config.basis_order = m;
    }
    config.validate()?;

    let source = io::load_edges(&args.source, args.threshold)?;
    let target = io::load_edges(&args.target, args.threshold)?;
    let result = register_detailed(source.values(), target.values(), &config)?;

    create_dir(&args.out)?;
    let out = |name: &str| args.out.join(name);
    io::write_json(&out("model.json"), &result.model.to_document())?;
    io::write_atomic(&out("field.csv"), export::field_csv(&result.field).as_bytes())?;
    io::write_json(&out("report.json"), &result.report)?;
    io::write_atomic(
        &out("overlay.svg"),
        export::overlay_svg(&source, &target, &result.warped).as_bytes(),
    )?;
    io::write_atomic(&out("grid.svg"), export::grid_svg(&result.field, 6).as_bytes())?;
    io::write_atomic(
        &out("patches.svg"),
        export::patches_svg(&source, result.model.patches()).as_bytes(),
    )?;
    io::write_json(&out("config.json"), &config)?;
    io::write_json(&out("manifest.json"), &manifest)?;
    let m = &result.report.metrics;
    eprintln!(
        "registered in {:.2?}: mean {:.4} px, max {:.4} px, variance {:.4}",
        result.report.wall_time, m.mean, m.max, m.variance
    );
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), Failure> {
    let family = match args.family {
        FamilyArg::Ellipse => ShapeFamily::Ellipse,
        FamilyArg::Star => ShapeFamily::Star,
        FamilyArg::Polyline => ShapeFamily::Polyline,
    };
    let config = SynthConfig {
        family,
        size: args.size,
        peak: args.peak,
        translation: [args.shift_x, args.shift_y],
        occlusion: args.occlusion,
    };
    let pair = synth_pair(&config, args.seed)?;
    create_dir(&args.out)?;
    let out = |name: &str| args.out.join(name);
    io::save_edges(&out("source.png"), &pair.source)?;
    io::save_edges(&out("target.png"), &pair.target)?;
    let g = pair.field.dense(config.size, config.size);
    io::write_atomic(&out("field.csv"), export::vector_csv(&g, "x,y,gx,gy").as_bytes())?;
    io::write_json(&out("bumps.json"), &pair.field)?;
    io::write_json(&out("synth.json"), &config)?;
    let mut manifest = RunManifest::new("synth", &args.out);
    manifest.seed = Some(args.seed);
    io::write_json(&out("manifest.json"), &manifest)?;
    Ok(())
}

fn run_dt(args: DtArgs) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("dt", &args.out);
    manifest.inputs = vec![args.source.clone()];
    manifest.check_inputs()?;
    let edges = io::load_edges(&args.source, args.threshold)?;
    let dt = compute_distance_transform(&edges)?;
    create_dir(&args.out)?;
    io::write_atomic(&args.out.join("dt.csv"), export::distance_csv(&dt).as_bytes())?;
    io::save_distance_png(&args.out.join("dt.png"), &dt)?;
    io::write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), Failure> {
    let a = io::load_edges(&args.source, args.threshold)?;
    let b = io::load_edges(&args.target, args.threshold)?;
    let stats = mutual_distance_stats(&a, &b)?;
    println!("{}", serde_json::to_string(&stats).map_err(|e| Failure::Io(e.to_string()))?);
    Ok(())
}

#[cfg(feature = "parallel")]
fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MESHREG_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("MESHREG_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> Result<(), Failure> {
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Register(a) => run_register(a),
        Command::Synth(a) => run_synth(a),
        Command::Dt(a) => run_dt(a),
        Command::Eval(a) => run_eval(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Registration(m)) => {
            eprintln!("registration failed: {m}");
            ExitCode::from(3)
        }
    }
}

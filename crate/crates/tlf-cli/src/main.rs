//! `tlf` — command-line front end for the feature-stack and
//! dataset-split toolkit.
//!
//! Subcommands: `ingest` (validate a manifest), `stack` (build 5-plane
//! feature containers), `split` (variance-minimizing camera partition),
//! `stats` (per-camera CSV table), `fitness` (detector score combiner),
//! `weights-demo` (gradient-check suite for the channel-weighting
//! layers), `export` (debug PNGs from a stack file).
//!
//! Exit codes: 0 success, 1 the run finished but some items failed,
//! 2 configuration or constraint error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tlf::fitness::{fitness, FitnessInput};
use tlf::manifest::{load_manifest, Modality, ModalityPolicy};
use tlf::pipeline::{run_split, run_stack, run_stats, PipelineConfig};
use tlf::stack::{export_debug_pngs, read_tlf5_file};
use tlf::weighting::gradcheck::{DEFAULT_STEP, DEFAULT_TOLERANCE};
use tlf::weighting::{check_fixed_gradients, check_se_gradients, GradCheckReport};

#[derive(Parser)]
#[command(
    name = "tlf",
    version,
    about = "Temporal feature stacks and stratified camera splits for time-lapse imagery"
)]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a frame manifest; report per-camera counts.
    Ingest(IngestArgs),
    /// Build one 5-plane feature container per eligible frame.
    Stack(ConfigArgs),
    /// Compute and write the variance-minimizing train/val/test split.
    Split(ConfigArgs),
    /// Write the per-camera statistics table as CSV.
    Stats(StatsArgs),
    /// Combine two detection mAP metrics into one fitness score.
    Fitness(FitnessArgs),
    /// Run the finite-difference gradient checks for both weighting
    /// schemes and print per-block reports.
    WeightsDemo(WeightsDemoArgs),
    /// Export per-plane debug PNGs from a stack file.
    Export(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityFlag {
    /// Classify by pixel chroma spread (infrared frames are grey).
    Chroma,
    /// Classify by hour of day (night is 18:00–06:00).
    Clock,
}

/// Flags shared by every config-driven subcommand. Values given here
/// override the config file field by field.
#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame manifest to read.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Prior-window length for the temporal background.
    #[arg(long)]
    window: Option<usize>,
    /// How frames without an explicit modality are classified.
    #[arg(long, value_enum)]
    modality: Option<ModalityFlag>,
    /// Chroma threshold used with --modality chroma.
    #[arg(long)]
    tau: Option<f64>,
    /// Pixel-grid stride for the colour-matrix fit.
    #[arg(long)]
    stride: Option<usize>,
    /// Ridge term for the colour-fit normal equations.
    #[arg(long)]
    ridge: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write per-plane debug PNGs next to each stack.
    #[arg(long)]
    export_debug: bool,
    /// Directory of per-image label files.
    #[arg(long)]
    label_dir: Option<PathBuf>,
    /// File listing labelled images that may have zero objects.
    #[arg(long)]
    labelled_index: Option<PathBuf>,
    /// Comma-separated class names, index = class id.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Camera counts for train,val,test (e.g. 6,2,2).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Pin a camera to a subset, e.g. --force CAM3=0 (0 train, 1 val,
    /// 2 test). Repeatable.
    #[arg(long = "force")]
    forced: Vec<String>,
    /// Cap on the labelled-image share of val and test.
    #[arg(long)]
    max_eval_fraction: Option<f64>,
    /// Comma-separated weights for the class,size,ratio variance terms.
    #[arg(long, value_delimiter = ',')]
    term_weights: Option<Vec<f64>>,
}

impl ConfigArgs {
    fn into_config(self) -> anyhow::Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.manifest {
            config.manifest = v;
        }
        if let Some(v) = self.out_dir {
            config.out_dir = v;
        }
        if let Some(v) = self.window {
            config.window = v;
        }
        match (self.modality, self.tau) {
            (Some(ModalityFlag::Clock), _) => config.modality = ModalityPolicy::Clock,
            (Some(ModalityFlag::Chroma), tau) => {
                config.modality = ModalityPolicy::Chroma {
                    tau: tau.unwrap_or(8.0),
                }
            }
            (None, Some(tau)) => config.modality = ModalityPolicy::Chroma { tau },
            (None, None) => {}
        }
        if let Some(v) = self.stride {
            config.sample_stride = v;
        }
        if let Some(v) = self.ridge {
            config.ridge = v;
        }
        if let Some(v) = self.jobs {
            config.jobs = v;
        }
        if self.export_debug {
            config.export_debug = true;
        }
        if let Some(v) = self.label_dir {
            config.label_dir = Some(v);
        }
        if let Some(v) = self.labelled_index {
            config.labelled_index = Some(v);
        }
        if let Some(v) = self.classes {
            config.classes = v;
        }
        if let Some(v) = self.sizes {
            if v.len() != 3 {
                bail!("--sizes needs exactly three values, got {}", v.len());
            }
            config.sizes = Some((v[0], v[1], v[2]));
        }
        if !self.forced.is_empty() {
            let mut forced = BTreeMap::new();
            for entry in &self.forced {
                let (camera, subset) = entry
                    .split_once('=')
                    .with_context(|| format!("--force {entry:?}: expected CAMERA=SUBSET"))?;
                let subset: usize = subset
                    .parse()
                    .with_context(|| format!("--force {entry:?}: subset must be 0, 1, or 2"))?;
                forced.insert(camera.to_string(), subset);
            }
            config.forced = forced;
        }
        if let Some(v) = self.max_eval_fraction {
            config.max_eval_fraction = v;
        }
        if let Some(v) = self.term_weights {
            if v.len() != 3 {
                bail!("--term-weights needs exactly three values, got {}", v.len());
            }
            config.term_weights = [v[0], v[1], v[2]];
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Frame manifest to validate.
    #[arg(long)]
    manifest: PathBuf,
    /// How frames without an explicit modality are classified.
    #[arg(long, value_enum, default_value = "chroma")]
    modality: ModalityFlag,
    /// Chroma threshold used with --modality chroma.
    #[arg(long, default_value_t = 8.0)]
    tau: f64,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitnessArgs {
    /// Mean average precision at IoU 0.5, in [0,1].
    #[arg(long)]
    map50: f64,
    /// Mean average precision over IoU 0.05..0.95, in [0,1].
    #[arg(long)]
    map5095: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeFlag {
    Fixed,
    Se,
    Both,
}

#[derive(Args)]
struct WeightsDemoArgs {
    /// Number of random instances per scheme (seeds 0..N).
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Input height of each random instance.
    #[arg(long, default_value_t = 8)]
    height: usize,
    /// Input width of each random instance.
    #[arg(long, default_value_t = 8)]
    width: usize,
    /// Which weighting scheme to check.
    #[arg(long, value_enum, default_value = "both")]
    scheme: SchemeFlag,
    /// Finite-difference step size.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Maximum allowed relative error.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Args)]
struct ExportArgs {
    /// Stack container file to read.
    #[arg(long)]
    stack: PathBuf,
    /// Directory that receives the PNGs.
    #[arg(long)]
    out_dir: PathBuf,
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct CameraSummary {
    camera: String,
    frames: usize,
    day: usize,
    night: usize,
}

#[derive(Serialize)]
struct IngestSummary {
    cameras: Vec<CameraSummary>,
    total_frames: usize,
}

fn cmd_ingest(args: IngestArgs, json: bool) -> anyhow::Result<u8> {
    let policy = match args.modality {
        ModalityFlag::Chroma => ModalityPolicy::Chroma { tau: args.tau },
        ModalityFlag::Clock => ModalityPolicy::Clock,
    };
    let manifest = load_manifest(&args.manifest, &policy)?;
    let cameras: Vec<CameraSummary> = manifest
        .cameras()
        .map(|camera| {
            let frames = manifest.frames(camera);
            CameraSummary {
                camera: camera.to_string(),
                frames: frames.len(),
                day: frames.iter().filter(|f| f.modality == Modality::Day).count(),
                night: frames
                    .iter()
                    .filter(|f| f.modality == Modality::Night)
                    .count(),
            }
        })
        .collect();
    let summary = IngestSummary {
        total_frames: cameras.iter().map(|c| c.frames).sum(),
        cameras,
    };
    if json {
        print_json(&summary)?;
    } else {
        println!("manifest OK: {} frames", summary.total_frames);
        for c in &summary.cameras {
            println!("  {}: {} frames ({} day, {} night)", c.camera, c.frames, c.day, c.night);
        }
    }
    Ok(0)
}

fn cmd_stack(args: ConfigArgs, json: bool) -> anyhow::Result<u8> {
    let config = args.into_config()?;
    let summary = run_stack(&config)?;
    if json {
        print_json(&summary)?;
    } else {
        println!(
            "stacks: {} written, {} skipped, {} failed",
            summary.written, summary.skipped, summary.failed
        );
        for s in &summary.skip_report {
            println!(
                "  skipped {}: {} of {} prior frames",
                s.frame.display(),
                s.qualifying,
                s.required
            );
        }
        for f in &summary.failures {
            println!("  failed {}: {}", f.frame.display(), f.message);
        }
    }
    Ok(if summary.failed > 0 { 1 } else { 0 })
}

fn cmd_split(args: ConfigArgs, json: bool) -> anyhow::Result<u8> {
    let config = args.into_config()?;
    let manifest = load_manifest(&config.manifest, &config.modality)?;
    if manifest.camera_count() > 16 {
        eprintln!(
            "warning: {} cameras — exhaustive partition enumeration may be slow",
            manifest.camera_count()
        );
    }
    let (spec, outcome) = run_split(&config)?;
    if json {
        print_json(&outcome)?;
    } else {
        println!("train: {}", spec.subsets[0].join(", "));
        println!("val:   {}", spec.subsets[1].join(", "));
        println!("test:  {}", spec.subsets[2].join(", "));
        println!(
            "objective {:.6} (class {:.6}, size {:.6}, ratio {:.6}; {} candidates)",
            spec.objective,
            spec.terms.class_term,
            spec.terms.size_term,
            spec.terms.ratio_term,
            spec.candidates_evaluated
        );
        for file in &outcome.files {
            println!("  wrote {}", file.display());
        }
    }
    Ok(0)
}

fn cmd_stats(args: StatsArgs, json: bool) -> anyhow::Result<u8> {
    let config = args.config.into_config()?;
    run_stats(&config, &args.out)?;
    if json {
        print_json(&serde_json::json!({ "written": args.out }))?;
    } else {
        println!("wrote {}", args.out.display());
    }
    Ok(0)
}

fn cmd_fitness(args: FitnessArgs, json: bool) -> anyhow::Result<u8> {
    let input = FitnessInput::new(args.map50, args.map5095)?;
    let score = fitness(input);
    if json {
        print_json(&serde_json::json!({
            "map_50": input.map_50,
            "map_05_95": input.map_05_95,
            "fitness": score,
        }))?;
    } else {
        println!("{score}");
    }
    Ok(0)
}

fn cmd_weights_demo(args: WeightsDemoArgs, json: bool) -> anyhow::Result<u8> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let mut reports: Vec<GradCheckReport> = Vec::new();
    for seed in 0..args.seeds {
        if matches!(args.scheme, SchemeFlag::Fixed | SchemeFlag::Both) {
            reports.push(check_fixed_gradients(
                seed,
                args.height,
                args.width,
                args.step,
                args.tolerance,
            )?);
        }
        if matches!(args.scheme, SchemeFlag::Se | SchemeFlag::Both) {
            reports.push(check_se_gradients(
                seed,
                args.height,
                args.width,
                args.step,
                args.tolerance,
            )?);
        }
    }
    let all_passed = reports.iter().all(GradCheckReport::all_passed);
    if json {
        print_json(&serde_json::json!({
            "reports": reports,
            "all_passed": all_passed,
        }))?;
    } else {
        for report in &reports {
            for line in report.summary_lines() {
                println!("{line}");
            }
        }
        println!("gradient checks: {}", if all_passed { "PASS" } else { "FAIL" });
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn cmd_export(args: ExportArgs, json: bool) -> anyhow::Result<u8> {
    let stack = read_tlf5_file(&args.stack)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let stem = args
        .stack
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stack".to_string());
    let written = export_debug_pngs(&stack, &args.out_dir, &stem)?;
    if json {
        print_json(&serde_json::json!({ "written": written }))?;
    } else {
        for file in &written {
            println!("wrote {}", file.display());
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args, cli.json),
        Command::Stack(args) => cmd_stack(args, cli.json),
        Command::Split(args) => cmd_split(args, cli.json),
        Command::Stats(args) => cmd_stats(args, cli.json),
        Command::Fitness(args) => cmd_fitness(args, cli.json),
        Command::WeightsDemo(args) => cmd_weights_demo(args, cli.json),
        Command::Export(args) => cmd_export(args, cli.json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

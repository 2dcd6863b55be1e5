//! Command-line front end: one subcommand per pipeline stage plus `run`.
//!
//! Every command works inside a work directory with fixed file names, so
//! stages can be chained by hand or replaced by `run`.

mod work;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evinterp::config::{parse_timestamps, PipelineConfig};
use evinterp::error::Error;

use work::Work;

#[derive(Parser)]
#[command(
    name = "evinterp",
    version,
    about = "Event-guided video frame interpolation"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Comma-separated interpolation times in [0, 1]
    #[arg(long = "t", global = true, value_name = "LIST")]
    timestamps: Option<String>,
    /// Frames withheld between boundary frames
    #[arg(long, global = true, value_name = "N")]
    skip: Option<usize>,
    /// Also write every intermediate artifact to this directory
    #[arg(long, global = true, value_name = "DIR")]
    dump_intermediates: Option<PathBuf>,
    /// Worker threads; 0 uses all cores
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene with ground-truth frames, flows and tracks
    GenScene { dir: PathBuf },
    /// Simulate the configured interval's events from the scene description
    Simulate { dir: PathBuf },
    /// Build forward and backward voxel grids from the events
    Voxelize { dir: PathBuf },
    /// Superpixels and motion masks of both boundary frames
    Segment { dir: PathBuf },
    /// Per-region trajectories in both directions
    Track { dir: PathBuf },
    /// Dense any-time flow in both directions
    Flow { dir: PathBuf },
    /// Synthesise the requested intermediate frames
    Interpolate { dir: PathBuf },
    /// Compare outputs with ground truth and write the metric report
    Evaluate {
        dir: PathBuf,
        /// Also print the voxel bin-size table
        #[arg(long)]
        bin_study: bool,
    },
    /// The whole pipeline on the boundary frames and events in DIR
    Run {
        dir: PathBuf,
        /// Generate the scene and its events first
        #[arg(long)]
        simulate: bool,
    },
}

/// A failure with the stage it happened in.
struct Failure {
    stage: &'static str,
    error: Error,
}

impl Failure {
    fn code(&self) -> u8 {
        match self.error {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Format { .. } => 3,
            _ => 4,
        }
    }
}

pub(crate) type StageResult<T> = std::result::Result<T, Failure>;

pub(crate) trait AtStage<T> {
    fn at(self, stage: &'static str) -> StageResult<T>;
}

impl<T> AtStage<T> for evinterp::Result<T> {
    fn at(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|error| Failure { stage, error })
    }
}

fn load_config(g: &GlobalArgs) -> evinterp::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(skip) = g.skip {
        cfg.scene.skip = skip;
    }
    if let Some(ts) = &g.timestamps {
        cfg.timestamps = parse_timestamps(ts)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> StageResult<()> {
    let cfg = load_config(&cli.global).at("config")?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
        .at("config")?;
    let dump = cli.global.dump_intermediates.as_deref();
    let work = |dir: &PathBuf| Work::new(dir, &cfg);
    match &cli.command {
        Command::GenScene { dir } => work(dir)?.gen_scene(),
        Command::Simulate { dir } => work(dir)?.simulate(),
        Command::Voxelize { dir } => work(dir)?.voxelize(),
        Command::Segment { dir } => work(dir)?.segment(),
        Command::Track { dir } => work(dir)?.track(),
        Command::Flow { dir } => work(dir)?.flow(dump),
        Command::Interpolate { dir } => work(dir)?.interpolate(dump),
        Command::Evaluate { dir, bin_study } => {
            let w = work(dir)?;
            w.evaluate()?;
            if *bin_study {
                print!("{}", w.bin_study()?);
            }
            Ok(())
        }
        Command::Run { dir, simulate } => {
            let w = work(dir)?;
            if *simulate {
                w.gen_scene()?;
                w.simulate()?;
            }
            w.run(dump)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("evinterp: {} failed: {}", f.stage, f.error);
            ExitCode::from(f.code())
        }
    }
}

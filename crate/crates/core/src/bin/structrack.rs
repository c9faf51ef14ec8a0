use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use structrack::config::RunConfig;
use structrack::io::{self, FrameSequence};
use structrack::pipeline;
use structrack::sweep;
use structrack::Result;

#[derive(Parser)]
#[command(name = "structrack", version, about = "Structure-aided multi-object tracking")]
struct Cli {
    /// Run configuration (dotted key = value text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track objects through a frame sequence, starting from first-frame boxes.
    Track {
        /// Frame directory or manifest file.
        #[arg(long)]
        frames: PathBuf,
        /// CSV with the boxes of the first annotated frame.
        #[arg(long)]
        annotations: PathBuf,
        /// Also draw overlays into this directory.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Compute CLEAR-MOT metrics of a track file against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        /// IoU needed for a match; defaults to the configuration's value.
        #[arg(long)]
        iou: Option<f64>,
    },
    /// Render a synthetic scene with ground truth.
    Simulate {
        /// occlusion-cross, camera-cut or clutter-12.
        #[arg(long)]
        scenario: String,
        /// Override the scene length.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Score every weight triple on a grid by MOTG.
    Sweep {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        step: f64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Draw track boxes over the frames.
    Overlay {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
    },
}

fn out_or(cli_out: &Option<PathBuf>, default: &str) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        io::create_output_dir(parent)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Track {
            frames,
            annotations,
            overlay,
        } => {
            let seq = FrameSequence::open(&frames)?;
            let ann = io::read_tracks(&annotations)?;
            let out = out_or(&cli.out, "tracks.csv");
            ensure_parent(&out)?;
            let n = pipeline::run_track(&config, &seq, &ann, &out)?;
            if let Some(dir) = overlay {
                pipeline::run_overlay(&seq, &out, &dir)?;
            }
            println!("{n} records written to {}", out.display());
        }
        Command::Evaluate { gt, hyp, iou } => {
            let report = pipeline::run_evaluate(&gt, &hyp, iou.unwrap_or(config.iou_threshold))?;
            match &cli.out {
                Some(out) => {
                    ensure_parent(out)?;
                    io::write_output(out, &report.to_text())?;
                }
                None => print!("{}", report.to_text()),
            }
        }
        Command::Simulate { scenario, frames } => {
            let out = out_or(&cli.out, &scenario);
            let seq = pipeline::run_simulate(&scenario, config.seed, frames, &out)?;
            println!("{} frames written to {}", seq.len(), out.display());
        }
        Command::Sweep {
            frames,
            gt,
            step,
            repeats,
        } => {
            let seq = FrameSequence::open(&frames)?;
            let gt = io::read_tracks(&gt)?;
            let grid = sweep::weight_grid(&sweep::grid_values(step)?);
            let cells = sweep::run_sweep(&config, &seq, &gt, &grid, repeats)?;
            let out = out_or(&cli.out, "sweep");
            io::create_output_dir(&out)?;
            sweep::write_cells(io::create_output(&out.join("sweep.csv"))?, &cells)?;
            sweep::write_marginals(
                io::create_output(&out.join("marginals.csv"))?,
                &sweep::marginals(&cells),
            )?;
            println!("{} weight triples scored; results in {}", cells.len(), out.display());
        }
        Command::Overlay { frames, tracks } => {
            let seq = FrameSequence::open(&frames)?;
            let out = out_or(&cli.out, "overlay");
            pipeline::run_overlay(&seq, &tracks, &out)?;
            println!("overlays written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `svs`: command-line front end of the singing synthesis pipeline.
//!
//! See `MANUAL.md` next to this crate for the full flag and file format
//! reference.

mod commands;
mod config;
mod error;
mod io;
mod plot;
mod tone;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{EvalArgs, GenerateArgs, ModelChoice, PlotArgs};
use crate::config::Project;
use crate::error::{CliError, CliResult, EXIT_CONFIG, EXIT_OK};

#[derive(Parser, Debug)]
#[command(
    name = "svs",
    version,
    about = "Score-to-feature singing synthesis: parsing, training, generation, evaluation",
    after_help = "Exit status: 0 success, 2 configuration error, 3 data error, 4 numeric failure."
)]
struct Cli {
    /// Worker threads for per-song work (default: all cores).
    #[arg(long, short = 'j', global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Print nothing on success.
    #[arg(long, short = 'q', global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Project configuration (TOML).
    #[arg(long, short = 'c', default_value = "svs.toml", value_name = "FILE")]
    config: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Timelag,
    Duration,
    Acoustic,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse every MusicXML score and write `<name>.score.json`.
    Parse {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory (default: paths.features).
        #[arg(long, short = 'o', value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Write note-level and frame-level context features.
    Features {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory (default: paths.features).
        #[arg(long, short = 'o', value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Train one model and write its checkpoint.
    Train {
        #[arg(value_enum)]
        model: ModelArg,
        #[command(flatten)]
        config: ConfigArg,
        /// Checkpoint path (default: paths.checkpoints/<model>.json).
        #[arg(long, short = 'o', value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Generate acoustic features for every score.
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        /// Score directory (default: paths.scores).
        #[arg(long, value_name = "DIR")]
        scores: Option<PathBuf>,
        /// Directory holding timelag.json, duration.json and acoustic.json
        /// (default: paths.checkpoints).
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
        /// Output directory (default: paths.generated).
        #[arg(long, short = 'o', value_name = "DIR")]
        out: Option<PathBuf>,
        /// Take timing from the project's label files instead of the
        /// time-lag and duration models.
        #[arg(long)]
        oracle_timing: bool,
        /// Also write `<name>.wav`, a plain harmonic tone following the
        /// generated F0. A listening aid, not a vocoder.
        #[arg(long)]
        preview_tone: bool,
        /// Sample rate of the preview tone.
        #[arg(long, default_value_t = tone::DEFAULT_SAMPLE_RATE, value_name = "HZ")]
        sample_rate: u32,
    },
    /// Compute objective metrics of generated files.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        /// Directory of generated files (default: paths.generated).
        #[arg(long, value_name = "DIR")]
        generated: Option<PathBuf>,
        /// Report directory (default: paths.reports).
        #[arg(long, short = 'o', value_name = "DIR")]
        out: Option<PathBuf>,
        /// Compare against natural F0 on all frames (unvoiced frames
        /// interpolated) instead of frames voiced in both.
        #[arg(long)]
        all_frames: bool,
        /// Compute rmse_note and corr_note on the F0 before vibrato, read
        /// from `<name>.cents.tsv`.
        #[arg(long)]
        without_vibrato: bool,
    },
    /// Write a synthetic project with ground-truth ledgers.
    Synthdata {
        /// Synthetic data specification (TOML).
        #[arg(long, short = 's', value_name = "FILE")]
        spec: PathBuf,
        /// Project directory to create.
        #[arg(long, short = 'o', value_name = "DIR")]
        out: PathBuf,
    },
    /// Plot a generated F0 contour as SVG.
    Plot {
        #[command(flatten)]
        config: ConfigArg,
        /// Song name (file stem).
        song: String,
        /// Directory of generated files (default: paths.generated).
        #[arg(long, value_name = "DIR")]
        generated: Option<PathBuf>,
        /// Overlay the natural F0 from paths.f0.
        #[arg(long)]
        reference: bool,
        /// SVG path (default: paths.reports/<song>.svg).
        #[arg(long, short = 'o', value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let quiet = cli.quiet;
    let load = |c: &ConfigArg| Project::load(&c.config);
    match cli.command {
        Command::Parse { config, out } => commands::parse(&load(&config)?, out.as_deref(), quiet),
        Command::Features { config, out } => {
            commands::features(&load(&config)?, out.as_deref(), quiet)
        }
        Command::Train { model, config, out } => {
            let which = match model {
                ModelArg::Timelag => ModelChoice::Timelag,
                ModelArg::Duration => ModelChoice::Duration,
                ModelArg::Acoustic => ModelChoice::Acoustic,
            };
            commands::train(&load(&config)?, which, out.as_deref(), quiet)
        }
        Command::Generate {
            config,
            scores,
            models,
            out,
            oracle_timing,
            preview_tone,
            sample_rate,
        } => {
            if sample_rate < 1000 {
                return Err(CliError::config("--sample-rate must be at least 1000"));
            }
            let args = GenerateArgs {
                scores,
                models,
                out,
                oracle_timing,
                preview_tone,
                sample_rate,
            };
            commands::generate_cmd(&load(&config)?, &args, quiet)
        }
        Command::Eval {
            config,
            generated,
            out,
            all_frames,
            without_vibrato,
        } => {
            let args = EvalArgs {
                generated,
                out,
                all_frames,
                without_vibrato,
            };
            commands::eval(&load(&config)?, &args, quiet)
        }
        Command::Synthdata { spec, out } => commands::synthdata(&spec, &out, quiet),
        Command::Plot {
            config,
            song,
            generated,
            reference,
            out,
        } => {
            let args = PlotArgs {
                song,
                generated,
                reference,
                out,
            };
            commands::plot(&load(&config)?, &args, quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { EXIT_OK as u8 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("svs: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

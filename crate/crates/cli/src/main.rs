//! Command-line front end: run the pipeline over a sequence directory,
//! generate simulator scenarios, and evaluate trajectories.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beliefmap::config::{LogLevel, PipelineConfig};
use beliefmap::error::Error;
use beliefmap::eval::compute_ate;
use beliefmap::io;
use beliefmap::pipeline::{run_pipeline_files, ExecutionMode};
use beliefmap::sim::{emit_tum, generate, parse_scenario, ScenarioKind, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "beliefmap",
    about = "Object-level belief mapping pipeline, scenario simulator and trajectory evaluator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a sequence directory and write map, event log,
    /// summary and trajectory artifacts.
    Run {
        /// Pipeline config file (key = value); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sequence directory (groundtruth.txt, detections.txt,
        /// keypoints.txt, depth_meta.txt).
        #[arg(long)]
        frames: PathBuf,
        /// Output directory for the artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Write the semantic map here instead of <out>/map.txt.
        #[arg(long)]
        map_out: Option<PathBuf>,
        /// Run the single-threaded reference mode instead of the staged one.
        #[arg(long)]
        single_thread: bool,
    },
    /// Generate a simulated scenario as a sequence directory.
    Simgen {
        /// Scenario name: Static, OneChair, Vanishing, Changing, Shift,
        /// Replacing or WalkingPerson — or a scenario file via --spec.
        #[arg(long, required_unless_present = "spec")]
        scenario: Option<String>,
        /// Declarative scenario file overriding the built-in layout.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline config supplying the camera intrinsics.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Absolute trajectory error between an estimated and a ground-truth
    /// trajectory in TUM format.
    AteEval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Timestamp association window in seconds.
        #[arg(long, default_value_t = 0.02)]
        max_dt: f64,
        /// Emit the report as JSON instead of plain text.
        #[arg(long)]
        json: bool,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig, Error> {
    match path {
        Some(path) => PipelineConfig::load(path),
        None => PipelineConfig::from_env(),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            frames,
            out,
            map_out,
            single_thread,
        } => {
            let cfg = load_config(&config)?;
            let mode = if single_thread {
                ExecutionMode::SingleThread
            } else {
                ExecutionMode::Staged
            };
            if cfg.log_level != LogLevel::Quiet {
                eprintln!("config_hash={:016x}", cfg.hash());
                eprint!("{}", cfg.canonical_string());
            }
            let artifacts = run_pipeline_files(&frames, &out, map_out.as_deref(), &cfg, mode)?;
            eprintln!(
                "processed {} frames, {} keyframes: {} map objects, {} map points",
                artifacts.summary.frames,
                artifacts.summary.keyframes,
                artifacts.summary.map_objects,
                artifacts.summary.map_points
            );
            Ok(())
        }
        Command::Simgen {
            scenario,
            spec,
            seed,
            out,
            config,
        } => {
            let cfg = load_config(&config)?;
            let scenario_spec = match (&spec, &scenario) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::io(path.display().to_string(), e))?;
                    let mut parsed = parse_scenario(&text, &path.display().to_string())?;
                    parsed.seed = seed;
                    parsed
                }
                (None, Some(name)) => ScenarioSpec::builtin(ScenarioKind::parse(name)?, seed),
                (None, None) => unreachable!("clap enforces one of scenario/spec"),
            };
            let output = generate(&scenario_spec, &cfg.camera)?;
            emit_tum(&output, &out)?;
            eprintln!(
                "wrote {} frames of {} (seed {}) to {}",
                output.frames.len(),
                scenario_spec.name.name(),
                scenario_spec.seed,
                out.display()
            );
            Ok(())
        }
        Command::AteEval { est, gt, max_dt, json } => {
            let est_trajectory = io::read_trajectory(&est)?;
            let gt_trajectory = io::read_trajectory(&gt)?;
            let report = compute_ate(&est_trajectory, &gt_trajectory, max_dt)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

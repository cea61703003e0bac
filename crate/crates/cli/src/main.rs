use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use causim::artifacts::{read_jsonl, read_questions, verify_manifest};
use causim::pipeline::{baseline_run, staging_dir, stats_report, StageContext};
use causim::stages::{self, WorkDir};
use causim::{Pipeline, PipelineConfig, Stage, StageError};
use causim_core::curation::SplitMode;
use causim_core::describe::OracleDescription;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "causim", version, about = "Synthesize causal physical-reasoning question answering datasets")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long, global = true, default_value = "dataset")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write PNG frames for every video.
    #[arg(long, global = true)]
    render: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Easy,
    Hard,
}

impl From<Mode> for SplitMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Easy => SplitMode::Easy,
            Mode::Hard => SplitMode::Hard,
        }
    }
}

#[derive(clap::Args)]
struct WorkArg {
    /// Intermediate directory; defaults to `<out>.work`.
    #[arg(long)]
    work: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample and simulate scenes into the work directory.
    Simulate(WorkArg),
    /// Instantiate every template on every simulated video.
    Generate(WorkArg),
    /// Check answer stability under perturbation.
    Validate(WorkArg),
    /// Cap questions per video and balance answers.
    Balance(WorkArg),
    /// Assign easy and hard splits.
    Split(WorkArg),
    /// Write the final dataset from the work directory to `--out`.
    Export {
        #[command(flatten)]
        work: WorkArg,
        /// Replace an existing output directory.
        #[arg(long)]
        force: bool,
    },
    /// Every stage in memory, then export to `--out`.
    Run {
        #[arg(long)]
        force: bool,
    },
    /// Print dataset statistics as JSON.
    Stats,
    /// Print oracle descriptions.
    Describe {
        /// Only this scene.
        #[arg(long)]
        scene: Option<String>,
    },
    /// Score answer-prior heuristics on a split.
    Baseline {
        #[arg(long, value_enum, default_value = "easy")]
        mode: Mode,
        /// Seeds; defaults to the config's baseline seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Check every file against the manifest digests.
    Verify,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, StageError> {
    let mut c = match &cli.config {
        Some(p) => PipelineConfig::load(p).stage(Stage::Config)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if cli.render {
        c.export.render = true;
    }
    Ok(c)
}

fn work_dir(cli: &Cli, arg: &WorkArg) -> WorkDir {
    WorkDir(arg.work.clone().unwrap_or_else(|| {
        let mut s = cli.out.as_os_str().to_owned();
        s.push(".work");
        PathBuf::from(s)
    }))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), StageError> {
    println!("{}", serde_json::to_string_pretty(v).stage(Stage::Report)?);
    Ok(())
}

fn questions(out: &Path) -> Result<Vec<causim_core::questions::QAInstance>, StageError> {
    read_questions(&out.join("questions.jsonl")).stage(Stage::Report)
}

fn execute(cli: &Cli) -> Result<(), StageError> {
    let config = load_config(cli)?;
    let pipeline = || Pipeline::new(config.clone(), cli.jobs);
    match &cli.command {
        Command::Simulate(w) => {
            let n = stages::simulate(&pipeline()?, &work_dir(cli, w))?;
            eprintln!("simulated {n} videos");
        }
        Command::Generate(w) => {
            let n = stages::generate(&pipeline()?, &work_dir(cli, w))?;
            eprintln!("generated {n} questions");
        }
        Command::Validate(w) => {
            let n = stages::validate(&pipeline()?, &work_dir(cli, w))?;
            eprintln!("{n} questions stable");
        }
        Command::Balance(w) => {
            let n = stages::balance(&pipeline()?, &work_dir(cli, w))?;
            eprintln!("{n} questions after balancing");
        }
        Command::Split(w) => {
            let n = stages::split(&pipeline()?, &work_dir(cli, w))?;
            eprintln!("{n} questions split");
        }
        Command::Export { work, force } => {
            let m = stages::export(&pipeline()?, &work_dir(cli, work), &cli.out, *force)?;
            eprintln!("exported {} questions over {} videos to {}", m.questions, m.videos, cli.out.display());
        }
        Command::Run { force } => {
            let m = pipeline()?.run(&cli.out, *force)?;
            eprintln!("wrote {} questions over {} videos to {}", m.questions, m.videos, cli.out.display());
        }
        Command::Stats => print_json(&stats_report(&questions(&cli.out)?))?,
        Command::Describe { scene } => {
            let all: Vec<OracleDescription> = read_jsonl(&cli.out.join("descriptions.jsonl")).stage(Stage::Report)?;
            let picked: Vec<_> = all.iter().filter(|d| scene.as_ref().is_none_or(|s| &d.scene_id == s)).collect();
            if let Some(s) = scene.as_ref().filter(|_| picked.is_empty()) {
                return Err(StageError::new(Stage::Report, anyhow!("no video {s}")));
            }
            for d in picked {
                println!("{}\t{}", d.scene_id, d.text);
            }
        }
        Command::Baseline { mode, seeds } => {
            let seeds = if seeds.is_empty() { config.baseline_seeds.clone() } else { seeds.clone() };
            let run = baseline_run(&questions(&cli.out)?, (*mode).into(), &seeds);
            let Some(scores) = &run.scores else {
                return Err(StageError::new(Stage::Report, anyhow!(run.error.unwrap_or_default())));
            };
            println!("train {}  test {}  seeds {:?}", run.train, run.test, run.seeds);
            for s in scores {
                println!("{:<10} {:6.2}%", s.model.name(), s.accuracy);
            }
        }
        Command::Verify => {
            let bad = verify_manifest(&cli.out).stage(Stage::Report)?;
            if !bad.is_empty() {
                return Err(StageError::new(
                    Stage::Report,
                    anyhow!("{} files differ from the manifest: {}", bad.len(), bad.join(", ")),
                ));
            }
            eprintln!("all files match {}", cli.out.join("manifest.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if staging_dir(&cli.out).exists() {
                eprintln!("note: {} left behind", staging_dir(&cli.out).display());
            }
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}

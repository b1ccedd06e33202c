use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scenesum::classifier::{LossKind, Schedule};
use scenesum::pipeline::{files, Pipeline, PipelineConfig, SceneMethod, Stage, StageStatus};
use scenesum::synthetic::{event_fixture, write_event_fixture};

/// Segment a televised event into scenes from its social-media commentary
/// and summarize each scene with a tweet and video frames.
#[derive(Debug, Parser)]
#[command(name = "scenesum", version)]
struct Cli {
    /// Pipeline config (TOML). Relative paths inside it resolve against its
    /// directory.
    #[arg(long, short, global = true, default_value = "scenesum.toml")]
    config: PathBuf,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse messages, tag character mentions and bin by minute.
    Ingest(StageArgs),
    /// Split the binned stream into scenes.
    DetectScenes(StageArgs),
    /// Pick one representative tweet per scene.
    SelectTweets(StageArgs),
    /// Label faces from previous episodes with nearby speakers.
    WeakLabel(StageArgs),
    /// Train the face classifier on weakly labeled faces.
    TrainFaces(StageArgs),
    /// Choose frames showing each scene's characters.
    SelectFrames(StageArgs),
    /// Write the summary file and Markdown report.
    Summarize(StageArgs),
    /// Score scenes (and the baselines) against reference scenes.
    EvalScenes(StageArgs),
    /// Score the face model and baselines on labeled test faces.
    EvalFaces(StageArgs),
    /// Run every stage in order.
    Run {
        /// Stop after this stage.
        #[arg(long)]
        stage: Option<Stage>,
        /// Skip stages whose outputs are up to date.
        #[arg(long)]
        resume: bool,
    },
    /// Print the effective config after overrides.
    Config,
    /// Write a synthetic event with a ready-to-run config.
    MakeFixture {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Do nothing if the stage's outputs are up to date.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Baseline {
    Volume,
    Meanstd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    AveCe,
    HardEm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Incremental,
    AllAtOnce,
}

/// Settings that replace the config file's values.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long, global = true, help_heading = "Overrides")]
    work_dir: Option<PathBuf>,
    #[arg(long, global = true, help_heading = "Overrides")]
    seed: Option<u64>,
    /// Mention share a character needs to start a scene.
    #[arg(long, global = true, help_heading = "Overrides")]
    k: Option<f64>,
    /// Share of the open scene below which a character counts as new.
    #[arg(long, global = true, help_heading = "Overrides")]
    m: Option<f64>,
    #[arg(long, global = true, help_heading = "Overrides")]
    margin_seconds: Option<u64>,
    /// Detect scenes with a volume baseline instead.
    #[arg(long, global = true, value_enum, help_heading = "Overrides")]
    baseline: Option<Baseline>,
    #[arg(long, global = true, help_heading = "Overrides")]
    n_sigma: Option<f64>,
    /// Half-width of the weak-labeling window.
    #[arg(long, global = true, help_heading = "Overrides")]
    window_seconds: Option<f64>,
    #[arg(long, global = true, help_heading = "Overrides")]
    confidence_threshold: Option<f64>,
    #[arg(long, global = true, help_heading = "Overrides")]
    frames_per_character: Option<usize>,
    #[arg(long, global = true, value_enum, help_heading = "Overrides")]
    loss: Option<LossArg>,
    #[arg(long, global = true, value_enum, help_heading = "Overrides")]
    schedule: Option<ScheduleArg>,
    /// Prototype relabeling on or off.
    #[arg(long, global = true, help_heading = "Overrides")]
    relabel: Option<bool>,
    #[arg(long, global = true, help_heading = "Overrides")]
    learning_rate: Option<f64>,
    /// Epochs per training stage.
    #[arg(long, global = true, help_heading = "Overrides")]
    epochs: Option<usize>,
    #[arg(long, global = true, help_heading = "Overrides")]
    batch_size: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut PipelineConfig) {
        if let Some(v) = &self.work_dir {
            c.work_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.k {
            c.scenes.k = v;
        }
        if let Some(v) = self.m {
            c.scenes.m = v;
        }
        if let Some(v) = self.margin_seconds {
            c.scenes.margin_seconds = v;
        }
        if let Some(b) = self.baseline {
            c.scenes.method = match b {
                Baseline::Volume => SceneMethod::Volume,
                Baseline::Meanstd => SceneMethod::Meanstd,
            };
        }
        if let Some(v) = self.n_sigma {
            c.scenes.n_sigma = v;
        }
        if let Some(v) = self.window_seconds {
            c.weak_label.window_seconds = v;
        }
        if let Some(v) = self.confidence_threshold {
            c.frames.confidence_threshold = v;
        }
        if let Some(v) = self.frames_per_character {
            c.frames.frames_per_character = v;
        }
        if let Some(l) = self.loss {
            c.train.loss = match l {
                LossArg::AveCe => LossKind::AveCe,
                LossArg::HardEm => LossKind::HardEm,
            };
        }
        if let Some(s) = self.schedule {
            c.train.schedule = match s {
                ScheduleArg::Incremental => Schedule::Incremental,
                ScheduleArg::AllAtOnce => Schedule::AllAtOnce,
            };
        }
        if let Some(v) = self.relabel {
            c.train.relabel = v;
        }
        if let Some(v) = self.learning_rate {
            c.train.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            c.train.epochs_per_stage = v;
        }
        if let Some(v) = self.batch_size {
            c.train.batch_size = v;
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<Pipeline> {
    let src = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut config = PipelineConfig::from_toml(&src).with_context(|| format!("in {}", path.display()))?;
    overrides.apply(&mut config);
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Pipeline::new(config, base)?)
}

fn report(p: &Pipeline, stage: Stage, status: StageStatus) {
    let what = match status {
        StageStatus::Ran => "done",
        StageStatus::Skipped => "up to date",
    };
    let outputs: Vec<String> = stage.outputs().iter().map(|f| p.output_path(f).display().to_string()).collect();
    println!("{:<14} {what:<10} {}", stage.name(), outputs.join(" "));
    if status == StageStatus::Ran {
        if let Some(line) = headline(p, stage) {
            println!("{:<14} {line}", "");
        }
    }
}

/// One line of results for stages whose output is worth a glance.
fn headline(p: &Pipeline, stage: Stage) -> Option<String> {
    let read = |f: &str| std::fs::read_to_string(p.output_path(f)).ok();
    let json = |f: &str| read(f).and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok());
    match stage {
        Stage::DetectScenes => Some(format!("{} scenes", read(files::SCENES)?.lines().count())),
        Stage::EvalScenes => {
            let v = json(files::SCENE_EVAL)?;
            let s = &v["scenes"];
            Some(format!("P={} R={} F1={}", s["precision"], s["recall"], s["f1"]))
        }
        Stage::EvalFaces => {
            let v = json(files::FACE_EVAL)?;
            Some(format!(
                "accuracy {} (k-means {}, naive {})",
                v["model"]["micro_accuracy"], v["kmeans_accuracy"], v["naive_accuracy"]
            ))
        }
        _ => None,
    }
}

fn single(cli: &Cli, stage: Stage, args: &StageArgs) -> Result<()> {
    let p = load(&cli.config, &cli.overrides)?;
    let status = p.run_stage(stage, args.resume)?;
    report(&p, stage, status);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let stage = match &cli.command {
        Command::Ingest(a) => Some((Stage::Ingest, a)),
        Command::DetectScenes(a) => Some((Stage::DetectScenes, a)),
        Command::SelectTweets(a) => Some((Stage::SelectTweets, a)),
        Command::WeakLabel(a) => Some((Stage::WeakLabel, a)),
        Command::TrainFaces(a) => Some((Stage::TrainFaces, a)),
        Command::SelectFrames(a) => Some((Stage::SelectFrames, a)),
        Command::Summarize(a) => Some((Stage::Summarize, a)),
        Command::EvalScenes(a) => Some((Stage::EvalScenes, a)),
        Command::EvalFaces(a) => Some((Stage::EvalFaces, a)),
        _ => None,
    };
    if let Some((stage, args)) = stage {
        return single(cli, stage, args);
    }
    match &cli.command {
        Command::Run { stage, resume } => {
            let p = load(&cli.config, &cli.overrides)?;
            for s in p.plan(*stage) {
                let status = p.run_stage(s, *resume).with_context(|| format!("stage {s} failed"))?;
                report(&p, s, status);
            }
        }
        Command::Config => {
            let p = load(&cli.config, &cli.overrides)?;
            print!("{}", p.config().to_toml());
        }
        Command::MakeFixture { dir, seed } => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let cfg = write_event_fixture(&event_fixture(*seed), dir, *seed)?;
            println!("{}", cfg.display());
        }
        _ => unreachable!("stage commands handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

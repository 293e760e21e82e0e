//! Command-line entry point.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use crate::datagen::{generate_sharded, read_dataset, write_dataset, Dataset, DatasetConfig, DatasetHeader, Preset};
use crate::eval::{
    action_quality, draw_starts, episode_rng, evaluate_agents, run_episode, write_quality_reports, write_reports,
    Agent, EvalConfig, EvalError, EvalPreset, ExpertAgent, IdleAgent, ModelAgent, QualityConfig, QualityPreset,
    RandomAgent, ReportFormat,
};
use crate::models::{load_model, LinearKind, Model};
use crate::planner::Planner;
use crate::render::{read_trace, render_svg, write_trace, LabeledTrace};
use crate::seed;
use crate::trainers::{
    dqn_train, train_dagger, train_linear, train_pil, CheckpointSet, DaggerConfig, DqnConfig, DqnMode,
    EpsilonSchedule, PilConfig, TrainError,
};
use crate::track::{builtin, SimConfig, State, TrackMap};

#[derive(Debug, Parser, Serialize)]
#[command(name = "rtlab", version, about = "Racetrack planning, imitation and reinforcement learning lab")]
#[command(args_override_self = true)]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, env = "RTLAB_SEED", default_value_t = 0, global = true)]
    seed: u64,
    /// Worker threads for data generation and evaluation; output does not depend on it.
    #[arg(long, default_value_t = 1, global = true)]
    jobs: usize,
    /// JSON object of flag values; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate an expert-labelled dataset.
    GenData(GenDataArgs),
    /// Train agents.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Win/loss/timeout rates and returns over shared start states.
    Evaluate(EvaluateArgs),
    /// Classify every decision of an agent as optimal, secure or fatal.
    Quality(QualityArgs),
    /// Print an optimal plan for one state.
    Plan(PlanArgs),
    /// Draw episode traces on the map as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args, Serialize)]
struct GenDataArgs {
    /// Map file or builtin name (corr7, lshape20, block30).
    #[arg(long)]
    map: String,
    /// One of NS-ZV-T, RS-ZV-T, RS-RV-T, RS-RV, RS-RV-E, RS-RV-U.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = crate::datagen::DEFAULT_SIZE)]
    size: usize,
    #[arg(long, default_value_t = 5)]
    velocity_bound: i32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TrainCommand {
    /// Passive imitation with the neural network.
    PilNn(PilNnArgs),
    /// Linear discriminant analysis on the dataset.
    PilLda(LinearArgs),
    /// Multinomial logistic regression on the dataset.
    PilLr(LinearArgs),
    /// Dataset aggregation starting from a pretrain set.
    Dagger(DaggerArgs),
    /// Deep Q-learning by self-play.
    Dqn(DqnArgs),
}

#[derive(Debug, Args, Serialize)]
struct PilNnArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Map the dataset was generated on; inferred for builtin maps.
    #[arg(long)]
    map: Option<String>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = PilConfig::default().step_size)]
    step_size: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct LinearArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DaggerArgs {
    #[arg(long)]
    pretrain: PathBuf,
    #[arg(long)]
    map: Option<String>,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 5000)]
    samples_per_iter: usize,
    #[arg(long, default_value_t = 8)]
    epochs_per_iter: usize,
    #[arg(long, default_value_t = 8)]
    pretrain_epochs: usize,
    #[arg(long, default_value_t = PilConfig::default().step_size)]
    step_size: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Rollout starts: NS-ZV, RS-ZV or RS-RV. Defaults to the pretrain set's starts.
    #[arg(long)]
    rollout: Option<String>,
    /// Roll out on the noisy road.
    #[arg(long)]
    rollout_noisy: bool,
    #[arg(long, default_value_t = 1000)]
    step_cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DqnArgs {
    #[arg(long)]
    map: String,
    /// One of NS-D, NS-N, RS-D, RS-N.
    #[arg(long)]
    mode: String,
    #[arg(long, default_value_t = 100_000)]
    episodes: usize,
    #[arg(long, default_value_t = 100_000)]
    buffer_capacity: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    eps_start: f64,
    #[arg(long, default_value_t = 0.999)]
    eps_decay: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps_end: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 500)]
    target_sync: usize,
    #[arg(long, default_value_t = DqnConfig::default().step_size)]
    step_size: f64,
    #[arg(long, default_value_t = DqnConfig::default().reward_scale)]
    reward_scale: f64,
    #[arg(long, default_value_t = 1000)]
    step_cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    map: String,
    /// NS-ZV-D, NS-ZV-N, RS-ZV-D, RS-ZV-N, RS-RV-D or RS-RV-N.
    #[arg(long, default_value = "NS-ZV-D")]
    preset: String,
    /// expert, random, idle, a checkpoint path, or NAME=PATH. Repeatable.
    #[arg(long = "agent", required = true)]
    agents: Vec<String>,
    #[arg(long, default_value_t = crate::eval::DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_STEP_CAP)]
    step_cap: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 5)]
    velocity_bound: i32,
    /// csv or json; taken from the file extension when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Also write the first --trace-runs episodes of every agent as JSON lines here.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    trace_runs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct QualityArgs {
    #[arg(long)]
    map: String,
    /// NS-ZV, RS-ZV or RS-RV.
    #[arg(long, default_value = "NS-ZV")]
    preset: String,
    #[arg(long)]
    agent: String,
    #[arg(long, default_value_t = crate::eval::DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_STEP_CAP)]
    step_cap: usize,
    #[arg(long, default_value_t = 5)]
    velocity_bound: i32,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
struct PlanArgs {
    #[arg(long)]
    map: String,
    x: i32,
    y: i32,
    vx: i32,
    vy: i32,
    /// Print the plan as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args, Serialize)]
struct RenderArgs {
    #[arg(long)]
    map: String,
    /// Trace file (JSON lines of step records). Repeatable.
    #[arg(long = "trace")]
    traces: Vec<PathBuf>,
    /// Legend labels for the trace files, in order; file stems by default.
    #[arg(long = "label")]
    labels: Vec<String>,
    /// Replay an evaluation episode of this agent instead of reading a file. Repeatable.
    #[arg(long = "agent")]
    agents: Vec<String>,
    #[arg(long, default_value = "NS-ZV-D")]
    preset: String,
    /// Run index of the replayed evaluation episode.
    #[arg(long, default_value_t = 0)]
    run: usize,
    #[arg(long, default_value_t = crate::eval::DEFAULT_STEP_CAP)]
    step_cap: usize,
    #[arg(long, default_value_t = 5)]
    velocity_bound: i32,
    #[arg(long)]
    out: PathBuf,
}

/// Why a command stopped; mapped onto the process exit code.
#[derive(Debug)]
enum Failure {
    Clap(clap::Error),
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_NEGATIVE: i32 = 2;
const EXIT_RUNTIME: i32 = 3;

trait OrFail<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn usage_error(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn train_failure(e: TrainError) -> Failure {
    match e {
        TrainError::InvalidConfig(_) | TrainError::EmptyDataset => Failure::Usage(e.into()),
        e => Failure::Runtime(e.into()),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match try_run(args.into_iter().map(Into::into).collect()) {
        Ok(code) => code,
        Err(Failure::Clap(e)) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn try_run(mut args: Vec<OsString>) -> Result<i32, Failure> {
    // lenient first pass: required flags may still come from the config file
    if let Ok(matches) = Cli::command().ignore_errors(true).try_get_matches_from(&args) {
        if let Some(path) = matches.get_one::<PathBuf>("config") {
            let extra = config_tokens(path, &matches)?;
            args.extend(extra);
        }
    }
    let matches = Cli::command().try_get_matches_from(&args).map_err(Failure::Clap)?;
    let cli = Cli::from_arg_matches(&matches).map_err(Failure::Clap)?;
    dispatch(&cli)
}

/// Turns a JSON config object into extra flags for every key not already
/// given on the command line.
fn config_tokens(path: &Path, matches: &ArgMatches) -> Result<Vec<OsString>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .usage()?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .usage()?;
    let serde_json::Value::Object(entries) = value else {
        return Err(usage_error(format!("{}: config must be a JSON object", path.display())));
    };

    let root = Cli::command();
    let mut cmd = &root;
    let mut leaf = matches;
    while let Some((name, sub)) = leaf.subcommand() {
        cmd = cmd.find_subcommand(name).expect("parsed subcommand exists");
        leaf = sub;
    }

    let mut tokens = Vec::new();
    for (key, value) in entries {
        let id = key.replace('-', "_");
        let named = |a: &&clap::Arg| a.get_id().as_str() == id || a.get_long() == Some(key.as_str());
        let (arg, scope) = match cmd.get_arguments().find(named) {
            Some(a) => (a, leaf),
            None => (
                root.get_arguments()
                    .find(named)
                    .ok_or_else(|| usage_error(format!("unknown config key {key:?}")))?,
                matches,
            ),
        };
        let id = arg.get_id().as_str();
        if id == "config" {
            return Err(usage_error("config files cannot name another config file"));
        }
        let Some(long) = arg.get_long() else {
            return Err(usage_error(format!("config key {key:?} is positional; pass it on the command line")));
        };
        if scope.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let flag = OsString::from(format!("--{long}"));
        let scalar = |v: &serde_json::Value| -> Result<String, Failure> {
            match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                serde_json::Value::Bool(b) => Ok(b.to_string()),
                _ => Err(usage_error(format!("config key {key:?} has an unsupported value"))),
            }
        };
        match (arg.get_action(), &value) {
            (ArgAction::SetTrue, serde_json::Value::Bool(true)) => tokens.push(flag),
            (ArgAction::SetTrue, serde_json::Value::Bool(false)) => {}
            (ArgAction::SetTrue, _) => return Err(usage_error(format!("config key {key:?} must be true or false"))),
            (_, serde_json::Value::Array(items)) => {
                for item in items {
                    tokens.push(flag.clone());
                    tokens.push(scalar(item)?.into());
                }
            }
            (_, v) => {
                tokens.push(flag);
                tokens.push(scalar(v)?.into());
            }
        }
    }
    Ok(tokens)
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::Train(t) => match t {
            TrainCommand::PilNn(a) => train_pil_nn(cli, a),
            TrainCommand::PilLda(a) => train_linear_cmd(cli, a, LinearKind::Lda),
            TrainCommand::PilLr(a) => train_linear_cmd(cli, a, LinearKind::LogisticRegression),
            TrainCommand::Dagger(a) => train_dagger_cmd(cli, a),
            TrainCommand::Dqn(a) => train_dqn_cmd(cli, a),
        },
        Command::Evaluate(a) => evaluate(cli, a),
        Command::Quality(a) => quality(cli, a),
        Command::Plan(a) => plan(a),
        Command::Render(a) => render(cli, a),
    }
}

/// Map from a file path, or a builtin by name.
fn load_map(arg: &str) -> Result<TrackMap, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{arg}: {e}"))
            .runtime()?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
        return TrackMap::parse(name, &text)
            .map_err(|e| anyhow::anyhow!("{arg}: {e}"))
            .usage();
    }
    builtin(arg).map_err(|_| usage_error(format!("{arg:?} is neither a map file nor a builtin map")))
}

/// The map a dataset was generated on: the one given, or the builtin named in its header.
fn dataset_map(map: Option<&str>, header: &DatasetHeader) -> Result<TrackMap, Failure> {
    let resolved = match map {
        Some(arg) => load_map(arg)?,
        None => {
            let name = header.map_id.split('@').next().unwrap_or_default();
            builtin(name).map_err(|_| {
                usage_error(format!("dataset was generated on {}; pass --map", header.map_id))
            })?
        }
    };
    if resolved.id() != header.map_id {
        return Err(usage_error(format!(
            "dataset was generated on {}, not {}",
            header.map_id,
            resolved.id()
        )));
    }
    Ok(resolved)
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    read_dataset(path, None).runtime()
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    config: serde_json::Value,
    seed: u64,
    map_id: Option<String>,
    tool_version: &'static str,
    outputs: Vec<String>,
    timestamp: u64,
}

fn write_manifest(
    path: &Path,
    cli: &Cli,
    subcommand: &str,
    map: Option<&TrackMap>,
    outputs: &[PathBuf],
) -> Result<(), Failure> {
    let manifest = RunManifest {
        subcommand,
        config: serde_json::to_value(cli).expect("arguments serialize"),
        seed: cli.seed,
        map_id: map.map(TrackMap::id),
        tool_version: env!("CARGO_PKG_VERSION"),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(path, text + "\n")
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .runtime()
}

/// `<file>.manifest.json` next to a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))
        .runtime()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .runtime()?;
    for row in rows {
        w.serialize(row).runtime()?;
    }
    w.flush().runtime()
}

fn train_rng(cli: &Cli, method: &str) -> seed::Rng {
    seed::stream(cli.seed, &[seed::label("train"), seed::label(method)])
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> Result<i32, Failure> {
    let preset: Preset = a.preset.parse().usage()?;
    let map = load_map(&a.map)?;
    let config = DatasetConfig::preset(preset, a.size).with_velocity_bound(a.velocity_bound);
    let planner = Planner::new(Arc::new(map));
    let samples = generate_sharded(&planner, &config, cli.seed, cli.jobs).usage()?;
    let header = DatasetHeader {
        map_id: planner.map().id(),
        preset: preset.name().to_string(),
        size: samples.len(),
        seed: cli.seed,
        velocity_bound: a.velocity_bound,
    };
    write_dataset(&a.out, &header, &samples).runtime()?;
    write_manifest(&sidecar(&a.out), cli, "gen-data", Some(planner.map()), std::slice::from_ref(&a.out))?;
    println!("wrote {} samples to {}", samples.len(), a.out.display());
    Ok(EXIT_OK)
}

/// Saves `checkpoints` (also the partial set of a diverged run) and returns their paths.
fn save_checkpoints(set: &CheckpointSet, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    set.save_all(dir).runtime()
}

fn finish_training<T>(
    result: Result<T, TrainError>,
    out: &Path,
) -> Result<T, Failure> {
    match result {
        Ok(v) => Ok(v),
        Err(TrainError::Diverged { reason, kept }) => {
            save_checkpoints(&kept, out)?;
            Err(Failure::Runtime(anyhow::anyhow!(
                "training diverged ({reason}); kept {} checkpoint(s) in {}",
                kept.len(),
                out.display()
            )))
        }
        Err(e) => Err(train_failure(e)),
    }
}

fn train_pil_nn(cli: &Cli, a: &PilNnArgs) -> Result<i32, Failure> {
    let data = load_dataset(&a.dataset)?;
    let map = dataset_map(a.map.as_deref(), &data.header)?;
    let config = PilConfig {
        max_epochs: a.epochs,
        step_size: a.step_size,
        batch_size: a.batch_size,
    };
    config.validate().map_err(train_failure)?;
    create_dir(&a.out)?;
    let result = train_pil(&data.samples, &config, &mut train_rng(cli, "pil-nn"));
    let run = finish_training(result, &a.out)?;
    let mut outputs = save_checkpoints(&run.checkpoints, &a.out)?;
    let epochs = a.out.join("epochs.csv");
    write_csv(&epochs, &run.epochs)?;
    outputs.push(epochs);
    write_manifest(&a.out.join("manifest.json"), cli, "train pil-nn", Some(&map), &outputs)?;
    for e in &run.epochs {
        println!("epoch {:2}  loss {:.6}  accuracy {:.4}", e.epoch, e.mean_loss, e.accuracy);
    }
    Ok(EXIT_OK)
}

fn train_linear_cmd(cli: &Cli, a: &LinearArgs, kind: LinearKind) -> Result<i32, Failure> {
    let data = load_dataset(&a.dataset)?;
    let map = dataset_map(a.map.as_deref(), &data.header)?;
    let model = train_linear(kind, &data.samples).map_err(train_failure)?;
    create_dir(&a.out)?;
    let mut set = CheckpointSet::new();
    set.push(kind.tag(), Model::Linear(model)).map_err(train_failure)?;
    let outputs = save_checkpoints(&set, &a.out)?;
    let name = match kind {
        LinearKind::Lda => "train pil-lda",
        LinearKind::LogisticRegression => "train pil-lr",
    };
    write_manifest(&a.out.join("manifest.json"), cli, name, Some(&map), &outputs)?;
    println!("wrote {}", outputs[0].display());
    Ok(EXIT_OK)
}

fn rollout_config(arg: Option<&str>, data: &Dataset, noisy: bool) -> Result<SimConfig, Failure> {
    let (rs, rv) = match arg {
        None => data.preset().start_flags(),
        Some(s) => {
            let p: QualityPreset = s.parse().usage()?;
            let c = p.eval_preset().sim_config();
            (c.random_start, c.random_velocity)
        }
    };
    let mut sim = SimConfig::new(rs, rv, noisy);
    sim.velocity_bound = data.header.velocity_bound;
    Ok(sim)
}

fn train_dagger_cmd(cli: &Cli, a: &DaggerArgs) -> Result<i32, Failure> {
    let data = load_dataset(&a.pretrain)?;
    let map = dataset_map(a.map.as_deref(), &data.header)?;
    let config = DaggerConfig {
        iterations: a.iters,
        samples_per_iteration: a.samples_per_iter,
        epochs_per_iteration: a.epochs_per_iter,
        pretrain_epochs: a.pretrain_epochs,
        step_size: a.step_size,
        batch_size: a.batch_size,
        rollout: rollout_config(a.rollout.as_deref(), &data, a.rollout_noisy)?,
        step_cap: a.step_cap,
    };
    config.validate().map_err(train_failure)?;
    create_dir(&a.out)?;
    let planner = Planner::new(Arc::new(map));
    let result = train_dagger(&planner, &data.samples, &config, &mut train_rng(cli, "dagger"));
    let run = finish_training(result, &a.out)?;
    let mut outputs = save_checkpoints(&run.checkpoints, &a.out)?;
    let rounds = a.out.join("rounds.csv");
    write_csv(&rounds, &run.rounds)?;
    outputs.push(rounds);
    write_manifest(&a.out.join("manifest.json"), cli, "train dagger", Some(planner.map()), &outputs)?;
    for r in &run.rounds {
        println!(
            "iteration {:2}  aggregate {}  skipped {}  loss {:.6}",
            r.iteration, r.aggregate_size, r.skipped_unsolvable, r.final_loss
        );
    }
    Ok(EXIT_OK)
}

fn train_dqn_cmd(cli: &Cli, a: &DqnArgs) -> Result<i32, Failure> {
    let mode: DqnMode = a.mode.parse().map_err(train_failure)?;
    let map = load_map(&a.map)?;
    let config = DqnConfig {
        mode,
        buffer_capacity: a.buffer_capacity,
        episodes: a.episodes,
        gamma: a.gamma,
        epsilon: EpsilonSchedule {
            start: a.eps_start,
            decay: a.eps_decay,
            floor: a.eps_end,
        },
        batch_size: a.batch_size,
        target_sync_interval: a.target_sync,
        step_size: a.step_size,
        step_cap: a.step_cap,
        reward_scale: a.reward_scale,
    };
    config.validate().map_err(train_failure)?;
    create_dir(&a.out)?;
    let result = dqn_train(&map, &config, &mut train_rng(cli, "dqn"));
    let run = finish_training(result, &a.out)?;
    let mut outputs = save_checkpoints(&run.checkpoints, &a.out)?;
    let trace = a.out.join("trace.csv");
    write_csv(&trace, &run.trace)?;
    outputs.push(trace);
    write_manifest(&a.out.join("manifest.json"), cli, "train dqn", Some(&map), &outputs)?;
    println!(
        "best trailing average {:.2} at episode {}; {} gradient steps",
        run.best_trailing, run.best_episode, run.gradient_steps
    );
    Ok(EXIT_OK)
}

fn make_agent(arg: &str, planner: &Arc<Planner>) -> Result<Box<dyn Agent>, Failure> {
    match arg {
        "expert" => return Ok(Box::new(ExpertAgent::new(planner.clone()))),
        "random" => return Ok(Box::new(RandomAgent)),
        "idle" => return Ok(Box::new(IdleAgent)),
        _ => {}
    }
    let (name, path) = match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(arg)
                .to_string();
            (name, path)
        }
    };
    let model = load_model(&path)
        .map_err(|e| anyhow::anyhow!("agent {arg:?}: {e}"))
        .runtime()?;
    Ok(Box::new(ModelAgent::new(name, model)))
}

fn make_agents(specs: &[String], planner: &Arc<Planner>) -> Result<Vec<Box<dyn Agent>>, Failure> {
    let agents = specs
        .iter()
        .map(|s| make_agent(s, planner))
        .collect::<Result<Vec<_>, _>>()?;
    let mut names = HashSet::new();
    for a in &agents {
        if !names.insert(a.name().to_string()) {
            return Err(usage_error(format!(
                "two agents are named {:?}; use NAME=PATH to tell them apart",
                a.name()
            )));
        }
    }
    Ok(agents)
}

fn report_format(format: Option<&str>, out: &Path) -> Result<ReportFormat, Failure> {
    match format {
        Some(f) => f.parse().usage(),
        None => match ReportFormat::from_path(out) {
            Ok(f) => Ok(f),
            Err(EvalError::UnknownFormat(_)) => Ok(ReportFormat::Csv),
            Err(e) => Err(Failure::Usage(e.into())),
        },
    }
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<i32, Failure> {
    let preset: EvalPreset = a.preset.parse().usage()?;
    let format = report_format(a.format.as_deref(), &a.out)?;
    let planner = Arc::new(Planner::new(Arc::new(load_map(&a.map)?)));
    let agents = make_agents(&a.agents, &planner)?;
    let refs: Vec<&dyn Agent> = agents.iter().map(|b| b.as_ref()).collect();
    let config = EvalConfig {
        preset,
        runs: a.runs,
        step_cap: a.step_cap,
        gamma: a.gamma,
        seed: cli.seed,
        velocity_bound: a.velocity_bound,
    };
    let reports = evaluate_agents(&refs, &planner, &config, cli.jobs).usage()?;
    write_reports(&reports, &a.out, format).runtime()?;
    let mut outputs = vec![a.out.clone()];

    if let Some(dir) = &a.trace_dir {
        create_dir(dir)?;
        let n = a.trace_runs.min(a.runs);
        let starts = draw_starts(planner.map(), preset, n, a.velocity_bound, cli.seed);
        let noisy = preset.sim_config().noisy;
        for agent in &refs {
            for (run, &start) in starts.iter().enumerate() {
                let mut rng = episode_rng(cli.seed, run, agent.name());
                let trace = run_episode(*agent, planner.map(), start, noisy, a.step_cap, &mut rng);
                let path = dir.join(format!("{}-run{run}.jsonl", agent.name()));
                write_trace(&path, &trace.steps).runtime()?;
                outputs.push(path);
            }
        }
    }
    write_manifest(&sidecar(&a.out), cli, "evaluate", Some(planner.map()), &outputs)?;
    for r in &reports {
        println!(
            "{:<16} {}  win {:.4}  loss {:.4}  timeout {:.4}  return {:.3}",
            r.agent, r.config, r.win_rate, r.loss_rate, r.timeout_rate, r.avg_return_raw
        );
    }
    Ok(EXIT_OK)
}

fn quality(cli: &Cli, a: &QualityArgs) -> Result<i32, Failure> {
    let preset: QualityPreset = a.preset.parse().usage()?;
    let format = report_format(a.format.as_deref(), &a.out)?;
    let planner = Arc::new(Planner::new(Arc::new(load_map(&a.map)?)));
    let agent = make_agent(&a.agent, &planner)?;
    let config = QualityConfig {
        preset,
        runs: a.runs,
        step_cap: a.step_cap,
        seed: cli.seed,
        velocity_bound: a.velocity_bound,
    };
    let report = action_quality(agent.as_ref(), &planner, &config, cli.jobs);
    write_quality_reports(std::slice::from_ref(&report), &a.out, format).runtime()?;
    write_manifest(&sidecar(&a.out), cli, "quality", Some(planner.map()), std::slice::from_ref(&a.out))?;
    println!(
        "{} {}  decisions {}  optimal {:.4}  secure {:.4}  fatal {:.4}  excluded {}",
        report.agent,
        report.config,
        report.decisions,
        report.optimal_frac(),
        report.secure_frac(),
        report.fatal_frac(),
        report.excluded_unsolvable
    );
    Ok(EXIT_OK)
}

fn plan(a: &PlanArgs) -> Result<i32, Failure> {
    let map = load_map(&a.map)?;
    let state = State::new(a.x, a.y, a.vx, a.vy);
    if map.is_wall(state.pos()) {
        return Err(usage_error(format!("{state} is on a wall")));
    }
    let planner = Planner::new(Arc::new(map));
    let Some(plan) = planner.astar(&state) else {
        if a.json {
            println!("{}", serde_json::json!({ "state": state, "solvable": false }));
        } else {
            println!("unsolvable");
        }
        return Ok(EXIT_NEGATIVE);
    };
    if a.json {
        println!("{}", serde_json::json!({ "state": state, "solvable": true, "plan": plan }));
    } else {
        let join = |v: &[crate::track::Action]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        println!("state {state}");
        println!("length {}", plan.length);
        println!("first_actions {}", join(&plan.first_actions));
        println!("witness {}", join(&plan.witness));
    }
    Ok(EXIT_OK)
}

fn render(cli: &Cli, a: &RenderArgs) -> Result<i32, Failure> {
    if a.traces.is_empty() && a.agents.is_empty() {
        return Err(usage_error("nothing to draw; pass --trace or --agent"));
    }
    if a.labels.len() > a.traces.len() {
        return Err(usage_error("more --label values than --trace files"));
    }
    let planner = Arc::new(Planner::new(Arc::new(load_map(&a.map)?)));
    let mut traces = Vec::new();
    for (i, path) in a.traces.iter().enumerate() {
        let label = a.labels.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("trace")
                .to_string()
        });
        traces.push(LabeledTrace {
            label,
            steps: read_trace(path).runtime()?,
        });
    }
    if !a.agents.is_empty() {
        let preset: EvalPreset = a.preset.parse().usage()?;
        let starts = draw_starts(planner.map(), preset, a.run + 1, a.velocity_bound, cli.seed);
        let start = starts[a.run];
        for agent in make_agents(&a.agents, &planner)? {
            let mut rng = episode_rng(cli.seed, a.run, agent.name());
            let trace = run_episode(agent.as_ref(), planner.map(), start, preset.sim_config().noisy, a.step_cap, &mut rng);
            traces.push(LabeledTrace {
                label: agent.name().to_string(),
                steps: trace.steps,
            });
        }
    }
    let svg = render_svg(planner.map(), &traces).runtime()?;
    fs::write(&a.out, svg)
        .map_err(|e| anyhow::anyhow!("{}: {e}", a.out.display()))
        .runtime()?;
    write_manifest(&sidecar(&a.out), cli, "render", Some(planner.map()), std::slice::from_ref(&a.out))?;
    println!("wrote {}", a.out.display());
    Ok(EXIT_OK)
}

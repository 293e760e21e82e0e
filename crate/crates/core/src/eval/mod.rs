//! Paired evaluation of agents over shared start states.

mod agent;
mod episode;
mod quality;
mod report;

use rayon::prelude::*;
use thiserror::Error;

pub use agent::{Agent, ExpertAgent, IdleAgent, ModelAgent, RandomAgent};
pub use episode::{run_episode, EpisodeResult, EpisodeTrace, StepKind, StepRecord};
pub use quality::{action_quality, classify_episode, QualityConfig, QualityCounts, QualityPreset, QualityReport};
pub use report::{
    
    read_quality_reports, read_reports, write_quality_reports, write_reports, ReportFormat,
};

use crate::planner::Planner;
use crate::seed;
use crate::track::{sample_state, SimConfig, State, TrackMap};

pub const DEFAULT_RUNS: usize = 10_000;
pub const DEFAULT_STEP_CAP: usize = 1000;
pub const DEFAULT_GAMMA: f64 = 0.99;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown evaluation preset {0:?}")]
    UnknownPreset(String),
    #[error("quality evaluation needs a deterministic preset, got {0}")]
    NoisyQualityPreset(String),
    #[error("unknown report format {0:?}; expected csv or json")]
    UnknownFormat(String),
    #[error("no agents to evaluate")]
    NoAgents,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
}

/// The six evaluation configurations: start mode, velocity mode, noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalPreset {
    NsZvD,
    NsZvN,
    RsZvD,
    RsZvN,
    RsRvD,
    RsRvN,
}

impl EvalPreset {
    pub const ALL: [EvalPreset; 6] = [
        EvalPreset::NsZvD,
        EvalPreset::NsZvN,
        EvalPreset::RsZvD,
        EvalPreset::RsZvN,
        EvalPreset::RsRvD,
        EvalPreset::RsRvN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvalPreset::NsZvD => "NS-ZV-D",
            EvalPreset::NsZvN => "NS-ZV-N",
            EvalPreset::RsZvD => "RS-ZV-D",
            EvalPreset::RsZvN => "RS-ZV-N",
            EvalPreset::RsRvD => "RS-RV-D",
            EvalPreset::RsRvN => "RS-RV-N",
        }
    }

    pub fn sim_config(self) -> SimConfig {
        let (rs, rv, noisy) = match self {
            EvalPreset::NsZvD => (false, false, false),
            EvalPreset::NsZvN => (false, false, true),
            EvalPreset::RsZvD => (true, false, false),
            EvalPreset::RsZvN => (true, false, true),
            EvalPreset::RsRvD => (true, true, false),
            EvalPreset::RsRvN => (true, true, true),
        };
        SimConfig::new(rs, rv, noisy)
    }
}

impl std::fmt::Display for EvalPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EvalPreset {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EvalError::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub preset: EvalPreset,
    pub runs: usize,
    pub step_cap: usize,
    pub gamma: f64,
    pub seed: u64,
    pub velocity_bound: i32,
}

impl EvalConfig {
    pub fn new(preset: EvalPreset, seed: u64) -> Self {
        Self {
            preset,
            runs: DEFAULT_RUNS,
            step_cap: DEFAULT_STEP_CAP,
            gamma: DEFAULT_GAMMA,
            seed,
            velocity_bound: crate::track::SimConfig::default().velocity_bound,
        }
    }

    pub fn with_runs(mut self, runs: usize) -> Self {
        self.runs = runs;
        self
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub agent: String,
    pub config: String,
    pub runs: usize,
    pub wins: usize,
    pub losses: usize,
    pub timeouts: usize,
    pub win_rate: f64,
    pub loss_rate: f64,
    pub timeout_rate: f64,
    pub avg_return_disc: f64,
    pub avg_return_raw: f64,
    pub avg_steps_wins: Option<f64>,
    pub solvable_start_frac: f64,
}

/// Start states for a configuration; a pure function of the seed, preset and
/// run count, so every agent sees the same list.
pub fn draw_starts(map: &TrackMap, preset: EvalPreset, runs: usize, velocity_bound: i32, master: u64) -> Vec<State> {
    let mut cfg = preset.sim_config();
    cfg.velocity_bound = velocity_bound;
    let mut rng = seed::stream(master, &[seed::label("eval-starts"), seed::label(preset.name())]);
    (0..runs).map(|_| sample_state(map, &cfg, &mut rng)).collect()
}

pub fn episode_rng(master: u64, run: usize, agent: &str) -> seed::Rng {
    seed::stream(master, &[seed::label("eval-episode"), run as u64, seed::label(agent)])
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
}

#[derive(Clone, Copy)]
struct RunSummary {
    result: EpisodeResult,
    steps: usize,
    raw: f64,
    disc: f64,
}

/// Evaluates every agent on the same pre-drawn starts. Per-run results are
/// collected in run order before summation, so `jobs` never changes a report.
pub fn evaluate_agents(
    agents: &[&dyn Agent],
    planner: &Planner,
    config: &EvalConfig,
    jobs: usize,
) -> Result<Vec<EvalReport>, EvalError> {
    if agents.is_empty() {
        return Err(EvalError::NoAgents);
    }
    let map = planner.map();
    let starts = draw_starts(map, config.preset, config.runs, config.velocity_bound, config.seed);
    let noisy = config.preset.sim_config().noisy;
    let pool = pool(jobs);
    let solvable: Vec<bool> = pool.install(|| starts.par_iter().map(|s| planner.is_solvable(s)).collect());
    let solvable_frac = if starts.is_empty() {
        0.0
    } else {
        solvable.iter().filter(|&&b| b).count() as f64 / starts.len() as f64
    };

    let mut reports = Vec::with_capacity(agents.len());
    for agent in agents {
        let runs: Vec<RunSummary> = pool.install(|| {
            starts
                .par_iter()
                .enumerate()
                .map(|(i, &start)| {
                    let mut rng = episode_rng(config.seed, i, agent.name());
                    let trace = run_episode(*agent, map, start, noisy, config.step_cap, &mut rng);
                    RunSummary {
                        result: trace.result,
                        steps: trace.len(),
                        raw: trace.undiscounted_return(),
                        disc: trace.discounted_return(config.gamma),
                    }
                })
                .collect()
        });
        reports.push(summarize(agent.name(), config.preset, &runs, solvable_frac));
    }
    Ok(reports)
}

fn summarize(agent: &str, preset: EvalPreset, runs: &[RunSummary], solvable_frac: f64) -> EvalReport {
    let n = runs.len();
    let (mut wins, mut losses, mut timeouts) = (0, 0, 0);
    let (mut raw, mut disc, mut win_steps) = (0.0, 0.0, 0usize);
    for r in runs {
        match r.result {
            EpisodeResult::Win => {
                wins += 1;
                win_steps += r.steps;
            }
            EpisodeResult::Loss => losses += 1,
            EpisodeResult::Timeout => timeouts += 1,
        }
        raw += r.raw;
        disc += r.disc;
    }
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    EvalReport {
        agent: agent.to_string(),
        config: preset.name().to_string(),
        runs: n,
        wins,
        losses,
        timeouts,
        win_rate: rate(wins),
        loss_rate: rate(losses),
        timeout_rate: rate(timeouts),
        avg_return_disc: if n == 0 { 0.0 } else { disc / n as f64 },
        avg_return_raw: if n == 0 { 0.0 } else { raw / n as f64 },
        avg_steps_wins: (wins > 0).then(|| win_steps as f64 / wins as f64),
        solvable_start_frac: solvable_frac,
    }
}

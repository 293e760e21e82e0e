use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{draw_starts, pool, run_episode, Agent, EvalError, EvalPreset, DEFAULT_STEP_CAP};
use crate::planner::{ActionQuality, Planner};
use crate::seed;
use crate::track::State;

/// Deterministic start configurations for per-action classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityPreset {
    NsZv,
    RsZv,
    RsRv,
}

impl QualityPreset {
    pub const ALL: [QualityPreset; 3] = [QualityPreset::NsZv, QualityPreset::RsZv, QualityPreset::RsRv];

    pub fn name(self) -> &'static str {
        match self {
            QualityPreset::NsZv => "NS-ZV",
            QualityPreset::RsZv => "RS-ZV",
            QualityPreset::RsRv => "RS-RV",
        }
    }

    /// The deterministic evaluation preset sharing this start distribution.
    pub fn eval_preset(self) -> EvalPreset {
        match self {
            QualityPreset::NsZv => EvalPreset::NsZvD,
            QualityPreset::RsZv => EvalPreset::RsZvD,
            QualityPreset::RsRv => EvalPreset::RsRvD,
        }
    }
}

impl std::str::FromStr for QualityPreset {
    type Err = EvalError;

    /// Accepts "NS-ZV" as well as the "-D" spelling; noisy presets are rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(p) = Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s)) {
            return Ok(p);
        }
        let full: EvalPreset = s.parse()?;
        if full.sim_config().noisy {
            return Err(EvalError::NoisyQualityPreset(full.name().to_string()));
        }
        Ok(Self::ALL.into_iter().find(|p| p.eval_preset() == full).expect("every deterministic preset has a quality preset"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityConfig {
    pub preset: QualityPreset,
    pub runs: usize,
    pub step_cap: usize,
    pub seed: u64,
    pub velocity_bound: i32,
}

impl QualityConfig {
    pub fn new(preset: QualityPreset, runs: usize, seed: u64) -> Self {
        Self {
            preset,
            runs,
            step_cap: DEFAULT_STEP_CAP,
            seed,
            velocity_bound: crate::track::SimConfig::default().velocity_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QualityCounts {
    pub optimal: usize,
    pub secure: usize,
    pub fatal: usize,
    pub excluded_unsolvable: usize,
}

impl QualityCounts {
    pub fn decisions(&self) -> usize {
        self.optimal + self.secure + self.fatal
    }

    fn add(&mut self, other: &QualityCounts) {
        self.optimal += other.optimal;
        self.secure += other.secure;
        self.fatal += other.fatal;
        self.excluded_unsolvable += other.excluded_unsolvable;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub agent: String,
    pub config: String,
    pub decisions: usize,
    pub optimal: usize,
    pub secure: usize,
    pub fatal: usize,
    pub excluded_unsolvable: usize,
}

impl QualityReport {
    fn frac(&self, k: usize) -> f64 {
        if self.decisions == 0 {
            0.0
        } else {
            k as f64 / self.decisions as f64
        }
    }

    pub fn optimal_frac(&self) -> f64 {
        self.frac(self.optimal)
    }

    pub fn secure_frac(&self) -> f64 {
        self.frac(self.secure)
    }

    pub fn fatal_frac(&self) -> f64 {
        self.frac(self.fatal)
    }
}

/// Runs one deterministic episode and classifies every decision made in a
/// solvable state.
pub fn classify_episode(
    agent: &dyn Agent,
    planner: &Planner,
    start: State,
    step_cap: usize,
    rng: &mut dyn RngCore,
) -> QualityCounts {
    let trace = run_episode(agent, planner.map(), start, false, step_cap, rng);
    let mut counts = QualityCounts::default();
    for step in &trace.steps {
        let action = step.action().expect("recorded actions are valid");
        match planner.classify_action(&step.state(), action) {
            Ok(ActionQuality::Optimal) => counts.optimal += 1,
            Ok(ActionQuality::Secure) => counts.secure += 1,
            Ok(ActionQuality::Fatal) => counts.fatal += 1,
            Err(_) => counts.excluded_unsolvable += 1,
        }
    }
    counts
}

pub fn action_quality(
    agent: &dyn Agent,
    planner: &Planner,
    config: &QualityConfig,
    jobs: usize,
) -> QualityReport {
    let starts = draw_starts(
        planner.map(),
        config.preset.eval_preset(),
        config.runs,
        config.velocity_bound,
        config.seed,
    );
    let per_run: Vec<QualityCounts> = pool(jobs).install(|| {
        starts
            .par_iter()
            .enumerate()
            .map(|(i, &start)| {
                let mut rng = seed::stream(
                    config.seed,
                    &[seed::label("quality-episode"), i as u64, seed::label(agent.name())],
                );
                classify_episode(agent, planner, start, config.step_cap, &mut rng)
            })
            .collect()
    });
    let mut total = QualityCounts::default();
    for c in &per_run {
        total.add(c);
    }
    QualityReport {
        agent: agent.name().to_string(),
        config: config.preset.name().to_string(),
        decisions: total.decisions(),
        optimal: total.optimal,
        secure: total.secure,
        fatal: total.fatal,
        excluded_unsolvable: total.excluded_unsolvable,
    }
}

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Agent;
use crate::track::{apply_action, encode_features, Action, Outcome, State, TrackMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Moved,
    Goal,
    Crash,
}

/// One step of an episode trace: the state acted in, the chosen action and
/// what happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub x: i32,
    pub y: i32,
    pub vx: i32,
    pub vy: i32,
    pub ax: i32,
    pub ay: i32,
    pub noise_applied: bool,
    pub outcome: StepKind,
    pub reward: i32,
}

impl StepRecord {
    pub fn state(&self) -> State {
        State::new(self.x, self.y, self.vx, self.vy)
    }

    pub fn action(&self) -> Option<Action> {
        Action::new(self.ax, self.ay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeResult {
    Win,
    Loss,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub start: State,
    pub steps: Vec<StepRecord>,
    pub result: EpisodeResult,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn undiscounted_return(&self) -> f64 {
        self.steps.iter().map(|s| f64::from(s.reward)).sum()
    }

    /// `sum_t gamma^t r_{t+1}`: the reward of the step taken at `t` is discounted by `gamma^t`.
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        let mut w = 1.0;
        for s in &self.steps {
            g += w * f64::from(s.reward);
            w *= gamma;
        }
        g
    }
}

/// Runs `agent` from `start` until it wins, crashes, or has taken `step_cap` steps.
pub fn run_episode(
    agent: &dyn Agent,
    map: &TrackMap,
    start: State,
    noisy: bool,
    step_cap: usize,
    rng: &mut dyn RngCore,
) -> EpisodeTrace {
    let mut steps = Vec::new();
    let mut state = start;
    let mut result = EpisodeResult::Timeout;
    while steps.len() < step_cap {
        let features = encode_features(map, &state);
        let action = agent.act(&state, &features, rng);
        let t = apply_action(map, &state, action, noisy, rng);
        let outcome = match t.step.outcome {
            Outcome::Moved(_) => StepKind::Moved,
            Outcome::ReachedGoal => StepKind::Goal,
            Outcome::Crashed => StepKind::Crash,
        };
        steps.push(StepRecord {
            x: state.x,
            y: state.y,
            vx: state.vx,
            vy: state.vy,
            ax: i32::from(action.ax),
            ay: i32::from(action.ay),
            noise_applied: t.noise_applied,
            outcome,
            reward: t.reward,
        });
        match t.step.outcome {
            Outcome::Moved(next) => state = next,
            Outcome::ReachedGoal => {
                result = EpisodeResult::Win;
                break;
            }
            Outcome::Crashed => {
                result = EpisodeResult::Loss;
                break;
            }
        }
    }
    EpisodeTrace { start, steps, result }
}

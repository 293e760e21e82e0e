use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CheckpointSet, ReplayBuffer, StoredTransition, TrainError};
use crate::models::{greedy_index, Mlp, Model, ModelError, Target};
use crate::track::{apply_action, encode_features, sample_state, Action, Outcome, SimConfig, TrackMap};

/// Episodes averaged for the progress curve and for picking the best snapshot.
pub const TRAILING_WINDOW: usize = 100;

/// Training environment: start line or random start (always at rest), dry or wet road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DqnMode {
    #[serde(rename = "NS-D")]
    NsD,
    #[serde(rename = "NS-N")]
    NsN,
    #[serde(rename = "RS-D")]
    RsD,
    #[serde(rename = "RS-N")]
    RsN,
}

impl DqnMode {
    pub const ALL: [DqnMode; 4] = [DqnMode::NsD, DqnMode::NsN, DqnMode::RsD, DqnMode::RsN];

    pub fn name(self) -> &'static str {
        match self {
            DqnMode::NsD => "NS-D",
            DqnMode::NsN => "NS-N",
            DqnMode::RsD => "RS-D",
            DqnMode::RsN => "RS-N",
        }
    }

    pub fn sim_config(self) -> SimConfig {
        let (rs, noisy) = match self {
            DqnMode::NsD => (false, false),
            DqnMode::NsN => (false, true),
            DqnMode::RsD => (true, false),
            DqnMode::RsN => (true, true),
        };
        SimConfig::new(rs, false, noisy)
    }
}

impl std::fmt::Display for DqnMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DqnMode {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TrainError::InvalidConfig(format!("unknown DQN mode {s:?}; expected NS-D, NS-N, RS-D or RS-N")))
    }
}

/// Exploration rate per episode: `eps_{i+1} = max(eps_i * decay, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub decay: f64,
    pub floor: f64,
}

impl EpsilonSchedule {
    /// The iterated update, as used during training.
    pub fn iter(self) -> impl Iterator<Item = f64> {
        std::iter::successors(Some(self.start), move |&e| Some((e * self.decay).max(self.floor)))
    }

    /// `max(start * decay^i, floor)`.
    pub fn closed_form(&self, i: usize) -> f64 {
        (self.start * self.decay.powf(i as f64)).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub mode: DqnMode,
    pub buffer_capacity: usize,
    pub episodes: usize,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub batch_size: usize,
    pub target_sync_interval: usize,
    pub step_size: f64,
    pub step_cap: usize,
    /// Multiplier applied to rewards inside the regression targets only;
    /// recorded returns stay in game units.
    pub reward_scale: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            mode: DqnMode::NsD,
            buffer_capacity: 100_000,
            episodes: 100_000,
            gamma: 0.99,
            epsilon: EpsilonSchedule {
                start: 1.0,
                decay: 0.999,
                floor: 1e-4,
            },
            batch_size: 32,
            target_sync_interval: 500,
            step_size: 1e-3,
            step_cap: 1000,
            reward_scale: 0.01,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        let e = &self.epsilon;
        if !((0.0..=1.0).contains(&e.start) && (0.0..=1.0).contains(&e.decay) && (0.0..=1.0).contains(&e.floor)) {
            return bad("epsilon start, decay and floor must lie in [0, 1]");
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 || self.target_sync_interval == 0 || self.step_cap == 0 {
            return bad("buffer_capacity, batch_size, target_sync_interval and step_cap must be at least 1");
        }
        if self.batch_size > self.buffer_capacity {
            return bad("batch_size exceeds buffer_capacity");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad("reward_scale must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    #[serde(rename = "return")]
    pub return_raw: f64,
    pub return_disc: f64,
    pub steps: usize,
    pub epsilon: f64,
    /// Mean undiscounted return of the last `TRAILING_WINDOW` episodes; absent
    /// until that many have been played (or, for shorter runs, until the last one).
    pub trailing100: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DqnRun {
    pub checkpoints: CheckpointSet,
    pub trace: Vec<EpisodeRecord>,
    pub best_episode: usize,
    pub best_trailing: f64,
    pub gradient_steps: usize,
}

/// Regression targets: `r` for terminal transitions, otherwise
/// `r + gamma * max_a Q(s', a; target)`.
pub fn dqn_targets(batch: &[&StoredTransition], target: &Mlp, gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                t.reward
            } else {
                let q = target.forward_unchecked(t.next.as_slice());
                t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

fn diverged(loss: f64, best: &Option<Mlp>) -> TrainError {
    let mut kept = CheckpointSet::new();
    if let Some(m) = best {
        kept.push("best", Model::Mlp(m.clone())).expect("single tag");
    }
    TrainError::Diverged {
        reason: format!("non-finite loss {loss}"),
        kept,
    }
}

/// Deep Q-learning with experience replay and a periodically synchronised target network.
pub fn dqn_train<R: Rng + ?Sized>(map: &TrackMap, config: &DqnConfig, rng: &mut R) -> Result<DqnRun, TrainError> {
    config.validate()?;
    let sim = config.mode.sim_config();
    let mut online = Mlp::new(rng);
    let mut target = online.clone();
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut trace = Vec::with_capacity(config.episodes);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(TRAILING_WINDOW);
    let mut window_sum = 0.0;
    let first_eligible = TRAILING_WINDOW.min(config.episodes);
    let mut best: Option<Mlp> = None;
    let (mut best_episode, mut best_trailing) = (0, f64::NEG_INFINITY);
    let mut gradient_steps = 0usize;
    let mut epsilons = config.epsilon.iter();

    for episode in 1..=config.episodes {
        let epsilon = epsilons.next().expect("endless schedule");
        let mut state = sample_state(map, &sim, rng);
        let (mut ret, mut ret_disc, mut discount, mut steps) = (0.0, 0.0, 1.0, 0);
        while steps < config.step_cap {
            let features = encode_features(map, &state);
            let action = if rng.gen::<f64>() < epsilon {
                rng.gen_range(0..Action::COUNT)
            } else {
                greedy_index(&online.forward_unchecked(features.as_slice()))
            };
            let t = apply_action(map, &state, Action::from_index(action), sim.noisy, rng);
            let reward = f64::from(t.reward);
            steps += 1;
            ret += reward;
            ret_disc += discount * reward;
            discount *= config.gamma;
            let next = match t.step.outcome {
                Outcome::Moved(s) => Some(s),
                _ => None,
            };
            buffer.push(StoredTransition {
                features,
                action,
                reward: reward * config.reward_scale,
                next: next.map_or(features, |s| encode_features(map, &s)),
                terminal: next.is_none(),
            });

            if buffer.len() >= config.batch_size {
                let batch = buffer.sample(config.batch_size, rng)?;
                let ys = dqn_targets(&batch, &target, config.gamma);
                let pairs: Vec<(&[f64], Target<'_>)> = batch
                    .iter()
                    .zip(&ys)
                    .map(|(t, &y)| (t.features.as_slice(), Target::Single { index: t.action, value: y }))
                    .collect();
                match online.train_step(&pairs, config.step_size) {
                    Ok(_) => {}
                    Err(ModelError::NonFiniteLoss(l)) => return Err(diverged(l, &best)),
                    Err(e) => return Err(e.into()),
                }
                gradient_steps += 1;
                if gradient_steps % config.target_sync_interval == 0 {
                    target = online.clone();
                }
            }

            match next {
                Some(s) => state = s,
                None => break,
            }
        }

        if window.len() == TRAILING_WINDOW {
            window_sum -= window.pop_front().expect("full window");
        }
        window.push_back(ret);
        window_sum += ret;
        let trailing = (episode >= first_eligible).then(|| window_sum / window.len() as f64);
        if let Some(avg) = trailing {
            if avg > best_trailing {
                best_trailing = avg;
                best_episode = episode;
                best = Some(online.clone());
            }
        }
        trace.push(EpisodeRecord {
            episode,
            return_raw: ret,
            return_disc: ret_disc,
            steps,
            epsilon,
            trailing100: trailing,
        });
    }

    let mut checkpoints = CheckpointSet::new();
    let final_model = online;
    checkpoints.push("best", Model::Mlp(best.unwrap_or_else(|| final_model.clone())))?;
    checkpoints.push("final", Model::Mlp(final_model))?;
    Ok(DqnRun {
        checkpoints,
        trace,
        best_episode,
        best_trailing,
        gradient_steps,
    })
}

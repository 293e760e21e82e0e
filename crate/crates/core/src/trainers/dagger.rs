use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pil::{fit_epochs, PilConfig};
use super::{numbered_tag, CheckpointSet, TrainError};
use crate::datagen::LabeledSample;
use crate::eval::{run_episode, ModelAgent};
use crate::models::{Mlp, Model, ModelError};
use crate::planner::Planner;
use crate::track::{encode_features, sample_initial_state, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DaggerConfig {
    pub iterations: usize,
    pub samples_per_iteration: usize,
    pub epochs_per_iteration: usize,
    pub pretrain_epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
    /// Start distribution and noise of the rollouts.
    pub rollout: SimConfig,
    pub step_cap: usize,
}

impl Default for DaggerConfig {
    fn default() -> Self {
        let pil = PilConfig::default();
        Self {
            iterations: 20,
            samples_per_iteration: 5000,
            epochs_per_iteration: 8,
            pretrain_epochs: 8,
            step_size: pil.step_size,
            batch_size: pil.batch_size,
            rollout: SimConfig::default(),
            step_cap: 1000,
        }
    }
}

impl DaggerConfig {
    fn pil(&self) -> PilConfig {
        PilConfig {
            max_epochs: self.epochs_per_iteration.max(self.pretrain_epochs).max(1),
            step_size: self.step_size,
            batch_size: self.batch_size,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.pil().validate()?;
        self.rollout.validate()?;
        if self.iterations == 0 || self.samples_per_iteration == 0 || self.epochs_per_iteration == 0 {
            return Err(TrainError::InvalidConfig(
                "iterations, samples_per_iteration and epochs_per_iteration must be at least 1".into(),
            ));
        }
        if self.step_cap == 0 {
            return Err(TrainError::InvalidConfig("step_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub iteration: usize,
    pub visited: usize,
    pub skipped_unsolvable: usize,
    pub aggregate_size: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct DaggerRun {
    /// The network trained on the pretrain set only.
    pub pretrained: Mlp,
    pub checkpoints: CheckpointSet,
    pub rounds: Vec<RoundStats>,
    pub aggregate: Vec<LabeledSample>,
}

fn fit_fresh<R: Rng + ?Sized>(
    data: &[LabeledSample],
    epochs: usize,
    pil: &PilConfig,
    rng: &mut R,
) -> Result<(Mlp, f64), ModelError> {
    let mut mlp = Mlp::new(rng);
    let mut last = f64::NAN;
    fit_epochs(&mut mlp, data, epochs, pil, rng, |_, _, loss| {
        last = loss;
        Ok(())
    })?;
    Ok((mlp, last))
}

/// Dataset aggregation with the learner in full control of the rollouts.
pub fn train_dagger<R: Rng + ?Sized>(
    planner: &Planner,
    pretrain: &[LabeledSample],
    config: &DaggerConfig,
    rng: &mut R,
) -> Result<DaggerRun, TrainError> {
    config.validate()?;
    if pretrain.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let pil = config.pil();
    let map = planner.map();
    let mut checkpoints = CheckpointSet::new();
    let diverged = |e: ModelError, kept: &CheckpointSet| match e {
        ModelError::NonFiniteLoss(l) => TrainError::Diverged {
            reason: format!("non-finite loss {l}"),
            kept: kept.clone(),
        },
        e => e.into(),
    };

    let (pretrained, _) = fit_fresh(pretrain, config.pretrain_epochs, &pil, rng).map_err(|e| diverged(e, &checkpoints))?;
    let mut current = pretrained.clone();
    let mut aggregate = pretrain.to_vec();
    let mut rounds = Vec::with_capacity(config.iterations);

    for iteration in 1..=config.iterations {
        let agent = ModelAgent::mlp("dagger", current);
        let mut visited = Vec::with_capacity(config.samples_per_iteration);
        while visited.len() < config.samples_per_iteration {
            let start = sample_initial_state(map, &config.rollout, rng, |s| planner.is_solvable(s))?;
            let mut episode_rng = &mut *rng;
            let trace = run_episode(&agent, map, start, config.rollout.noisy, config.step_cap, &mut episode_rng);
            let room = config.samples_per_iteration - visited.len();
            visited.extend(trace.steps.iter().take(room).map(|s| s.state()));
        }
        let mut skipped = 0;
        for state in &visited {
            match planner.best_action(state) {
                Some(a) => aggregate.push(LabeledSample {
                    state: *state,
                    features: encode_features(map, state),
                    labels: vec![a],
                }),
                None => skipped += 1,
            }
        }
        let (mlp, final_loss) =
            fit_fresh(&aggregate, config.epochs_per_iteration, &pil, rng).map_err(|e| diverged(e, &checkpoints))?;
        checkpoints
            .push(numbered_tag("iter", iteration), Model::Mlp(mlp.clone()))
            .expect("round tags are distinct");
        rounds.push(RoundStats {
            iteration,
            visited: visited.len(),
            skipped_unsolvable: skipped,
            aggregate_size: aggregate.len(),
            final_loss,
        });
        current = mlp;
    }
    Ok(DaggerRun {
        pretrained,
        checkpoints,
        rounds,
        aggregate,
    })
}

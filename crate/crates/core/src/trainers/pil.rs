use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{numbered_tag, CheckpointSet, TrainError};
use crate::datagen::{target_vector, LabeledSample};
use crate::models::{fit_linear, greedy_index, LinearKind, LinearModel, Mlp, Model, ModelError, Target};
use crate::track::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PilConfig {
    pub max_epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
}

impl Default for PilConfig {
    fn default() -> Self {
        Self {
            max_epochs: 20,
            step_size: 1e-2,
            batch_size: 32,
        }
    }
}

impl PilConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.max_epochs == 0 {
            return Err(TrainError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(TrainError::InvalidConfig("step_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Fraction of samples whose greedy action is among the labels, after the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct PilRun {
    pub initial: Mlp,
    pub checkpoints: CheckpointSet,
    pub epochs: Vec<EpochStats>,
}

impl PilRun {
    /// Checkpoint with the highest training accuracy; earliest on ties.
    pub fn best_by_accuracy(&self) -> Option<&Model> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.epochs.iter().enumerate() {
            if best.is_none_or(|(_, a)| e.accuracy > a) {
                best = Some((i, e.accuracy));
            }
        }
        best.and_then(|(i, _)| self.checkpoints.iter().nth(i).map(|c| &c.model))
    }
}

pub(crate) fn accuracy(mlp: &Mlp, samples: &[LabeledSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| {
            let out = mlp.forward_unchecked(s.features.as_slice());
            s.labels.contains(&Action::from_index(greedy_index(&out)))
        })
        .count();
    hits as f64 / samples.len() as f64
}

/// Runs `epochs` shuffled mini-batch passes over `samples`, calling `on_epoch`
/// after each one. A non-finite loss stops training before the failing update
/// is applied.
pub(crate) fn fit_epochs<R, F>(
    mlp: &mut Mlp,
    samples: &[LabeledSample],
    epochs: usize,
    config: &PilConfig,
    rng: &mut R,
    mut on_epoch: F,
) -> Result<(), ModelError>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &Mlp, f64) -> Result<(), ModelError>,
{
    let targets: Vec<[f64; Action::COUNT]> = samples.iter().map(|s| target_vector(&s.labels)).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 1..=epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], Target<'_>)> = chunk
                .iter()
                .map(|&i| (samples[i].features.as_slice(), Target::Full(&targets[i])))
                .collect();
            loss_sum += mlp.train_step(&batch, config.step_size)?;
            batches += 1;
        }
        on_epoch(epoch, mlp, loss_sum / batches as f64)?;
    }
    Ok(())
}

/// Passive imitation: regress one-/multi-hot expert labels, one checkpoint per epoch.
pub fn train_pil<R: Rng + ?Sized>(
    samples: &[LabeledSample],
    config: &PilConfig,
    rng: &mut R,
) -> Result<PilRun, TrainError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let initial = Mlp::new(rng);
    let mut mlp = initial.clone();
    let mut checkpoints = CheckpointSet::new();
    let mut epochs = Vec::with_capacity(config.max_epochs);
    let result = fit_epochs(&mut mlp, samples, config.max_epochs, config, rng, |epoch, m, mean_loss| {
        epochs.push(EpochStats {
            epoch,
            mean_loss,
            accuracy: accuracy(m, samples),
        });
        checkpoints
            .push(numbered_tag("epoch", epoch), Model::Mlp(m.clone()))
            .expect("epoch tags are distinct");
        Ok(())
    });
    match result {
        Ok(()) => Ok(PilRun {
            initial,
            checkpoints,
            epochs,
        }),
        Err(ModelError::NonFiniteLoss(l)) => Err(TrainError::Diverged {
            reason: format!("non-finite loss {l}"),
            kept: checkpoints,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Fits a linear classifier on the first label of each sample.
pub fn train_linear(kind: LinearKind, samples: &[LabeledSample]) -> Result<LinearModel, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let pairs: Vec<_> = samples.iter().map(|s| (s.features, s.labels[0].index())).collect();
    Ok(fit_linear(kind, &pairs)?)
}

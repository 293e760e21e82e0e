//! Imitation and reinforcement-learning pipelines producing checkpointed agents.

mod dagger;
mod dqn;
mod pil;
mod replay;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use dagger::{train_dagger, DaggerConfig, DaggerRun, RoundStats};
pub use dqn::{
    dqn_targets, dqn_train, DqnConfig, DqnMode, DqnRun, EpisodeRecord, EpsilonSchedule, TRAILING_WINDOW,
};
pub use pil::{train_linear, train_pil, EpochStats, PilConfig, PilRun};
pub use replay::{ReplayBuffer, StoredTransition};

use crate::models::{save_model, Model, ModelError};
use crate::track::SimError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training data is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("replay buffer holds {have} transitions, {need} requested")]
    BufferUnderfilled { have: usize, need: usize },
    #[error("duplicate checkpoint tag {0:?}")]
    DuplicateTag(String),
    #[error("training diverged ({reason}); {} checkpoint(s) kept", kept.len())]
    Diverged { reason: String, kept: CheckpointSet },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tag: String,
    pub model: Model,
}

/// Tagged models in the order they were produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckpointSet {
    entries: Vec<Checkpoint>,
}

impl CheckpointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tag: impl Into<String>, model: Model) -> Result<(), TrainError> {
        let tag = tag.into();
        if self.get(&tag).is_some() {
            return Err(TrainError::DuplicateTag(tag));
        }
        self.entries.push(Checkpoint { tag, model });
        Ok(())
    }

    pub fn get(&self, tag: &str) -> Option<&Model> {
        self.entries.iter().find(|c| c.tag == tag).map(|c| &c.model)
    }

    pub fn tags(&self) -> Vec<&str> {
        self.entries.iter().map(|c| c.tag.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Checkpoint> {
        self.entries.iter()
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.entries.last()
    }

    /// Writes `<dir>/<tag>.json` for every checkpoint.
    pub fn save_all(&self, dir: &Path) -> Result<Vec<PathBuf>, ModelError> {
        std::fs::create_dir_all(dir).map_err(|e| ModelError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let mut paths = Vec::with_capacity(self.entries.len());
        for c in &self.entries {
            let path = dir.join(format!("{}.json", c.tag));
            save_model(&c.model, &path)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Tag of the `k`-th (1-based) epoch or round checkpoint.
pub(crate) fn numbered_tag(prefix: &str, k: usize) -> String {
    format!("{prefix}-{k:02}")
}

#[cfg(test)]
mod tests;

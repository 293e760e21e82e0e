use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::models::{greedy_action, LinearModel, Mlp, Model};
use crate::planner::Planner;
use crate::track::{Action, FeatureVector, State};

/// A policy queried once per step. `rng` is the episode's own stream.
pub trait Agent: Send + Sync {
    fn name(&self) -> &str;
    fn act(&self, state: &State, features: &FeatureVector, rng: &mut dyn RngCore) -> Action;
}

/// Follows the planner's canonical-first optimal action; idles where no plan exists.
pub struct ExpertAgent {
    planner: Arc<Planner>,
}

impl ExpertAgent {
    pub fn new(planner: Arc<Planner>) -> Self {
        Self { planner }
    }
}

impl Agent for ExpertAgent {
    fn name(&self) -> &str {
        "expert"
    }

    fn act(&self, state: &State, _: &FeatureVector, _: &mut dyn RngCore) -> Action {
        self.planner.best_action(state).unwrap_or(Action::IDLE)
    }
}

pub struct RandomAgent;

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&self, _: &State, _: &FeatureVector, rng: &mut dyn RngCore) -> Action {
        Action::from_index(rng.gen_range(0..Action::COUNT))
    }
}

pub struct IdleAgent;

impl Agent for IdleAgent {
    fn name(&self) -> &str {
        "idle"
    }

    fn act(&self, _: &State, _: &FeatureVector, _: &mut dyn RngCore) -> Action {
        Action::IDLE
    }
}

/// Greedy policy of a trained model.
pub struct ModelAgent {
    name: String,
    model: Model,
}

impl ModelAgent {
    pub fn new(name: impl Into<String>, model: Model) -> Self {
        Self {
            name: name.into(),
            model,
        }
    }

    pub fn mlp(name: impl Into<String>, mlp: Mlp) -> Self {
        Self::new(name, Model::Mlp(mlp))
    }

    pub fn linear(name: impl Into<String>, model: LinearModel) -> Self {
        Self::new(name, Model::Linear(model))
    }

    pub fn model(&self) -> &Model {
        &self.model
    }
}

impl Agent for ModelAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&self, _: &State, features: &FeatureVector, _: &mut dyn RngCore) -> Action {
        match &self.model {
            Model::Mlp(mlp) => greedy_action(&mlp.scores(features).expect("loaded networks have 15 inputs and 9 outputs")),
            Model::Linear(m) => m.predict(features),
        }
    }
}

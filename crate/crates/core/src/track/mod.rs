//! The Racetrack MDP: maps, states, actions, the trajectory discretization
//! used for collision and goal detection, rewards, simulation variants and the
//! 15-feature state encoding.

mod dynamics;
mod features;
mod map;
mod sim;
mod trajectory;

pub(crate) use dynamics::successor as dynamics_successor;
pub use dynamics::{
    apply_action, step_outcome, Action, Outcome, State, StepOutcome, Transition, CRASH_REWARD,
    GOAL_REWARD, NOISE_PROBABILITY,
};
pub use features::{encode_features, FeatureVector, FEATURE_COUNT};
pub use map::{builtin, Cell, MapError, TrackMap, BUILTIN_MAPS};
pub use sim::{sample_initial_state, sample_state, SimConfig, SimError, MAX_SAMPLE_ATTEMPTS};
pub use trajectory::{compute_trajectory, Trajectory, TrajectoryIter};

/// Integer cell coordinate; `x` is the column, `y` the row (growing downward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

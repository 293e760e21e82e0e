use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{State, TrackMap};

/// Rejection-sampling budget for solvable random-velocity starts.
pub const MAX_SAMPLE_ATTEMPTS: usize = 100_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("normal start with random velocity is not a supported configuration")]
    NormalStartRandomVelocity,
    #[error("no solvable start state found in {0} attempts")]
    NoSolvableState(usize),
}

/// Simulation variant: start line vs anywhere (NS/RS), zero vs random
/// velocity (ZV/RV), deterministic vs noisy road (D/N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub random_start: bool,
    pub random_velocity: bool,
    pub noisy: bool,
    /// Per-component bound for random velocities.
    pub velocity_bound: i32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            random_start: false,
            random_velocity: false,
            noisy: false,
            velocity_bound: 5,
        }
    }
}

impl SimConfig {
    pub fn new(random_start: bool, random_velocity: bool, noisy: bool) -> Self {
        Self {
            random_start,
            random_velocity,
            noisy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.random_velocity && !self.random_start {
            return Err(SimError::NormalStartRandomVelocity);
        }
        Ok(())
    }
}

/// Draws a start state without any solvability filtering.
pub fn sample_state<R: Rng + ?Sized>(map: &TrackMap, config: &SimConfig, rng: &mut R) -> State {
    let cells = if config.random_start {
        map.traversable()
    } else {
        map.starts()
    };
    let p = *cells.choose(rng).expect("maps have start cells");
    if config.random_velocity {
        let b = config.velocity_bound;
        State::new(p.x, p.y, rng.gen_range(-b..=b), rng.gen_range(-b..=b))
    } else {
        State::at_rest(p)
    }
}

/// Draws an initial state. Random-velocity draws are resampled until
/// `solvable` accepts them.
pub fn sample_initial_state<R, F>(
    map: &TrackMap,
    config: &SimConfig,
    rng: &mut R,
    solvable: F,
) -> Result<State, SimError>
where
    R: Rng + ?Sized,
    F: Fn(&State) -> bool,
{
    config.validate()?;
    if !config.random_velocity {
        return Ok(sample_state(map, config, rng));
    }
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let s = sample_state(map, config, rng);
        if solvable(&s) {
            return Ok(s);
        }
    }
    Err(SimError::NoSolvableState(MAX_SAMPLE_ATTEMPTS))
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trajectory::{Trajectory, TrajectoryIter};
use super::{Cell, Pos, TrackMap};

pub const GOAL_REWARD: i32 = 100;
pub const CRASH_REWARD: i32 = -50;
/// Chance that the chosen acceleration is replaced by `(0, 0)` on a noisy road.
pub const NOISE_PROBABILITY: f64 = 0.1;

/// Position and velocity of the car.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    pub x: i32,
    pub y: i32,
    pub vx: i32,
    pub vy: i32,
}

impl State {
    pub const fn new(x: i32, y: i32, vx: i32, vy: i32) -> Self {
        Self { x, y, vx, vy }
    }

    pub const fn at_rest(p: Pos) -> Self {
        Self::new(p.x, p.y, 0, 0)
    }

    pub fn pos(&self) -> Pos {
        Pos::new(self.x, self.y)
    }
}

impl std::fmt::Display for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, v=({}, {}))", self.x, self.y, self.vx, self.vy)
    }
}

/// An acceleration in `{-1, 0, 1}^2`.
///
/// Actions are indexed `0..9` in lexicographic `(ax, ay)` order, so index 0
/// is `(-1, -1)`, index 4 is `(0, 0)` and index 8 is `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub ax: i8,
    pub ay: i8,
}

impl Action {
    pub const COUNT: usize = 9;
    pub const IDLE: Action = Action { ax: 0, ay: 0 };
    pub const ALL: [Action; 9] = [
        Action { ax: -1, ay: -1 },
        Action { ax: -1, ay: 0 },
        Action { ax: -1, ay: 1 },
        Action { ax: 0, ay: -1 },
        Action { ax: 0, ay: 0 },
        Action { ax: 0, ay: 1 },
        Action { ax: 1, ay: -1 },
        Action { ax: 1, ay: 0 },
        Action { ax: 1, ay: 1 },
    ];

    /// Returns `None` unless both components are in `{-1, 0, 1}`.
    pub fn new(ax: i32, ay: i32) -> Option<Self> {
        if (-1..=1).contains(&ax) && (-1..=1).contains(&ay) {
            Some(Self {
                ax: ax as i8,
                ay: ay as i8,
            })
        } else {
            None
        }
    }

    pub fn index(self) -> usize {
        ((self.ax + 1) * 3 + (self.ay + 1)) as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.ax, self.ay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Moved(State),
    ReachedGoal,
    Crashed,
}

impl Outcome {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Outcome::Moved(_))
    }

    pub fn reward(&self) -> i32 {
        match self {
            Outcome::Moved(_) => 0,
            Outcome::ReachedGoal => GOAL_REWARD,
            Outcome::Crashed => CRASH_REWARD,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Moved(_) => "moved",
            Outcome::ReachedGoal => "goal",
            Outcome::Crashed => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub outcome: Outcome,
    pub velocity: (i32, i32),
    pub trajectory: Trajectory,
}

/// Resolves a move without materializing the trajectory. Scanning starts at
/// the second cell; the first event along the way (goal or wall) decides.
pub(crate) fn resolve(map: &TrackMap, state: &State, vx: i32, vy: i32) -> Outcome {
    for p in TrajectoryIter::new(state.pos(), vx, vy).skip(1) {
        match map.cell(p) {
            Cell::Goal => return Outcome::ReachedGoal,
            Cell::Wall => return Outcome::Crashed,
            _ => {}
        }
    }
    Outcome::Moved(State::new(state.x + vx, state.y + vy, vx, vy))
}

/// Moves the car from `state` with the updated velocity `(vx, vy)`.
pub fn step_outcome(map: &TrackMap, state: &State, vx: i32, vy: i32) -> StepOutcome {
    StepOutcome {
        outcome: resolve(map, state, vx, vy),
        velocity: (vx, vy),
        trajectory: Trajectory(TrajectoryIter::new(state.pos(), vx, vy).collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub step: StepOutcome,
    pub reward: i32,
    /// The road was wet and the acceleration was dropped.
    pub noise_applied: bool,
}

/// One MDP step. On a noisy road the acceleration is ignored with
/// probability [`NOISE_PROBABILITY`]; deterministic steps draw nothing from `rng`.
pub fn apply_action<R: Rng + ?Sized>(
    map: &TrackMap,
    state: &State,
    action: Action,
    noisy: bool,
    rng: &mut R,
) -> Transition {
    let noise_applied = noisy && rng.gen_bool(NOISE_PROBABILITY);
    let a = if noise_applied { Action::IDLE } else { action };
    let vx = state.vx + i32::from(a.ax);
    let vy = state.vy + i32::from(a.ay);
    let step = step_outcome(map, state, vx, vy);
    let reward = step.outcome.reward();
    Transition {
        step,
        reward,
        noise_applied,
    }
}

/// Deterministic successor under `action`, without diagnostics.
pub(crate) fn successor(map: &TrackMap, state: &State, action: Action) -> Outcome {
    resolve(
        map,
        state,
        state.vx + i32::from(action.ax),
        state.vy + i32::from(action.ay),
    )
}

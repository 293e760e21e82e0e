//! A* expert over the deterministic dynamics.
//!
//! Every query reduces to the exact optimal step count `distance(s)` from a
//! state to the goal, which is unique, so the memo table never changes an
//! observable answer. Optimal first actions and the witness plan are derived
//! from exact successor distances with ties broken in canonical action order.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use crate::track::{dynamics_successor, Action, Outcome, State, TrackMap};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlannerError {
    #[error("state {0} cannot reach the goal without crashing")]
    Unsolvable(State),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionQuality {
    Optimal,
    Secure,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Plan {
    /// Number of steps of a shortest plan.
    pub length: u32,
    /// Every action that starts some shortest plan, in canonical order.
    pub first_actions: Vec<Action>,
    /// One shortest plan, choosing the first optimal action at each step.
    pub witness: Vec<Action>,
}

/// Minimum number of steps for a 1-D car at offset 0 with velocity `v` to
/// touch offset `d`, accelerating by at most 1 per step.
fn axis_steps(d: i32, v: i32) -> u32 {
    if d == 0 {
        return 0;
    }
    // mirror so the target lies in the positive direction
    let (d, v) = if d < 0 { (-d, -v) } else { (d, v) };
    let (d, v) = (i64::from(d), i64::from(v));
    let mut k: i64 = 0;
    loop {
        k += 1;
        // farthest position after k steps of full acceleration
        if k * v + k * (k + 1) / 2 >= d {
            return k as u32;
        }
    }
}

/// Admissible, consistent estimate of the remaining step count: for each
/// goal cell the slower of the two axes ignoring walls, minimized over goals.
pub fn heuristic(map: &TrackMap, state: &State) -> u32 {
    map.goals()
        .iter()
        .map(|g| {
            axis_steps(g.x - state.x, state.vx).max(axis_steps(g.y - state.y, state.vy))
        })
        .min()
        .expect("maps have goal cells")
}

/// Expert planner bound to one map. Cheap to share behind an `Arc`; all
/// queries take `&self`.
pub struct Planner {
    map: Arc<TrackMap>,
    // Some(d): exact distance; None: unsolvable.
    memo: RwLock<HashMap<State, Option<u32>>>,
}

impl std::fmt::Debug for Planner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Planner")
            .field("map", &self.map)
            .field("memo_entries", &self.memo.read().len())
            .finish()
    }
}

#[derive(Clone, Copy)]
struct Node {
    state: State,
    g: u32,
    parent: usize,
}

impl Planner {
    pub fn new(map: Arc<TrackMap>) -> Self {
        Self {
            map,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn map(&self) -> &TrackMap {
        &self.map
    }

    pub fn map_arc(&self) -> Arc<TrackMap> {
        Arc::clone(&self.map)
    }

    pub fn heuristic(&self, state: &State) -> u32 {
        heuristic(&self.map, state)
    }

    /// Length of a shortest crash-free plan, or `None` if none exists.
    pub fn distance(&self, state: &State) -> Option<u32> {
        if let Some(&known) = self.memo.read().get(state) {
            return known;
        }
        self.search(state)
    }

    pub fn is_solvable(&self, state: &State) -> bool {
        self.distance(state).is_some()
    }

    fn search(&self, root: &State) -> Option<u32> {
        let map = &*self.map;
        let mut nodes: Vec<Node> = vec![Node {
            state: *root,
            g: 0,
            parent: usize::MAX,
        }];
        let mut best_g: HashMap<State, u32> = HashMap::new();
        best_g.insert(*root, 0);
        // (f, deeper first, insertion order)
        let mut open = BinaryHeap::new();
        open.push(Reverse((heuristic(map, root), Reverse(0u32), 0usize)));
        // cheapest known goal-reaching cost and the node it continues from
        let mut best: Option<(u32, usize)> = None;

        {
            let memo = self.memo.read();
            while let Some(Reverse((f, _, idx))) = open.pop() {
                if best.is_some_and(|(b, _)| f >= b) {
                    break;
                }
                let node = nodes[idx];
                if best_g.get(&node.state).is_some_and(|&g| g < node.g) {
                    continue;
                }
                let g1 = node.g + 1;
                for action in Action::ALL {
                    match dynamics_successor(map, &node.state, action) {
                        Outcome::Crashed => {}
                        Outcome::ReachedGoal => {
                            if best.is_none_or(|(b, _)| g1 < b) {
                                best = Some((g1, idx));
                            }
                        }
                        Outcome::Moved(next) => match memo.get(&next) {
                            Some(None) => {}
                            Some(Some(d)) => {
                                if best.is_none_or(|(b, _)| g1 + d < b) {
                                    best = Some((g1 + d, idx));
                                }
                            }
                            None => {
                                let improved = match best_g.entry(next) {
                                    Entry::Vacant(e) => {
                                        e.insert(g1);
                                        true
                                    }
                                    Entry::Occupied(mut e) if g1 < *e.get() => {
                                        e.insert(g1);
                                        true
                                    }
                                    Entry::Occupied(_) => false,
                                };
                                if improved {
                                    let h = heuristic(map, &next);
                                    nodes.push(Node {
                                        state: next,
                                        g: g1,
                                        parent: idx,
                                    });
                                    open.push(Reverse((g1 + h, Reverse(g1), nodes.len() - 1)));
                                }
                            }
                        },
                    }
                }
            }
        }

        let mut memo = self.memo.write();
        match best {
            Some((length, mut idx)) => {
                // every node on the chain lies on a shortest plan
                while idx != usize::MAX {
                    let n = nodes[idx];
                    memo.insert(n.state, Some(length - n.g));
                    idx = n.parent;
                }
                Some(length)
            }
            None => {
                // the whole reachable region was explored without success
                for n in &nodes {
                    memo.insert(n.state, None);
                }
                None
            }
        }
    }

    /// Remaining optimal length after taking `action`: `Some(0)` when the
    /// action reaches the goal, `None` when it crashes or leads to a dead end.
    fn remaining_after(&self, state: &State, action: Action) -> Option<u32> {
        match dynamics_successor(&self.map, state, action) {
            Outcome::ReachedGoal => Some(0),
            Outcome::Crashed => None,
            Outcome::Moved(next) => self.distance(&next),
        }
    }

    /// All actions that begin a shortest plan, in canonical order.
    pub fn optimal_actions(&self, state: &State) -> Vec<Action> {
        let Some(length) = self.distance(state) else {
            return Vec::new();
        };
        Action::ALL
            .into_iter()
            .filter(|&a| self.remaining_after(state, a) == Some(length - 1))
            .collect()
    }

    /// Canonical-first optimal action.
    pub fn best_action(&self, state: &State) -> Option<Action> {
        let length = self.distance(state)?;
        Action::ALL
            .into_iter()
            .find(|&a| self.remaining_after(state, a) == Some(length - 1))
    }

    pub fn astar(&self, state: &State) -> Option<Plan> {
        let length = self.distance(state)?;
        let first_actions = self.optimal_actions(state);
        let witness = self
            .optimal_trace(state)
            .expect("solvable state has a trace")
            .into_iter()
            .map(|(_, a)| a)
            .collect();
        Some(Plan {
            length,
            first_actions,
            witness,
        })
    }

    /// The witness plan unrolled: each visited state with the action taken there.
    pub fn optimal_trace(&self, state: &State) -> Result<Vec<(State, Action)>, PlannerError> {
        let length = self
            .distance(state)
            .ok_or(PlannerError::Unsolvable(*state))?;
        let mut trace = Vec::with_capacity(length as usize);
        let mut current = *state;
        loop {
            let action = self.best_action(&current).expect("states on an optimal plan are solvable");
            trace.push((current, action));
            match dynamics_successor(&self.map, &current, action) {
                Outcome::Moved(next) => current = next,
                Outcome::ReachedGoal => break,
                Outcome::Crashed => unreachable!("optimal action crashed"),
            }
        }
        debug_assert_eq!(trace.len(), length as usize);
        Ok(trace)
    }

    /// Optimal if the action starts a shortest plan, fatal if a crash becomes
    /// unavoidable, secure otherwise. Only defined on solvable states.
    pub fn classify_action(&self, state: &State, action: Action) -> Result<ActionQuality, PlannerError> {
        let length = self
            .distance(state)
            .ok_or(PlannerError::Unsolvable(*state))?;
        Ok(match self.remaining_after(state, action) {
            None => ActionQuality::Fatal,
            Some(rest) if rest + 1 == length => ActionQuality::Optimal,
            Some(_) => ActionQuality::Secure,
        })
    }

    pub fn memo_len(&self) -> usize {
        self.memo.read().len()
    }
}

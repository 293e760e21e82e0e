//! Reference implementations used by the integration and acceptance tests.
//! They use neither the crate's trajectory code nor its planner.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rtlab::models::{Mlp, Target};
use rtlab::{Cell, Pos, State, TrackMap};

/// n + 1 equidistant points on the segment, each rounded to the nearest cell
/// (halves away from zero), in floating point.
pub fn dense_trajectory(from: Pos, vx: i32, vy: i32) -> Vec<Pos> {
    let n = vx.abs().max(vy.abs());
    if n == 0 {
        return vec![from];
    }
    (0..=n)
        .map(|k| {
            let t = f64::from(k) / f64::from(n);
            Pos::new(
                (f64::from(from.x) + t * f64::from(vx)).round() as i32,
                (f64::from(from.y) + t * f64::from(vy)).round() as i32,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Moved(State),
    Goal,
    Crash,
}

pub const ACCELERATIONS: [(i32, i32); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Deterministic transition built from the dense oracle.
pub fn oracle_step(map: &TrackMap, s: State, ax: i32, ay: i32) -> Step {
    let (vx, vy) = (s.vx + ax, s.vy + ay);
    let path = dense_trajectory(Pos::new(s.x, s.y), vx, vy);
    for &p in &path[1..] {
        match map.cell(p) {
            Cell::Wall => return Step::Crash,
            Cell::Goal => return Step::Goal,
            _ => {}
        }
    }
    let end = *path.last().unwrap();
    Step::Moved(State::new(end.x, end.y, vx, vy))
}

/// Breadth-first shortest number of steps to the goal.
pub fn bfs_distance(map: &TrackMap, start: State) -> Option<u32> {
    let mut seen: HashMap<State, u32> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(start, 0);
    queue.push_back(start);
    while let Some(s) = queue.pop_front() {
        let d = seen[&s];
        for (ax, ay) in ACCELERATIONS {
            match oracle_step(map, s, ax, ay) {
                Step::Goal => return Some(d + 1),
                Step::Crash => {}
                Step::Moved(n) => {
                    if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(n) {
                        e.insert(d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    None
}

/// Actions after which the remaining distance is exactly `d - 1`.
pub fn bfs_first_actions(map: &TrackMap, s: State) -> Vec<(i32, i32)> {
    let Some(d) = bfs_distance(map, s) else {
        return Vec::new();
    };
    ACCELERATIONS
        .into_iter()
        .filter(|&(ax, ay)| match oracle_step(map, s, ax, ay) {
            Step::Goal => d == 1,
            Step::Crash => false,
            Step::Moved(n) => bfs_distance(map, n) == Some(d - 1),
        })
        .collect()
}

/// A random batch of inputs and full regression targets.
pub fn random_batch<R: Rng>(rng: &mut R, size: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = (0..size)
        .map(|_| (0..15).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    let ts = (0..size)
        .map(|_| (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (xs, ts)
}

/// Magnitude under which gradient errors are measured absolutely.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Largest relative error between analytic and central-difference gradients.
pub fn gradient_check(mlp: &Mlp, xs: &[Vec<f64>], ts: &[Vec<f64>], eps: f64) -> f64 {
    let batch: Vec<(&[f64], Target<'_>)> = xs
        .iter()
        .zip(ts)
        .map(|(x, t)| (x.as_slice(), Target::Full(t.as_slice())))
        .collect();
    let (_, grads) = mlp.loss_and_gradients(&batch).unwrap();
    let loss = |m: &Mlp| {
        let total: f64 = xs
            .iter()
            .zip(ts)
            .map(|(x, t)| {
                let out = m.forward(x).unwrap();
                out.iter().zip(t).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
            })
            .sum();
        total / xs.len() as f64
    };
    let mut worst: f64 = 0.0;
    let mut probe = mlp.clone();
    for (l, g) in grads.layers.iter().enumerate() {
        let params = g.weights.len() + g.bias.len();
        for i in 0..params {
            let analytic = if i < g.weights.len() { g.weights[i] } else { g.bias[i - g.weights.len()] };
            let orig = *param_mut(&mut probe, l, i);
            *param_mut(&mut probe, l, i) = orig + eps;
            let up = loss(&probe);
            *param_mut(&mut probe, l, i) = orig - eps;
            let down = loss(&probe);
            *param_mut(&mut probe, l, i) = orig;
            let numeric = (up - down) / (2.0 * eps);
            // below ~1e-6 the difference quotient is dominated by rounding in the loss
            let scale = analytic.abs().max(numeric.abs()).max(GRADIENT_FLOOR);
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    worst
}

/// Parameter `i` of layer `l`, weights first, then biases.
fn param_mut(m: &mut Mlp, l: usize, i: usize) -> &mut f64 {
    let layer = &mut m.layers_mut()[l];
    let n = layer.weights.len();
    if i < n {
        &mut layer.weights[i]
    } else {
        &mut layer.bias[i - n]
    }
}

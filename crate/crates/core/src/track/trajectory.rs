//! Discretization of one move into the sequence of visited cells.
//!
//! Axis-aligned moves visit every cell between the endpoints. Diagonal moves
//! step one cell at a time along the dominant axis (`n = max(|vx|, |vy|)`
//! steps) and round the other coordinate to the nearest cell, ties going
//! away from zero. The rounding is applied to the absolute coordinate, so a
//! minor coordinate of `y + k * m` is rounded as a whole.

use super::Pos;

/// Cells visited during one transition, starting with the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory(pub Vec<Pos>);

impl Trajectory {
    pub fn points(&self) -> &[Pos] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Pos {
        *self.0.last().expect("trajectory contains its origin")
    }
}

/// `num / den` rounded to the nearest integer, halves away from zero. `den > 0`.
fn round_div(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    if num >= 0 {
        (2 * num + den) / (2 * den)
    } else {
        -((2 * -num + den) / (2 * den))
    }
}

/// Allocation-free walk over a trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryIter {
    from: Pos,
    vx: i64,
    vy: i64,
    steps: i64,
    next: i64,
}

impl TrajectoryIter {
    pub fn new(from: Pos, vx: i32, vy: i32) -> Self {
        let steps = i64::from(vx.unsigned_abs().max(vy.unsigned_abs()));
        Self {
            from,
            vx: i64::from(vx),
            vy: i64::from(vy),
            steps,
            next: 0,
        }
    }

    fn point(&self, k: i64) -> Pos {
        let (x, y) = (i64::from(self.from.x), i64::from(self.from.y));
        if k == 0 {
            return self.from;
        }
        let (px, py) = if self.vy == 0 {
            (x + k * self.vx.signum(), y)
        } else if self.vx == 0 {
            (x, y + k * self.vy.signum())
        } else if self.vx.abs() >= self.vy.abs() {
            let n = self.vx.abs();
            (x + k * self.vx.signum(), round_div(y * n + k * self.vy, n))
        } else {
            let n = self.vy.abs();
            (round_div(x * n + k * self.vx, n), y + k * self.vy.signum())
        };
        Pos::new(px as i32, py as i32)
    }
}

impl Iterator for TrajectoryIter {
    type Item = Pos;

    fn next(&mut self) -> Option<Pos> {
        if self.next > self.steps {
            return None;
        }
        let p = self.point(self.next);
        self.next += 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.steps + 1 - self.next).max(0) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for TrajectoryIter {}

/// The cells visited when moving from `from` with the (already updated)
/// velocity `(vx, vy)`.
pub fn compute_trajectory(from: Pos, vx: i32, vy: i32) -> Trajectory {
    Trajectory(TrajectoryIter::new(from, vx, vy).collect())
}

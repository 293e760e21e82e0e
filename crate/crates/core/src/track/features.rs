use serde::{Deserialize, Serialize};

use super::{Action, Pos, State, TrackMap};

pub const FEATURE_COUNT: usize = 15;

/// `x, y, vx, vy`, the eight wall distances (canonical action order without
/// `(0, 0)`), then `dg_x, dg_y, dg`. Values are raw cell counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn wall_distances(&self) -> &[f64] {
        &self.0[4..12]
    }
}

/// Directions for the wall-distance features.
pub(crate) fn directions() -> impl Iterator<Item = Action> {
    Action::ALL.into_iter().filter(|a| *a != Action::IDLE)
}

/// Number of traversable cells in a straight line from `p` along `(dx, dy)`.
fn wall_distance(map: &TrackMap, p: Pos, dx: i32, dy: i32) -> usize {
    let mut k = 1;
    while !map.is_wall(Pos::new(p.x + k * dx, p.y + k * dy)) {
        k += 1;
    }
    (k - 1) as usize
}

/// The goal cell closest in L1 distance; ties go to the first in row-major order.
pub(crate) fn nearest_goal(map: &TrackMap, p: Pos) -> Pos {
    *map
        .goals()
        .iter()
        .min_by_key(|g| (g.x - p.x).abs() + (g.y - p.y).abs())
        .expect("maps have at least one goal")
}

pub fn encode_features(map: &TrackMap, state: &State) -> FeatureVector {
    let p = state.pos();
    let mut f = [0.0; FEATURE_COUNT];
    f[0] = f64::from(state.x);
    f[1] = f64::from(state.y);
    f[2] = f64::from(state.vx);
    f[3] = f64::from(state.vy);
    for (i, dir) in directions().enumerate() {
        f[4 + i] = wall_distance(map, p, i32::from(dir.ax), i32::from(dir.ay)) as f64;
    }
    let g = nearest_goal(map, p);
    let (dx, dy) = (g.x - p.x, g.y - p.y);
    f[12] = f64::from(dx);
    f[13] = f64::from(dy);
    f[14] = f64::from(dx.abs() + dy.abs());
    FeatureVector(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::builtin;

    #[test]
    fn corr7_distances() {
        let map = builtin("corr7").unwrap();
        let f = encode_features(&map, &State::new(2, 1, 0, 0));
        // direction (1, 0) is the seventh of the eight
        assert_eq!(f.wall_distances()[6], 3.0);
        assert_eq!(&f.0[12..], &[3.0, 0.0, 3.0]);
        let f = encode_features(&map, &State::new(1, 3, 0, 0));
        // direction (0, 1) is the fifth
        assert_eq!(f.wall_distances()[4], 0.0);
        assert_eq!(f.0[..4], [1.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn all_directions_on_corr7_center() {
        let map = builtin("corr7").unwrap();
        let f = encode_features(&map, &State::new(3, 2, 1, -1));
        // (-1,-1) (-1,0) (-1,1) (0,-1) (0,1) (1,-1) (1,0) (1,1)
        assert_eq!(f.wall_distances(), &[1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.0]);
        assert_eq!(&f.0[12..], &[2.0, 0.0, 2.0]);
    }

    #[test]
    fn nearest_goal_tie_breaks_row_major() {
        let map = TrackMap::parse("t", "g.g\n.s.").unwrap();
        // (1,1) is at L1 distance 2 from both goals; the one with smaller x wins.
        assert_eq!(nearest_goal(&map, Pos::new(1, 1)), Pos::new(0, 0));
        let f = encode_features(&map, &State::new(1, 1, 0, 0));
        assert_eq!(&f.0[12..], &[-1.0, -1.0, 2.0]);
    }
}

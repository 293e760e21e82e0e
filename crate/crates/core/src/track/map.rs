use std::fmt;

use thiserror::Error;

use super::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Wall,
    Free,
    Start,
    Goal,
}

impl Cell {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '#' => Some(Cell::Wall),
            '.' => Some(Cell::Free),
            's' => Some(Cell::Start),
            'g' => Some(Cell::Goal),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Cell::Wall => '#',
            Cell::Free => '.',
            Cell::Start => 's',
            Cell::Goal => 'g',
        }
    }

    pub fn is_traversable(self) -> bool {
        self != Cell::Wall
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("map text is empty")]
    Empty,
    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedLine {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: unknown map character {ch:?}")]
    UnknownCharacter { line: usize, column: usize, ch: char },
    #[error("map has no start cells")]
    NoStartCells,
    #[error("map has no goal cells")]
    NoGoalCells,
    #[error("unknown built-in map {0:?}")]
    UnknownBuiltin(String),
}

/// A parsed racetrack grid. Everything outside `[0,width) x [0,height)` is a wall.
#[derive(Clone, PartialEq, Eq)]
pub struct TrackMap {
    name: String,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    starts: Vec<Pos>,
    goals: Vec<Pos>,
    traversable: Vec<Pos>,
    digest: u64,
}

impl fmt::Debug for TrackMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrackMap")
            .field("id", &self.id())
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl TrackMap {
    /// Parses the ASCII map format. Line and column numbers in errors are 1-based.
    pub fn parse(name: &str, text: &str) -> Result<Self, MapError> {
        let mut lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        if lines.is_empty() || lines[0].is_empty() {
            return Err(MapError::Empty);
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut cells = Vec::with_capacity(width * height);
        for (row, line) in lines.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(MapError::RaggedLine {
                    line: row + 1,
                    expected: width,
                    found,
                });
            }
            for (col, ch) in line.chars().enumerate() {
                let cell = Cell::from_char(ch).ok_or(MapError::UnknownCharacter {
                    line: row + 1,
                    column: col + 1,
                    ch,
                })?;
                cells.push(cell);
            }
        }

        let mut starts = Vec::new();
        let mut goals = Vec::new();
        let mut traversable = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let p = Pos::new(x as i32, y as i32);
                match cells[y * width + x] {
                    Cell::Start => starts.push(p),
                    Cell::Goal => goals.push(p),
                    _ => {}
                }
                if cells[y * width + x].is_traversable() {
                    traversable.push(p);
                }
            }
        }
        if starts.is_empty() {
            return Err(MapError::NoStartCells);
        }
        if goals.is_empty() {
            return Err(MapError::NoGoalCells);
        }

        let mut map = Self {
            name: name.to_string(),
            width,
            height,
            cells,
            starts,
            goals,
            traversable,
            digest: 0,
        };
        map.digest = crate::seed::label(&map.to_text());
        Ok(map)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Name plus a content digest, e.g. `corr7@1f0c...`. Datasets and
    /// manifests record this to detect map mismatches.
    pub fn id(&self) -> String {
        format!("{}@{:016x}", self.name, self.digest)
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, p: Pos) -> Cell {
        if p.x < 0 || p.y < 0 || p.x as usize >= self.width || p.y as usize >= self.height {
            return Cell::Wall;
        }
        self.cells[p.y as usize * self.width + p.x as usize]
    }

    pub fn is_wall(&self, p: Pos) -> bool {
        self.cell(p) == Cell::Wall
    }

    pub fn is_goal(&self, p: Pos) -> bool {
        self.cell(p) == Cell::Goal
    }

    /// Start cells in row-major order.
    pub fn starts(&self) -> &[Pos] {
        &self.starts
    }

    /// Goal cells in row-major order (smaller y first, then smaller x).
    pub fn goals(&self) -> &[Pos] {
        &self.goals
    }

    /// All non-wall cells in row-major order.
    pub fn traversable(&self) -> &[Pos] {
        &self.traversable
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.to_char()));
            out.push('\n');
        }
        out
    }
}

pub const BUILTIN_MAPS: [(&str, &str); 3] = [
    ("corr7", include_str!("../../maps/corr7.track")),
    ("lshape20", include_str!("../../maps/lshape20.track")),
    ("block30", include_str!("../../maps/block30.track")),
];

/// Looks up one of the bundled maps by name.
pub fn builtin(name: &str) -> Result<TrackMap, MapError> {
    let (_, text) = BUILTIN_MAPS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| MapError::UnknownBuiltin(name.to_string()))?;
    TrackMap::parse(name, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_by_three() {
        let map = TrackMap::parse("t", "ggg\n...\nsss").unwrap();
        assert_eq!((map.width(), map.height()), (3, 3));
        assert_eq!(map.goals(), &[Pos::new(0, 0), Pos::new(1, 0), Pos::new(2, 0)]);
        assert_eq!(map.starts(), &[Pos::new(0, 2), Pos::new(1, 2), Pos::new(2, 2)]);
        assert_eq!(map.traversable().len(), 9);
    }

    #[test]
    fn unknown_character_reports_position() {
        let err = TrackMap::parse("t", "ggg\n.q.\nsss").unwrap_err();
        assert_eq!(err, MapError::UnknownCharacter { line: 2, column: 2, ch: 'q' });
    }

    #[test]
    fn missing_goal_and_start() {
        assert_eq!(TrackMap::parse("t", "ss\n..").unwrap_err(), MapError::NoGoalCells);
        assert_eq!(TrackMap::parse("t", "gg\n..").unwrap_err(), MapError::NoStartCells);
    }

    #[test]
    fn ragged_and_empty() {
        assert_eq!(
            TrackMap::parse("t", "ggg\n..\nsss").unwrap_err(),
            MapError::RaggedLine { line: 2, expected: 3, found: 2 }
        );
        assert_eq!(TrackMap::parse("t", "").unwrap_err(), MapError::Empty);
        assert_eq!(TrackMap::parse("t", "\n\n").unwrap_err(), MapError::Empty);
    }

    #[test]
    fn crlf_and_trailing_newline_are_normalized() {
        let a = TrackMap::parse("t", "gg\r\nss\r\n").unwrap();
        let b = TrackMap::parse("t", "gg\nss").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
    }

    #[test]
    fn outside_is_wall() {
        let map = TrackMap::parse("t", "gs").unwrap();
        for p in [Pos::new(-1, 0), Pos::new(2, 0), Pos::new(0, -1), Pos::new(0, 1)] {
            assert!(map.is_wall(p));
        }
        assert!(!map.is_wall(Pos::new(0, 0)));
    }

    #[test]
    fn builtins_parse() {
        let corr = builtin("corr7").unwrap();
        assert_eq!((corr.width(), corr.height()), (7, 5));
        assert_eq!(corr.traversable().len(), 15);
        let l = builtin("lshape20").unwrap();
        assert_eq!((l.width(), l.height()), (20, 10));
        let b = builtin("block30").unwrap();
        assert_eq!((b.width(), b.height()), (30, 15));
        assert!(builtin("nope").is_err());
    }
}

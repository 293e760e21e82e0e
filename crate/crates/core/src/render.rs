//! Episode traces as JSON lines and SVG track drawings.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::eval::{StepKind, StepRecord};
use crate::track::{step_outcome, Action, Cell, Outcome, Pos, State, TrackMap};

const CELL: i32 = 20;
const LEGEND_ROW: i32 = 22;
const PALETTE: [&str; 8] = [
    "#e6194b", "#4363d8", "#f58231", "#911eb4", "#008080", "#9a6324", "#800000", "#000075",
];
const WALL_FILL: &str = "#2b2b2b";
const TRACK_FILL: &str = "#f4f4f4";
const START_FILL: &str = "#8e44ad";
const GOAL_FILL: &str = "#27ae60";

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("trace {trace:?} does not match map {map} at step {step}: {message}")]
    Mismatch {
        trace: String,
        map: String,
        step: usize,
        message: String,
    },
}

/// One trace to draw with its legend label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub label: String,
    pub steps: Vec<StepRecord>,
}

pub fn write_trace(path: &Path, steps: &[StepRecord]) -> Result<(), RenderError> {
    let io = |e| RenderError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for s in steps {
        let line = serde_json::to_string(s).expect("step records serialize");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>, RenderError> {
    let io = |e| RenderError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut steps = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| RenderError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        steps.push(rec);
    }
    Ok(steps)
}

/// Where the car ends up after a terminal step: the first goal or wall cell on the path.
fn event_cell(map: &TrackMap, state: &State, vx: i32, vy: i32) -> Pos {
    let step = step_outcome(map, state, vx, vy);
    let points = step.trajectory.points();
    points
        .iter()
        .skip(1)
        .copied()
        .find(|&p| matches!(map.cell(p), Cell::Wall | Cell::Goal))
        .unwrap_or_else(|| step.trajectory.last())
}

/// Replays `steps` on `map` and returns the visited cells: the start cell and
/// one point per step.
pub fn trace_points(map: &TrackMap, label: &str, steps: &[StepRecord]) -> Result<Vec<Pos>, RenderError> {
    let fail = |step: usize, message: String| RenderError::Mismatch {
        trace: label.to_string(),
        map: map.name().to_string(),
        step,
        message,
    };
    let Some(first) = steps.first() else {
        return Err(fail(0, "trace is empty".into()));
    };
    let start = first.state();
    if map.cell(start.pos()) == Cell::Wall {
        return Err(fail(0, format!("start {start} is on a wall")));
    }
    let mut points = vec![start.pos()];
    let mut expected = start;
    for (i, rec) in steps.iter().enumerate() {
        let state = rec.state();
        if state != expected {
            return Err(fail(i, format!("recorded state {state}, replay gives {expected}")));
        }
        let action = rec
            .action()
            .ok_or_else(|| fail(i, format!("invalid action ({}, {})", rec.ax, rec.ay)))?;
        let applied = if rec.noise_applied { Action::IDLE } else { action };
        let vx = state.vx + i32::from(applied.ax);
        let vy = state.vy + i32::from(applied.ay);
        let outcome = step_outcome(map, &state, vx, vy).outcome;
        let kind = match outcome {
            Outcome::Moved(_) => StepKind::Moved,
            Outcome::ReachedGoal => StepKind::Goal,
            Outcome::Crashed => StepKind::Crash,
        };
        if kind != rec.outcome || outcome.reward() != rec.reward {
            return Err(fail(
                i,
                format!("recorded {:?} with reward {}, replay gives {}", rec.outcome, rec.reward, outcome.label()),
            ));
        }
        match outcome {
            Outcome::Moved(next) => {
                points.push(next.pos());
                expected = next;
            }
            _ => {
                if i + 1 != steps.len() {
                    return Err(fail(i + 1, "steps recorded after a terminal event".into()));
                }
                points.push(event_cell(map, &state, vx, vy));
            }
        }
    }
    Ok(points)
}

fn center(p: Pos) -> (i32, i32) {
    (p.x * CELL + CELL / 2, p.y * CELL + CELL / 2)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Draws the grid and one polyline per trace. Output depends only on the inputs.
pub fn render_svg(map: &TrackMap, traces: &[LabeledTrace]) -> Result<String, RenderError> {
    let polylines = traces
        .iter()
        .map(|t| trace_points(map, &t.label, &t.steps))
        .collect::<Result<Vec<_>, _>>()?;
    let width = map.width() as i32 * CELL;
    let grid_h = map.height() as i32 * CELL;
    let legend_rows = 3 + traces.len() as i32;
    let height = grid_h + 10 + legend_rows * LEGEND_ROW;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(&map.id()));
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{grid_h}" fill="{TRACK_FILL}"/>"#);
    let _ = writeln!(svg, r##"<g id="cells" stroke="#cccccc" stroke-width="0.5">"##);
    for y in 0..map.height() as i32 {
        for x in 0..map.width() as i32 {
            let fill = match map.cell(Pos::new(x, y)) {
                Cell::Wall => WALL_FILL,
                Cell::Start => START_FILL,
                Cell::Goal => GOAL_FILL,
                Cell::Free => TRACK_FILL,
            };
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{fill}"/>"#,
                x * CELL,
                y * CELL
            );
        }
    }
    svg.push_str("</g>\n");

    for (i, (trace, points)) in traces.iter().zip(&polylines).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&p| {
                let (cx, cy) = center(p);
                format!("{cx},{cy}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="trace" data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="3" stroke-linejoin="round"/>"#,
            escape(&trace.label),
            coords.join(" ")
        );
    }

    let _ = writeln!(svg, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    let mut row = grid_h + 10;
    for (fill, name) in [(WALL_FILL, "wall"), (START_FILL, "start"), (GOAL_FILL, "goal")] {
        let _ = writeln!(svg, r#"<rect x="4" y="{row}" width="14" height="14" fill="{fill}"/>"#);
        let _ = writeln!(svg, r#"<text x="24" y="{}">{name}</text>"#, row + 12);
        row += LEGEND_ROW;
    }
    for (i, trace) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="4" y1="{y}" x2="18" y2="{y}" stroke="{color}" stroke-width="3"/>"#,
            y = row + 7
        );
        let _ = writeln!(svg, r#"<text x="24" y="{}">{}</text>"#, row + 12, escape(&trace.label));
        row += LEGEND_ROW;
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{run_episode, IdleAgent};
    use crate::seed;
    use crate::track::builtin;

    fn rec(s: State, a: (i32, i32), outcome: StepKind, reward: i32) -> StepRecord {
        StepRecord {
            x: s.x,
            y: s.y,
            vx: s.vx,
            vy: s.vy,
            ax: a.0,
            ay: a.1,
            noise_applied: false,
            outcome,
            reward,
        }
    }

    fn winning_trace() -> Vec<StepRecord> {
        vec![
            rec(State::new(1, 1, 0, 0), (1, 0), StepKind::Moved, 0),
            rec(State::new(2, 1, 1, 0), (0, 0), StepKind::Moved, 0),
            rec(State::new(3, 1, 1, 0), (1, 0), StepKind::Goal, 100),
        ]
    }

    #[test]
    fn three_step_win_gives_four_points() {
        let map = builtin("corr7").unwrap();
        let t = LabeledTrace {
            label: "expert".into(),
            steps: winning_trace(),
        };
        let svg = render_svg(&map, &[t.clone()]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 4);
        assert_eq!(pts.split(' ').last().unwrap(), "110,30");
        assert_eq!(render_svg(&map, &[t.clone()]).unwrap(), svg);

        let mut rng = seed::stream(0, &[]);
        let idle = run_episode(&IdleAgent, &map, State::new(1, 2, 0, 0), false, 5, &mut rng);
        let two = render_svg(
            &map,
            &[
                t,
                LabeledTrace {
                    label: "idle".into(),
                    steps: idle.steps,
                },
            ],
        )
        .unwrap();
        assert_eq!(two.matches("<polyline").count(), 2);
        assert!(two.contains(">idle</text>"));
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let map = builtin("corr7").unwrap();
        let mut steps = winning_trace();
        steps[1].x = 3;
        assert!(matches!(trace_points(&map, "t", &steps), Err(RenderError::Mismatch { step: 1, .. })));
        let mut steps = winning_trace();
        steps[2].outcome = StepKind::Moved;
        assert!(trace_points(&map, "t", &steps).is_err());
        let other = builtin("lshape20").unwrap();
        let mut steps = winning_trace();
        steps.iter_mut().for_each(|s| s.y = 0);
        assert!(trace_points(&other, "t", &steps).is_err());
    }

    #[test]
    fn trace_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        write_trace(&path, &winning_trace()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"x":1,"y":1,"vx":0,"vy":0,"ax":1,"ay":0,"noise_applied":false,"outcome":"moved","reward":0}"#));
        assert_eq!(read_trace(&path).unwrap(), winning_trace());
    }
}

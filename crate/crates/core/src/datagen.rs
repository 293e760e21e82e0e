//! Expert-labelled data sets.
//!
//! Six presets combine random start (RS) / random velocity (RV) seeding with
//! the trace (T), exhaustive (E) and unique (U) labelling options. Files are
//! JSON lines: a header object followed by one sample per line.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::Planner;
use crate::seed;
use crate::track::{encode_features, sample_initial_state, Action, FeatureVector, SimConfig, SimError, State};

/// Samples generated per shard. Fixed so output does not depend on thread count.
pub const SHARD_SIZE: usize = 1024;
pub const DEFAULT_SIZE: usize = 100_000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown data set preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid data set configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("data set was generated on map {found}, expected {expected}")]
    MapMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    RsRv,
    NsZvT,
    RsZvT,
    RsRvT,
    RsRvE,
    RsRvU,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::RsRv,
        Preset::NsZvT,
        Preset::RsZvT,
        Preset::RsRvT,
        Preset::RsRvE,
        Preset::RsRvU,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::RsRv => "RS-RV",
            Preset::NsZvT => "NS-ZV-T",
            Preset::RsZvT => "RS-ZV-T",
            Preset::RsRvT => "RS-RV-T",
            Preset::RsRvE => "RS-RV-E",
            Preset::RsRvU => "RS-RV-U",
        }
    }

    /// Start-state flags `(random_start, random_velocity)`.
    pub fn start_flags(self) -> (bool, bool) {
        match self {
            Preset::NsZvT => (false, false),
            Preset::RsZvT => (true, false),
            _ => (true, true),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DatasetError::UnknownPreset(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetConfig {
    pub random_start: bool,
    pub random_velocity: bool,
    pub trajectory: bool,
    pub exhaustive: bool,
    pub unique: bool,
    pub size: usize,
    pub velocity_bound: i32,
}

impl DatasetConfig {
    pub fn preset(preset: Preset, size: usize) -> Self {
        let (random_start, random_velocity) = preset.start_flags();
        Self {
            random_start,
            random_velocity,
            trajectory: matches!(preset, Preset::NsZvT | Preset::RsZvT | Preset::RsRvT),
            exhaustive: preset == Preset::RsRvE,
            unique: preset == Preset::RsRvU,
            size,
            velocity_bound: SimConfig::default().velocity_bound,
        }
    }

    pub fn with_velocity_bound(mut self, bound: i32) -> Self {
        self.velocity_bound = bound;
        self
    }

    /// The preset this configuration corresponds to, if any.
    pub fn as_preset(&self) -> Option<Preset> {
        Preset::ALL.into_iter().find(|&p| {
            let c = DatasetConfig::preset(p, self.size);
            (c.random_start, c.random_velocity, c.trajectory, c.exhaustive, c.unique)
                == (self.random_start, self.random_velocity, self.trajectory, self.exhaustive, self.unique)
        })
    }

    pub fn validate(&self) -> Result<Preset, DatasetError> {
        if self.exhaustive && self.trajectory {
            return Err(DatasetError::InvalidConfig("option E excludes option T"));
        }
        if self.unique && self.exhaustive {
            return Err(DatasetError::InvalidConfig("option U excludes option E"));
        }
        if self.size == 0 {
            return Err(DatasetError::InvalidConfig("size must be at least 1"));
        }
        if self.velocity_bound < 0 {
            return Err(DatasetError::InvalidConfig("velocity bound must be non-negative"));
        }
        self.as_preset()
            .ok_or(DatasetError::InvalidConfig("not one of the six data set presets"))
    }

    fn sim(&self) -> SimConfig {
        SimConfig {
            random_start: self.random_start,
            random_velocity: self.random_velocity,
            noisy: false,
            velocity_bound: self.velocity_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub state: State,
    pub features: FeatureVector,
    /// Expert-optimal actions; more than one only for exhaustive sets.
    pub labels: Vec<Action>,
}

fn draw_seed<R: Rng + ?Sized>(planner: &Planner, sim: &SimConfig, rng: &mut R) -> Result<State, SimError> {
    // zero-velocity draws are filtered here too: the expert must label every seed
    for _ in 0..crate::track::MAX_SAMPLE_ATTEMPTS {
        let s = sample_initial_state(planner.map(), sim, rng, |s| planner.is_solvable(s))?;
        if sim.random_velocity || planner.is_solvable(&s) {
            return Ok(s);
        }
    }
    Err(SimError::NoSolvableState(crate::track::MAX_SAMPLE_ATTEMPTS))
}

fn labeled(planner: &Planner, state: State, labels: Vec<Action>) -> LabeledSample {
    LabeledSample {
        state,
        features: encode_features(planner.map(), &state),
        labels,
    }
}

/// Generates exactly `config.size` samples from a single random stream.
pub fn generate<R: Rng + ?Sized>(
    planner: &Planner,
    config: &DatasetConfig,
    rng: &mut R,
) -> Result<Vec<LabeledSample>, DatasetError> {
    config.validate()?;
    generate_count(planner, config, config.size, rng)
}

fn generate_count<R: Rng + ?Sized>(
    planner: &Planner,
    config: &DatasetConfig,
    count: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSample>, DatasetError> {
    let sim = config.sim();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = draw_seed(planner, &sim, rng)?;
        if config.trajectory {
            let trace = planner.optimal_trace(&s).expect("seed states are solvable");
            out.extend(trace.into_iter().map(|(st, a)| labeled(planner, st, vec![a])));
        } else if config.exhaustive {
            out.push(labeled(planner, s, planner.optimal_actions(&s)));
        } else if config.unique {
            let actions = planner.optimal_actions(&s);
            if actions.len() == 1 {
                out.push(labeled(planner, s, actions));
            }
        } else {
            let a = planner.best_action(&s).expect("seed states are solvable");
            out.push(labeled(planner, s, vec![a]));
        }
    }
    out.truncate(count);
    Ok(out)
}

/// Generates `config.size` samples in fixed-size shards seeded from
/// `(seed, shard index)`. Output is identical for any `jobs`.
pub fn generate_sharded(
    planner: &Planner,
    config: &DatasetConfig,
    seed: u64,
    jobs: usize,
) -> Result<Vec<LabeledSample>, DatasetError> {
    config.validate()?;
    let shards = config.size.div_ceil(SHARD_SIZE);
    let quota = |k: usize| SHARD_SIZE.min(config.size - k * SHARD_SIZE);
    let run = |k: usize| {
        let mut rng = seed::stream(seed, &[seed::label("datagen"), k as u64]);
        generate_count(planner, config, quota(k), &mut rng)
    };
    let parts: Vec<Result<Vec<LabeledSample>, DatasetError>> = if jobs <= 1 {
        (0..shards).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| (0..shards).into_par_iter().map(run).collect())
    };
    let mut out = Vec::with_capacity(config.size);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Multi-hot target: 1 for every labelled action.
pub fn target_vector(labels: &[Action]) -> [f64; Action::COUNT] {
    let mut t = [0.0; Action::COUNT];
    for a in labels {
        t[a.index()] = 1.0;
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub map_id: String,
    pub preset: String,
    pub size: usize,
    pub seed: u64,
    pub velocity_bound: i32,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    x: i32,
    y: i32,
    vx: i32,
    vy: i32,
    features: Vec<f64>,
    labels: Vec<[i32; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn preset(&self) -> Preset {
        self.header.preset.parse().expect("validated on construction")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_dataset(path: &Path, header: &DatasetHeader, samples: &[LabeledSample]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut line = serde_json::to_string(header).expect("header serializes");
    line.push('\n');
    w.write_all(line.as_bytes()).map_err(io_err(path))?;
    for s in samples {
        let rec = SampleRecord {
            x: s.state.x,
            y: s.state.y,
            vx: s.state.vx,
            vy: s.state.vy,
            features: s.features.0.to_vec(),
            labels: s.labels.iter().map(|a| [i32::from(a.ax), i32::from(a.ay)]).collect(),
        };
        let mut line = serde_json::to_string(&rec).expect("sample serializes");
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn parse_sample(text: &str, line: usize) -> Result<LabeledSample, DatasetError> {
    let bad = |message: String| DatasetError::Malformed { line, message };
    let rec: SampleRecord = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let features: [f64; crate::track::FEATURE_COUNT] = rec
        .features
        .try_into()
        .map_err(|v: Vec<f64>| bad(format!("expected 15 features, found {}", v.len())))?;
    if rec.labels.is_empty() {
        return Err(bad("sample has no labels".into()));
    }
    let labels = rec
        .labels
        .iter()
        .map(|&[ax, ay]| Action::new(ax, ay).ok_or_else(|| bad(format!("invalid action [{ax}, {ay}]"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabeledSample {
        state: State::new(rec.x, rec.y, rec.vx, rec.vy),
        features: FeatureVector(features),
        labels,
    })
}

/// Reads a data set file. With `expected_map_id`, a header from another map is an error.
pub fn read_dataset(path: &Path, expected_map_id: Option<&str>) -> Result<Dataset, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or(DatasetError::Malformed {
            line: 1,
            message: "missing header".into(),
        })?
        .map_err(io_err(path))?;
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| DatasetError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    header.preset.parse::<Preset>()?;
    if let Some(expected) = expected_map_id {
        if header.map_id != expected {
            return Err(DatasetError::MapMismatch {
                expected: expected.to_string(),
                found: header.map_id,
            });
        }
    }
    let mut samples = Vec::with_capacity(header.size);
    for (i, line) in lines.enumerate() {
        let text = line.map_err(io_err(path))?;
        if text.is_empty() {
            continue;
        }
        samples.push(parse_sample(&text, i + 2)?);
    }
    if samples.len() != header.size {
        return Err(DatasetError::Malformed {
            line: samples.len() + 2,
            message: format!("header announces {} samples, file holds {}", header.size, samples.len()),
        });
    }
    Ok(Dataset { header, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::ActionQuality;
    use crate::track::builtin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn corr7() -> Planner {
        Planner::new(Arc::new(builtin("corr7").unwrap()))
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            assert_eq!(DatasetConfig::preset(p, 5).validate().unwrap(), p);
        }
        assert!(matches!("RS-ZV".parse::<Preset>(), Err(DatasetError::UnknownPreset(_))));
    }

    #[test]
    fn incompatible_options_are_rejected() {
        let mut c = DatasetConfig::preset(Preset::RsRvE, 5);
        c.trajectory = true;
        assert!(c.validate().is_err());
        let mut c = DatasetConfig::preset(Preset::RsRvU, 5);
        c.exhaustive = true;
        assert!(c.validate().is_err());
        let mut c = DatasetConfig::preset(Preset::RsRv, 5);
        c.random_start = false;
        assert!(c.validate().is_err());
        assert!(DatasetConfig::preset(Preset::RsRv, 0).validate().is_err());
    }

    #[test]
    fn ns_zv_t_holds_complete_optimal_traces() {
        let p = corr7();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let set = generate(&p, &DatasetConfig::preset(Preset::NsZvT, 9), &mut rng).unwrap();
        assert_eq!(set.len(), 9);
        // corr7 traces from the start line all have length 3
        for chunk in set.chunks(3) {
            assert_eq!(chunk[0].state.x, 1);
            assert_eq!((chunk[0].state.vx, chunk[0].state.vy), (0, 0));
        }
        for s in &set {
            assert_eq!(s.labels.len(), 1);
            assert_eq!(p.classify_action(&s.state, s.labels[0]), Ok(ActionQuality::Optimal));
            assert_eq!(s.features, encode_features(p.map(), &s.state));
        }
    }

    #[test]
    fn exhaustive_labels_are_all_optimal_actions() {
        let p = corr7();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let set = generate(&p, &DatasetConfig::preset(Preset::RsRvE, 400), &mut rng).unwrap();
        for s in &set {
            let expected: Vec<Action> = Action::ALL
                .into_iter()
                .filter(|&a| p.classify_action(&s.state, a) == Ok(ActionQuality::Optimal))
                .collect();
            assert_eq!(s.labels, expected);
        }
        let target = State::new(4, 1, 2, 0);
        let one_step: Vec<Action> = Action::ALL
            .into_iter()
            .filter(|&a| crate::track::dynamics_successor(p.map(), &target, a) == crate::track::Outcome::ReachedGoal)
            .collect();
        assert_eq!(p.optimal_actions(&target), one_step);
    }

    #[test]
    fn unique_sets_have_unique_labels() {
        let p = corr7();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let set = generate(&p, &DatasetConfig::preset(Preset::RsRvU, 200), &mut rng).unwrap();
        for s in &set {
            assert_eq!(p.optimal_actions(&s.state), s.labels);
        }
    }

    #[test]
    fn sharding_is_independent_of_jobs() {
        let p = corr7();
        let cfg = DatasetConfig::preset(Preset::RsRvT, 2500);
        let a = generate_sharded(&p, &cfg, 5, 1).unwrap();
        let b = generate_sharded(&p, &cfg, 5, 3).unwrap();
        assert_eq!(a.len(), 2500);
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip_and_errors() {
        let p = corr7();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let samples = generate(&p, &DatasetConfig::preset(Preset::RsRvE, 1000), &mut rng).unwrap();
        let header = DatasetHeader {
            map_id: p.map().id(),
            preset: "RS-RV-E".into(),
            size: samples.len(),
            seed: 14,
            velocity_bound: 5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &header, &samples).unwrap();
        let back = read_dataset(&path, Some(&p.map().id())).unwrap();
        assert_eq!(back.header, header);
        assert_eq!(back.samples, samples);

        assert!(matches!(
            read_dataset(&path, Some("other@0")),
            Err(DatasetError::MapMismatch { .. })
        ));

        let text = std::fs::read_to_string(&path).unwrap();
        let cut: String = text.chars().take(text.len() / 2).collect();
        std::fs::write(&path, &cut).unwrap();
        let expected_line = cut.lines().count();
        match read_dataset(&path, None) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, expected_line),
            other => panic!("expected malformed, got {other:?}"),
        }

        let bad_header = text.replacen("RS-RV-E", "XX-YY", 1);
        std::fs::write(&path, bad_header).unwrap();
        assert!(matches!(read_dataset(&path, None), Err(DatasetError::UnknownPreset(_))));
    }
}

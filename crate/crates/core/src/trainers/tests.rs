use std::sync::Arc;

use super::*;
use crate::datagen::{generate_sharded, DatasetConfig, Preset};
use crate::eval::{evaluate_agents, EvalConfig, EvalPreset, ModelAgent};
use crate::models::{LinearKind, Mlp};
use crate::planner::{ActionQuality, Planner};
use crate::seed;
use crate::track::{builtin, FeatureVector, SimConfig};

fn corr7() -> Planner {
    Planner::new(Arc::new(builtin("corr7").unwrap()))
}

fn mlp_of(m: &Model) -> &Mlp {
    match m {
        Model::Mlp(m) => m,
        other => panic!("expected a network, got {}", other.kind()),
    }
}

#[test]
fn epsilon_schedule() {
    let s = DqnConfig::default().epsilon;
    let eps: Vec<f64> = s.iter().take(100_001).collect();
    assert_eq!(eps[0], 1.0);
    assert!((eps[100] - 0.904_792).abs() < 1e-6);
    assert!((eps[100] - 0.999f64.powi(100)).abs() < 1e-15);
    assert_eq!(*eps.last().unwrap(), 1e-4);
    for (i, &e) in eps.iter().enumerate() {
        let closed = s.closed_form(i);
        assert!((e - closed).abs() <= 1e-12 * closed, "index {i}: {e} vs {closed}");
        if i > 0 {
            assert!(e <= eps[i - 1]);
        }
    }
}

#[test]
fn terminal_targets_ignore_target_network() {
    let mut rng = seed::stream(5, &[]);
    let net = Mlp::new(&mut rng);
    let mut perturbed = net.clone();
    for l in perturbed.layers_mut() {
        for w in &mut l.weights {
            *w += 0.5;
        }
    }
    let goal = StoredTransition {
        features: FeatureVector([1.0; 15]),
        action: 3,
        reward: 100.0,
        next: FeatureVector([2.0; 15]),
        terminal: true,
    };
    let moved = StoredTransition {
        terminal: false,
        reward: 0.0,
        ..goal.clone()
    };
    let a = dqn_targets(&[&goal, &moved], &net, 0.99);
    let b = dqn_targets(&[&goal, &moved], &perturbed, 0.99);
    assert_eq!(a[0], 100.0);
    assert_eq!(b[0], 100.0);
    assert_ne!(a[1], b[1]);
    let q = net.forward(moved.next.as_slice()).unwrap();
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(a[1], 0.99 * max);
}

#[test]
fn pil_checkpoints_and_accuracy() {
    let planner = corr7();
    let data = generate_sharded(&planner, &DatasetConfig::preset(Preset::NsZvT, 1000), 3, 1).unwrap();
    let mut rng = seed::stream(8, &[]);
    let run = train_pil(&data, &PilConfig::default(), &mut rng).unwrap();
    assert_eq!(run.checkpoints.len(), 20);
    assert_eq!(run.checkpoints.tags()[0], "epoch-01");
    assert_eq!(run.checkpoints.tags()[19], "epoch-20");
    assert_ne!(mlp_of(run.checkpoints.get("epoch-01").unwrap()), &run.initial);
    assert_eq!(run.initial, Mlp::new(&mut seed::stream(8, &[])));
    assert!(run.epochs.last().unwrap().accuracy >= 0.9, "{:?}", run.epochs.last());

    let again = train_pil(&data, &PilConfig::default(), &mut seed::stream(8, &[])).unwrap();
    assert_eq!(again.checkpoints, run.checkpoints);
}

#[test]
fn pil_rejects_bad_input() {
    let mut rng = seed::stream(0, &[]);
    assert!(matches!(train_pil(&[], &PilConfig::default(), &mut rng), Err(TrainError::EmptyDataset)));
    let cfg = PilConfig {
        max_epochs: 0,
        ..Default::default()
    };
    assert!(matches!(train_pil(&[], &cfg, &mut rng), Err(TrainError::InvalidConfig(_))));
}

#[test]
fn pil_divergence_keeps_earlier_checkpoints() {
    let planner = corr7();
    let data = generate_sharded(&planner, &DatasetConfig::preset(Preset::RsZvT, 200), 3, 1).unwrap();
    let cfg = PilConfig {
        step_size: 1e3,
        ..Default::default()
    };
    match train_pil(&data, &cfg, &mut seed::stream(1, &[])) {
        Err(TrainError::Diverged { kept, .. }) => assert!(kept.len() < 20),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn linear_trainers_fit() {
    let planner = corr7();
    let data = generate_sharded(&planner, &DatasetConfig::preset(Preset::RsRvE, 300), 4, 1).unwrap();
    for kind in [LinearKind::Lda, LinearKind::LogisticRegression] {
        let m = train_linear(kind, &data).unwrap();
        assert_eq!(m.kind(), kind);
        assert!(m.is_finite());
    }
}

#[test]
fn checkpoint_tags_are_unique() {
    let mut set = CheckpointSet::new();
    let m = Model::Mlp(Mlp::zeros(&crate::models::MLP_ARCH));
    set.push("a", m.clone()).unwrap();
    assert!(matches!(set.push("a", m.clone()), Err(TrainError::DuplicateTag(_))));
    let dir = tempfile::tempdir().unwrap();
    set.push("b", m).unwrap();
    let paths = set.save_all(dir.path()).unwrap();
    assert_eq!(paths.len(), 2);
    assert!(paths[1].ends_with("b.json"));
}

#[test]
fn dagger_desk_scale() {
    let planner = Arc::new(corr7());
    let pretrain = generate_sharded(&planner, &DatasetConfig::preset(Preset::NsZvT, 100), 6, 1).unwrap();
    let cfg = DaggerConfig {
        iterations: 5,
        samples_per_iteration: 200,
        rollout: SimConfig::new(false, false, false),
        ..Default::default()
    };
    let run = train_dagger(&planner, &pretrain, &cfg, &mut seed::stream(6, &[])).unwrap();
    assert_eq!(run.checkpoints.len(), 5);
    let mut prev = pretrain.len();
    for (k, r) in run.rounds.iter().enumerate() {
        assert_eq!(r.visited, 200);
        assert_eq!(r.aggregate_size, pretrain.len() + (k + 1) * 200 - run.rounds[..=k].iter().map(|r| r.skipped_unsolvable).sum::<usize>());
        assert!(r.aggregate_size >= prev);
        prev = r.aggregate_size;
    }
    for s in &run.aggregate[pretrain.len()..] {
        assert_eq!(planner.classify_action(&s.state, s.labels[0]).unwrap(), ActionQuality::Optimal);
    }

    let final_agent = ModelAgent::new("final", run.checkpoints.last().unwrap().model.clone());
    let pre_agent = ModelAgent::mlp("pretrain", run.pretrained.clone());
    let reports = evaluate_agents(
        &[&final_agent, &pre_agent],
        &planner,
        &EvalConfig::new(EvalPreset::NsZvD, 17).with_runs(200),
        1,
    )
    .unwrap();
    assert!(reports[0].win_rate >= reports[1].win_rate, "{reports:?}");
}

#[test]
fn dqn_trace_and_best_snapshot() {
    let map = builtin("corr7").unwrap();
    let cfg = DqnConfig {
        mode: DqnMode::RsN,
        episodes: 400,
        step_size: 1e-3,
        ..Default::default()
    };
    let run = dqn_train(&map, &cfg, &mut seed::stream(12, &[])).unwrap();
    assert_eq!(run.checkpoints.tags(), vec!["best", "final"]);
    assert_eq!(run.trace.len(), 400);
    assert!(run.trace[..99].iter().all(|r| r.trailing100.is_none()));
    let max = run
        .trace
        .iter()
        .filter_map(|r| r.trailing100)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(run.best_trailing, max);
    assert_eq!(run.trace[run.best_episode - 1].trailing100, Some(max));
    for w in run.trace.windows(2) {
        assert!(w[1].epsilon <= w[0].epsilon);
    }
    let again = dqn_train(&map, &cfg, &mut seed::stream(12, &[])).unwrap();
    assert_eq!(again.checkpoints, run.checkpoints);
    assert_eq!(again.trace, run.trace);
}

#[test]
fn dqn_config_validation() {
    let bad = DqnConfig {
        gamma: 1.5,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    assert!("RS-N".parse::<DqnMode>().is_ok());
    assert!("RS-RV".parse::<DqnMode>().is_err());
}

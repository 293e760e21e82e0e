use std::path::Path;
use std::process::{Command, Output};

fn rtlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtlab"))
        .args(args)
        .env_remove("RTLAB_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rtlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    rtlab(args).status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_field(path: &Path, column: &str, row: usize) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == column).unwrap();
    lines.nth(row).unwrap().split(',').nth(idx).unwrap().to_string()
}

#[test]
fn gen_data_presets_and_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.jsonl");
    ok(&["gen-data", "--map", "corr7", "--preset", "RS-RV-U", "--size", "100", "--out", p(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(dir.path().join("u.jsonl.manifest.json").exists());
    assert_eq!(code(&["gen-data", "--map", "corr7", "--preset", "NS-RV", "--size", "5", "--out", p(&out)]), 1);
    assert_eq!(code(&["gen-data", "--map", "nowhere", "--preset", "RS-RV", "--size", "5", "--out", p(&out)]), 1);
}

#[test]
fn train_methods_and_checkpoint_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    ok(&["gen-data", "--map", "corr7", "--preset", "NS-ZV-T", "--size", "200", "--out", p(&data)]);

    let pil = dir.path().join("pil");
    ok(&["train", "pil-nn", "--dataset", p(&data), "--epochs", "20", "--out", p(&pil)]);
    let count = |d: &Path, prefix: &str| {
        std::fs::read_dir(d)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_str().unwrap().starts_with(prefix))
            .count()
    };
    assert_eq!(count(&pil, "epoch-"), 20);
    assert_eq!(std::fs::read_to_string(pil.join("epochs.csv")).unwrap().lines().count(), 21);

    let dagger = dir.path().join("dagger");
    ok(&[
        "train", "dagger", "--pretrain", p(&data), "--iters", "20", "--samples-per-iter", "20", "--epochs-per-iter", "2",
        "--pretrain-epochs", "2", "--out", p(&dagger),
    ]);
    assert_eq!(count(&dagger, "iter-"), 20);

    let dqn = dir.path().join("dqn");
    ok(&["train", "dqn", "--map", "corr7", "--mode", "RS-N", "--episodes", "150", "--out", p(&dqn)]);
    assert!(dqn.join("best.json").exists() && dqn.join("final.json").exists());
    let trace = std::fs::read_to_string(dqn.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "episode,return,return_disc,steps,epsilon,trailing100");
    assert_eq!(trace.lines().count(), 151);

    for method in ["pil-lda", "pil-lr"] {
        let out = dir.path().join(method);
        ok(&["train", method, "--dataset", p(&data), "--out", p(&out)]);
    }
    assert!(dir.path().join("pil-lda/lda.json").exists());
    assert!(dir.path().join("pil-lr/logreg.json").exists());

    assert_eq!(code(&["train", "dqn", "--map", "corr7", "--mode", "RS-N", "--dataset", p(&data), "--out", p(&dqn)]), 1);
    assert_eq!(code(&["train", "dqn", "--map", "corr7", "--mode", "RS-RV", "--out", p(&dqn)]), 1);
    assert_eq!(code(&["train", "pil-nn", "--dataset", p(&data), "--map", "lshape20", "--out", p(&pil)]), 1);
}

#[test]
fn evaluate_builtin_agents() {
    let dir = tempfile::tempdir().unwrap();
    for map in ["corr7", "lshape20", "block30"] {
        let out = dir.path().join(format!("{map}.csv"));
        ok(&[
            "evaluate", "--map", map, "--preset", "NS-ZV-D", "--agent", "expert", "--agent", "random", "--runs", "200",
            "--out", p(&out),
        ]);
        assert_eq!(csv_field(&out, "agent", 0), "expert");
        assert_eq!(csv_field(&out, "win_rate", 0).parse::<f64>().unwrap(), 1.0);
        assert!(csv_field(&out, "loss_rate", 1).parse::<f64>().unwrap() > 0.0);
    }
    let out = dir.path().join("r.json");
    ok(&["evaluate", "--map", "corr7", "--agent", "idle", "--runs", "3", "--out", p(&out)]);
    assert!(std::fs::read_to_string(&out).unwrap().trim_start().starts_with('['));

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&["evaluate", "--map", "corr7", "--agent", p(&missing), "--out", p(&out)]), 3);
    assert_eq!(code(&["evaluate", "--map", "corr7", "--agent", "expert", "--preset", "NS-RV-D", "--out", p(&out)]), 1);
    assert_eq!(code(&["evaluate", "--map", "corr7", "--agent", "expert", "--format", "xml", "--out", p(&out)]), 1);
}

#[test]
fn evaluate_rejects_wrong_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut model = serde_json::json!({"format": 1, "kind": "mlp", "arch": [15, 32, 9], "params": {}});
    model["params"] = serde_json::json!({"layers": []});
    std::fs::write(&bad, model.to_string()).unwrap();
    let out = dir.path().join("r.csv");
    assert_eq!(code(&["evaluate", "--map", "corr7", "--agent", p(&bad), "--out", p(&out)]), 3);
}

#[test]
fn quality_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    ok(&["quality", "--map", "lshape20", "--preset", "RS-ZV", "--agent", "expert", "--runs", "50", "--out", p(&out)]);
    let decisions: u64 = csv_field(&out, "decisions", 0).parse().unwrap();
    assert!(decisions > 0);
    assert_eq!(csv_field(&out, "optimal", 0).parse::<u64>().unwrap(), decisions);

    ok(&["quality", "--map", "corr7", "--preset", "RS-RV", "--agent", "random", "--runs", "50", "--out", p(&out)]);
    let n = |c: &str| csv_field(&out, c, 0).parse::<u64>().unwrap();
    assert_eq!(n("optimal") + n("secure") + n("fatal"), n("decisions"));

    assert_eq!(code(&["quality", "--map", "corr7", "--preset", "NS-ZV-N", "--agent", "expert", "--out", p(&out)]), 1);
}

#[test]
fn plan_command() {
    let text = ok(&["plan", "--map", "corr7", "1", "1", "0", "0"]);
    assert!(text.contains("length 3"), "{text}");
    assert!(text.contains("witness (1, 0) (0, 0) (1, 0)"), "{text}");
    let text = ok(&["plan", "--map", "corr7", "4", "1", "0", "0"]);
    assert!(text.contains("length 1"));
    let out = rtlab(&["plan", "--map", "corr7", "1", "1", "-3", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "unsolvable");
    let json = ok(&["plan", "--map", "corr7", "1", "2", "0", "0", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["plan"]["length"], 3);
    assert_eq!(code(&["plan", "--map", "corr7", "0", "0", "0", "0"]), 1);
}

#[test]
fn render_command() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("win.jsonl");
    let lines = [
        r#"{"x":1,"y":1,"vx":0,"vy":0,"ax":1,"ay":0,"noise_applied":false,"outcome":"moved","reward":0}"#,
        r#"{"x":2,"y":1,"vx":1,"vy":0,"ax":0,"ay":0,"noise_applied":false,"outcome":"moved","reward":0}"#,
        r#"{"x":3,"y":1,"vx":1,"vy":0,"ax":1,"ay":0,"noise_applied":false,"outcome":"goal","reward":100}"#,
    ];
    std::fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let svg = dir.path().join("one.svg");
    ok(&["render", "--map", "corr7", "--trace", p(&trace), "--out", p(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);
    let points = text.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split(' ').count(), 4);

    let twice = dir.path().join("again.svg");
    ok(&["render", "--map", "corr7", "--trace", p(&trace), "--out", p(&twice)]);
    assert_eq!(std::fs::read(&svg).unwrap(), std::fs::read(&twice).unwrap());

    let two = dir.path().join("two.svg");
    ok(&["render", "--map", "corr7", "--trace", p(&trace), "--agent", "expert", "--preset", "RS-ZV-D", "--run", "3", "--out", p(&two)]);
    assert_eq!(std::fs::read_to_string(&two).unwrap().matches("<polyline").count(), 2);

    // random starts may sit on a goal cell
    let goal = dir.path().join("goal.jsonl");
    std::fs::write(&goal, r#"{"x":5,"y":1,"vx":0,"vy":0,"ax":0,"ay":1,"noise_applied":false,"outcome":"goal","reward":100}"#.to_string() + "\n").unwrap();
    ok(&["render", "--map", "corr7", "--trace", p(&goal), "--out", p(&svg)]);
    ok(&["plan", "--map", "corr7", "5", "1", "0", "0"]);

    assert_eq!(code(&["render", "--map", "lshape20", "--trace", p(&trace), "--out", p(&svg)]), 3);
}

#[test]
fn evaluate_traces_replay_in_render() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let traces = dir.path().join("traces");
    ok(&[
        "evaluate", "--map", "block30", "--preset", "RS-ZV-N", "--agent", "expert", "--agent", "random", "--runs", "5",
        "--trace-dir", p(&traces), "--trace-runs", "2", "--out", p(&out),
    ]);
    let t = traces.join("expert-run1.jsonl");
    ok(&["render", "--map", "block30", "--trace", p(&t), "--trace", p(&traces.join("random-run1.jsonl")), "--out", p(&dir.path().join("t.svg"))]);
}

#[test]
fn config_file_and_seed_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"map": "corr7", "preset": "RS-ZV-T", "size": 7, "seed": 5}"#).unwrap();
    let a = dir.path().join("a.jsonl");
    ok(&["gen-data", "--config", p(&cfg), "--size", "9", "--out", p(&a)]);
    let header: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&a).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["size"], 9);
    assert_eq!(header["seed"], 5);
    assert_eq!(header["preset"], "RS-ZV-T");

    let b = dir.path().join("b.jsonl");
    let out = Command::new(env!("CARGO_BIN_EXE_rtlab"))
        .args(["gen-data", "--map", "corr7", "--preset", "RS-ZV-T", "--size", "9", "--out", p(&b)])
        .env("RTLAB_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    std::fs::write(&cfg, r#"{"colour": "red"}"#).unwrap();
    assert_eq!(code(&["gen-data", "--config", p(&cfg), "--map", "corr7", "--preset", "RS-RV", "--out", p(&a)]), 1);
}

#[test]
fn jobs_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    ok(&["gen-data", "--map", "block30", "--preset", "RS-RV", "--size", "2100", "--seed", "3", "--out", p(&a)]);
    ok(&["gen-data", "--map", "block30", "--preset", "RS-RV", "--size", "2100", "--seed", "3", "--jobs", "3", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (ra, rb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["evaluate", "--map", "block30", "--preset", "RS-RV-N", "--agent", "random", "--agent", "expert", "--runs", "300", "--out", p(&ra)]);
    ok(&["evaluate", "--map", "block30", "--preset", "RS-RV-N", "--agent", "random", "--agent", "expert", "--runs", "300", "--jobs", "4", "--out", p(&rb)]);
    assert_eq!(std::fs::read(&ra).unwrap(), std::fs::read(&rb).unwrap());
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&[]), 1);
}

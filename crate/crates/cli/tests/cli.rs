use std::path::Path;
use std::process::{Command, Output};

fn dvqn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvqn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = "env = \"cartpole\"\nagent = \"dvqn\"\nepisodes = 12\ntrials = 2\nseed = 3\n";

#[test]
fn train_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = dvqn(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--progress", "0"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(std::fs::read(out.join("metrics.csv")).unwrap());
        assert!(out.join("summary.json").exists());
        assert!(out.join("trial_1.ckpt").exists());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 12);
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "env = \"cartpole\"\nagent = \"dvqn\"\nepisodes = 5\nlearning_rat = 1.0\n");
    let o = dvqn(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "env = \"cartpole\"\nagent = \"dvqn\"\nepisodes = 0\n");
    assert_eq!(dvqn(&["train", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn eval_options_and_plots_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    assert!(dvqn(&["train", "--config", &cfg, "--out", run_s, "--progress", "0"]).status.success());
    let ckpt = run.join("trial_0.ckpt");
    let ckpt_s = ckpt.to_str().unwrap();

    let o = dvqn(&["eval", "--checkpoint", ckpt_s, "--env", "cartpole", "--episodes", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["returns"].as_array().unwrap().len(), 3);

    let wrong = dvqn(&["eval", "--checkpoint", ckpt_s, "--env", "acrobot", "--episodes", "1"]);
    assert!(!wrong.status.success());

    let opts = dir.path().join("opts");
    let o = dvqn(&[
        "options", "--checkpoint", ckpt_s, "--env", "cartpole", "--episodes", "5", "--k", "3", "--out",
        opts.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let export: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(opts.join("options.json")).unwrap()).unwrap();
    assert_eq!(export["options"].as_array().unwrap().len(), 3);
    assert!(opts.join("latent_scatter.svg").exists());

    let curve = dir.path().join("curve.svg");
    let metrics = run.join("metrics.csv");
    let o = dvqn(&[
        "plot", "curve", "--in", metrics.to_str().unwrap(), "--out", curve.to_str().unwrap(), "--metric", "steps",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&curve).unwrap().starts_with("<svg"));

    let scatter = dir.path().join("scatter.svg");
    let o = dvqn(&[
        "plot",
        "scatter",
        "--in",
        opts.join("embeddings.json").to_str().unwrap(),
        "--options",
        opts.join("options.json").to_str().unwrap(),
        "--out",
        scatter.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&scatter).unwrap().contains("legend-cluster"));
}

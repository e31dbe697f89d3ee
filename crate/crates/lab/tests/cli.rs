use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn infovae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infovae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let body = format!(
        r#"steps = 20
eval_every = 10
out_dir = "out"
{extra}
[objective]
name = "elbo"

[model]
latent_dim = 2
decoder = "bernoulli"
encoder_hidden = [8]
decoder_hidden = [8]

[data]
source = "prototypes"
k = 2
dim = 6
n = 40
flip = 0.1
seed = 3

[optim]
batch_size = 8

[diagnostics]
max_points = 40
ll_points = 2
ll_samples = 20
class_samples = 20
gap_points = 0

[samples]
ancestral = 4
chain = 4
burn_in = 2
"#
    );
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn oracle_reports_zero_violations() {
    let o = infovae(&["oracle", "--corpus-size", "1000", "--tol", "1e-9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("identity,max_deviation\n"));
    assert!(out.contains("violations,0"));
    assert_eq!(out.lines().count(), 8);
}

#[test]
fn oracle_with_impossible_tolerance_fails() {
    let o = infovae(&[
        "oracle",
        "--corpus-size",
        "20",
        "--tol",
        "0",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["violations"].as_u64().unwrap() > 0);
}

#[test]
fn scenarios_list_prints_the_three_names() {
    let o = infovae(&["scenarios", "list"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        stdout(&o),
        "prop1-pathology\nprop1-infovae\ninfo-preference\n"
    );
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(code(&infovae(&["train", "--config", "missing.toml"])), 2);
    assert_eq!(code(&infovae(&["frobnicate"])), 2);
    assert_eq!(code(&infovae(&["oracle", "--bogus"])), 2);
    assert_eq!(
        code(&infovae(&[
            "sample",
            "--checkpoint",
            "x",
            "--method",
            "gibbs"
        ])),
        2
    );
    assert_eq!(code(&infovae(&["scenarios", "run", "unknown"])), 2);
    assert_eq!(code(&infovae(&["oracle", "--corpus-size", "0"])), 2);
    assert_eq!(code(&infovae(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo_key = 1");
    let o = infovae(&["train", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo_key"));
}

#[test]
fn train_then_sample_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("o");
    let o = infovae(&[
        "train",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "4",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("completed; 20 steps"));
    for f in [
        "metrics.csv",
        "metrics.json",
        "checkpoint.json",
        "samples_ancestral.csv",
        "samples_chain.csv",
        "config.toml",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let echoed = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.contains("seed = 4"));

    let ckpt = out.join("checkpoint.json");
    let ckpt = ckpt.to_str().unwrap();
    let s = infovae(&["sample", "--checkpoint", ckpt, "--n", "7"]);
    assert_eq!(code(&s), 0);
    let text = stdout(&s);
    assert_eq!(text.lines().count(), 8);
    assert!(text.starts_with("x0,x1,x2,x3,x4,x5\n"));
    assert!(text
        .lines()
        .skip(1)
        .flat_map(|l| l.split(','))
        .all(|v| v == "0" || v == "1"));

    let c = infovae(&[
        "sample",
        "--checkpoint",
        ckpt,
        "--config",
        &cfg,
        "--method",
        "chain",
        "--n",
        "3",
        "--burn-in",
        "4",
        "--thin",
        "2",
    ]);
    assert_eq!(code(&c), 0, "{}", String::from_utf8_lossy(&c.stderr));
    let steps: Vec<String> = stdout(&c)
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(steps, ["6", "8", "10"]);

    let d = infovae(&["diagnose", "--checkpoint", ckpt, "--config", &cfg]);
    assert_eq!(code(&d), 0, "{}", String::from_utf8_lossy(&d.stderr));
    let text = stdout(&d);
    assert!(text.starts_with("step,metric,value\n20,"));
    assert!(text.contains(",mi_estimate,"));

    let bad = infovae(&["sample", "--checkpoint", cfg.as_str()]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn unexpected_blow_up_exits_3_and_expected_one_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let blow = "[optim]\nlearning_rate = 1e300\nbatch_size = 8\n";
    let cfg = write_config(dir.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("[optim]\nbatch_size = 8\n", blow);
    fs::write(&cfg, &text).unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let o = infovae(&["train", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("aborted at step"));

    fs::write(&cfg, format!("expect_pathology = true\n{text}")).unwrap();
    let o = infovae(&["train", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("pathology at step"));
}

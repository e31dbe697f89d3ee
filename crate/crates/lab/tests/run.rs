use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use infovae_lab::run::{
    content_hash, git_object_id, load_checkpoint, Manifest, CHECKPOINT, METRICS_CSV, METRICS_JSON,
};
use infovae_lab::{run_experiment, RunConfig};
use sha2::{Digest, Sha256};

fn small_config(out: &Path) -> RunConfig {
    let toml = format!(
        r#"
steps = 40
eval_every = 20
out_dir = "{}"

[objective]
alpha = 0.0
lambda = 100.0
divergence = "mmd"

[model]
latent_dim = 2
decoder = "gaussian"
encoder_hidden = [8]
decoder_hidden = [8]

[data]
source = "mixture"
k = 3
n = 60
sep = 4.0
seed = 2

[optim]
batch_size = 16

[diagnostics]
max_points = 60
ll_points = 3
ll_samples = 50
class_samples = 50
gap_points = 1

[samples]
ancestral = 5
chain = 5
burn_in = 3
"#,
        out.display()
    );
    RunConfig::from_toml_str(&toml).unwrap()
}

#[test]
fn identical_runs_write_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let a = run_experiment(&small_config(&out)).unwrap();
    let first = fs::read(out.join(METRICS_CSV)).unwrap();
    fs::remove_dir_all(&out).unwrap();
    let b = run_experiment(&small_config(&out)).unwrap();
    assert_eq!(first, fs::read(out.join(METRICS_CSV)).unwrap());
    assert_eq!(a.manifest.content_hash, b.manifest.content_hash);
    assert_eq!(a.steps_completed(), 40);
    assert_eq!(a.exit_code(), 0);
    let steps: Vec<u64> = a.metrics.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 20, 40]);
    for m in [
        "logdet_cov",
        "mi_estimate",
        "full_mmd",
        "mean_kl_qzx_pz",
        "ll_estimate",
        "class_ce",
        "probe_error",
        "var_gap",
    ] {
        assert_eq!(a.series(m).len(), 3, "{m}");
    }
}

#[test]
fn a_different_seed_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&small_config(&dir.path().join("a"))).unwrap();
    let mut c = small_config(&dir.path().join("b"));
    c.seed = 9;
    let b = run_experiment(&c).unwrap();
    assert_ne!(a.manifest.content_hash, b.manifest.content_hash);
}

#[test]
fn manifest_echoes_config_and_hashes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.format = infovae_lab::config::OutputFormat::Json;
    let o = run_experiment(&cfg).unwrap();
    let text = fs::read_to_string(o.out_dir.join("manifest.json")).unwrap();
    let m: Manifest = serde_json::from_str(&text).unwrap();
    assert_eq!(m.config, cfg);
    assert_eq!(m.dataset.rows, 60);
    assert!(m.outputs.contains_key(METRICS_JSON));
    for (name, id) in &m.outputs {
        let bytes = fs::read(o.out_dir.join(name)).unwrap();
        assert_eq!(&git_object_id(&bytes), id, "{name}");
    }
    assert_eq!(m.content_hash, content_hash(&m.outputs));

    let echoed =
        RunConfig::from_toml_str(&fs::read_to_string(o.out_dir.join("config.toml")).unwrap())
            .unwrap();
    assert_eq!(echoed, cfg);
    let restored = load_checkpoint(&o.out_dir.join(CHECKPOINT)).unwrap();
    assert_eq!(restored.params().flatten(), o.model.params().flatten());
}

#[test]
fn git_object_id_matches_independent_hash() {
    let mut h = Sha256::new();
    h.update(b"blob 5\0hello");
    let expected: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(git_object_id(b"hello"), expected);
    assert_eq!(
        git_object_id(b""),
        "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
    );
    let mut a = BTreeMap::new();
    a.insert("x".to_string(), "1".to_string());
    let mut b = a.clone();
    b.insert("y".to_string(), "2".to_string());
    assert_ne!(content_hash(&a), content_hash(&b));
}

fn exploding_config(out: &Path) -> RunConfig {
    let mut c = small_config(out);
    c.optim.learning_rate = 1e300;
    c.model.scale_floor = 0.0;
    c.steps = 200;
    c
}

#[test]
fn numerical_blow_up_aborts_with_last_good_state() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_experiment(&exploding_config(&dir.path().join("a"))).unwrap();
    let abort = o.manifest.abort.clone().expect("the run should blow up");
    assert!(o.steps_completed() < 200);
    assert_eq!(abort.step, o.steps_completed() + 1);
    assert!(!o.manifest.pathology);
    assert_eq!(o.exit_code(), 3);
    assert!(o.out_dir.join(CHECKPOINT).exists());
    assert!(o.out_dir.join(METRICS_CSV).exists());
    assert!(o.model.params().flatten().iter().all(|v| v.is_finite()));
}

#[test]
fn expected_blow_up_is_a_pathology_not_a_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = exploding_config(&dir.path().join("a"));
    c.expect_pathology = true;
    let o = run_experiment(&c).unwrap();
    assert!(o.aborted());
    assert!(o.manifest.pathology);
    assert_eq!(o.exit_code(), 0);
}

use std::path::Path;
use std::process::{Command, Output};

fn hebb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hebb"))
        .current_dir(dir)
        .env_remove("HEBB_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_ONLINE: &str = r#"
kind = "online"
name = "small"
seeds = [0, 1]
[data]
n_classes = 4
per_class_count = 30
test_per_class = 10
[scenario]
pretrain_classes = [0, 1]
finetune_cadence = 10
[pretrain]
epochs = 5
[adaptation]
k = 10
"#;

const SMALL_CONTINUAL: &str = r#"
kind = "continual"
name = "cont"
seeds = [3]
methods = ["parametric", "hebb"]
[data]
n_classes = 3
per_class_count = 20
test_per_class = 5
[scenario]
n_tasks = 3
epochs_per_task = 2
stored_per_task = 20
"#;

#[test]
fn run_writes_identical_csv_twice() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL_ONLINE).unwrap();
    let first = hebb(dir.path(), &["run", "small.toml", "--out-dir", "a"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let second = hebb(dir.path(), &["run", "small.toml", "--out-dir", "b"]);
    assert!(second.status.success(), "{}", stderr(&second));
    let a = std::fs::read(dir.path().join("a/small.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/small.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert!(stdout(&first).contains("overall"));
}

#[test]
fn repeated_method_flags_give_paired_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL_ONLINE).unwrap();
    let out = hebb(
        dir.path(),
        &[
            "run",
            "small.toml",
            "--method=mbpa",
            "--method=hebb",
            "--out-dir",
            ".",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("small.csv")).unwrap();
    let keys = |method: &str| -> Vec<(String, String)> {
        csv.lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[1] == method)
            .map(|f| (f[2].to_string(), f[3].to_string()))
            .collect()
    };
    let mbpa = keys("mbpa");
    assert!(!mbpa.is_empty());
    assert_eq!(mbpa, keys("hebb"));
    assert!(mbpa.iter().any(|(s, _)| s == "mean"));
}

#[test]
fn continual_run_has_one_point_per_task() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), SMALL_CONTINUAL).unwrap();
    let out = hebb(dir.path(), &["run", "c.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("results/cont.csv")).unwrap();
    let seed_rows = csv
        .lines()
        .filter(|l| l.starts_with("continual,hebb,3,"))
        .count();
    assert_eq!(seed_rows, 3);
    assert!(dir.path().join("results/cont_tasks.csv").exists());
}

#[test]
fn out_dir_env_sits_between_flag_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("out_dir = \"from_config\"\n{SMALL_ONLINE}");
    std::fs::write(dir.path().join("small.toml"), cfg).unwrap();
    let run = |envdir: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_hebb"));
        cmd.current_dir(dir.path()).env_remove("HEBB_OUT_DIR");
        if let Some(e) = envdir {
            cmd.env("HEBB_OUT_DIR", e);
        }
        let out = cmd
            .args(["run", "small.toml", "--seed", "0"])
            .args(extra)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
    };
    run(None, &[]);
    assert!(dir.path().join("from_config/small.csv").exists());
    run(Some("from_env"), &[]);
    assert!(dir.path().join("from_env/small.csv").exists());
    run(Some("from_env2"), &["--out-dir", "from_flag"]);
    assert!(dir.path().join("from_flag/small.csv").exists());
    assert!(!dir.path().join("from_env2").exists());
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = hebb(dir.path(), &["run", "does_not_exist.toml"]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("does_not_exist.toml"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn invalid_config_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[adaptation]\nbeta = 1.5\n").unwrap();
    let out = hebb(dir.path(), &["run", "bad.toml"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("adaptation.beta"), "{}", stderr(&out));

    std::fs::write(dir.path().join("typo.toml"), "[mixture]\ngamm = 0.1\n").unwrap();
    let out = hebb(dir.path(), &["run", "typo.toml"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("gamm"), "{}", stderr(&out));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL_ONLINE).unwrap();
    let out = hebb(dir.path(), &["run", "small.toml", "--beta", "1.0"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("adaptation.beta"));
}

#[test]
fn verify_passes_on_clean_build() {
    let dir = tempfile::tempdir().unwrap();
    let out = hebb(dir.path(), &["verify"]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    for name in [
        "mbpa_gradient_finite_difference",
        "mbpa_decomposition_identity",
        "mbpa_bounded_by_hebbian",
        "dynamic_weight_monotone",
        "knn_brute_force_oracle",
    ] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn verify_names_corrupted_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let out = hebb(dir.path(), &["verify", "--corrupt-gradient"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("invariant violated: mbpa_gradient_finite_difference"));
}

#[test]
fn inspect_memory_reports_counts_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL_ONLINE).unwrap();
    let out = hebb(
        dir.path(),
        &[
            "run",
            "small.toml",
            "--seed",
            "0",
            "--method",
            "hebb",
            "--save-memory",
            "mem",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let snap = dir.path().join("mem/small_hebb_seed0.hebm");
    let out = hebb(
        dir.path(),
        &["inspect-memory", snap.to_str().unwrap(), "--beta", "0.5"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    // 2 pre-training classes x 30 training examples, then 4 x 10 streamed test samples.
    assert!(text.contains("entries   100"), "{text}");
    assert!(text.contains("dim       16"), "{text}");
    assert!(text.contains("capacity  unbounded"), "{text}");
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|f| f.len() == 3 && f[0].parse::<usize>().is_ok())
        .collect();
    let counts: Vec<(&str, &str)> = rows.iter().map(|f| (f[0], f[1])).collect();
    assert_eq!(
        counts,
        vec![("0", "40"), ("1", "40"), ("2", "10"), ("3", "10")]
    );
    for f in &rows {
        let n: i32 = f[1].parse().unwrap();
        let expected = 0.5 / (1.0 - 0.5f64.powi(n));
        let got: f64 = f[2].parse().unwrap();
        assert!((got - expected).abs() < 1e-6);
    }
}

#[test]
fn inspect_memory_handles_empty_and_corrupt_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let empty = hebb::EpisodicMemory64::unbounded(8).unwrap().to_bytes();
    std::fs::write(dir.path().join("empty.hebm"), empty).unwrap();
    let out = hebb(dir.path(), &["inspect-memory", "empty.hebm"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("entries   0"));

    std::fs::write(dir.path().join("junk.hebm"), b"not a snapshot").unwrap();
    let out = hebb(dir.path(), &["inspect-memory", "junk.hebm"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("junk.hebm"));
}

#[test]
fn sweep_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL_ONLINE).unwrap();
    let out = hebb(
        dir.path(),
        &[
            "sweep",
            "small.toml",
            "--eta",
            "0.2,1.0",
            "--beta",
            "0.5,0.9",
            "--out-dir",
            ".",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("small_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("scenario,method,eta,beta,"));

    let out = hebb(dir.path(), &["sweep", "small.toml", "--eta", "0.2"]);
    assert!(!out.status.success());
}

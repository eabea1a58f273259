use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
seed = 4

[simulate]
methods = ["nag_gs", "nag_fi", "gf_euler"]
alphas = [0.5, 5.29]
n_points = 200
n_steps = 50

[stationary]
n_points = 100
n_steps = 200
n_reference = 2000

[train]
epochs = 5
lrs = { min = 0.1, max = 10.0, points = 3 }

[spectrum]
epochs = 3

[sweep]
n_trials = 60
budget = 200
"#;

fn naggs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_naggs")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn run_ok(args: &[&str]) -> Output {
    let out = naggs(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn every_command_replays_byte_identically_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for cmd in ["analyze", "simulate", "stationary", "train", "spectrum", "sweep"] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        run_ok(&[cmd, "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1", "--quiet"]);
        run_ok(&[cmd, "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "3", "--quiet"]);
        let (fa, fb) = (read_dir(&a), read_dir(&b));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{cmd} output differs between runs");
        for name in fa.keys().filter(|n| !n.ends_with(".meta.json")) {
            assert!(fa.contains_key(&format!("{name}.meta.json")), "{cmd}: {name} has no sidecar");
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dirs: Vec<_> = ["4", "5"]
        .iter()
        .map(|s| {
            let d = tmp.path().join(format!("seed{s}"));
            run_ok(&["sweep", "--config", &cfg, "--seed", s, "--out", d.to_str().unwrap(), "--quiet"]);
            d
        })
        .collect();
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(dirs[1].join("sweep.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["command"], "sweep");
    assert_ne!(fs::read(dirs[0].join("sweep.csv")).unwrap(), fs::read(dirs[1].join("sweep.csv")).unwrap());
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    for text in ["seed = [", "seed = 1\nunknown_key = 2", "[analyze]\nmu = -1.0", "[sweep]\nn_trials = 0"] {
        let cfg = write_config(tmp.path(), text);
        let cmd = if text.contains("sweep") { "sweep" } else { "analyze" };
        let out = naggs(&[cmd, "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{text}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out_dir.exists(), "{text}: output written despite config error");
        assert!(!out.stderr.is_empty());
    }
    let out = naggs(&["analyze", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_1_without_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[train]
epochs = 2
lrs = [1.0]
mu_from_hessian = false
optimizers = [{ kind = "nag_fi", alpha = 1.0, mu = 1.0, gamma0 = 1.0, newton_tol = 1e-300, newton_max_iter = 1 }]
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = naggs(&["train", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.exists());
}

#[test]
fn analyze_reports_reference_step_sizes() {
    let tmp = TempDir::new().unwrap();
    for (l, star, crit) in [(3.0, 2.73, Some(4.83)), (1.9, 5.29, None)] {
        let cfg = write_config(tmp.path(), &format!("[analyze]\nmu = 1.0\nL = {l}\ngamma = 1.0\n"));
        let dir = tmp.path().join(format!("analyze-{l}"));
        run_ok(&["analyze", "--config", &cfg, "--out", dir.to_str().unwrap(), "--quiet"]);
        let s = summary(&dir);
        assert!((s["alpha_star"].as_f64().unwrap() - star).abs() < 0.01);
        match crit {
            Some(c) => assert!((s["alpha_crit"].as_f64().unwrap() - c).abs() < 0.01),
            None => assert!(s["alpha_crit"].is_null()),
        }
        let curve = fs::read_to_string(dir.join("radius_curve.csv")).unwrap();
        assert!(curve.starts_with("alpha,lam1_abs,lam2_abs,lam3_abs,lam4_abs,rho,stable\n"));
        assert!(!curve.contains('\r'));
        assert_eq!(curve.lines().count(), 202);
    }
}

#[test]
fn sweep_records_guarded_domain_as_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[sweep]
n_trials = 300
budget = 300
axes = [
  { name = "alpha", sampling = "log_uniform", low = 0.01, high = 100.0 },
  { name = "mu", sampling = "uniform", low = -10.0, high = 10.0 },
]
objective = { kind = "quadratic", eigenvalues = [1.0, 4.0], c = 1.0 }
"#,
    );
    let dir = tmp.path().join("sweep");
    run_ok(&["sweep", "--config", &cfg, "--out", dir.to_str().unwrap(), "--quiet"]);
    let mut reader = csv::Reader::from_path(dir.join("sweep.csv")).unwrap();
    let (mut rejected, mut converged) = (0, 0);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        let guarded = f(1) * f(3) + f(2) <= 0.0;
        assert_eq!(&rec[6] == "rejected_config", guarded, "{rec:?}");
        if guarded {
            rejected += 1;
            assert_eq!(&rec[4], "");
        }
        if &rec[6] == "converged" {
            converged += 1;
            assert!(f(4).is_finite());
        }
    }
    assert!(rejected > 0 && converged > 0);
    assert_eq!(summary(&dir)["rejected_config"], rejected);
}

#[test]
fn train_grid_favours_nag_gs_over_sgd_momentum() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("train");
    run_ok(&["train", "--seed", "11", "--out", dir.to_str().unwrap(), "--quiet"]);
    let s = summary(&dir);
    let lrs: Vec<f64> = s["lrs"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(lrs.len(), 10);
    let index = |name: &str| {
        let o = s["optimizers"].as_array().unwrap().iter().find(|o| o["optimizer"] == name).unwrap();
        o["largest_converged_lr"].as_f64().and_then(|lr| lrs.iter().position(|g| *g == lr))
    };
    let (nag, sgd) = (index("nag_gs"), index("sgd_momentum"));
    assert!(nag.is_some());
    assert!(sgd.is_none_or(|s| nag.unwrap() > s), "nag {nag:?} sgd {sgd:?}");
    let rows = fs::read_to_string(dir.join("train.csv")).unwrap();
    assert!(rows.starts_with("optimizer,lr,epoch,train_loss,train_accuracy,test_loss,test_accuracy,diverged\n"));
}

#[test]
fn json_format_and_quiet_mode() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("json");
    let out = run_ok(&["analyze", "--format", "json", "--out", dir.to_str().unwrap(), "--quiet"]);
    assert!(out.stdout.is_empty());
    let curve: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("radius_curve.json")).unwrap()).unwrap();
    assert_eq!(curve.as_array().unwrap().len(), 201);
    assert!(!dir.join("radius_curve.csv").exists());

    let loud = run_ok(&["analyze", "--out", tmp.path().join("csv").to_str().unwrap()]);
    assert_eq!(String::from_utf8(loud.stdout).unwrap().lines().count(), 3);
}

#[test]
fn spectrum_accepts_explicit_checkpoints() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[spectrum]\ndata = { kind = \"blobs\", n_per_class = 20, n_features = 2 }\ncheckpoints = [[0.0, 0.0, 0.0], [1.0, -1.0, 0.5]]\n",
    );
    let dir = tmp.path().join("spec");
    run_ok(&["spectrum", "--config", &cfg, "--out", dir.to_str().unwrap(), "--quiet"]);
    let text = fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);

    let bad = write_config(tmp.path(), "[spectrum]\ndata = { kind = \"blobs\", n_features = 2 }\ncheckpoints = [[0.0]]\n");
    assert_eq!(naggs(&["spectrum", "--config", &bad, "--out", dir.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn csv_dataset_paths_resolve_next_to_config() {
    let tmp = TempDir::new().unwrap();
    let mut rows = String::from("label,a,b\n");
    for i in 0..40 {
        let y = i % 2;
        let s = if y == 1 { 1.0 } else { -1.0 };
        rows.push_str(&format!("{y},{},{}\n", s + 0.1 * i as f64 / 40.0, -s));
    }
    fs::write(tmp.path().join("data.csv"), rows).unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[train]
epochs = 5
lrs = [0.1, 1.0]
data = { kind = "csv", path = "data.csv", schema = { has_header = true, label_column = 0 } }
"#,
    );
    let dir = tmp.path().join("csvtrain");
    let other_cwd = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_naggs"))
        .current_dir(other_cwd.path())
        .args(["train", "--config", &cfg, "--out", dir.to_str().unwrap(), "--quiet"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(summary(&dir)["optimizers"][0]["runs"][1]["converged"].as_bool().unwrap());
}

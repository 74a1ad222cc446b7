use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ZERO_RANGE: &str = "process = zero_range\nzr_rate = linear\ninit = poisson\ninit_density = 2\n\
N_ladder = 16,32\nt_list = 0,0.05\nDelta = 0.02\nn_replicas = 70\nseed = 11\npmf_samples = 20\n";

fn lesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lesim")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let c = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(c).unwrap().parse().unwrap()).collect()
}

#[test]
fn same_seed_gives_identical_artifacts_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ZERO_RANGE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = cfg.to_str().unwrap();
    let out = lesim(&["--config", cfg, "--out", a.to_str().unwrap(), "--threads", "1", "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = lesim(&["--config", cfg, "--out", b.to_str().unwrap(), "--threads", "3", "simulate"]);
    assert!(out.status.success());
    assert_eq!(tree(&a), tree(&b));

    let first = lesim(&["--config", cfg, "--out", a.to_str().unwrap(), "diagnose"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let report = fs::read(a.join("diagnostics/verdicts.txt")).unwrap();
    let second = lesim(&["--config", cfg, "--out", a.to_str().unwrap(), "diagnose"]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(report, fs::read(a.join("diagnostics/verdicts.txt")).unwrap());
}

#[test]
fn seed_flag_changes_results_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ZERO_RANGE);
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(lesim(&["--config", cfg, "--out", a.to_str().unwrap(), "simulate"]).status.success());
    assert!(lesim(&["--config", cfg, "--seed", "12", "--out", b.to_str().unwrap(), "simulate"]).status.success());
    let ma = fs::read_to_string(a.join("manifest.txt")).unwrap();
    let mb = fs::read_to_string(b.join("manifest.txt")).unwrap();
    assert_ne!(ma.lines().next(), mb.lines().next());
}

#[test]
fn single_replica_at_time_zero_reports_initial_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let text = "process = zero_range\ninit = poisson\ninit_density = 1\nN_ladder = 8\nt_list = 0\nn_replicas = 1\n";
    let cfg = write_config(dir.path(), text);
    let out_dir = dir.path().join("o");
    let out = lesim(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("N8/sites_t0.csv")).unwrap();
    let row = text.lines().nth(2).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[2], "value");
    assert!(cells[3].parse::<f64>().is_ok());
    assert_eq!(cells[4], "", "standard error needs two replicas");
    let events = fs::read_to_string(out_dir.join("N8/events.csv")).unwrap();
    assert!(events.trim_end().ends_with("0,0"));
}

#[test]
fn invalid_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "process = zero_range\nN_ladder = 16\nt_list = 0\nn_replicas = 1\nbogus = 1\n");
    let out_dir = dir.path().join("o");
    let out = lesim(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn exhausted_budget_exits_3_and_flags_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{ZERO_RANGE}event_budget = 3\n"));
    let out_dir = dir.path().join("o");
    let out = lesim(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(3));
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("partial = true"));
}

#[test]
fn diagnose_on_empty_directory_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ZERO_RANGE);
    let out = lesim(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("empty").to_str().unwrap(), "diagnose"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn diagnose_refuses_outputs_of_another_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ZERO_RANGE);
    let out_dir = dir.path().join("o");
    assert!(lesim(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "simulate"]).status.success());
    let out = lesim(&["--config", cfg.to_str().unwrap(), "--seed", "99", "--out", out_dir.to_str().unwrap(), "diagnose"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytics_reference_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(lesim(&["--out", out, "analytics", "--family", "gibbs", "--k", "3", "--grid=-3:3:7"]).status.success());
    let path = dir.path().join("gibbs_K3.csv");
    let x = column(&path, "x");
    let u = column(&path, "u_d");
    for (x, u) in x.iter().zip(&u) {
        assert!((x - u).abs() < 1e-10, "u_D({x}) = {u}");
    }
    let rate = column(&path, "fhat_rate");
    let expected = column(&path, "exp_neg_2kx");
    for (r, e) in rate.iter().zip(&expected) {
        assert!((r - e).abs() <= 1e-9 * e, "{r} vs {e}");
    }

    assert!(lesim(&["--out", out, "analytics", "--family", "zero_range", "--grid", "0:6:13"]).status.success());
    let path = dir.path().join("zero_range_linear_plus_fourth_root.csv");
    for (v, f) in column(&path, "v").iter().zip(column(&path, "fhat_identity")) {
        assert!((v - f).abs() < 1e-9, "{v} vs {f}");
    }
}

#[test]
fn analytics_rejects_out_of_domain_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let neg = lesim(&["--out", out, "analytics", "--family", "zero_range", "--grid=-1:2:4"]);
    assert_eq!(neg.status.code(), Some(2));
    let small_k = lesim(&["--out", out, "analytics", "--family", "gibbs", "--k", "0.1", "--grid", "0:1:3"]);
    assert_eq!(small_k.status.code(), Some(2));
    let bad = lesim(&["--out", out, "analytics", "--family", "gibbs", "--grid", "1:0:3"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn tables_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(lesim(&["--out", a.to_str().unwrap(), "tables"]).status.success());
    assert!(lesim(&["--out", b.to_str().unwrap(), "tables"]).status.success());
    assert_eq!(tree(&a), tree(&b));
    assert_eq!(tree(&a).len(), 5);
}

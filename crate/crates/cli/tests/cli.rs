use std::path::Path;
use std::process::{Command, Output};

fn sensorgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensorgrid")).args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("seed = 11\n[grid]\nrows = 3\ncols = 6\n[assembly.pattern.rectangle]\nrow = 0\ncol = 0\nrows = 2\ncols = 2\n{extra}")).unwrap();
    path
}

#[test]
fn simulate_is_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let mut texts = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(jobs);
        let o = sensorgrid(&["simulate", "--config", arg(&cfg), "--jobs", jobs, "--out", arg(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(std::fs::read(out.join("dataset.tsv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    for (name, seed) in [("a", "1"), ("b", "2")] {
        let out = dir.path().join(name);
        assert!(sensorgrid(&["simulate", "--config", arg(&cfg), "--seed", seed, "--out", arg(&out)]).status.success());
    }
    let a = std::fs::read(dir.path().join("a/dataset.tsv")).unwrap();
    let b = std::fs::read(dir.path().join("b/dataset.tsv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn zero_repetitions_give_a_header_only_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[plan]\nrepetitions = 0\n");
    let o = sensorgrid(&["simulate", "--config", arg(&cfg), "--out", arg(dir.path())]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("dataset.tsv")).unwrap();
    assert!(text.lines().count() > 0);
    assert!(text.lines().all(|l| l.starts_with('#')), "{text}");
    let o = sensorgrid(&["estimate", arg(&dir.path().join("dataset.tsv")), "--out", arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn truncated_dataset_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(sensorgrid(&["simulate", "--config", arg(&cfg), "--out", arg(dir.path())]).status.success());
    let path = dir.path().join("dataset.tsv");
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = text.len() - 7;
    std::fs::write(&path, &text[..cut]).unwrap();
    let last = text[..cut].lines().count();
    let o = sensorgrid(&["estimate", arg(&path), "--out", arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("line {last}")), "{err}");
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[ramsey]\npulse_duration = \"fast\"\n");
    let o = sensorgrid(&["simulate", "--config", arg(&cfg), "--out", arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ramsey.pulse_duration"), "{err}");

    let cfg = small_config(dir.path(), "[timing]\nbogus = 1\n");
    assert_eq!(sensorgrid(&["simulate", "--config", arg(&cfg)]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = sensorgrid(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_recovers_the_default_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let out = arg(dir.path());
    assert!(sensorgrid(&["simulate", "--out", out]).status.success());
    let o = sensorgrid(&["estimate", arg(&dir.path().join("dataset.tsv")), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    let line = summary.lines().find(|l| l.starts_with("mean gradient:")).unwrap();
    let value: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((value - 77.3).abs() < 1.0, "{line}");
    let bytes = std::fs::read(dir.path().join("dataset.tsv")).unwrap();
    let hash = format!("input_sha256={}", sensorgrid::dataset::sha256_hex(&bytes));
    for f in ["field_map.tsv", "gradients.tsv", "summary.txt"] {
        assert!(std::fs::read_to_string(dir.path().join(f)).unwrap().contains(&hash), "{f}");
    }
}

#[test]
fn default_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = sensorgrid(&["default-config"]);
    assert!(o.status.success());
    let path = dir.path().join("default.toml");
    std::fs::write(&path, &o.stdout).unwrap();
    let a = sensorgrid(&["simulate", "--config", arg(&path), "--out", arg(&dir.path().join("a"))]);
    let b = sensorgrid(&["simulate", "--out", arg(&dir.path().join("b"))]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("a/dataset.tsv")).unwrap(),
        std::fs::read(dir.path().join("b/dataset.tsv")).unwrap()
    );
}

#[test]
fn rearrange_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = sensorgrid(&["rearrange", "--out", arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("rearrange.tsv")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert!(rows >= 100, "{rows}");
}

#[test]
fn scan_writes_fits_and_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[probe.line]\nstart = [0, \"49 um\"]\nstep = [\"2 um\", 0]\ncount = 30\n");
    let o = sensorgrid(&["scan", "--config", arg(&cfg), "--out", arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["scan_dataset.tsv", "scan_fits.tsv", "scan_gradient.tsv", "scan_summary.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let g = std::fs::read_to_string(dir.path().join("scan_gradient.tsv")).unwrap();
    let row = g.lines().find(|l| l.starts_with("scan")).unwrap();
    let slope: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
    assert!((slope - 77.3e-3).abs() < 5e-3, "{row}");
}

#[test]
fn probe_outside_window_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[probe.line]\nstart = [\"1 mm\", 0]\nstep = [\"1 um\", 0]\ncount = 5\n");
    assert_eq!(sensorgrid(&["scan", "--config", arg(&cfg), "--out", arg(dir.path())]).status.code(), Some(2));
}

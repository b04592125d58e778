use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rcsim"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.toml"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rcsim-test-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(name: &str, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["run", "--config"])
        .arg(config(name))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary_value(out: &Path, key: &str) -> String {
    let text = fs::read_to_string(out.join("summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("{key} missing from summary:\n{text}"))
        .to_string()
}

fn final_estimates(out: &Path) -> Vec<f64> {
    summary_value(out, "final_estimates")
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn reproductions_reach_the_average() {
    for (name, target, tol) in [
        ("five_node", 2.0, 1e-6),
        ("five_node_delayed", 2.0, 1e-6),
        ("periodic3", 3.0, 1e-6),
        ("switching6", 2.0, 1e-6),
        ("switching6_delayed", 2.0, 1e-6),
        ("ack4", 2.0, 1e-6),
        ("geometric", 2.85, 1e-6),
        ("baseline_zero", 2.5, 1e-8),
    ] {
        let out = scratch(name);
        let o = run(name, &out, &[]);
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        for m in final_estimates(&out) {
            assert!((m - target).abs() <= tol, "{name}: {m}");
        }
        for f in ["trace.csv", "spread.csv", "summary.txt"] {
            assert!(out.join(f).is_file(), "{name}: {f}");
        }
        fs::remove_dir_all(&out).unwrap();
    }
}

#[test]
fn remaining_bundled_configs_run() {
    for name in ["ack3", "isolated", "baseline_delays"] {
        let out = scratch(name);
        assert!(run(name, &out, &[]).status.success(), "{name}");
        fs::remove_dir_all(&out).unwrap();
    }
}

#[test]
fn baseline_with_delays_agrees_off_average() {
    let out = scratch("baseline-delays");
    assert!(run("baseline_delays", &out, &[]).status.success());
    let est = final_estimates(&out);
    assert!((est[0] - est[1]).abs() <= 1e-8);
    assert!((est[0] - 0.5).abs() > 1e-3, "{est:?}");
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,node,x\n"));
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn oracle_check_passes_on_ratio_configs() {
    for name in [
        "five_node",
        "five_node_delayed",
        "periodic3",
        "switching6_delayed",
        "ack3",
        "ack4",
    ] {
        let o = bin()
            .args(["oracle-check", "--config"])
            .arg(config(name))
            .output()
            .unwrap();
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(0), "{name}: {stdout}");
        assert!(stdout.contains("result: pass"));
    }
}

#[test]
fn oracle_check_refuses_baseline() {
    let o = bin()
        .args(["oracle-check", "--config"])
        .arg(config("baseline_zero"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not checkable"));
}

fn analyze(name: &str) -> String {
    let o = bin()
        .args(["analyze", "--config"])
        .arg(config(name))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{name}");
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn analyze_reports() {
    let five = analyze("five_node");
    assert!(five.contains("envelope_violations: 0"), "{five}");
    assert!(five.contains("meets_conservative: true"));
    assert!(five.contains("mixing: yes"));
    let sw = analyze("periodic3");
    assert!(sw.contains("non_sia_windows: 0"), "{sw}");
    let iso = analyze("isolated");
    assert!(iso.contains("mixing: none"), "{iso}");
}

#[test]
fn analyze_writes_files_and_reads_traces() {
    let out = scratch("analyze");
    let o = bin()
        .args(["analyze", "--config"])
        .arg(config("five_node_delayed"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(fs::read_to_string(out.join("delta.csv"))
        .unwrap()
        .starts_with("window,steps,delta\n"));

    let runs = scratch("analyze-trace");
    assert!(run("five_node", &runs, &[]).status.success());
    let o = bin()
        .args(["analyze", "--trace"])
        .arg(runs.join("trace.csv"))
        .output()
        .unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(o.status.success());
    assert!(text.contains("average: 2.0"), "{text}");
    assert!(text.contains("steps_to_epsilon: 30"), "{text}");
    fs::remove_dir_all(&out).unwrap();
    fs::remove_dir_all(&runs).unwrap();
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let dir = scratch("malformed");
    fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.toml");
    let text = fs::read_to_string(config("five_node_delayed"))
        .unwrap()
        .replace("tau_bar = 5", "tau_bar = 5\nsource = \"bursty\"");
    fs::write(&bad, text.replace("source = \"uniform\"\n", "")).unwrap();
    let out = dir.join("out");
    let o = bin()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delays.source"));
    assert!(!out.exists());

    fs::write(&bad, "name = \"x\"\nseed = 1\n").unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reruns_are_byte_identical() {
    for name in [
        "five_node_delayed",
        "switching6_delayed",
        "geometric",
        "ack4",
    ] {
        let a = scratch(&format!("{name}-a"));
        let b = scratch(&format!("{name}-b"));
        assert!(run(name, &a, &[]).status.success());
        assert!(run(name, &b, &[]).status.success());
        for f in ["trace.csv", "spread.csv", "summary.txt"] {
            assert_eq!(
                fs::read(a.join(f)).unwrap(),
                fs::read(b.join(f)).unwrap(),
                "{name}/{f}"
            );
        }
        let c = scratch(&format!("{name}-c"));
        assert!(run(name, &c, &["--seed-override", "99"]).status.success());
        assert_ne!(
            fs::read(a.join("trace.csv")).unwrap(),
            fs::read(c.join("trace.csv")).unwrap(),
            "{name}"
        );
        for d in [a, b, c] {
            fs::remove_dir_all(d).unwrap();
        }
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn collapsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collapsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("COLLAPSIM_SEED")
        .output()
        .expect("binary runs")
}

fn small(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = ["n_trajectories=300", "evolution.n_steps=1500"]
        .iter()
        .flat_map(|s| ["--set".to_string(), s.to_string()])
        .collect();
    for s in extra {
        v.push("--set".into());
        v.push(s.to_string());
    }
    v
}

fn run(cmd: &str, sets: &[String], extra: &[&str], out: &Path) -> Output {
    let mut args: Vec<&str> = vec![cmd];
    args.extend(sets.iter().map(String::as_str));
    args.extend_from_slice(extra);
    collapsim(&args, out)
}

#[test]
fn simulate_is_deterministic_and_analyze_reproduces_summary() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let sets = small(&[]);
    let first = run("simulate", &sets, &["--seed", "9"], a.path());
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = run(
        "simulate",
        &sets,
        &["--seed", "9", "--workers", "2"],
        b.path(),
    );
    assert!(second.status.success());
    for f in ["records.csv", "summary.txt", "config.txt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let summary = fs::read_to_string(a.path().join("summary.txt")).unwrap();
    assert_eq!(String::from_utf8(first.stdout).unwrap(), summary);

    // Analysis of the persisted records, driven by the dumped config.
    let c = TempDir::new().unwrap();
    let config = a.path().join("config.txt");
    let records = a.path().join("records.csv");
    let analyzed = collapsim(
        &[
            "analyze",
            "--config",
            config.to_str().unwrap(),
            "--records",
            records.to_str().unwrap(),
        ],
        c.path(),
    );
    assert!(
        analyzed.status.success(),
        "{}",
        String::from_utf8_lossy(&analyzed.stderr)
    );
    assert_eq!(
        fs::read_to_string(c.path().join("summary.txt")).unwrap(),
        summary
    );
}

#[test]
fn dumped_config_replays_the_run() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let sets = small(&["evolution.coupling.g=1.2"]);
    assert!(run("simulate", &sets, &["--seed", "3"], a.path())
        .status
        .success());
    let config = a.path().join("config.txt");
    let replay = collapsim(
        &["simulate", "--config", config.to_str().unwrap()],
        b.path(),
    );
    assert!(replay.status.success());
    assert_eq!(
        fs::read(a.path().join("records.csv")).unwrap(),
        fs::read(b.path().join("records.csv")).unwrap()
    );
}

#[test]
fn seed_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(
        &cfg,
        "master_seed = 5\nn_trajectories = 1\nevolution.n_steps = 100\n",
    )
    .unwrap();
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let out = TempDir::new().unwrap();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_collapsim"));
        cmd.args(["simulate", "--config", cfg.to_str().unwrap(), "--out"])
            .arg(out.path())
            .env_remove("COLLAPSIM_SEED");
        if let Some(e) = env {
            cmd.env("COLLAPSIM_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.output().unwrap().status.success());
        let records = fs::read_to_string(out.path().join("records.csv")).unwrap();
        records
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .to_string()
    };
    assert_eq!(seed_of(None, None), "5");
    assert_eq!(seed_of(Some("6"), None), "6");
    assert_eq!(seed_of(Some("6"), Some("7")), "7");

    let out = TempDir::new().unwrap();
    let default = collapsim(
        &[
            "simulate",
            "--set",
            "n_trajectories=1",
            "--set",
            "evolution.n_steps=100",
        ],
        out.path(),
    );
    assert!(default.status.success());
    let records = fs::read_to_string(out.path().join("records.csv")).unwrap();
    assert_eq!(
        records.lines().nth(1).unwrap().split(',').nth(2).unwrap(),
        "42"
    );
}

#[test]
fn single_trajectory_summary_is_degenerate() {
    let out = TempDir::new().unwrap();
    let o = collapsim(
        &[
            "simulate",
            "--set",
            "n_trajectories=1",
            "--set",
            "evolution.n_steps=200",
        ],
        out.path(),
    );
    assert!(o.status.success());
    let summary = fs::read_to_string(out.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("n_total = 1\n"));
    for key in [
        "visibility_elastic",
        "r_pb",
        "p_value",
        "mean_distance_created",
    ] {
        assert!(summary.contains(&format!("{key} = none\n")), "{summary}");
    }
}

#[test]
fn pattern_at_zero_coupling_is_normalized() {
    let out = TempDir::new().unwrap();
    let o = collapsim(&["pattern", "--set", "evolution.coupling.g=0"], out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.path().join("pattern.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,pdf_n0,pdf_n1,pdf_n2,pdf_total");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let dx = rows[1][0] - rows[0][0];
    let total: f64 = rows.iter().map(|r| r[4]).sum::<f64>() * dx;
    assert!((total - 1.0).abs() < 1e-6, "{total}");
    assert!(rows.iter().all(|r| r[2] == 0.0 && r[3] == 0.0));
}

#[test]
fn exit_codes() {
    let out = TempDir::new().unwrap();
    let bad_value = collapsim(
        &["simulate", "--set", "evolution.coupling.g=-1"],
        out.path(),
    );
    assert_eq!(bad_value.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_value.stderr).contains("evolution.coupling.g"));

    let unknown = collapsim(&["mzi", "--set", "no.such.key=1"], out.path());
    assert_eq!(unknown.status.code(), Some(1));

    let missing = collapsim(&["mzi", "--config", "/nonexistent/c.txt"], out.path());
    assert_eq!(missing.status.code(), Some(1));

    let no_records = collapsim(&["analyze", "--records", "/nonexistent/r.csv"], out.path());
    assert_eq!(no_records.status.code(), Some(3));

    // A long flight pushes the packet into the guard band.
    let leak = collapsim(
        &[
            "pattern",
            "--set",
            "flight_time=6",
            "--set",
            "evolution.coupling.g=0",
        ],
        out.path(),
    );
    assert_eq!(leak.status.code(), Some(2));
}

#[test]
fn mzi_prints_balanced_probabilities() {
    let out = TempDir::new().unwrap();
    let o = collapsim(&["mzi", "--set", "mzi.n_shots=1000"], out.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let p_absorbed: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("p_absorbed = "))
        .expect("p_absorbed line")
        .parse()
        .unwrap();
    assert!((p_absorbed - 0.5).abs() < 1e-12, "{text}");
    assert!(text.contains("n_shots = 1000"));

    let absent = collapsim(&["mzi", "--set", "mzi.object_present=false"], out.path());
    let text = String::from_utf8(absent.stdout).unwrap();
    assert!(text.contains("dark = 0\n"), "{text}");
}

#[test]
fn defect_writes_both_values() {
    let out = TempDir::new().unwrap();
    let o = collapsim(&["defect"], out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.path().join("defect.txt")).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("defect_g0") <= 1e-9);
    assert!(value("defect_g") > 1e-4);
}

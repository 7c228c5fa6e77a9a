//! End-to-end acceptance run: prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use collapsim::collapse::measure_phonon;
use collapsim::dynamics::Propagator;
use collapsim::experiment::{
    defect_values, initial_state, point_biserial_test, read_records, screen_pattern, write_records,
    ExperimentConfig, TrajectoryRecord,
};
use collapsim::hilbert::{
    gaussian_packet, hermitian_eigenvalues, reduced_phonon_dm, sector_weights, von_neumann_entropy,
    FockRegister, GridSpec, JointState, WaveField,
};
use collapsim::mzi::{mzi_probabilities, mzi_sample, MziConfig};
use collapsim::observables::fringe_analysis;
use collapsim::rng::RngStream;
use nalgebra::DMatrix;
use num_complex::Complex64;
use tempfile::TempDir;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_3_sigma(count: u64, n: u64, p: f64) -> bool {
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - n as f64 * p).abs() <= 3.0 * sigma
}

fn collapsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_collapsim"))
        .args(args)
        .env_remove("COLLAPSIM_SEED")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// One default `simulate` run through the binary, shared by several criteria.
struct DefaultRun {
    dir: TempDir,
    elapsed: Duration,
    records: Vec<TrajectoryRecord>,
}

impl DefaultRun {
    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn simulate_defaults() -> Result<(TempDir, Duration), String> {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let o = collapsim(&["simulate", "--workers", "8", "--out", path_str(dir.path())]);
    let elapsed = t.elapsed();
    if !o.status.success() {
        return Err(format!(
            "simulate failed: {}",
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    Ok((dir, elapsed))
}

fn default_run() -> Result<&'static DefaultRun, String> {
    static RUN: OnceLock<Result<DefaultRun, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let (dir, elapsed) = simulate_defaults()?;
        let records = read_records(&dir.path().join("records.csv")).map_err(|e| e.to_string())?;
        Ok(DefaultRun {
            dir,
            elapsed,
            records,
        })
    })
    .as_ref()
    .map_err(Clone::clone)
}

fn summary_value(run: &DefaultRun, key: &str) -> Result<f64, String> {
    let text = std::fs::read_to_string(run.file("summary.txt")).map_err(|e| e.to_string())?;
    let prefix = format!("{key} = ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .ok_or_else(|| format!("summary lacks {key}"))?
        .parse()
        .map_err(|_| format!("{key} is not a number"))
}

fn unitarity() -> Verdict {
    let cfg = ExperimentConfig::default();
    let prop = Propagator::new(&cfg.grid, cfg.fock, &cfg.evolution).map_err(|e| e.to_string())?;
    let mut state = initial_state(&cfg).map_err(|e| e.to_string())?;
    let n0 = state.norm();
    let t = Instant::now();
    prop.evolve(&mut state, 10_000);
    let elapsed = t.elapsed().as_secs_f64();
    let drift = (state.norm() - n0).abs();
    check(
        drift <= 1e-7 && elapsed < 30.0,
        format!("norm drift {drift:.2e} over 10^4 steps in {elapsed:.1} s"),
    )
}

fn random_wave(grid: GridSpec, rng: &mut RngStream) -> WaveField {
    let amp = (0..grid.n_points())
        .map(|_| Complex64::new(rng.uniform() - 0.5, rng.uniform() - 0.5))
        .collect();
    WaveField::new(grid, amp).unwrap().normalized().unwrap()
}

fn pure_state_entropy() -> Verdict {
    let grid = GridSpec::new(64, -8.0, 8.0).unwrap();
    let fock = FockRegister::new(2).unwrap();
    let mut rng = RngStream::new(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let psi = random_wave(grid, &mut rng);
        let coeffs: Vec<Complex64> = (0..3)
            .map(|_| Complex64::new(rng.uniform() - 0.5, rng.uniform() - 0.5))
            .collect();
        let branches: Vec<_> = coeffs
            .iter()
            .enumerate()
            .map(|(n, &c)| (n, c, &psi))
            .collect();
        let state = JointState::from_branches(grid, fock, &branches)
            .unwrap()
            .normalized()
            .unwrap();
        let s = von_neumann_entropy(&reduced_phonon_dm(&state).unwrap()).unwrap();
        worst = worst.max(s.abs());
    }

    let wide = GridSpec::new(512, -40.0, 40.0).unwrap();
    let left = gaussian_packet(&wide, -10.0, 1.0, 0.0).unwrap();
    let right = gaussian_packet(&wide, 10.0, 1.0, 0.0).unwrap();
    let h = Complex64::new(0.5f64.sqrt(), 0.0);
    let bell = JointState::from_branches(wide, fock, &[(0, h, &left), (1, h, &right)]).unwrap();
    let s = von_neumann_entropy(&reduced_phonon_dm(&bell).unwrap()).unwrap();
    check(
        worst <= 1e-9 && (s - 1.0).abs() <= 1e-6,
        format!("max product entropy {worst:.1e}, branch entropy {s:.9} bit"),
    )
}

fn born_consistency() -> Verdict {
    let run = default_run()?;
    let cfg = ExperimentConfig::default();
    let prop = Propagator::new(&cfg.grid, cfg.fock, &cfg.evolution).map_err(|e| e.to_string())?;
    let mut state = initial_state(&cfg).map_err(|e| e.to_string())?;
    prop.evolve(&mut state, cfg.monitor.cadence);
    let weights = sector_weights(&state);

    // Every trajectory's first draw happens on this same state.
    let n = cfg.n_trajectories as u64;
    let mut counts = vec![0u64; weights.len()];
    for id in 0..n {
        let (outcome, _) = measure_phonon(&state, &mut RngStream::split(cfg.master_seed, id))
            .map_err(|e| e.to_string())?;
        counts[outcome] += 1;
    }
    let per_sector = counts
        .iter()
        .zip(&weights)
        .all(|(&c, &w)| within_3_sigma(c, n, w));

    let first = run
        .records
        .iter()
        .filter(|r| r.first_creation_step == Some(cfg.monitor.cadence))
        .count() as u64;
    let p_created = 1.0 - weights[0];
    let recorded = within_3_sigma(first, run.records.len() as u64, p_created);
    check(
        per_sector && recorded,
        format!(
            "first-measurement counts {counts:?} vs weights [{}]; \
             records created at first check {first} vs expected {:.1}",
            weights
                .iter()
                .map(|w| format!("{w:.3e}"))
                .collect::<Vec<_>>()
                .join(", "),
            p_created * run.records.len() as f64
        ),
    )
}

fn double_slit_fringes() -> Verdict {
    let mut cfg = ExperimentConfig::default();
    cfg.evolution.coupling.g = 0.0;
    cfg.monitor.enabled = false;
    let t = Instant::now();
    let sectors = screen_pattern(&cfg).map_err(|e| e.to_string())?;
    let total: Vec<f64> = (0..cfg.grid.n_points())
        .map(|i| sectors.iter().map(|s| s[i]).sum())
        .collect();
    let a = cfg.analysis;
    let fringes = fringe_analysis(&total, &cfg.grid.xs(), a.visibility_window, a.prominence)
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed().as_secs_f64();
    check(
        fringes.visibility >= 0.6 && fringes.maxima.len() >= 3 && elapsed < 60.0,
        format!(
            "visibility {:.3} with {} fringes in {elapsed:.1} s",
            fringes.visibility,
            fringes.maxima.len()
        ),
    )
}

fn which_path_washout() -> Verdict {
    let run = default_run()?;
    let v_el = summary_value(run, "visibility_elastic")?;
    let v_cr = summary_value(run, "visibility_created")?;
    let secs = run.elapsed.as_secs_f64();
    check(
        v_cr <= v_el - 0.3 && secs < 600.0,
        format!(
            "V_elastic {v_el:.3}, V_created {v_cr:.3} over {} trajectories in {secs:.0} s",
            run.records.len()
        ),
    )
}

fn correlation_statistic() -> Verdict {
    let run = default_run()?;
    let cfg = ExperimentConfig::default();
    let r = summary_value(run, "r_pb")?;
    let p = summary_value(run, "p_value")?;

    let distances: Vec<f64> = run
        .records
        .iter()
        .map(|r| r.distance_to_max.ok_or("record without distance"))
        .collect::<Result<_, _>>()?;
    let mut labels: Vec<bool> = run.records.iter().map(|r| r.phonon_created).collect();
    let replicates = 200;
    let mut rejections = 0;
    for rep in 0..replicates {
        let mut rng = RngStream::split(0x5EED, rep);
        for i in (1..labels.len()).rev() {
            labels.swap(i, rng.below(i + 1));
        }
        let (_, p_null) =
            point_biserial_test(&labels, &distances, cfg.analysis.permutations, rep + 1)
                .map_err(|e| e.to_string())?;
        if p_null < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / replicates as f64;
    check(
        r > 0.0 && p < 0.01 && rate <= 0.07,
        format!("r_pb {r:.4}, p {p:.2e}; shuffled-label rejection rate {rate:.3}"),
    )
}

fn nonlinearity() -> Verdict {
    let (d0, dg) = defect_values(&ExperimentConfig::default()).map_err(|e| e.to_string())?;
    check(
        d0 <= 1e-9 && dg > 1e-4,
        format!("defect {d0:.2e} at g = 0, {dg:.3e} at the coupled setting"),
    )
}

fn interaction_free() -> Verdict {
    let mut details = Vec::new();
    let mut ok = true;
    for (present, expected) in [(false, [0.0, 1.0, 0.0]), (true, [0.25, 0.25, 0.5])] {
        let cfg = MziConfig::balanced(present);
        let p = mzi_probabilities(&cfg);
        let probs = [p.p_dark, p.p_bright, p.p_absorbed];
        ok &= probs
            .iter()
            .zip(&expected)
            .all(|(a, b)| (a - b).abs() <= 1e-12);
        let n = 10_000;
        let c = mzi_sample(&cfg, n, &mut RngStream::new(42)).map_err(|e| e.to_string())?;
        let counts = [c.dark, c.bright, c.absorbed];
        ok &= counts
            .iter()
            .zip(&expected)
            .all(|(&k, &q)| within_3_sigma(k, n, q));
        details.push(format!("object {present}: p {probs:?}, counts {counts:?}"));
    }
    check(ok, details.join("; "))
}

fn determinism_and_persistence() -> Verdict {
    let first = default_run()?;
    let (second, _) = simulate_defaults()?;
    let read = |p: PathBuf| std::fs::read(p).map_err(|e| e.to_string());
    let same_records = read(first.file("records.csv"))? == read(second.path().join("records.csv"))?;
    let same_summary = read(first.file("summary.txt"))? == read(second.path().join("summary.txt"))?;

    let scratch = TempDir::new().map_err(|e| e.to_string())?;
    let copy = scratch.path().join("records.csv");
    write_records(&first.records, &copy).map_err(|e| e.to_string())?;
    let round_trip = read(copy.clone())? == read(first.file("records.csv"))?
        && read_records(&copy).map_err(|e| e.to_string())? == first.records;

    let analyzed = scratch.path().join("analysis");
    std::fs::create_dir(&analyzed).map_err(|e| e.to_string())?;
    let o = collapsim(&[
        "analyze",
        "--config",
        path_str(&first.file("config.txt")),
        "--records",
        path_str(&first.file("records.csv")),
        "--out",
        path_str(&analyzed),
    ]);
    let reproduced = o.status.success()
        && read(analyzed.join("summary.txt"))? == read(first.file("summary.txt"))?;
    check(
        same_records && same_summary && round_trip && reproduced,
        format!(
            "byte-identical records {same_records}, summary {same_summary}; \
             round trip {round_trip}; analyze reproduces summary {reproduced}"
        ),
    )
}

fn electron_dm(state: &JointState) -> DMatrix<Complex64> {
    let n = state.grid().n_points();
    let dx = state.grid().dx();
    let mut rho = DMatrix::zeros(n, n);
    for s in 0..state.fock().dim() {
        let psi = state.sector(s);
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] += psi[i] * psi[j].conj() * dx;
            }
        }
    }
    rho
}

fn schmidt_symmetry() -> Verdict {
    let mut rng = RngStream::new(10);
    let fock = FockRegister::new(1).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n_points = [8, 16, 32, 64][k % 4];
        let grid = GridSpec::new(n_points, -4.0, 4.0).unwrap();
        let amp = (0..n_points * fock.dim())
            .map(|_| Complex64::new(rng.uniform() - 0.5, rng.uniform() - 0.5))
            .collect();
        let state = JointState::from_amplitudes(grid, fock, amp)
            .unwrap()
            .normalized()
            .unwrap();
        let mut phonon = reduced_phonon_dm(&state).unwrap().eigenvalues();
        let mut electron = hermitian_eigenvalues(electron_dm(&state));
        phonon.sort_by(|a, b| b.total_cmp(a));
        electron.sort_by(|a, b| b.total_cmp(a));
        for (i, l) in electron.iter().enumerate() {
            worst = worst.max((l - phonon.get(i).copied().unwrap_or(0.0)).abs());
        }
    }
    check(
        worst <= 1e-8,
        format!("max spectral mismatch {worst:.1e} over 20 states"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("unitarity", unitarity),
        ("pure-state entropy", pure_state_entropy),
        ("Born consistency", born_consistency),
        ("double-slit fringes", double_slit_fringes),
        ("which-path washout", which_path_washout),
        ("correlation statistic", correlation_statistic),
        ("nonlinearity", nonlinearity),
        ("interaction-free measurement", interaction_free),
        ("determinism and persistence", determinism_and_persistence),
        ("Schmidt symmetry", schmidt_symmetry),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let verdict =
            catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".to_string()));
        match verdict {
            Ok(d) => println!("PASS {:>2} {name}: {d}", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use collapsim::config::{dump, load_config, parse_config};
use collapsim::experiment::{
    defect_values, read_records, run_ensemble_with_workers, screen_pattern, summarize,
    write_records, write_summary, ExperimentConfig,
};
use collapsim::mzi::{mzi_probabilities, mzi_sample};
use collapsim::rng::RngStream;
use collapsim::Error;

use crate::Common;

pub const SEED_ENV: &str = "COLLAPSIM_SEED";

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: 3,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_config() {
            1
        } else if e.is_io() || io_inside(&e) {
            3
        } else {
            2
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_inside(e: &Error) -> bool {
    match e {
        Error::Trajectory { source, .. } => source.is_io() || io_inside(source),
        Error::EnsembleFailed { first, .. } => first.is_io() || io_inside(first),
        _ => false,
    }
}

type Outcome = Result<(), Failure>;

/// Effective configuration: file (or defaults), `--set` overrides, then the
/// seed precedence flag > environment > config.
fn configure(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Failure::config(format!(
                    "config file {} does not exist",
                    path.display()
                )));
            }
            load_config(path, &c.overrides).map_err(|e| match e {
                Error::Io(io) => Failure::config(format!("{}: {io}", path.display())),
                other => Failure::config(other.to_string()),
            })?
        }
        None => parse_config("", &c.overrides).map_err(|e| Failure::config(e.to_string()))?,
    };
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.master_seed = raw.trim().parse().map_err(|_| {
            Failure::config(format!(
                "{SEED_ENV} must be an unsigned 64-bit integer, got `{raw}`"
            ))
        })?;
    }
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<&Path, Failure> {
    fs::create_dir_all(&c.out).map_err(|e| Failure::io(&c.out, e))?;
    Ok(&c.out)
}

fn write(path: PathBuf, text: &str) -> Outcome {
    fs::write(&path, text).map_err(|e| Failure::io(&path, e))
}

fn workers(c: &Common) -> usize {
    c.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn simulate(c: &Common) -> Outcome {
    let cfg = configure(c)?;
    let out = out_dir(c)?;
    let (records, summary) = run_ensemble_with_workers(&cfg, workers(c))?;
    write_records(&records, &out.join("records.csv"))?;
    write_summary(&summary, &out.join("summary.txt"))?;
    write(out.join("config.txt"), &dump(&cfg))?;
    print!("{}", summary.to_text());
    for note in &summary.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}

pub fn pattern(c: &Common) -> Outcome {
    let cfg = configure(c)?;
    let out = out_dir(c)?;
    let sectors = screen_pattern(&cfg)?;
    let mut text = String::from("x");
    for n in 0..sectors.len() {
        let _ = write!(text, ",pdf_n{n}");
    }
    text.push_str(",pdf_total\n");
    for (i, x) in cfg.grid.xs().iter().enumerate() {
        let _ = write!(text, "{x}");
        let mut total = 0.0;
        for s in &sectors {
            total += s[i];
            let _ = write!(text, ",{}", s[i]);
        }
        let _ = writeln!(text, ",{total}");
    }
    write(out.join("pattern.csv"), &text)
}

pub fn analyze(c: &Common, records: Option<&Path>) -> Outcome {
    let cfg = configure(c)?;
    let out = out_dir(c)?;
    let path = records.map_or_else(|| out.join("records.csv"), Path::to_path_buf);
    let mut records = read_records(&path)?;
    let summary = summarize(&mut records, &cfg)?;
    write_summary(&summary, &out.join("summary.txt"))?;
    print!("{}", summary.to_text());
    for note in &summary.notes {
        eprintln!("note: {note}");
    }
    Ok(())
}

pub fn defect(c: &Common) -> Outcome {
    let cfg = configure(c)?;
    let out = out_dir(c)?;
    let (linear, coupled) = defect_values(&cfg)?;
    let text = format!(
        "g = 0\ndefect_g0 = {linear}\ng = {}\ndefect_g = {coupled}\n",
        cfg.defect.g
    );
    print!("{text}");
    write(out.join("defect.txt"), &text)
}

pub fn mzi(c: &Common) -> Outcome {
    let cfg = configure(c)?;
    let p = mzi_probabilities(&cfg.mzi);
    println!("p_dark = {}", p.p_dark);
    println!("p_bright = {}", p.p_bright);
    println!("p_absorbed = {}", p.p_absorbed);
    if cfg.mzi_shots > 0 {
        let counts = mzi_sample(
            &cfg.mzi,
            cfg.mzi_shots,
            &mut RngStream::new(cfg.master_seed),
        )?;
        println!("n_shots = {}", cfg.mzi_shots);
        println!("dark = {}", counts.dark);
        println!("bright = {}", counts.bright);
        println!("absorbed = {}", counts.absorbed);
    }
    Ok(())
}

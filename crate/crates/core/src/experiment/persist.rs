//! Records as versioned CSV, summaries as `key = value` text.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::{EnsembleSummary, TrajectoryRecord};

pub const SCHEMA: &str = "collapsim-v1";

pub const RECORDS_HEADER: [&str; 8] = [
    "schema",
    "trajectory_id",
    "seed",
    "screen_x",
    "phonon_created",
    "n_phonons_final",
    "first_creation_step",
    "distance_to_max",
];

const SUMMARY_KEYS: [&str; 9] = [
    "n_total",
    "n_created",
    "n_elastic",
    "visibility_elastic",
    "visibility_created",
    "r_pb",
    "p_value",
    "mean_distance_elastic",
    "mean_distance_created",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_records(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            SCHEMA.to_string(),
            r.id.to_string(),
            r.seed.to_string(),
            r.screen_x.to_string(),
            (r.phonon_created as u8).to_string(),
            r.n_phonons_final.to_string(),
            opt(r.first_creation_step),
            opt(r.distance_to_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: FromStr>(row: &csv::StringRecord, col: usize, line: usize) -> Result<T> {
    let raw = &row[col];
    raw.parse().map_err(|_| {
        Error::Schema(format!(
            "line {line}: column `{}` cannot hold `{raw}`",
            RECORDS_HEADER[col]
        ))
    })
}

fn optional<T: FromStr>(row: &csv::StringRecord, col: usize, line: usize) -> Result<Option<T>> {
    if row[col].is_empty() {
        Ok(None)
    } else {
        field(row, col, line).map(Some)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    if let Some(unknown) = header.iter().find(|h| !RECORDS_HEADER.contains(h)) {
        return Err(Error::Schema(format!("unknown column `{unknown}`")));
    }
    if let Some(missing) = RECORDS_HEADER
        .iter()
        .find(|k| !header.iter().any(|h| h == **k))
    {
        return Err(Error::Schema(format!("missing column `{missing}`")));
    }
    if header.iter().ne(RECORDS_HEADER) {
        return Err(Error::Schema("columns out of order".into()));
    }

    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = k + 2;
        if &row[0] != SCHEMA {
            return Err(Error::Schema(format!(
                "line {line}: unsupported schema `{}` (expected `{SCHEMA}`)",
                &row[0]
            )));
        }
        let phonon_created = match &row[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Schema(format!(
                    "line {line}: phonon_created must be 0 or 1, got `{other}`"
                )))
            }
        };
        let record = TrajectoryRecord {
            id: field(&row, 1, line)?,
            seed: field(&row, 2, line)?,
            screen_x: field(&row, 3, line)?,
            phonon_created,
            n_phonons_final: field(&row, 5, line)?,
            first_creation_step: optional(&row, 6, line)?,
            distance_to_max: optional(&row, 7, line)?,
        };
        if record.phonon_created != record.first_creation_step.is_some() {
            return Err(Error::Schema(format!(
                "line {line}: first_creation_step must be present exactly when phonon_created = 1"
            )));
        }
        records.push(record);
    }
    Ok(records)
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl EnsembleSummary {
    pub fn to_text(&self) -> String {
        let values = [
            self.n_total.to_string(),
            self.n_created.to_string(),
            self.n_elastic.to_string(),
            opt_real(self.visibility_elastic),
            opt_real(self.visibility_created),
            opt_real(self.r_pb),
            opt_real(self.p_value),
            opt_real(self.mean_distance_elastic),
            opt_real(self.mean_distance_created),
        ];
        let mut out = String::new();
        for (k, v) in SUMMARY_KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values: [Option<String>; 9] = Default::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: k + 1,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            let slot =
                SUMMARY_KEYS
                    .iter()
                    .position(|s| *s == key)
                    .ok_or_else(|| Error::UnknownKey {
                        key: key.to_string(),
                        line: k + 1,
                    })?;
            values[slot] = Some(value.trim().to_string());
        }
        let get = |i: usize| {
            values[i]
                .as_deref()
                .ok_or_else(|| Error::Schema(format!("summary lacks `{}`", SUMMARY_KEYS[i])))
        };
        let count = |i: usize| -> Result<usize> {
            get(i)?
                .parse()
                .map_err(|_| Error::Schema(format!("`{}` is not a count", SUMMARY_KEYS[i])))
        };
        let real = |i: usize| -> Result<Option<f64>> {
            match get(i)? {
                "none" => Ok(None),
                s => s
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Schema(format!("`{}` is not a real", SUMMARY_KEYS[i]))),
            }
        };
        Ok(EnsembleSummary {
            n_total: count(0)?,
            n_created: count(1)?,
            n_elastic: count(2)?,
            visibility_elastic: real(3)?,
            visibility_created: real(4)?,
            r_pb: real(5)?,
            p_value: real(6)?,
            mean_distance_elastic: real(7)?,
            mean_distance_created: real(8)?,
            notes: Vec::new(),
        })
    }
}

pub fn write_summary(summary: &EnsembleSummary, path: &Path) -> Result<()> {
    std::fs::write(path, summary.to_text())?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<EnsembleSummary> {
    EnsembleSummary::from_text(&std::fs::read_to_string(path)?)
}

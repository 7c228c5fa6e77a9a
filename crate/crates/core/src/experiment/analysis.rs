use crate::error::{Error, Result};
use crate::observables::{
    distance_to_nearest_max, find_maxima_at, histogram, smooth, visibility_at, Histogram,
};
use crate::rng::RngStream;

use super::{ExperimentConfig, TrajectoryRecord};

/// Smallest elastic class for which maxima are located.
pub const MIN_ELASTIC: usize = 100;

/// Fixed stream for label permutations, so analysis is a pure function of
/// the records.
pub const PERMUTATION_SEED: u64 = 0x00C0_FFEE;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleSummary {
    pub n_total: usize,
    pub n_created: usize,
    pub n_elastic: usize,
    pub visibility_elastic: Option<f64>,
    pub visibility_created: Option<f64>,
    pub r_pb: Option<f64>,
    pub p_value: Option<f64>,
    pub mean_distance_elastic: Option<f64>,
    pub mean_distance_created: Option<f64>,
    /// Reasons for absent or substituted values; not persisted.
    pub notes: Vec<String>,
}

/// Smoothed screen histogram of the given positions over the configured
/// screen window: (bin centers, smoothed counts).
pub fn class_histogram(xs: &[f64], config: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = config.screen_window;
    let h = histogram(xs, &Histogram::uniform_edges(lo, hi, config.histogram_bins))?;
    let counts: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    Ok((h.centers(), smooth(&counts, config.analysis.smoothing)))
}

/// Interference maxima of the elastic sub-ensemble's smoothed histogram.
pub fn elastic_maxima(records: &[TrajectoryRecord], config: &ExperimentConfig) -> Result<Vec<f64>> {
    let xs: Vec<f64> = records
        .iter()
        .filter(|r| !r.phonon_created)
        .map(|r| r.screen_x)
        .collect();
    if xs.len() < MIN_ELASTIC {
        return Err(Error::InsufficientElastic(xs.len()));
    }
    let (centers, counts) = class_histogram(&xs, config)?;
    let maxima = find_maxima_at(
        &counts,
        &centers,
        config.screen_window,
        config.analysis.prominence,
    )?;
    if maxima.is_empty() {
        return Err(Error::EmptyMaxima);
    }
    Ok(maxima)
}

/// Class visibility; a class whose histogram shows no fringe pair is
/// reported as 0.
fn class_visibility(
    xs: &[f64],
    config: &ExperimentConfig,
    label: &str,
    notes: &mut Vec<String>,
) -> Result<f64> {
    let (centers, counts) = class_histogram(xs, config)?;
    let a = &config.analysis;
    match visibility_at(&counts, &centers, a.visibility_window, a.prominence) {
        Ok(v) => Ok(v),
        Err(Error::NoFringe) => {
            notes.push(format!(
                "{label}: no fringes in the visibility window, reported as 0"
            ));
            Ok(0.0)
        }
        Err(e) => Err(e),
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Fills `distance_to_max` on every record and computes the class statistics.
pub fn analyze(
    records: &mut [TrajectoryRecord],
    config: &ExperimentConfig,
) -> Result<EnsembleSummary> {
    if records.is_empty() {
        return Err(Error::DegenerateInput("no records to analyze".into()));
    }
    let maxima = elastic_maxima(records, config)?;
    for r in records.iter_mut() {
        r.distance_to_max = Some(distance_to_nearest_max(r.screen_x, &maxima)?);
    }

    let mut notes = Vec::new();
    let (mut x_el, mut x_cr, mut d_el, mut d_cr) = (vec![], vec![], vec![], vec![]);
    for r in records.iter() {
        let d = r.distance_to_max.unwrap_or(0.0);
        if r.phonon_created {
            x_cr.push(r.screen_x);
            d_cr.push(d);
        } else {
            x_el.push(r.screen_x);
            d_el.push(d);
        }
    }
    let visibility_elastic = Some(class_visibility(
        &x_el,
        config,
        "visibility_elastic",
        &mut notes,
    )?);
    let visibility_created = if x_cr.is_empty() {
        notes.push("visibility_created: no phonon-created trajectories".into());
        None
    } else {
        Some(class_visibility(
            &x_cr,
            config,
            "visibility_created",
            &mut notes,
        )?)
    };

    let (r_pb, p_value) = match point_biserial(records, config.analysis.permutations) {
        Ok((r, p)) => (Some(r), Some(p)),
        Err(Error::SingleClass) => {
            notes.push("r_pb: single-class".into());
            (None, None)
        }
        Err(Error::ZeroVariance) => {
            notes.push("r_pb: zero-variance".into());
            (None, None)
        }
        Err(e) => return Err(e),
    };

    Ok(EnsembleSummary {
        n_total: records.len(),
        n_created: x_cr.len(),
        n_elastic: x_el.len(),
        visibility_elastic,
        visibility_created,
        r_pb,
        p_value,
        mean_distance_elastic: mean(&d_el),
        mean_distance_created: mean(&d_cr),
        notes,
    })
}

/// [`analyze`], degrading to a counts-only summary when the elastic class
/// is too small (or absent) to locate maxima.
pub fn summarize(
    records: &mut [TrajectoryRecord],
    config: &ExperimentConfig,
) -> Result<EnsembleSummary> {
    let n_total = records.len();
    let n_created = records.iter().filter(|r| r.phonon_created).count();
    let counts_only = |reason: String| EnsembleSummary {
        n_total,
        n_created,
        n_elastic: n_total - n_created,
        notes: vec![reason],
        ..Default::default()
    };
    if records.is_empty() {
        return Ok(counts_only("no records".into()));
    }
    match analyze(records, config) {
        Err(Error::InsufficientElastic(n)) => {
            let mut s = counts_only(format!(
                "elastic class has {n} records (< {MIN_ELASTIC}); statistics omitted"
            ));
            if n_created == 0 || n_created == s.n_total {
                s.notes.push("r_pb: single-class".into());
            }
            Ok(s)
        }
        other => other,
    }
}

/// Point-biserial correlation between `phonon_created` and the distance to
/// the nearest maximum, with a two-sided permutation p-value.
pub fn point_biserial(records: &[TrajectoryRecord], permutations: usize) -> Result<(f64, f64)> {
    let created: Vec<bool> = records.iter().map(|r| r.phonon_created).collect();
    let distances = records
        .iter()
        .map(|r| {
            r.distance_to_max
                .ok_or_else(|| Error::DegenerateInput(format!("record {} has no distance", r.id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    point_biserial_test(&created, &distances, permutations, PERMUTATION_SEED)
}

/// r = (m₁ − m₀)/s · √(n₀n₁)/n with the population standard deviation s,
/// and p = (1 + #{|r_perm| ≥ |r|})/(1 + permutations) over random
/// relabelings that keep the class sizes.
pub fn point_biserial_test(
    labels: &[bool],
    values: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if labels.len() != values.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} values",
            labels.len(),
            values.len()
        )));
    }
    let n = values.len();
    let n1 = labels.iter().filter(|&&l| l).count();
    let n0 = n - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::SingleClass);
    }
    let nf = n as f64;
    let total: f64 = values.iter().sum();
    let m = total / nf;
    let s = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / nf).sqrt();
    if s < 1e-15 {
        return Err(Error::ZeroVariance);
    }
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    let scale = (n0f * n1f).sqrt() / (nf * s);
    let r_of = |sum1: f64| (sum1 / n1f - (total - sum1) / n0f) * scale;

    let sum1: f64 = values
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(v, _)| v)
        .sum();
    let r = r_of(sum1).clamp(-1.0, 1.0);

    // Draw the smaller class; its complement is the other one.
    let k = n1.min(n0);
    let mut rng = RngStream::new(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    let threshold = r.abs() * (1.0 - 1e-12);
    let mut extreme = 0usize;
    for _ in 0..permutations {
        let mut drawn = 0.0;
        for i in 0..k {
            let j = i + rng.below(n - i);
            idx.swap(i, j);
            drawn += values[idx[i]];
        }
        let perm_sum1 = if k == n1 { drawn } else { total - drawn };
        if r_of(perm_sum1).abs() >= threshold {
            extreme += 1;
        }
    }
    let p = (1 + extreme) as f64 / (1 + permutations) as f64;
    Ok((r, p))
}

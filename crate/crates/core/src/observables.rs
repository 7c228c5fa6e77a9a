//! Screen statistics: histograms, interference maxima, fringe visibility,
//! and distance to the nearest maximum.

use crate::error::{Error, Result};
use crate::hilbert::GridSpec;

/// Minimum peak prominence, as a fraction of the largest value in the window.
pub const DEFAULT_PROMINENCE: f64 = 0.1;

/// Left-closed bins `[e_j, e_{j+1})`; anything outside `[e_0, e_last)` lands
/// in `underflow`/`overflow`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
        let width = (hi - lo) / bins as f64;
        (0..=bins).map(|j| lo + j as f64 * width).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| 0.5 * (e[0] + e[1]))
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn histogram(samples: &[f64], edges: &[f64]) -> Result<Histogram> {
    if edges.len() < 2 || edges.windows(2).any(|e| !(e[0] < e[1])) {
        return Err(Error::EmptyEdges);
    }
    let mut counts = vec![0u64; edges.len() - 1];
    let (mut underflow, mut overflow) = (0, 0);
    let last = edges[edges.len() - 1];
    for &x in samples {
        if x < edges[0] {
            underflow += 1;
        } else if x >= last {
            overflow += 1;
        } else {
            counts[edges.partition_point(|&e| e <= x) - 1] += 1;
        }
    }
    Ok(Histogram {
        bin_edges: edges.to_vec(),
        counts,
        underflow,
        overflow,
    })
}

/// Centered moving average over `2·radius + 1` points, truncated at the ends.
pub fn smooth(values: &[f64], radius: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeAnalysis {
    pub maxima: Vec<f64>,
    pub visibility: f64,
    pub window: (f64, f64),
}

/// Local maxima of a sampled pdf inside `window` whose topographic
/// prominence is at least `prominence` times the window maximum.
pub fn find_maxima(
    pdf: &[f64],
    grid: &GridSpec,
    window: (f64, f64),
    prominence: f64,
) -> Result<Vec<f64>> {
    find_maxima_at(pdf, &grid.xs(), window, prominence)
}

/// [`find_maxima`] over arbitrary sample positions (e.g. histogram bin centers).
pub fn find_maxima_at(
    values: &[f64],
    positions: &[f64],
    window: (f64, f64),
    prominence: f64,
) -> Result<Vec<f64>> {
    let (slice, xs) = window_slice(values, positions, window)?;
    Ok(peak_indices(slice, prominence)
        .into_iter()
        .map(|i| xs[i])
        .collect())
}

/// Fringe visibility (I_max − I_min)/(I_max + I_min) from the highest
/// prominent maximum and the deepest minimum between adjacent prominent maxima.
pub fn visibility(pdf: &[f64], grid: &GridSpec, window: (f64, f64)) -> Result<f64> {
    visibility_at(pdf, &grid.xs(), window, DEFAULT_PROMINENCE)
}

pub fn visibility_at(
    values: &[f64],
    positions: &[f64],
    window: (f64, f64),
    prominence: f64,
) -> Result<f64> {
    Ok(fringe_analysis(values, positions, window, prominence)?.visibility)
}

pub fn fringe_analysis(
    values: &[f64],
    positions: &[f64],
    window: (f64, f64),
    prominence: f64,
) -> Result<FringeAnalysis> {
    let (slice, xs) = window_slice(values, positions, window)?;
    let peaks = peak_indices(slice, prominence);
    if peaks.len() < 2 {
        return Err(Error::NoFringe);
    }
    let i_max = peaks
        .iter()
        .map(|&i| slice[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let i_min = peaks
        .windows(2)
        .flat_map(|p| slice[p[0] + 1..p[1]].iter().copied())
        .fold(f64::INFINITY, f64::min);
    if !i_min.is_finite() || i_max + i_min <= 0.0 {
        return Err(Error::NoFringe);
    }
    Ok(FringeAnalysis {
        maxima: peaks.iter().map(|&i| xs[i]).collect(),
        visibility: ((i_max - i_min) / (i_max + i_min)).clamp(0.0, 1.0),
        window,
    })
}

pub fn distance_to_nearest_max(x: f64, maxima: &[f64]) -> Result<f64> {
    if maxima.is_empty() {
        return Err(Error::EmptyMaxima);
    }
    // maxima are sorted; check the two neighbours of the insertion point.
    let pos = maxima.partition_point(|&m| m < x);
    let mut best = f64::INFINITY;
    if pos < maxima.len() {
        best = best.min((maxima[pos] - x).abs());
    }
    if pos > 0 {
        best = best.min((x - maxima[pos - 1]).abs());
    }
    Ok(best)
}

fn window_slice<'a>(
    values: &'a [f64],
    positions: &'a [f64],
    window: (f64, f64),
) -> Result<(&'a [f64], &'a [f64])> {
    let lo = positions.partition_point(|&x| x < window.0);
    let hi = positions.partition_point(|&x| x <= window.1);
    if hi <= lo {
        return Err(Error::EmptyWindow(window.0, window.1));
    }
    Ok((&values[lo..hi], &positions[lo..hi]))
}

/// Indices of interior local maxima (plateaus reported at their middle)
/// with sufficient topographic prominence, ascending.
fn peak_indices(v: &[f64], prominence: f64) -> Vec<usize> {
    let n = v.len();
    let global = v.iter().copied().fold(0.0, f64::max);
    if n < 3 || !(global > 0.0) {
        return Vec::new();
    }
    let threshold = prominence * global;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if v[i] > v[i - 1] {
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] {
                let mid = (i + j) / 2;
                if topographic_prominence(v, i, j) >= threshold {
                    peaks.push(mid);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of the plateau `v[lo..=hi]` above the higher of the two lowest
/// points reached before climbing above it on either side.
fn topographic_prominence(v: &[f64], lo: usize, hi: usize) -> f64 {
    let h = v[lo];
    let mut left_min = h;
    for k in (0..lo).rev() {
        if v[k] > h {
            break;
        }
        left_min = left_min.min(v[k]);
    }
    let mut right_min = h;
    for &x in &v[hi + 1..] {
        if x > h {
            break;
        }
        right_min = right_min.min(x);
    }
    h - left_min.max(right_min)
}

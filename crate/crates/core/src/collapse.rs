//! Projective monitoring of the phonon register and Born sampling of the
//! screen position.
//!
//! A monitored run alternates `cadence` unitary steps with a projective
//! phonon-number measurement. Each measurement draws exactly one uniform
//! variate from the trajectory's stream, and a screen draw consumes one more,
//! which keeps runs replayable from (state, spec, seed).

use num_complex::Complex64;

use crate::dynamics::{EvolutionSpec, Propagator};
use crate::error::{Error, Result};
use crate::hilbert::{sector_weights, JointState};
use crate::rng::{sample_index, RngStream};

/// Outcomes whose Born weight falls below this are never sampled.
pub const WEIGHT_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorSpec {
    pub cadence: usize,
    pub enabled: bool,
}

impl MonitorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.cadence < 1 {
            return Err(Error::invariant("monitor.cadence", "must be at least 1"));
        }
        Ok(())
    }

    /// Step counts of the evolution blocks; a measurement follows each block
    /// except an unmeasured trailing remainder.
    pub fn blocks(&self, n_steps: usize) -> (usize, usize) {
        if self.enabled {
            (n_steps / self.cadence, n_steps % self.cadence)
        } else {
            (0, n_steps)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementEvent {
    pub step: usize,
    pub outcome: usize,
}

/// Draws a phonon number with probability equal to its sector weight and
/// returns the renormalized projection onto that sector.
pub fn measure_phonon(state: &JointState, rng: &mut RngStream) -> Result<(usize, JointState)> {
    state.require_normalized()?;
    let weights = sector_weights(state);
    let outcome = draw_outcome(&weights, rng)?;
    Ok((outcome, project_sector(state, outcome, weights[outcome])))
}

pub(crate) fn draw_outcome(weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    sample_index(weights, WEIGHT_FLOOR, rng.uniform()).ok_or(Error::DegenerateState)
}

/// Zeroes every sector except `n` and rescales by 1/√weight.
pub(crate) fn project_sector(state: &JointState, n: usize, weight: f64) -> JointState {
    let mut out = JointState::zeros(*state.grid(), *state.fock());
    let scale = Complex64::new(1.0 / weight.sqrt(), 0.0);
    for (dst, src) in out.sector_mut(n).iter_mut().zip(state.sector(n)) {
        *dst = src * scale;
    }
    out
}

/// Cumulative joint Born distribution over (x-index, phonon number).
#[derive(Debug, Clone)]
pub struct ScreenSampler {
    xs: Vec<f64>,
    n_points: usize,
    /// (flat index, cumulative weight) over admissible cells, sector-major.
    cumulative: Vec<(usize, f64)>,
}

impl ScreenSampler {
    pub fn new(state: &JointState) -> Result<Self> {
        state.require_normalized()?;
        let weights = sector_weights(state);
        let dx = state.grid().dx();
        let n_points = state.grid().n_points();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (n, w) in weights.iter().enumerate() {
            if *w < WEIGHT_FLOOR {
                continue;
            }
            for (i, a) in state.sector(n).iter().enumerate() {
                let p = a.norm_sqr() * dx;
                if p > 0.0 {
                    acc += p;
                    cumulative.push((n * n_points + i, acc));
                }
            }
        }
        if cumulative.is_empty() {
            return Err(Error::DegenerateState);
        }
        Ok(ScreenSampler {
            xs: state.grid().xs(),
            n_points,
            cumulative,
        })
    }

    /// Returns the grid coordinate and phonon number of one joint draw.
    pub fn sample(&self, rng: &mut RngStream) -> (f64, usize) {
        let total = self.cumulative.last().map_or(0.0, |c| c.1);
        let target = rng.uniform() * total;
        let pos = self.cumulative.partition_point(|&(_, c)| c <= target);
        let (flat, _) = self.cumulative[pos.min(self.cumulative.len() - 1)];
        (self.xs[flat % self.n_points], flat / self.n_points)
    }
}

/// One joint Born draw of screen position and phonon number.
pub fn screen_sample(state: &JointState, rng: &mut RngStream) -> Result<(f64, usize)> {
    Ok(ScreenSampler::new(state)?.sample(rng))
}

/// Evolves for `spec.n_steps`, measuring the phonon number after every
/// `monitor.cadence` steps when monitoring is enabled.
pub fn run_monitored(
    state: &JointState,
    spec: &EvolutionSpec,
    monitor: &MonitorSpec,
    rng: &mut RngStream,
) -> Result<(JointState, Vec<MeasurementEvent>)> {
    monitor.validate()?;
    state.require_normalized()?;
    let prop = Propagator::new(state.grid(), *state.fock(), spec)?;
    run_monitored_with(&prop, state, spec.n_steps, monitor, rng)
}

/// [`run_monitored`] with a prebuilt propagator.
pub fn run_monitored_with(
    prop: &Propagator,
    state: &JointState,
    n_steps: usize,
    monitor: &MonitorSpec,
    rng: &mut RngStream,
) -> Result<(JointState, Vec<MeasurementEvent>)> {
    let (n_blocks, remainder) = monitor.blocks(n_steps);
    let mut current = state.clone();
    let mut events = Vec::with_capacity(n_blocks);
    for block in 0..n_blocks {
        prop.evolve(&mut current, monitor.cadence);
        let weights = sector_weights(&current);
        let outcome = draw_outcome(&weights, rng)?;
        current = project_sector(&current, outcome, weights[outcome]);
        events.push(MeasurementEvent {
            step: (block + 1) * monitor.cadence,
            outcome,
        });
    }
    prop.evolve(&mut current, remainder);
    Ok((current, events))
}

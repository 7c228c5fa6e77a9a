//! Single-photon Mach–Zehnder interferometer with an optional perfect
//! absorber in one arm.
//!
//! Beam splitter convention: BS(θ) = [[cos θ, i sin θ], [i sin θ, cos θ]]
//! acting on the (a, b) mode amplitudes. The photon enters in mode a, the
//! object sits in arm b, and the relative phase is applied to arm b. Output
//! mode a is the dark port of the balanced, object-free interferometer.

use num_complex::Complex64;

use crate::collapse::WEIGHT_FLOOR;
use crate::error::{Error, Result};
use crate::rng::{sample_index, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MziConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub object_present: bool,
    pub phase: f64,
}

impl MziConfig {
    /// 50/50 splitters, zero phase.
    pub fn balanced(object_present: bool) -> Self {
        MziConfig {
            theta1: std::f64::consts::FRAC_PI_4,
            theta2: std::f64::consts::FRAC_PI_4,
            object_present,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MziOutcome {
    pub p_dark: f64,
    pub p_bright: f64,
    pub p_absorbed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MziCounts {
    pub dark: u64,
    pub bright: u64,
    pub absorbed: u64,
}

fn beam_splitter(theta: f64, (a, b): (Complex64, Complex64)) -> (Complex64, Complex64) {
    let t = Complex64::new(theta.cos(), 0.0);
    let r = Complex64::new(0.0, theta.sin());
    (t * a + r * b, r * a + t * b)
}

pub fn mzi_probabilities(config: &MziConfig) -> MziOutcome {
    let one = Complex64::new(1.0, 0.0);
    let (a, mut b) = beam_splitter(config.theta1, (one, Complex64::new(0.0, 0.0)));
    let mut p_absorbed = 0.0;
    if config.object_present {
        p_absorbed = b.norm_sqr();
        b = Complex64::new(0.0, 0.0);
    }
    b *= Complex64::from_polar(1.0, config.phase);
    let (out_a, out_b) = beam_splitter(config.theta2, (a, b));
    MziOutcome {
        p_dark: out_a.norm_sqr(),
        p_bright: out_b.norm_sqr(),
        p_absorbed,
    }
}

/// Multinomial draws from [`mzi_probabilities`], one uniform per shot.
/// Outcomes with probability below the sampling floor never occur.
pub fn mzi_sample(config: &MziConfig, n_shots: u64, rng: &mut RngStream) -> Result<MziCounts> {
    if n_shots < 1 {
        return Err(Error::invariant("mzi.n_shots", "must be at least 1"));
    }
    let p = mzi_probabilities(config);
    let weights = [p.p_dark, p.p_bright, p.p_absorbed];
    let mut counts = MziCounts::default();
    for _ in 0..n_shots {
        match sample_index(&weights, WEIGHT_FLOOR, rng.uniform()) {
            Some(0) => counts.dark += 1,
            Some(1) => counts.bright += 1,
            Some(_) => counts.absorbed += 1,
            None => return Err(Error::DegenerateState),
        }
    }
    Ok(counts)
}

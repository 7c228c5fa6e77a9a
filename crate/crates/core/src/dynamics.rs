//! Unitary split-step propagation of the joint electron–phonon state under
//!
//! ```text
//! H = p²/2 + V(x) + ω·a†a + g·w(x)·(a + a†)
//! ```
//!
//! plus a mean-field toy in which a classical field amplitude is driven by the
//! electron density and fed back into the electron potential. The joint
//! evolution is linear; the mean-field map is not.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::hilbert::{FockRegister, GridSpec, JointState, WaveField, BOUNDARY_NORM_TOL};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Shape of the potential inside each slit opening.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlitProfile {
    /// V = 0 across the whole opening (hard walls).
    Flat,
    /// V = V₀·sin²(π(x−c)/a) inside the opening: zero at the center, V₀ with
    /// zero slope at the edges.
    Smooth,
}

impl SlitProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            SlitProfile::Flat => "flat",
            SlitProfile::Smooth => "smooth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flat" => Some(SlitProfile::Flat),
            "smooth" => Some(SlitProfile::Smooth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub barrier_center: f64,
    pub barrier_width: f64,
    pub barrier_height: f64,
    pub slit_centers: Option<(f64, f64)>,
    pub slit_width: f64,
    pub slit_profile: SlitProfile,
}

impl PotentialSpec {
    /// No barrier at all: V ≡ 0.
    pub fn free() -> Self {
        PotentialSpec {
            barrier_center: 0.0,
            barrier_width: 1.0,
            barrier_height: 0.0,
            slit_centers: None,
            slit_width: 1.0,
            slit_profile: SlitProfile::Flat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let key = "evolution.potential";
        if !(self.barrier_width > 0.0) {
            return Err(Error::invariant(
                &format!("{key}.barrier_width"),
                "must be > 0",
            ));
        }
        if !(self.barrier_height >= 0.0) || !self.barrier_height.is_finite() {
            return Err(Error::invariant(
                &format!("{key}.barrier_height"),
                "must be finite and >= 0",
            ));
        }
        if let Some((c1, c2)) = self.slit_centers {
            if !(self.slit_width > 0.0) {
                return Err(Error::invariant(
                    &format!("{key}.slit_width"),
                    "must be > 0",
                ));
            }
            if !(self.barrier_height > 0.0) {
                return Err(Error::invariant(
                    &format!("{key}.barrier_height"),
                    "must be > 0 when slits are specified",
                ));
            }
            let half = 0.5 * self.slit_width;
            let (lo, hi) = self.extent();
            for c in [c1, c2] {
                if c - half < lo || c + half > hi {
                    return Err(Error::Geometry(format!(
                        "slit opening [{}, {}] leaves the barrier [{lo}, {hi}]",
                        c - half,
                        c + half
                    )));
                }
            }
            if (c1 - c2).abs() < self.slit_width {
                return Err(Error::Geometry(format!(
                    "slit openings centered at {c1} and {c2} overlap (width {})",
                    self.slit_width
                )));
            }
        }
        Ok(())
    }

    fn extent(&self) -> (f64, f64) {
        let half = 0.5 * self.barrier_width;
        (self.barrier_center - half, self.barrier_center + half)
    }

    /// V at a single point; assumes the potential has been validated.
    pub fn value_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.extent();
        if x < lo || x > hi || self.barrier_height == 0.0 {
            return 0.0;
        }
        if let Some((c1, c2)) = self.slit_centers {
            let half = 0.5 * self.slit_width;
            for c in [c1, c2] {
                if (x - c).abs() < half {
                    return match self.slit_profile {
                        SlitProfile::Flat => 0.0,
                        SlitProfile::Smooth => {
                            self.barrier_height * (PI * (x - c) / self.slit_width).sin().powi(2)
                        }
                    };
                }
            }
        }
        self.barrier_height
    }

    /// The potential of a single opening in an unbounded plateau of height V₀.
    pub(crate) fn single_channel(&self, center: f64) -> PotentialSpec {
        PotentialSpec {
            barrier_center: center,
            barrier_width: f64::INFINITY,
            slit_centers: Some((center, center)),
            ..*self
        }
    }
}

/// Samples the barrier potential on the grid.
pub fn build_potential(p: &PotentialSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    p.validate()?;
    Ok(grid.xs().into_iter().map(|x| p.value_at(x)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSpec {
    pub g: f64,
    pub window_center: f64,
    pub window_width: f64,
    pub omega: f64,
}

impl CouplingSpec {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let key = "evolution.coupling";
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(Error::invariant(
                &format!("{key}.g"),
                "must be finite and >= 0",
            ));
        }
        if !(self.window_width > 0.0) {
            return Err(Error::invariant(
                &format!("{key}.window_width"),
                "must be > 0",
            ));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::invariant(
                &format!("{key}.omega"),
                "must be finite and > 0",
            ));
        }
        let half = 0.5 * self.window_width;
        if self.window_center - half < grid.x_min() || self.window_center + half > grid.x_max() {
            return Err(Error::invariant(
                &format!("{key}.window_center"),
                "coupling window must lie inside the grid",
            ));
        }
        Ok(())
    }

    /// Flat-topped bump w(x) ∈ [0, 1]: equal to 1 over the central half of
    /// the window, with raised-cosine tapers over the outer quarters. A flat
    /// top keeps the coupling uniform across a slit opening, so creating a
    /// phonon does not deform the transverse mode.
    pub fn window(&self, grid: &GridSpec) -> Vec<f64> {
        grid.xs()
            .into_iter()
            .map(|x| window_value((x - self.window_center).abs() / self.window_width))
            .collect()
    }
}

/// Window profile at |x − center| = u·width.
fn window_value(u: f64) -> f64 {
    if u <= 0.25 {
        1.0
    } else if u < 0.5 {
        0.5 * (1.0 + (4.0 * PI * (u - 0.25)).cos())
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionSpec {
    pub dt: f64,
    pub n_steps: usize,
    pub potential: PotentialSpec,
    pub coupling: CouplingSpec,
}

impl EvolutionSpec {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invariant("evolution.dt", "must be finite and > 0"));
        }
        let product = self.dt * grid.max_kinetic();
        if product >= PI {
            return Err(Error::Stability {
                dt: self.dt,
                product,
            });
        }
        self.potential.validate()?;
        self.coupling.validate(grid)
    }
}

/// Precomputed split-step factors for one (grid, register, Hamiltonian, dt).
///
/// Immutable after construction and `Sync`, so one propagator can serve every
/// trajectory worker.
pub struct Propagator {
    grid: GridSpec,
    fock: FockRegister,
    dt: f64,
    omega: f64,
    g: f64,
    potential: Vec<f64>,
    window: Vec<f64>,
    /// exp(−i k² dt/4) / N for the half kinetic step (inverse-FFT scale folded in).
    kinetic_half: Vec<Complex64>,
    /// exp(−i k² dt/2) / N for two merged half steps.
    kinetic_full: Vec<Complex64>,
    /// Row-major dim×dim local unitaries, one block per grid point.
    local: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Propagator {
    pub fn new(grid: &GridSpec, fock: FockRegister, spec: &EvolutionSpec) -> Result<Self> {
        spec.validate(grid)?;
        let potential = build_potential(&spec.potential, grid)?;
        let window = spec.coupling.window(grid);
        Self::from_parts(
            grid,
            fock,
            spec.dt,
            potential,
            window,
            spec.coupling.g,
            spec.coupling.omega,
        )
    }

    /// Builds a propagator for an arbitrary real potential and coupling profile.
    pub fn from_parts(
        grid: &GridSpec,
        fock: FockRegister,
        dt: f64,
        potential: Vec<f64>,
        window: Vec<f64>,
        g: f64,
        omega: f64,
    ) -> Result<Self> {
        let n = grid.n_points();
        if potential.len() != n || window.len() != n {
            return Err(Error::Shape(
                "potential and window must match the grid".into(),
            ));
        }
        let product = dt * grid.max_kinetic();
        if !(dt > 0.0) || product >= PI {
            return Err(Error::Stability { dt, product });
        }
        let scale = 1.0 / n as f64;
        let ks = grid.wavenumbers();
        let kinetic_half = ks
            .iter()
            .map(|k| Complex64::from_polar(scale, -k * k * dt / 4.0))
            .collect();
        let kinetic_full = ks
            .iter()
            .map(|k| Complex64::from_polar(scale, -k * k * dt / 2.0))
            .collect();

        let dim = fock.dim();
        let mut local = Vec::with_capacity(n * dim * dim);
        for i in 0..n {
            let block = local_unitary(dim, dt, potential[i], g * window[i], omega);
            local.extend_from_slice(&block);
        }

        let mut planner = FftPlanner::new();
        Ok(Propagator {
            grid: *grid,
            fock,
            dt,
            omega,
            g,
            potential,
            window,
            kinetic_half,
            kinetic_full,
            local,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fock(&self) -> FockRegister {
        self.fock
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// One Strang step: half kinetic, full local, half kinetic.
    pub fn step(&self, state: &mut JointState) {
        self.evolve(state, 1);
    }

    /// `n_steps` Strang steps with adjacent kinetic half steps fused.
    pub fn evolve(&self, state: &mut JointState, n_steps: usize) {
        if n_steps == 0 {
            return;
        }
        debug_assert_eq!(state.grid(), &self.grid);
        let mut scratch = vec![ZERO; self.fft.get_inplace_scratch_len()];
        self.kinetic(state, &self.kinetic_half, &mut scratch);
        for step in 0..n_steps {
            self.apply_local(state);
            let factors = if step + 1 == n_steps {
                &self.kinetic_half
            } else {
                &self.kinetic_full
            };
            self.kinetic(state, factors, &mut scratch);
        }
    }

    fn kinetic(&self, state: &mut JointState, factors: &[Complex64], scratch: &mut [Complex64]) {
        for n in 0..self.fock.dim() {
            let sector = state.sector_mut(n);
            if sector.iter().all(|a| *a == ZERO) {
                continue;
            }
            self.fft.process_with_scratch(sector, scratch);
            for (a, f) in sector.iter_mut().zip(factors) {
                *a *= f;
            }
            self.ifft.process_with_scratch(sector, scratch);
        }
    }

    fn apply_local(&self, state: &mut JointState) {
        let dim = self.fock.dim();
        let n_points = self.grid.n_points();
        let amp = state.amp_mut();
        let mut v = vec![ZERO; dim];
        for i in 0..n_points {
            for (n, slot) in v.iter_mut().enumerate() {
                *slot = amp[n * n_points + i];
            }
            let block = &self.local[i * dim * dim..(i + 1) * dim * dim];
            for r in 0..dim {
                let row = &block[r * dim..(r + 1) * dim];
                amp[r * n_points + i] = row.iter().zip(&v).map(|(u, x)| u * x).sum();
            }
        }
    }

    /// ⟨H⟩ for the Hamiltonian this propagator discretizes.
    pub fn energy(&self, state: &JointState) -> f64 {
        let n_points = self.grid.n_points();
        let dx = self.grid.dx();
        let ks = self.grid.wavenumbers();
        let mut scratch = vec![ZERO; self.fft.get_inplace_scratch_len()];
        let mut kinetic = 0.0;
        let mut local = 0.0;
        for n in 0..self.fock.dim() {
            let mut buf = state.sector(n).to_vec();
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            // Parseval: Σ|ψ_i|²dx = Σ|ψ̂_j|² dx / N.
            kinetic += buf
                .iter()
                .zip(&ks)
                .map(|(a, k)| 0.5 * k * k * a.norm_sqr())
                .sum::<f64>()
                * dx
                / n_points as f64;
            local += state
                .sector(n)
                .iter()
                .zip(&self.potential)
                .map(|(a, v)| (v + self.omega * n as f64) * a.norm_sqr())
                .sum::<f64>()
                * dx;
        }
        let mut coupling = 0.0;
        for n in 0..self.fock.n_max() {
            let root = ((n + 1) as f64).sqrt();
            let cross: Complex64 = (0..n_points)
                .map(|i| state.get(i, n).conj() * state.get(i, n + 1) * self.window[i])
                .sum();
            coupling += 2.0 * self.g * root * cross.re * dx;
        }
        kinetic + local + coupling
    }
}

/// exp(−i·dt·(V + ω·a†a + c·(a + a†))) on the truncated Fock space.
fn local_unitary(dim: usize, dt: f64, v: f64, c: f64, omega: f64) -> Vec<Complex64> {
    let mut block = vec![ZERO; dim * dim];
    if c == 0.0 {
        for n in 0..dim {
            block[n * dim + n] = Complex64::from_polar(1.0, -dt * (v + omega * n as f64));
        }
        return block;
    }
    let m = DMatrix::from_fn(dim, dim, |r, s| {
        if r == s {
            omega * r as f64
        } else if r + 1 == s {
            c * (s as f64).sqrt()
        } else if s + 1 == r {
            c * (r as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(m);
    for r in 0..dim {
        for s in 0..dim {
            block[r * dim + s] = (0..dim)
                .map(|k| {
                    let phase = Complex64::from_polar(1.0, -dt * (v + eig.eigenvalues[k]));
                    phase * eig.eigenvectors[(r, k)] * eig.eigenvectors[(s, k)]
                })
                .sum();
        }
    }
    block
}

/// One split step of the joint state; the input must be normalized.
pub fn step_unitary(state: &JointState, spec: &EvolutionSpec) -> Result<JointState> {
    state.require_normalized()?;
    let prop = Propagator::new(state.grid(), *state.fock(), spec)?;
    let mut out = state.clone();
    prop.step(&mut out);
    Ok(out)
}

/// `spec.n_steps` split steps of the joint state.
pub fn evolve(state: &JointState, spec: &EvolutionSpec) -> Result<JointState> {
    state.require_normalized()?;
    let prop = Propagator::new(state.grid(), *state.fock(), spec)?;
    let mut out = state.clone();
    prop.evolve(&mut out, spec.n_steps);
    Ok(out)
}

/// Exact evolution for `time` under p²/2 + ω·a†a (no barrier, no coupling).
pub fn propagate_free(state: &JointState, time: f64, omega: f64) -> JointState {
    let grid = *state.grid();
    let n = grid.n_points();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    let factors: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|k| Complex64::from_polar(scale, -0.5 * k * k * time))
        .collect();
    let mut out = state.clone();
    for sector in 0..state.fock().dim() {
        let phase = Complex64::from_polar(1.0, -omega * sector as f64 * time);
        let buf = out.sector_mut(sector);
        fft.process(buf);
        for (a, f) in buf.iter_mut().zip(&factors) {
            *a *= f * phase;
        }
        ifft.process(buf);
    }
    out
}

/// Lowest eigenmode of p²/2 + V by imaginary-time split-step relaxation.
pub fn ground_mode(grid: &GridSpec, potential: &[f64], guess: &WaveField) -> Result<WaveField> {
    const TAU: f64 = 0.002;
    const MAX_ITERS: usize = 20_000;
    const TOL: f64 = 1e-12;

    let n = grid.n_points();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    let kin: Vec<f64> = grid
        .wavenumbers()
        .iter()
        .map(|k| scale * (-0.5 * k * k * TAU).exp())
        .collect();
    let half_v: Vec<f64> = potential.iter().map(|v| (-0.5 * v * TAU).exp()).collect();

    let mut psi = guess.normalized()?.into_amp();
    let dx = grid.dx();
    for _ in 0..MAX_ITERS {
        let prev = psi.clone();
        for (a, h) in psi.iter_mut().zip(&half_v) {
            *a *= h;
        }
        fft.process(&mut psi);
        for (a, k) in psi.iter_mut().zip(&kin) {
            *a *= k;
        }
        ifft.process(&mut psi);
        for (a, h) in psi.iter_mut().zip(&half_v) {
            *a *= h;
        }
        let norm = (psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx).sqrt();
        if !(norm > 0.0) {
            return Err(Error::DegenerateInput(
                "imaginary-time relaxation collapsed".into(),
            ));
        }
        psi.iter_mut().for_each(|a| *a /= norm);
        let change = (psi
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * dx)
            .sqrt();
        if change < TOL {
            break;
        }
    }
    WaveField::new(*grid, psi)
}

/// Lowest transverse mode of one slit channel, computed in an unbounded
/// plateau so the open region outside the barrier cannot capture it.
pub fn channel_mode(grid: &GridSpec, potential: &PotentialSpec, center: f64) -> Result<WaveField> {
    let single = potential.single_channel(center);
    let v: Vec<f64> = grid.xs().into_iter().map(|x| single.value_at(x)).collect();
    let guess_width = 0.25 * potential.slit_width;
    let guess = WaveField::new(
        *grid,
        grid.xs()
            .into_iter()
            .map(|x| {
                Complex64::new(
                    (-(x - center).powi(2) / (4.0 * guess_width.powi(2))).exp(),
                    0.0,
                )
            })
            .collect(),
    )?;
    ground_mode(grid, &v, &guess)
}

/// Self-consistent electron + classical field toy.
///
/// ψ evolves under p²/2 + V(x) + g·w(x)·A(t) while the field obeys
/// Ä = −ω²A − g·⟨w⟩_ψ with ⟨w⟩_ψ = ∫w|ψ|²dx. The field starts at rest with
/// amplitude `field_amp`. Returns the evolved ψ and A.
pub fn evolve_mean_field(
    psi: &WaveField,
    field_amp: f64,
    spec: &EvolutionSpec,
) -> Result<(WaveField, f64)> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > BOUNDARY_NORM_TOL {
        return Err(Error::Unnormalized { norm });
    }
    let (out, a, _) = mean_field_run(psi, field_amp, spec)?;
    Ok((out, a))
}

fn mean_field_run(
    psi: &WaveField,
    field_amp: f64,
    spec: &EvolutionSpec,
) -> Result<(WaveField, f64, f64)> {
    let grid = *psi.grid();
    spec.validate(&grid)?;
    let n = grid.n_points();
    let dx = grid.dx();
    let dt = spec.dt;
    let g = spec.coupling.g;
    let omega = spec.coupling.omega;
    let potential = build_potential(&spec.potential, &grid)?;
    let window = spec.coupling.window(&grid);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    let half_kinetic: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|k| Complex64::from_polar(scale, -k * k * dt / 4.0))
        .collect();

    let mut amp = psi.amp().to_vec();
    let mut a = field_amp;
    let mut a_dot = 0.0;
    let kick = |amp: &mut Vec<Complex64>| {
        fft.process(amp);
        for (x, f) in amp.iter_mut().zip(&half_kinetic) {
            *x *= f;
        }
        ifft.process(amp);
    };

    for _ in 0..spec.n_steps {
        kick(&mut amp);
        // The local phase leaves |ψ|² unchanged, so the source is fixed over the step.
        let source: f64 = amp
            .iter()
            .zip(&window)
            .map(|(x, w)| w * x.norm_sqr())
            .sum::<f64>()
            * dx;
        let a_old = a;
        a_dot += 0.5 * dt * (-omega * omega * a - g * source);
        a += dt * a_dot;
        a_dot += 0.5 * dt * (-omega * omega * a - g * source);
        let a_mid = 0.5 * (a_old + a);
        for ((x, v), w) in amp.iter_mut().zip(&potential).zip(&window) {
            *x *= Complex64::from_polar(1.0, -dt * (v + g * w * a_mid));
        }
        kick(&mut amp);
    }
    Ok((WaveField::new(grid, amp)?, a, a_dot))
}

/// ‖E((u+v)/‖u+v‖) − (E(u) + E(v))/‖u+v‖‖ for the mean-field map E with the
/// field starting from zero in all three runs.
pub fn superposition_defect(u: &WaveField, v: &WaveField, spec: &EvolutionSpec) -> Result<f64> {
    let sum = u.add(v)?;
    let s = sum.norm();
    if s < 1e-12 {
        return Err(Error::DegenerateInput(format!("‖u+v‖ = {s:e}")));
    }
    let (eu, _) = evolve_mean_field(u, 0.0, spec)?;
    let (ev, _) = evolve_mean_field(v, 0.0, spec)?;
    let (esum, _) = evolve_mean_field(&sum.scaled(Complex64::new(1.0 / s, 0.0)), 0.0, spec)?;
    let linear = eu.add(&ev)?.scaled(Complex64::new(1.0 / s, 0.0));
    Ok(esum.add(&linear.scaled(Complex64::new(-1.0, 0.0)))?.norm())
}

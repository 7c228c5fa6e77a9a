//! State representation: spatial grid, electron wavefields, the joint
//! electron ⊗ phonon-Fock amplitudes, and the reduced phonon density matrix.
//!
//! Units are natural (ħ = 1, electron mass = 1). Amplitudes are sampled on a
//! periodic grid `x_i = x_min + i·dx`, and every norm is the Riemann sum
//! `Σ|a_i|²·dx`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance used for internal normalization invariants.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance applied to normalization checks on inputs crossing the API.
pub const BOUNDARY_NORM_TOL: f64 = 1e-6;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_points: usize,
    x_min: f64,
    x_max: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(GridSpec {
            n_points,
            x_min,
            x_max,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order (0, 1, …, N/2−1, −N/2, …, −1)·2π/L.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / self.length();
        (0..n)
            .map(|j| {
                let m = if j < n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                };
                m * dk
            })
            .collect()
    }

    /// Largest kinetic eigenvalue k²/2 representable on the grid.
    pub fn max_kinetic(&self) -> f64 {
        let k_max = PI / self.dx();
        0.5 * k_max * k_max
    }

    /// Index range `[lo, hi)` of grid points with `a <= x <= b`.
    pub fn index_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = (0..self.n_points)
            .find(|&i| self.x(i) >= a)
            .unwrap_or(self.n_points);
        let hi = (0..self.n_points)
            .rev()
            .find(|&i| self.x(i) <= b)
            .map_or(lo, |i| i + 1);
        lo..hi.max(lo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: GridSpec,
    amp: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: GridSpec, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != grid.n_points() {
            return Err(Error::Shape(format!(
                "expected {} amplitudes, got {}",
                grid.n_points(),
                amp.len()
            )));
        }
        check_finite(&amp)?;
        Ok(WaveField { grid, amp })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        WaveField {
            grid,
            amp: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amp(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amp, self.grid.dx())
    }

    /// Returns a copy rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm < 1e-300 {
            return Err(Error::DegenerateInput(
                "cannot normalize a zero field".into(),
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        WaveField {
            grid: self.grid,
            amp: self.amp.iter().map(|a| a * c).collect(),
        }
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &WaveField) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(WaveField {
            grid: self.grid,
            amp: self
                .amp
                .iter()
                .zip(&other.amp)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// ⟨self|other⟩ = Σ conj(self_i)·other_i·dx.
    pub fn inner(&self, other: &WaveField) -> Result<Complex64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx())
    }

    pub fn into_amp(self) -> Vec<Complex64> {
        self.amp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockRegister {
    n_max: usize,
}

impl FockRegister {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::invariant("fock.n_max", "must be at least 1"));
        }
        Ok(FockRegister { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

/// Electron ⊗ phonon amplitudes, stored sector-major: the `n_points`
/// amplitudes of phonon sector `n` are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    grid: GridSpec,
    fock: FockRegister,
    amp: Vec<Complex64>,
}

impl JointState {
    pub fn zeros(grid: GridSpec, fock: FockRegister) -> Self {
        JointState {
            grid,
            fock,
            amp: vec![Complex64::new(0.0, 0.0); grid.n_points() * fock.dim()],
        }
    }

    /// Builds a state from sector-major amplitudes.
    pub fn from_amplitudes(
        grid: GridSpec,
        fock: FockRegister,
        amp: Vec<Complex64>,
    ) -> Result<Self> {
        if amp.len() != grid.n_points() * fock.dim() {
            return Err(Error::Shape(format!(
                "expected {} joint amplitudes, got {}",
                grid.n_points() * fock.dim(),
                amp.len()
            )));
        }
        check_finite(&amp)?;
        Ok(JointState { grid, fock, amp })
    }

    /// Σ_n c_n·|ψ_n⟩|n⟩ from (n, c_n, ψ_n) triples. Repeated sectors add.
    pub fn from_branches(
        grid: GridSpec,
        fock: FockRegister,
        branches: &[(usize, Complex64, &WaveField)],
    ) -> Result<Self> {
        let mut state = JointState::zeros(grid, fock);
        for &(n, c, psi) in branches {
            state.check_sector(n)?;
            same_grid(&grid, psi.grid())?;
            for (dst, src) in state.sector_mut(n).iter_mut().zip(psi.amp()) {
                *dst += c * src;
            }
        }
        Ok(state)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fock(&self) -> &FockRegister {
        &self.fock
    }

    pub fn amp(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn amp_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp
    }

    /// Amplitude at (x-index `i`, phonon number `n`).
    pub fn get(&self, i: usize, n: usize) -> Complex64 {
        self.amp[n * self.grid.n_points() + i]
    }

    pub fn sector(&self, n: usize) -> &[Complex64] {
        let len = self.grid.n_points();
        &self.amp[n * len..(n + 1) * len]
    }

    pub fn sector_mut(&mut self, n: usize) -> &mut [Complex64] {
        let len = self.grid.n_points();
        &mut self.amp[n * len..(n + 1) * len]
    }

    pub fn sector_field(&self, n: usize) -> Result<WaveField> {
        self.check_sector(n)?;
        Ok(WaveField {
            grid: self.grid,
            amp: self.sector(n).to_vec(),
        })
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amp, self.grid.dx())
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm < 1e-300 {
            return Err(Error::DegenerateInput(
                "cannot normalize a zero state".into(),
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        JointState {
            grid: self.grid,
            fock: self.fock,
            amp: self.amp.iter().map(|a| a * c).collect(),
        }
    }

    /// α·self + β·other.
    pub fn combine(&self, alpha: Complex64, other: &JointState, beta: Complex64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        if self.fock != other.fock {
            return Err(Error::Shape("phonon registers differ".into()));
        }
        Ok(JointState {
            grid: self.grid,
            fock: self.fock,
            amp: self
                .amp
                .iter()
                .zip(&other.amp)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    /// ‖self − other‖ with the grid measure.
    pub fn distance(&self, other: &JointState) -> f64 {
        let sum: f64 = self
            .amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (sum * self.grid.dx()).sqrt()
    }

    /// |⟨self|other⟩|² for normalized states.
    pub fn fidelity(&self, other: &JointState) -> f64 {
        let overlap: Complex64 = self
            .amp
            .iter()
            .zip(&other.amp)
            .map(|(a, b)| a.conj() * b)
            .sum();
        (overlap * self.grid.dx()).norm_sqr()
    }

    /// Per-point screen density Σ_n |amp[i,n]|² (not multiplied by dx).
    pub fn position_density(&self) -> Vec<f64> {
        let n_points = self.grid.n_points();
        let mut density = vec![0.0; n_points];
        for n in 0..self.fock.dim() {
            for (d, a) in density.iter_mut().zip(self.sector(n)) {
                *d += a.norm_sqr();
            }
        }
        density
    }

    pub(crate) fn check_sector(&self, n: usize) -> Result<()> {
        if n > self.fock.n_max() {
            return Err(Error::SectorOutOfRange {
                n,
                n_max: self.fock.n_max(),
            });
        }
        Ok(())
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > BOUNDARY_NORM_TOL {
            return Err(Error::Unnormalized { norm });
        }
        Ok(())
    }
}

/// Normalized Gaussian wavepacket ∝ exp(−(x−x0)²/(4σ²))·exp(i·k0·x).
pub fn gaussian_packet(grid: &GridSpec, x0: f64, sigma: f64, k0: f64) -> Result<WaveField> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::DegenerateSigma(sigma));
    }
    let (lo, hi) = (x0 - 4.0 * sigma, x0 + 4.0 * sigma);
    if lo < grid.x_min() || hi > grid.x_max() {
        return Err(Error::PacketOutsideGrid {
            lo,
            hi,
            x_min: grid.x_min(),
            x_max: grid.x_max(),
        });
    }
    let amp = grid
        .xs()
        .into_iter()
        .map(|x| {
            let envelope = (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
            Complex64::from_polar(envelope, k0 * x)
        })
        .collect();
    WaveField { grid: *grid, amp }.normalized()
}

/// Places `psi` in phonon sector `n`, leaving every other sector empty.
pub fn embed(psi: &WaveField, fock: FockRegister, n: usize) -> Result<JointState> {
    JointState::from_branches(*psi.grid(), fock, &[(n, Complex64::new(1.0, 0.0), psi)])
}

/// Born probabilities `|amp_i|²·dx` per grid cell.
pub fn born_pdf(psi: &WaveField) -> Result<Vec<f64>> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > BOUNDARY_NORM_TOL {
        return Err(Error::Unnormalized { norm });
    }
    let dx = psi.grid().dx();
    Ok(psi.amp().iter().map(|a| a.norm_sqr() * dx).collect())
}

/// Probability weight Σ_i |amp[i,n]|²·dx of phonon sector `n`.
pub fn sector_weight(state: &JointState, n: usize) -> Result<f64> {
    state.check_sector(n)?;
    Ok(sector_weight_unchecked(state, n))
}

pub(crate) fn sector_weight_unchecked(state: &JointState, n: usize) -> f64 {
    state.sector(n).iter().map(|a| a.norm_sqr()).sum::<f64>() * state.grid().dx()
}

/// All sector weights, index = phonon number.
pub fn sector_weights(state: &JointState) -> Vec<f64> {
    (0..state.fock().dim())
        .map(|n| sector_weight_unchecked(state, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positivity before accepting `elements`.
    pub fn new(elements: DMatrix<Complex64>) -> Result<Self> {
        let rho = DensityMatrix { elements };
        rho.validate()?;
        Ok(rho)
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        let d = p.len();
        let elements = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(p[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        DensityMatrix::new(elements)
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.elements[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.elements[(i, i)].re).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.elements.clone())
    }

    fn validate(&self) -> Result<()> {
        let m = &self.elements;
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidDensityMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDensityMatrix("non-finite element".into()));
        }
        let d = m.nrows();
        for i in 0..d {
            for j in 0..d {
                let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
                if dev > HERMITIAN_TOL {
                    return Err(Error::InvalidDensityMatrix(format!(
                        "not Hermitian at ({i}, {j}): deviation {dev:e}"
                    )));
                }
            }
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace} != 1")));
        }
        if let Some(&lowest) = self.eigenvalues().first() {
            if lowest < -PSD_TOL {
                return Err(Error::InvalidDensityMatrix(format!(
                    "negative eigenvalue {lowest:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Phonon-side reduced density matrix ρ[m,n] = Σ_i amp[i,m]·conj(amp[i,n])·dx.
///
/// For a pure joint state this has the same nonzero spectrum as the
/// electron-side reduced matrix, at (n_max+1)² cost instead of n_points².
pub fn reduced_phonon_dm(state: &JointState) -> Result<DensityMatrix> {
    state.require_normalized()?;
    let d = state.fock().dim();
    let dx = state.grid().dx();
    let mut rho = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for m in 0..d {
        for n in m..d {
            let s: Complex64 = state
                .sector(m)
                .iter()
                .zip(state.sector(n))
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                * dx;
            if m == n {
                rho[(m, m)] = Complex64::new(s.re, 0.0);
            } else {
                rho[(m, n)] = s;
                rho[(n, m)] = s.conj();
            }
        }
    }
    // Renormalize away the boundary-tolerance slack so the trace invariant holds tightly.
    let trace: f64 = (0..d).map(|i| rho[(i, i)].re).sum();
    rho /= Complex64::new(trace, 0.0);
    DensityMatrix::new(rho)
}

/// S(ρ) = −Σ λ log₂ λ in bits, with 0·log₂0 = 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    rho.validate()?;
    Ok(rho
        .eigenvalues()
        .into_iter()
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum::<f64>()
        .max(0.0))
}

fn norm_of(amp: &[Complex64], dx: f64) -> f64 {
    (amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx).sqrt()
}

fn check_finite(amp: &[Complex64]) -> Result<()> {
    match amp
        .iter()
        .position(|a| !a.re.is_finite() || !a.im.is_finite())
    {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("grids differ: {a:?} vs {b:?}")));
    }
    Ok(())
}

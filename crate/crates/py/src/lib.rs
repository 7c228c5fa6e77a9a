//! Python bindings: configuration, trajectories and ensembles, screen
//! patterns, entanglement of joint states, fringe analysis and the
//! Mach–Zehnder model.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;

use collapsim::config;
use collapsim::experiment::{self, EnsembleSummary, ExperimentConfig, TrajectoryRecord};
use collapsim::hilbert::{self, FockRegister, GridSpec, JointState};
use collapsim::mzi::{self, MziConfig};
use collapsim::observables;
use collapsim::rng::RngStream;
use collapsim::Error;

create_exception!(collapsim, NumericalError, PyException);

fn to_py(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for collapsim::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Validated experiment configuration.
#[pyclass(name = "Config", module = "collapsim", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Defaults with optional `key=value` overrides.
    #[new]
    #[pyo3(signature = (overrides = Vec::new()))]
    fn new(overrides: Vec<String>) -> PyResult<Self> {
        Self::from_text("", overrides)
    }

    #[staticmethod]
    #[pyo3(signature = (text, overrides = Vec::new()))]
    fn from_text(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        let inner = config::parse_config(text, &overrides).py()?;
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let inner = config::load_config(&path, &overrides).py()?;
        Ok(PyConfig { inner })
    }

    /// Copy with further overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        Self::from_text(&config::dump(&self.inner), overrides)
    }

    fn dump(&self) -> String {
        config::dump(&self.inner)
    }

    fn entries(&self) -> Vec<(String, String)> {
        config::entries(&self.inner)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[getter]
    fn n_trajectories(&self) -> usize {
        self.inner.n_trajectories
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n_trajectories={}, master_seed={}, g={})",
            self.inner.n_trajectories, self.inner.master_seed, self.inner.evolution.coupling.g
        )
    }
}

#[pyclass(name = "Record", module = "collapsim", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyRecord {
    id: u64,
    seed: u64,
    screen_x: f64,
    phonon_created: bool,
    n_phonons_final: usize,
    first_creation_step: Option<usize>,
    distance_to_max: Option<f64>,
}

#[pymethods]
impl PyRecord {
    fn __repr__(&self) -> String {
        format!(
            "Record(id={}, screen_x={}, phonon_created={})",
            self.id, self.screen_x, self.phonon_created
        )
    }
}

impl From<TrajectoryRecord> for PyRecord {
    fn from(r: TrajectoryRecord) -> Self {
        PyRecord {
            id: r.id,
            seed: r.seed,
            screen_x: r.screen_x,
            phonon_created: r.phonon_created,
            n_phonons_final: r.n_phonons_final,
            first_creation_step: r.first_creation_step,
            distance_to_max: r.distance_to_max,
        }
    }
}

impl From<&PyRecord> for TrajectoryRecord {
    fn from(r: &PyRecord) -> Self {
        TrajectoryRecord {
            id: r.id,
            seed: r.seed,
            screen_x: r.screen_x,
            phonon_created: r.phonon_created,
            n_phonons_final: r.n_phonons_final,
            first_creation_step: r.first_creation_step,
            distance_to_max: r.distance_to_max,
        }
    }
}

#[pyclass(
    name = "Summary",
    module = "collapsim",
    frozen,
    get_all,
    skip_from_py_object
)]
#[derive(Clone)]
struct PySummary {
    n_total: usize,
    n_created: usize,
    n_elastic: usize,
    visibility_elastic: Option<f64>,
    visibility_created: Option<f64>,
    r_pb: Option<f64>,
    p_value: Option<f64>,
    mean_distance_elastic: Option<f64>,
    mean_distance_created: Option<f64>,
    notes: Vec<String>,
    text: String,
}

#[pymethods]
impl PySummary {
    fn __str__(&self) -> String {
        self.text.clone()
    }
}

impl From<EnsembleSummary> for PySummary {
    fn from(s: EnsembleSummary) -> Self {
        PySummary {
            text: s.to_text(),
            n_total: s.n_total,
            n_created: s.n_created,
            n_elastic: s.n_elastic,
            visibility_elastic: s.visibility_elastic,
            visibility_created: s.visibility_created,
            r_pb: s.r_pb,
            p_value: s.p_value,
            mean_distance_elastic: s.mean_distance_elastic,
            mean_distance_created: s.mean_distance_created,
            notes: s.notes,
        }
    }
}

#[pyfunction]
fn run_trajectory(py: Python<'_>, config: &PyConfig, trajectory_id: u64) -> PyResult<PyRecord> {
    let cfg = config.inner;
    let record = py
        .detach(|| experiment::run_trajectory(&cfg, trajectory_id))
        .py()?;
    Ok(record.into())
}

/// Runs the configured ensemble; returns (records, summary).
#[pyfunction]
#[pyo3(signature = (config, workers = None))]
fn run_ensemble(
    py: Python<'_>,
    config: &PyConfig,
    workers: Option<usize>,
) -> PyResult<(Vec<PyRecord>, PySummary)> {
    let cfg = config.inner;
    let (records, summary) = py
        .detach(|| match workers {
            Some(w) => experiment::run_ensemble_with_workers(&cfg, w),
            None => experiment::run_ensemble(&cfg),
        })
        .py()?;
    Ok((
        records.into_iter().map(Into::into).collect(),
        summary.into(),
    ))
}

/// Fills distances and recomputes the summary from existing records.
#[pyfunction]
fn analyze(config: &PyConfig, records: Vec<PyRecord>) -> PyResult<(Vec<PyRecord>, PySummary)> {
    let mut recs: Vec<TrajectoryRecord> = records.iter().map(Into::into).collect();
    let summary = experiment::summarize(&mut recs, &config.inner).py()?;
    Ok((recs.into_iter().map(Into::into).collect(), summary.into()))
}

/// Unmonitored screen density: (x, [pdf_n0, pdf_n1, ...]).
#[pyfunction]
fn screen_pattern(py: Python<'_>, config: &PyConfig) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let cfg = config.inner;
    let pdfs = py.detach(|| experiment::screen_pattern(&cfg)).py()?;
    Ok((cfg.grid.xs(), pdfs))
}

/// Superposition defect at g = 0 and at the configured defect coupling.
#[pyfunction]
fn defect_values(py: Python<'_>, config: &PyConfig) -> PyResult<(f64, f64)> {
    let cfg = config.inner;
    py.detach(|| experiment::defect_values(&cfg)).py()
}

#[pyfunction]
fn write_records(records: Vec<PyRecord>, path: PathBuf) -> PyResult<()> {
    let recs: Vec<TrajectoryRecord> = records.iter().map(Into::into).collect();
    experiment::write_records(&recs, &path).py()
}

#[pyfunction]
fn read_records(path: PathBuf) -> PyResult<Vec<PyRecord>> {
    let recs = experiment::read_records(&path).py()?;
    Ok(recs.into_iter().map(Into::into).collect())
}

fn joint_state(
    amplitudes: Vec<Complex64>,
    n_max: usize,
    x_min: f64,
    x_max: f64,
) -> collapsim::Result<JointState> {
    let fock = FockRegister::new(n_max)?;
    let n_points = amplitudes.len() / fock.dim();
    let grid = GridSpec::new(n_points, x_min, x_max)?;
    JointState::from_amplitudes(grid, fock, amplitudes)?.normalized()
}

/// Reduced phonon density matrix of a sector-major joint state, as rows.
/// The amplitudes are normalized first.
#[pyfunction]
#[pyo3(signature = (amplitudes, n_max, x_min = -1.0, x_max = 1.0))]
fn reduced_phonon_dm(
    amplitudes: Vec<Complex64>,
    n_max: usize,
    x_min: f64,
    x_max: f64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let state = joint_state(amplitudes, n_max, x_min, x_max).py()?;
    let rho = hilbert::reduced_phonon_dm(&state).py()?;
    let d = rho.dim();
    Ok((0..d)
        .map(|i| (0..d).map(|j| rho.get(i, j)).collect())
        .collect())
}

/// Entanglement entropy (bits) of a sector-major joint state.
#[pyfunction]
#[pyo3(signature = (amplitudes, n_max, x_min = -1.0, x_max = 1.0))]
fn entanglement_entropy(
    amplitudes: Vec<Complex64>,
    n_max: usize,
    x_min: f64,
    x_max: f64,
) -> PyResult<f64> {
    let state = joint_state(amplitudes, n_max, x_min, x_max).py()?;
    let rho = hilbert::reduced_phonon_dm(&state).py()?;
    hilbert::von_neumann_entropy(&rho).py()
}

#[pyfunction]
#[pyo3(signature = (values, positions, window, prominence = observables::DEFAULT_PROMINENCE))]
fn find_maxima(
    values: Vec<f64>,
    positions: Vec<f64>,
    window: (f64, f64),
    prominence: f64,
) -> PyResult<Vec<f64>> {
    observables::find_maxima_at(&values, &positions, window, prominence).py()
}

#[pyfunction]
#[pyo3(signature = (values, positions, window, prominence = observables::DEFAULT_PROMINENCE))]
fn visibility(
    values: Vec<f64>,
    positions: Vec<f64>,
    window: (f64, f64),
    prominence: f64,
) -> PyResult<f64> {
    observables::visibility_at(&values, &positions, window, prominence).py()
}

/// (r, p) for binary labels against continuous values.
#[pyfunction]
#[pyo3(signature = (labels, values, permutations = 10_000, seed = experiment::PERMUTATION_SEED))]
fn point_biserial(
    labels: Vec<bool>,
    values: Vec<f64>,
    permutations: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    experiment::point_biserial_test(&labels, &values, permutations, seed).py()
}

fn mzi_config(
    object_present: bool,
    theta1: Option<f64>,
    theta2: Option<f64>,
    phase: f64,
) -> MziConfig {
    let b = MziConfig::balanced(object_present);
    MziConfig {
        theta1: theta1.unwrap_or(b.theta1),
        theta2: theta2.unwrap_or(b.theta2),
        object_present,
        phase,
    }
}

/// (p_dark, p_bright, p_absorbed); splitters default to 50/50.
#[pyfunction]
#[pyo3(signature = (object_present, theta1 = None, theta2 = None, phase = 0.0))]
fn mzi_probabilities(
    object_present: bool,
    theta1: Option<f64>,
    theta2: Option<f64>,
    phase: f64,
) -> (f64, f64, f64) {
    let o = mzi::mzi_probabilities(&mzi_config(object_present, theta1, theta2, phase));
    (o.p_dark, o.p_bright, o.p_absorbed)
}

/// (dark, bright, absorbed) counts.
#[pyfunction]
#[pyo3(signature = (object_present, n_shots, seed, theta1 = None, theta2 = None, phase = 0.0))]
fn mzi_sample(
    object_present: bool,
    n_shots: u64,
    seed: u64,
    theta1: Option<f64>,
    theta2: Option<f64>,
    phase: f64,
) -> PyResult<(u64, u64, u64)> {
    let cfg = mzi_config(object_present, theta1, theta2, phase);
    let c = mzi::mzi_sample(&cfg, n_shots, &mut RngStream::new(seed)).py()?;
    Ok((c.dark, c.bright, c.absorbed))
}

/// Module initializer; also usable with `pyo3::append_to_inittab!`.
#[pymodule(name = "collapsim")]
pub fn collapsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("SCHEMA", experiment::SCHEMA)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PySummary>()?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(screen_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(defect_values, m)?)?;
    m.add_function(wrap_pyfunction!(write_records, m)?)?;
    m.add_function(wrap_pyfunction!(read_records, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_phonon_dm, m)?)?;
    m.add_function(wrap_pyfunction!(entanglement_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(find_maxima, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(point_biserial, m)?)?;
    m.add_function(wrap_pyfunction!(mzi_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(mzi_sample, m)?)?;
    Ok(())
}

//! Trajectory ensembles for the creation/collapse correlation experiment.
//!
//! A trajectory prepares the electron in the two slit channels, evolves it
//! inside the plate under the phonon coupling with projective monitoring,
//! lets it fly freely to the screen, and draws one joint Born sample
//! (screen position, phonon number).

mod analysis;
mod persist;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::collapse::{
    draw_outcome, project_sector, run_monitored_with, MonitorSpec, ScreenSampler,
};
use crate::dynamics::{
    channel_mode, propagate_free, superposition_defect, CouplingSpec, EvolutionSpec, PotentialSpec,
    Propagator, SlitProfile,
};
use crate::error::{Error, Result};
use crate::hilbert::{
    embed, gaussian_packet, sector_weights, FockRegister, GridSpec, JointState, BOUNDARY_NORM_TOL,
};
use crate::mzi::MziConfig;
use crate::rng::RngStream;

pub use analysis::{
    analyze, class_histogram, elastic_maxima, point_biserial, point_biserial_test, summarize,
    EnsembleSummary, MIN_ELASTIC, PERMUTATION_SEED,
};
pub use persist::{
    read_records, read_summary, write_records, write_summary, RECORDS_HEADER, SCHEMA,
};

/// Fraction of the grid length at each end treated as the reflection guard band.
pub const GUARD_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSpec {
    pub visibility_window: (f64, f64),
    pub prominence: f64,
    /// Half-width (in bins) of the moving average applied to histograms.
    pub smoothing: usize,
    pub permutations: usize,
}

/// Two packets moving toward each other across a coupling window, used to
/// probe linearity of the mean-field map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectSpec {
    pub u_x0: f64,
    pub v_x0: f64,
    pub sigma: f64,
    pub k0: f64,
    pub g: f64,
    pub window_center: f64,
    pub window_width: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub fock: FockRegister,
    pub packet: PacketSpec,
    pub evolution: EvolutionSpec,
    /// Duration of the field-free flight from the plate to the screen.
    pub flight_time: f64,
    pub monitor: MonitorSpec,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub screen_window: (f64, f64),
    pub histogram_bins: usize,
    pub analysis: AnalysisSpec,
    pub defect: DefectSpec,
    pub mzi: MziConfig,
    /// Sampled shots for the interferometer; 0 prints probabilities only.
    pub mzi_shots: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            grid: GridSpec::new(1024, -40.0, 40.0).expect("default grid"),
            fock: FockRegister::new(2).expect("default register"),
            packet: PacketSpec {
                x0: 0.0,
                sigma: 2.0,
                k0: 5.0,
            },
            evolution: EvolutionSpec {
                dt: 0.001,
                n_steps: 6000,
                potential: PotentialSpec {
                    barrier_center: 0.0,
                    barrier_width: 20.0,
                    barrier_height: 50.0,
                    slit_centers: Some((-2.0, 2.0)),
                    slit_width: 1.0,
                    slit_profile: SlitProfile::Smooth,
                },
                coupling: CouplingSpec {
                    g: 1.5,
                    window_center: 2.0,
                    window_width: 3.0,
                    omega: 1.0,
                },
            },
            flight_time: 1.4,
            monitor: MonitorSpec {
                cadence: 50,
                enabled: true,
            },
            n_trajectories: 10_000,
            master_seed: 42,
            screen_window: (-20.0, 20.0),
            histogram_bins: 160,
            analysis: AnalysisSpec {
                visibility_window: (-10.0, 10.0),
                prominence: 0.1,
                smoothing: 1,
                permutations: 10_000,
            },
            defect: DefectSpec {
                u_x0: -3.0,
                v_x0: 3.0,
                sigma: 1.0,
                k0: 2.0,
                g: 0.5,
                window_center: 0.0,
                window_width: 4.0,
                n_steps: 2000,
            },
            mzi: MziConfig::balanced(true),
            mzi_shots: 10_000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.evolution.validate(&self.grid)?;
        self.monitor.validate()?;
        gaussian_packet(
            &self.grid,
            self.packet.x0,
            self.packet.sigma,
            self.packet.k0,
        )?;
        if !(self.flight_time >= 0.0) || !self.flight_time.is_finite() {
            return Err(Error::invariant("flight_time", "must be finite and >= 0"));
        }
        if self.n_trajectories < 1 {
            return Err(Error::invariant("n_trajectories", "must be at least 1"));
        }
        let (lo, hi) = self.screen_window;
        if !(lo < hi) || lo < self.grid.x_min() || hi > self.grid.x_max() {
            return Err(Error::invariant(
                "screen_window",
                "must be an increasing pair inside the grid",
            ));
        }
        if self.histogram_bins < 1 {
            return Err(Error::invariant("histogram_bins", "must be at least 1"));
        }
        let (a, b) = self.analysis.visibility_window;
        if !(a < b) || a < lo || b > hi {
            return Err(Error::invariant(
                "analysis.visibility_window",
                "must be an increasing pair inside screen_window",
            ));
        }
        if !(self.analysis.prominence > 0.0) {
            return Err(Error::invariant("analysis.prominence", "must be > 0"));
        }
        if self.analysis.permutations < 10_000 {
            return Err(Error::invariant(
                "analysis.permutations",
                "must be at least 10000",
            ));
        }
        let d = &self.defect;
        if !(d.g >= 0.0) || !d.g.is_finite() {
            return Err(Error::invariant("defect.g", "must be finite and >= 0"));
        }
        self.defect_spec(d.g).validate(&self.grid)?;
        gaussian_packet(&self.grid, d.u_x0, d.sigma, d.k0)?;
        gaussian_packet(&self.grid, d.v_x0, d.sigma, -d.k0)?;
        Ok(())
    }

    fn defect_spec(&self, g: f64) -> EvolutionSpec {
        EvolutionSpec {
            dt: self.evolution.dt,
            n_steps: self.defect.n_steps,
            potential: PotentialSpec::free(),
            coupling: CouplingSpec {
                g,
                window_center: self.defect.window_center,
                window_width: self.defect.window_width,
                omega: self.evolution.coupling.omega,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub id: u64,
    pub seed: u64,
    pub screen_x: f64,
    pub phonon_created: bool,
    pub n_phonons_final: usize,
    pub first_creation_step: Option<usize>,
    pub distance_to_max: Option<f64>,
}

/// Electron state at the plate entrance: the incident packet projected onto
/// the lowest mode of each slit channel, in the phonon vacuum. Without slits
/// the packet itself is used.
pub fn initial_state(config: &ExperimentConfig) -> Result<JointState> {
    let grid = &config.grid;
    let p = &config.packet;
    let incident = gaussian_packet(grid, p.x0, p.sigma, p.k0)?;
    let potential = &config.evolution.potential;
    let psi = match potential.slit_centers {
        None => incident,
        Some((a, b)) => {
            let phi_a = channel_mode(grid, potential, a)?;
            let phi_b = channel_mode(grid, potential, b)?;
            let ca = phi_a.inner(&incident)?;
            let cb = phi_b.inner(&incident)?;
            phi_a
                .scaled(ca)
                .add(&phi_b.scaled(cb))?
                .normalized()
                .map_err(|_| Error::DegenerateInput("incident packet misses both slits".into()))?
        }
    };
    embed(&psi, config.fock, 0)
}

/// Norm carried by the outer guard bands of the grid.
pub fn edge_mass(state: &JointState) -> f64 {
    let grid = state.grid();
    let band = GUARD_BAND * grid.length();
    let (lo, hi) = (grid.x_min() + band, grid.x_max() - band);
    state
        .position_density()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let x = grid.x(*i);
            x < lo || x > hi
        })
        .map(|(_, d)| d * grid.dx())
        .sum()
}

/// Precomputed pieces shared by every trajectory of one configuration.
struct Apparatus {
    config: ExperimentConfig,
    propagator: Propagator,
    initial: JointState,
}

impl Apparatus {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Apparatus {
            config: *config,
            propagator: Propagator::new(&config.grid, config.fock, &config.evolution)?,
            initial: initial_state(config)?,
        })
    }

    /// Remainder steps, free flight, and the reflection guard.
    fn finish(&self, mut state: JointState, remainder: usize) -> Result<ScreenSampler> {
        self.propagator.evolve(&mut state, remainder);
        let state = propagate_free(
            &state,
            self.config.flight_time,
            self.config.evolution.coupling.omega,
        );
        let mass = edge_mass(&state);
        if mass > BOUNDARY_NORM_TOL {
            return Err(Error::BoundaryLeak { mass });
        }
        ScreenSampler::new(&state)
    }

    fn run_one(&self, id: u64) -> Result<TrajectoryRecord> {
        let cfg = &self.config;
        let mut rng = RngStream::split(cfg.master_seed, id);
        let (_, remainder) = cfg.monitor.blocks(cfg.evolution.n_steps);
        let (state, events) = run_monitored_with(
            &self.propagator,
            &self.initial,
            cfg.evolution.n_steps,
            &cfg.monitor,
            &mut rng,
        )?;
        let first_creation_step = events.iter().find(|e| e.outcome >= 1).map(|e| e.step);
        let sampler = self.finish(state, remainder)?;
        let (screen_x, n) = sampler.sample(&mut rng);
        Ok(TrajectoryRecord {
            id,
            seed: cfg.master_seed,
            screen_x,
            phonon_created: first_creation_step.is_some(),
            n_phonons_final: n,
            first_creation_step,
            distance_to_max: None,
        })
    }

    /// Runs a group of trajectories that share the measurement history so
    /// far. The shared state is evolved once per block; the group splits only
    /// where the members' outcomes differ. Each member consumes its stream
    /// exactly as a standalone run would, so records are identical to
    /// [`run_trajectory`].
    fn walk(
        &self,
        mut state: JointState,
        mut block: usize,
        mut members: Vec<Member>,
    ) -> Vec<(u64, Result<TrajectoryRecord>)> {
        let cfg = &self.config;
        let (n_blocks, remainder) = cfg.monitor.blocks(cfg.evolution.n_steps);
        while block < n_blocks {
            self.propagator.evolve(&mut state, cfg.monitor.cadence);
            let weights = sector_weights(&state);
            let mut groups: BTreeMap<usize, Vec<Member>> = BTreeMap::new();
            let mut failed = Vec::new();
            for mut m in members {
                match draw_outcome(&weights, &mut m.rng) {
                    Ok(n) => {
                        if n >= 1 && m.first_creation.is_none() {
                            m.first_creation = Some((block + 1) * cfg.monitor.cadence);
                        }
                        groups.entry(n).or_default().push(m);
                    }
                    Err(e) => failed.push((m.id, Err(wrap(m.id, e)))),
                }
            }
            block += 1;
            if groups.len() == 1 && failed.is_empty() {
                let (n, group) = groups.pop_first().expect("one group");
                state = project_sector(&state, n, weights[n]);
                members = group;
                continue;
            }
            let parent = &state;
            let mut out: Vec<_> = groups
                .into_par_iter()
                .flat_map_iter(|(n, group)| {
                    self.walk(project_sector(parent, n, weights[n]), block, group)
                })
                .collect();
            out.extend(failed);
            return out;
        }
        match self.finish(state, remainder) {
            Ok(sampler) => members
                .into_iter()
                .map(|mut m| {
                    let (screen_x, n) = sampler.sample(&mut m.rng);
                    let record = TrajectoryRecord {
                        id: m.id,
                        seed: cfg.master_seed,
                        screen_x,
                        phonon_created: m.first_creation.is_some(),
                        n_phonons_final: n,
                        first_creation_step: m.first_creation,
                        distance_to_max: None,
                    };
                    (m.id, Ok(record))
                })
                .collect(),
            Err(e) => members
                .into_iter()
                .map(|m| (m.id, Err(wrap(m.id, duplicate(&e)))))
                .collect(),
        }
    }
}

struct Member {
    id: u64,
    rng: RngStream,
    first_creation: Option<usize>,
}

/// Copy of a leaf failure for every member of the group that hit it.
fn duplicate(e: &Error) -> Error {
    match e {
        Error::BoundaryLeak { mass } => Error::BoundaryLeak { mass: *mass },
        Error::Unnormalized { norm } => Error::Unnormalized { norm: *norm },
        Error::DegenerateState => Error::DegenerateState,
        other => Error::DegenerateInput(other.to_string()),
    }
}

fn wrap(id: u64, source: Error) -> Error {
    Error::Trajectory {
        id,
        source: Box::new(source),
    }
}

/// One trajectory, replayable from (master seed, id) alone.
pub fn run_trajectory(config: &ExperimentConfig, id: u64) -> Result<TrajectoryRecord> {
    Apparatus::new(config)?.run_one(id).map_err(|e| wrap(id, e))
}

/// All `n_trajectories` trajectories on the global thread pool.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<(Vec<TrajectoryRecord>, EnsembleSummary)> {
    let mut records = simulate_records(config)?;
    let summary = summarize(&mut records, config)?;
    Ok((records, summary))
}

/// [`run_ensemble`] on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<(Vec<TrajectoryRecord>, EnsembleSummary)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::DegenerateInput(format!("thread pool: {e}")))?;
    pool.install(|| run_ensemble(config))
}

/// Records ordered by id, without analysis. Fails when more than 1 % of
/// the trajectories error; otherwise failed trajectories are dropped.
pub fn simulate_records(config: &ExperimentConfig) -> Result<Vec<TrajectoryRecord>> {
    let app = Apparatus::new(config)?;
    let total = config.n_trajectories;
    let members = (0..total as u64)
        .map(|id| Member {
            id,
            rng: RngStream::split(config.master_seed, id),
            first_creation: None,
        })
        .collect();
    let mut results = app.walk(app.initial.clone(), 0, members);
    results.sort_by_key(|(id, _)| *id);

    let mut records = Vec::with_capacity(total);
    let mut errors = Vec::new();
    for (_, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(e),
        }
    }
    if errors.len() * 100 > total {
        return Err(Error::EnsembleFailed {
            failed: errors.len(),
            total,
            first: Box::new(errors.swap_remove(0)),
        });
    }
    Ok(records)
}

/// Per-sector screen densities (|ψ_n(x)|², integrating to the sector
/// weights) after an unmonitored plate stage and the free flight.
pub fn screen_pattern(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let app = Apparatus::new(config)?;
    let mut state = app.initial.clone();
    app.propagator.evolve(&mut state, config.evolution.n_steps);
    let state = propagate_free(&state, config.flight_time, config.evolution.coupling.omega);
    let mass = edge_mass(&state);
    if mass > BOUNDARY_NORM_TOL {
        return Err(Error::BoundaryLeak { mass });
    }
    Ok((0..config.fock.dim())
        .map(|n| state.sector(n).iter().map(Complex64::norm_sqr).collect())
        .collect())
}

/// Superposition defect of the mean-field map at zero coupling and at the
/// configured defect coupling.
pub fn defect_values(config: &ExperimentConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let d = &config.defect;
    let u = gaussian_packet(&config.grid, d.u_x0, d.sigma, d.k0)?;
    let v = gaussian_packet(&config.grid, d.v_x0, d.sigma, -d.k0)?;
    Ok((
        superposition_defect(&u, &v, &config.defect_spec(0.0))?,
        superposition_defect(&u, &v, &config.defect_spec(d.g))?,
    ))
}

//! Convergence experiments: ensembles of actual runs compared with the
//! averaged solution, hard/soft comparisons and collision-rate audits.
//!
//! Every grid cell is an independent task. Cells run on a rayon pool and
//! results are collected in grid order, so tables do not depend on the
//! number of threads.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaged::{solve_averaged, AveragedModel, AveragedTrajectory};
use crate::error::{Error, Result};
use crate::fit::{convergence_slope, slope_above_floor, two_variable_fit, SlopeFit};
use crate::hardcore::{self, AngleState, EvolveOptions, Observer};
use crate::model::{CompactSet, FullState, Side, SlowMode, SlowState, SystemConfig};
use crate::ode::SolverOptions;
use crate::profile::Profile;
use crate::softcore::{self, SoftCore, StepControl};

/// Samples per unit of slow time on actual trajectories.
pub const SAMPLES_PER_SLOW_TIME: f64 = 512.0;

/// Initial slow state, phase ensemble and parameter grid of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub h0: SlowState,
    pub n_phases: usize,
    #[serde(default)]
    pub seed: u64,
    pub epsilons: Vec<f64>,
    #[serde(default = "zero_delta")]
    pub deltas: Vec<f64>,
    /// Slow-time horizon `T`.
    pub horizon: f64,
}

fn zero_delta() -> Vec<f64> {
    vec![0.0]
}

impl EnsembleSpec {
    /// The reference scenario: one particle per side, `X = 1/2`, `W = 0`,
    /// `E1 = 2`, `E2 = 1`, sixteen phases, `T = 1`.
    pub fn default_hard() -> Self {
        EnsembleSpec {
            h0: SlowState {
                x: 0.5,
                w: 0.0,
                left: vec![2.0],
                right: vec![2f64.sqrt()],
                mode: SlowMode::HardSpeeds,
            },
            n_phases: 16,
            seed: 0,
            epsilons: vec![0.1, 0.05, 0.02, 0.01, 0.005],
            deltas: vec![0.0],
            horizon: 1.0,
        }
    }

    /// The reference scenario scaled below the unit barrier:
    /// `E1 = 0.66`, `E2 = 0.33`.
    pub fn default_soft() -> Self {
        EnsembleSpec {
            h0: SlowState {
                x: 0.5,
                w: 0.0,
                left: vec![0.66],
                right: vec![0.33],
                mode: SlowMode::SoftEnergies,
            },
            deltas: vec![0.1, 0.05, 0.025],
            ..Self::default_hard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phases == 0 {
            return Err(Error::config("n_phases", "must be at least 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon", "must be positive and finite"));
        }
        if self.epsilons.is_empty() {
            return Err(Error::config("epsilons", "must not be empty"));
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::config(
                    "epsilons",
                    format!("value {e} must be positive"),
                ));
            }
            if self.epsilons[..i].contains(&e) {
                return Err(Error::config("epsilons", format!("value {e} repeated")));
            }
        }
        if let Some(d) = self.deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::config(
                "deltas",
                format!("value {d} must be non-negative"),
            ));
        }
        Ok(())
    }
}

/// System configuration, potential, compact set and solver settings shared by
/// all cells of a study.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cfg: SystemConfig,
    pub profile: Profile,
    pub set: CompactSet,
    pub solver: SolverOptions,
    /// Worker threads; 0 uses the available parallelism.
    pub jobs: usize,
}

impl Setup {
    pub fn new(cfg: SystemConfig, profile: Profile, set: CompactSet) -> Self {
        Setup {
            cfg,
            profile,
            set,
            solver: SolverOptions::default(),
            jobs: 0,
        }
    }

    pub fn soft_core(&self) -> SoftCore {
        SoftCore::new(self.profile.clone(), self.set.margin())
    }

    fn cell_cfg(&self, epsilon: f64, delta: f64) -> SystemConfig {
        self.cfg.clone().with_epsilon(epsilon).with_delta(delta)
    }

    fn pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        if self.jobs == 0 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?;
        Ok(pool.install(f))
    }
}

/// Uniform phases on the torus, one `AngleState` per ensemble member.
pub fn sample_phases(n1: usize, n2: usize, count: usize, seed: u64) -> Vec<AngleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| AngleState {
            phi_left: (0..n1).map(|_| rng.gen::<f64>()).collect(),
            phi_right: (0..n2).map(|_| rng.gen::<f64>()).collect(),
        })
        .collect()
}

/// Full state with slow variables `h0` and fast phases `angles`, using the
/// hard or soft angle variables according to `cfg.delta`.
pub fn initial_state(
    h0: &SlowState,
    angles: &AngleState,
    cfg: &SystemConfig,
    core: &SoftCore,
) -> Result<FullState> {
    if cfg.is_hard() {
        hardcore::state_from_angles(&h0.to_speeds(cfg), angles, cfg)
    } else {
        core.state_from_angles(&h0.to_energies(cfg), angles, cfg)
    }
}

/// Slow variables sampled along an actual trajectory.
#[derive(Debug, Clone, Default)]
pub struct SlowPath {
    pub tau: Vec<f64>,
    pub states: Vec<SlowState>,
    /// Collisions (hard core) or integrator steps (soft core).
    pub work: u64,
}

impl SlowPath {
    /// The same path with per-particle values expressed as energies.
    pub fn to_energies(&self, cfg: &SystemConfig) -> SlowPath {
        SlowPath {
            tau: self.tau.clone(),
            states: self.states.iter().map(|h| h.to_energies(cfg)).collect(),
            work: self.work,
        }
    }
}

struct SlowSampler<'a> {
    cfg: &'a SystemConfig,
    path: SlowPath,
}

impl Observer for SlowSampler<'_> {
    fn sample(&mut self, state: &FullState) {
        self.path.tau.push(self.cfg.epsilon * state.t);
        self.path
            .states
            .push(hardcore::hard_slow_state(state, self.cfg));
    }
}

/// Run the actual dynamics from `full0` to slow time `horizon`, sampling the
/// slow variables `SAMPLES_PER_SLOW_TIME` times per unit slow time.
pub fn actual_path(
    full0: FullState,
    cfg: &SystemConfig,
    profile: &Profile,
    horizon: f64,
) -> Result<SlowPath> {
    let eps = cfg.epsilon;
    if !(eps > 0.0) {
        return Err(Error::config("epsilon", "actual paths need epsilon > 0"));
    }
    let until = full0.t + horizon / eps;
    let dt = 1.0 / (SAMPLES_PER_SLOW_TIME * eps);
    if cfg.is_hard() {
        let opts = EvolveOptions {
            sample_dt: Some(dt),
            ..EvolveOptions::for_epsilon(eps)
        };
        let mut sampler = SlowSampler {
            cfg,
            path: SlowPath::default(),
        };
        let summary = hardcore::evolve(full0, until, cfg, &opts, &mut sampler)?;
        sampler.path.work = summary.events;
        Ok(sampler.path)
    } else {
        let control = StepControl {
            sample_dt: Some(dt),
            ..StepControl::default()
        };
        let mut path = SlowPath::default();
        let summary = softcore::integrate(full0, until, cfg, profile, &control, |s| {
            path.tau.push(eps * s.t);
            path.states.push(softcore::soft_slow_state(s, cfg, profile));
        })?;
        path.work = summary.steps;
        Ok(path)
    }
}

/// Sup-norm deviation and the stopping time of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub sup_error: f64,
    /// First slow time at which either path leaves the compact set.
    pub t_eps: Option<f64>,
}

fn first_exit_of(path: &SlowPath, set: &CompactSet) -> Option<f64> {
    path.tau
        .iter()
        .zip(&path.states)
        .find(|(_, h)| !set.contains(h))
        .map(|(t, _)| *t)
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// `sup |h(tau) - hbar(tau)|` over samples with `tau <= min(end, T_eps)`.
pub fn sup_deviation(
    path: &SlowPath,
    avg: &AveragedTrajectory,
    set: &CompactSet,
) -> Result<Deviation> {
    let t_eps = min_opt(first_exit_of(path, set), avg.first_exit);
    let limit = t_eps.unwrap_or(f64::INFINITY).min(avg.tau_end());
    let mut sup: Option<f64> = None;
    for (&tau, h) in path.tau.iter().zip(&path.states) {
        if tau > limit {
            break;
        }
        if h.mode != avg.mode {
            return Err(Error::Shape(
                "path and averaged solution use different slow coordinates".into(),
            ));
        }
        let d = h.max_abs_diff(&avg.eval(tau));
        sup = Some(sup.map_or(d, |s: f64| s.max(d)));
    }
    sup.map(|sup_error| Deviation { sup_error, t_eps })
        .ok_or(Error::EmptyOverlap)
}

/// `sup |a(tau) - b(tau)|` for two paths sampled on the same grid.
pub fn path_deviation(a: &SlowPath, b: &SlowPath, set: &CompactSet) -> Result<Deviation> {
    let t_eps = min_opt(first_exit_of(a, set), first_exit_of(b, set));
    let limit = t_eps.unwrap_or(f64::INFINITY);
    let mut sup: Option<f64> = None;
    for ((ta, ha), (tb, hb)) in a.tau.iter().zip(&a.states).zip(b.tau.iter().zip(&b.states)) {
        if *ta > limit {
            break;
        }
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) || ha.mode != hb.mode {
            return Err(Error::Shape(
                "paths are not sampled on a common grid".into(),
            ));
        }
        let d = ha.max_abs_diff(hb);
        sup = Some(sup.map_or(d, |s: f64| s.max(d)));
    }
    sup.map(|sup_error| Deviation { sup_error, t_eps })
        .ok_or(Error::EmptyOverlap)
}

/// One grid cell of an error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub epsilon: f64,
    pub delta: f64,
    pub phase: usize,
    pub sup_error: f64,
    pub first_exit: Option<f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    /// Worst error over phases for each `epsilon` at the given `delta`,
    /// in decreasing `epsilon`.
    pub fn worst_by_epsilon(&self, delta: f64) -> Vec<(f64, f64)> {
        self.worst_by(|r| (r.delta == delta).then_some(r.epsilon))
    }

    /// Worst error over phases for each `delta` at the given `epsilon`.
    pub fn worst_by_delta(&self, epsilon: f64) -> Vec<(f64, f64)> {
        self.worst_by(|r| (r.epsilon == epsilon).then_some(r.delta))
    }

    fn worst_by(&self, key: impl Fn(&ErrorRow) -> Option<f64>) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            if let Some(k) = key(r) {
                match out.iter_mut().find(|p| p.0 == k) {
                    Some(p) => p.1 = p.1.max(r.sup_error),
                    None => out.push((k, r.sup_error)),
                }
            }
        }
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }

    pub fn any_exit(&self) -> bool {
        self.rows.iter().any(|r| r.first_exit.is_some())
    }
}

fn coords(epsilon: f64, delta: f64, phase: usize) -> String {
    format!("epsilon={epsilon}, delta={delta}, phase={phase}")
}

/// Per-`delta` summary of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub delta: f64,
    /// `(epsilon, worst error)` in decreasing `epsilon`.
    pub worst: Vec<(f64, f64)>,
    pub fit: SlopeFit,
    /// Worst errors never increase as `epsilon` decreases.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub table: ErrorTable,
    pub per_delta: Vec<DeltaSummary>,
}

impl ConvergenceReport {
    /// `(epsilon, worst error over all delta)` in decreasing `epsilon`.
    pub fn worst_over_delta(&self) -> Vec<(f64, f64)> {
        self.table.worst_by(|r| Some(r.epsilon))
    }
}

fn monotone_nonincreasing(worst: &[(f64, f64)]) -> bool {
    worst.windows(2).all(|w| w[1].1 <= w[0].1)
}

fn averaged_for(
    h0: &SlowState,
    cfg: &SystemConfig,
    core: &SoftCore,
    setup: &Setup,
    horizon: f64,
) -> Result<AveragedTrajectory> {
    if cfg.is_hard() {
        solve_averaged(
            &h0.to_speeds(cfg),
            horizon,
            cfg,
            AveragedModel::Hard,
            Some(&setup.set),
            &setup.solver,
        )
    } else {
        solve_averaged(
            &h0.to_energies(cfg),
            horizon,
            cfg,
            AveragedModel::Soft(core),
            Some(&setup.set),
            &setup.solver,
        )
    }
}

/// Actual-vs-averaged errors over the `(delta, epsilon, phase)` grid with a
/// log-log slope per `delta`.
pub fn convergence_study(spec: &EnsembleSpec, setup: &Setup) -> Result<ConvergenceReport> {
    spec.validate()?;
    let core = setup.soft_core();
    let phases = sample_phases(setup.cfg.n1, setup.cfg.n2, spec.n_phases, spec.seed);
    let averaged: Vec<AveragedTrajectory> = spec
        .deltas
        .iter()
        .map(|&d| {
            let cfg = setup.cell_cfg(spec.epsilons[0], d);
            cfg.validate_with(&setup.set)?;
            averaged_for(&spec.h0, &cfg, &core, setup, spec.horizon)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (di, &delta) in spec.deltas.iter().enumerate() {
        for &epsilon in &spec.epsilons {
            for phase in 0..spec.n_phases {
                cells.push((di, delta, epsilon, phase));
            }
        }
    }
    let rows: Vec<Result<ErrorRow>> = setup.pool(|| {
        cells
            .par_iter()
            .map(|&(di, delta, epsilon, phase)| {
                let start = Instant::now();
                let run = || -> Result<ErrorRow> {
                    let cfg = setup.cell_cfg(epsilon, delta);
                    let full0 = initial_state(&spec.h0, &phases[phase], &cfg, &core)?;
                    let path = actual_path(full0, &cfg, &setup.profile, spec.horizon)?;
                    let dev = sup_deviation(&path, &averaged[di], &setup.set)?;
                    Ok(ErrorRow {
                        epsilon,
                        delta,
                        phase,
                        sup_error: dev.sup_error,
                        first_exit: dev.t_eps,
                        wall_time: start.elapsed().as_secs_f64(),
                    })
                };
                run().map_err(|e| e.at_grid(coords(epsilon, delta, phase)))
            })
            .collect()
    })?;
    let table = ErrorTable {
        rows: rows.into_iter().collect::<Result<_>>()?,
    };
    let per_delta = spec
        .deltas
        .iter()
        .map(|&delta| {
            let worst = table.worst_by_epsilon(delta);
            Ok(DeltaSummary {
                delta,
                fit: convergence_slope(&worst)?,
                monotone: monotone_nonincreasing(&worst),
                worst,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceReport { table, per_delta })
}

/// Phases whose hard-core positions all lie at least `clearance` away from
/// walls and piston, so the same microscopic state is a plateau state of
/// every soft core with `delta <= clearance`.
pub fn plateau_phases(
    h0: &SlowState,
    cfg: &SystemConfig,
    count: usize,
    seed: u64,
    clearance: f64,
) -> Result<Vec<AngleState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hard_cfg = cfg.clone().with_delta(0.0);
    let speeds = h0.to_speeds(cfg);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(Error::config(
                "deltas",
                format!("no plateau phases with clearance {clearance}"),
            ));
        }
        let a = AngleState {
            phi_left: (0..cfg.n1).map(|_| rng.gen::<f64>()).collect(),
            phi_right: (0..cfg.n2).map(|_| rng.gen::<f64>()).collect(),
        };
        let s = hardcore::state_from_angles(&speeds, &a, &hard_cfg)?;
        let ok_left = s
            .x_left
            .iter()
            .all(|&x| x > clearance && s.x_piston - x > clearance);
        let ok_right = s
            .x_right
            .iter()
            .all(|&x| x - s.x_piston > clearance && 1.0 - x > clearance);
        if ok_left && ok_right {
            out.push(a);
        }
    }
    Ok(out)
}

/// Grid of hard/soft deviations with the fitted two-floor structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub table: ErrorTable,
    /// Coefficients of `error ~ a epsilon + b delta` on the worst errors.
    pub coef_epsilon: f64,
    pub coef_delta: f64,
    /// Error against `delta` at the smallest `epsilon`, above `a epsilon`.
    pub delta_sweep: FloorSweep,
    /// Error against `epsilon` at the smallest `delta`, above `b delta`.
    pub epsilon_sweep: FloorSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorSweep {
    /// The parameter held fixed and its value.
    pub fixed: f64,
    pub floor: f64,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<SlopeFit>,
}

fn floor_sweep(points: Vec<(f64, f64)>, fixed: f64, floor: f64) -> FloorSweep {
    let fit = slope_above_floor(&points, floor.max(0.0)).ok();
    FloorSweep {
        fixed,
        floor,
        points,
        fit,
    }
}

/// Deviation between soft-core and hard-core actual runs started from the
/// same microscopic state, compared in energy coordinates.
pub fn hard_soft_comparison(spec: &EnsembleSpec, setup: &Setup) -> Result<ComparisonReport> {
    spec.validate()?;
    let soft_deltas: Vec<f64> = spec.deltas.iter().copied().filter(|&d| d > 0.0).collect();
    if soft_deltas.len() < 2 || spec.epsilons.len() < 2 {
        return Err(Error::config(
            "deltas",
            "comparison needs at least two positive deltas and two epsilons",
        ));
    }
    let d_max = soft_deltas.iter().cloned().fold(0.0, f64::max);
    for &d in &soft_deltas {
        setup
            .cell_cfg(spec.epsilons[0], d)
            .validate_with(&setup.set)?;
    }
    let phases = plateau_phases(&spec.h0, &setup.cfg, spec.n_phases, spec.seed, d_max)?;

    let mut cells = Vec::new();
    for &epsilon in &spec.epsilons {
        for phase in 0..spec.n_phases {
            cells.push((epsilon, phase));
        }
    }
    let blocks: Vec<Result<Vec<ErrorRow>>> = setup.pool(|| {
        cells
            .par_iter()
            .map(|&(epsilon, phase)| {
                let hard_cfg = setup.cell_cfg(epsilon, 0.0);
                let full0 = hardcore::state_from_angles(
                    &spec.h0.to_speeds(&hard_cfg),
                    &phases[phase],
                    &hard_cfg,
                )
                .map_err(|e| e.at_grid(coords(epsilon, 0.0, phase)))?;
                let hard = actual_path(full0.clone(), &hard_cfg, &setup.profile, spec.horizon)
                    .map_err(|e| e.at_grid(coords(epsilon, 0.0, phase)))?
                    .to_energies(&hard_cfg);
                soft_deltas
                    .iter()
                    .map(|&delta| {
                        let start = Instant::now();
                        let cfg = setup.cell_cfg(epsilon, delta);
                        let run = || -> Result<ErrorRow> {
                            let soft =
                                actual_path(full0.clone(), &cfg, &setup.profile, spec.horizon)?;
                            let dev = path_deviation(&soft, &hard, &setup.set)?;
                            Ok(ErrorRow {
                                epsilon,
                                delta,
                                phase,
                                sup_error: dev.sup_error,
                                first_exit: dev.t_eps,
                                wall_time: start.elapsed().as_secs_f64(),
                            })
                        };
                        run().map_err(|e| e.at_grid(coords(epsilon, delta, phase)))
                    })
                    .collect()
            })
            .collect()
    })?;
    let mut table = ErrorTable::default();
    for b in blocks {
        table.rows.extend(b?);
    }
    let mut worst = Vec::new();
    for &d in &soft_deltas {
        for (e, err) in table.worst_by_epsilon(d) {
            worst.push((e, d, err));
        }
    }
    let (a, b) = two_variable_fit(&worst)?;
    let eps_min = spec.epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_min = soft_deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta_sweep = floor_sweep(table.worst_by_delta(eps_min), eps_min, a * eps_min);
    let epsilon_sweep = floor_sweep(table.worst_by_epsilon(d_min), d_min, b * d_min);
    Ok(ComparisonReport {
        table,
        coef_epsilon: a,
        coef_delta: b,
        delta_sweep,
        epsilon_sweep,
    })
}

/// Observed and predicted piston-collision rate of one gas particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub side: Side,
    pub index: usize,
    pub observed: f64,
    pub predicted: f64,
}

impl RateRow {
    pub fn relative_error(&self) -> f64 {
        (self.observed - self.predicted).abs() / self.predicted
    }
}

/// Piston-collision counts per unit micro-time against `s / (2 L)`, the
/// prediction time-averaged along the run.
pub fn collision_rate_audit(
    cfg: &SystemConfig,
    full0: FullState,
    duration: f64,
) -> Result<Vec<RateRow>> {
    if !cfg.is_hard() {
        return Err(Error::NeedsHardCore { delta: cfg.delta });
    }
    if !(duration > 0.0) {
        return Err(Error::config("duration", "must be positive"));
    }
    let opts = EvolveOptions {
        sample_dt: Some(duration / 4096.0),
        max_events: u64::MAX,
    };
    let mut sampler = SlowSampler {
        cfg,
        path: SlowPath::default(),
    };
    let until = full0.t + duration;
    let summary = hardcore::evolve(full0, until, cfg, &opts, &mut sampler)?;
    let states = &sampler.path.states;
    let n = states.len() as f64;
    let mut rows = Vec::new();
    for side in [Side::Left, Side::Right] {
        let hits = match side {
            Side::Left => &summary.piston_hits_left,
            Side::Right => &summary.piston_hits_right,
        };
        for (j, &count) in hits.iter().enumerate() {
            let predicted = states
                .iter()
                .map(|h| {
                    let width = if side == Side::Left { h.x } else { 1.0 - h.x };
                    h.values(side)[j] / (2.0 * width)
                })
                .sum::<f64>()
                / n;
            rows.push(RateRow {
                side,
                index: j,
                observed: count as f64 / duration,
                predicted,
            });
        }
    }
    Ok(rows)
}

//! Averaged (slow-time) dynamics: the hard, soft and N-piston vector fields,
//! their numerical solutions, and the quantities they conserve.
//!
//! Hard fields act on speeds, soft fields on energies. Flattened states use
//! the layout `[X, W, left.., right..]` of [`SlowState::to_vec`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompactSet, Side, SlowMode, SlowState, SystemConfig};
use crate::ode::{dopri5, Solution, SolverOptions};
use crate::softcore::SoftCore;

fn check_piston(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::PistonOutOfRange { x })
    }
}

fn check_counts(h: &SlowState, cfg: &SystemConfig) -> Result<()> {
    if h.left.len() != cfg.n1 || h.right.len() != cfg.n2 {
        return Err(Error::Shape(format!(
            "slow state has {}+{} particles, configuration {}+{}",
            h.left.len(),
            h.right.len(),
            cfg.n1,
            cfg.n2
        )));
    }
    Ok(())
}

/// Hard-core averaged field on speeds.
pub fn avg_field_hard(h: &SlowState, cfg: &SystemConfig) -> Result<Vec<f64>> {
    if h.mode != SlowMode::HardSpeeds {
        return Err(Error::Shape("hard averaged field needs speeds".into()));
    }
    check_counts(h, cfg)?;
    check_piston(h.x)?;
    let (x, w) = (h.x, h.w);
    let p1: f64 = cfg
        .masses_left
        .iter()
        .zip(&h.left)
        .map(|(m, s)| m * s * s)
        .sum::<f64>()
        / x;
    let p2: f64 = cfg
        .masses_right
        .iter()
        .zip(&h.right)
        .map(|(m, s)| m * s * s)
        .sum::<f64>()
        / (1.0 - x);
    let mut out = Vec::with_capacity(h.dim());
    out.push(w);
    out.push(p1 - p2);
    out.extend(h.left.iter().map(|s| -s * w / x));
    out.extend(h.right.iter().map(|s| s * w / (1.0 - x)));
    Ok(out)
}

/// Soft-core averaged field on energies. At `delta = 0` it is the hard field
/// written in energies.
pub fn avg_field_soft(h: &SlowState, cfg: &SystemConfig, core: &SoftCore) -> Result<Vec<f64>> {
    if h.mode != SlowMode::SoftEnergies {
        return Err(Error::Shape("soft averaged field needs energies".into()));
    }
    check_counts(h, cfg)?;
    check_piston(h.x)?;
    let force = |side: Side, e: f64, m: f64| -> Result<f64> {
        Ok((8.0 * m * e).sqrt() / core.period(side, h.x, e, cfg.delta, m)?)
    };
    let fl = h
        .left
        .iter()
        .zip(&cfg.masses_left)
        .map(|(&e, &m)| force(Side::Left, e, m))
        .collect::<Result<Vec<_>>>()?;
    let fr = h
        .right
        .iter()
        .zip(&cfg.masses_right)
        .map(|(&e, &m)| force(Side::Right, e, m))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(h.dim());
    out.push(h.w);
    out.push(fl.iter().sum::<f64>() - fr.iter().sum::<f64>());
    out.extend(fl.iter().map(|f| -h.w * f));
    out.extend(fr.iter().map(|f| h.w * f));
    Ok(out)
}

/// Solution of the averaged equation on `[0, horizon]` in slow time.
#[derive(Debug, Clone)]
pub struct AveragedTrajectory {
    pub mode: SlowMode,
    pub n1: usize,
    pub solution: Solution,
    /// First slow time at which the solution leaves the compact set.
    pub first_exit: Option<f64>,
    /// Reason the solve ended before the horizon, if it did.
    pub stopped_by: Option<String>,
}

impl AveragedTrajectory {
    pub fn eval(&self, tau: f64) -> SlowState {
        SlowState::from_slice(&self.solution.eval(tau), self.n1, self.mode)
    }

    pub fn grid(&self) -> &[f64] {
        &self.solution.t
    }

    pub fn states(&self) -> Vec<SlowState> {
        self.solution
            .y
            .iter()
            .map(|y| SlowState::from_slice(y, self.n1, self.mode))
            .collect()
    }

    pub fn tau_end(&self) -> f64 {
        self.solution.t_end()
    }
}

/// Which averaged field to integrate.
#[derive(Debug, Clone, Copy)]
pub enum AveragedModel<'a> {
    Hard,
    Soft(&'a SoftCore),
}

impl<'a> AveragedModel<'a> {
    fn field(&self, h: &SlowState, cfg: &SystemConfig) -> Result<Vec<f64>> {
        match self {
            AveragedModel::Hard => avg_field_hard(h, cfg),
            AveragedModel::Soft(core) => avg_field_soft(h, cfg, core),
        }
    }

    fn mode(&self) -> SlowMode {
        match self {
            AveragedModel::Hard => SlowMode::HardSpeeds,
            AveragedModel::Soft(_) => SlowMode::SoftEnergies,
        }
    }
}

/// Integrate the averaged equation from `h0` to slow time `horizon`.
///
/// Integration stops early (without error) if the field becomes undefined,
/// e.g. an energy leaves the admissible band; the reason is kept in
/// `stopped_by`. If `set` is given, the first exit time is located on the
/// dense output.
pub fn solve_averaged(
    h0: &SlowState,
    horizon: f64,
    cfg: &SystemConfig,
    model: AveragedModel<'_>,
    set: Option<&CompactSet>,
    opts: &SolverOptions,
) -> Result<AveragedTrajectory> {
    let mode = model.mode();
    if h0.mode != mode {
        return Err(Error::Shape(format!(
            "initial slow state is {:?}, model needs {:?}",
            h0.mode, mode
        )));
    }
    if matches!(model, AveragedModel::Hard) && cfg.delta > 0.0 {
        return Err(Error::NeedsHardCore { delta: cfg.delta });
    }
    check_counts(h0, cfg)?;
    let n1 = cfg.n1;
    let run = dopri5(
        |_, y, dy| {
            let h = SlowState::from_slice(y, n1, mode);
            let f = model.field(&h, cfg)?;
            dy.copy_from_slice(&f);
            Ok(())
        },
        0.0,
        &h0.to_vec(),
        horizon,
        opts,
    )?;
    let mut traj = AveragedTrajectory {
        mode,
        n1,
        solution: run.solution,
        first_exit: None,
        stopped_by: run.stopped_by.map(|e| e.to_string()),
    };
    if let Some(set) = set {
        traj.first_exit = first_exit(&traj, set);
    }
    Ok(traj)
}

fn first_exit(traj: &AveragedTrajectory, set: &CompactSet) -> Option<f64> {
    let inside = |tau: f64| set.contains(&traj.eval(tau));
    let t = &traj.solution.t;
    if !inside(t[0]) {
        return Some(t[0]);
    }
    for k in 1..t.len() {
        // check a few interior points per step so short excursions are seen
        let (a, b) = (t[k - 1], t[k]);
        let mut prev = a;
        for i in 1..=8 {
            let tau = a + (b - a) * i as f64 / 8.0;
            if !inside(tau) {
                let (mut lo, mut hi) = (prev, tau);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if inside(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(hi);
            }
            prev = tau;
        }
    }
    None
}

/// Period of the averaged oscillation, from zeros of `W`.
///
/// The first three zeros `z0 < z1 < z2` (with `z0 = 0` when `W(0) = 0`) are
/// located by bisection on the dense output; the period is the sum of the
/// two half-periods `z1 - z0` and `z2 - z1`.
pub fn averaged_period(
    h0: &SlowState,
    cfg: &SystemConfig,
    model: AveragedModel<'_>,
    opts: &SolverOptions,
) -> Result<f64> {
    let mut horizon = 1.0;
    while horizon < 1e6 {
        let traj = solve_averaged(h0, horizon, cfg, model, None, opts)?;
        if let Some(reason) = &traj.stopped_by {
            return Err(Error::Period(format!(
                "averaged solution stopped: {reason}"
            )));
        }
        let zeros = w_zeros(&traj, if h0.w == 0.0 { 2 } else { 3 });
        let mut z: Vec<f64> = Vec::new();
        if h0.w == 0.0 {
            z.push(0.0);
        }
        z.extend(zeros);
        if z.len() >= 3 {
            return Ok((z[1] - z[0]) + (z[2] - z[1]));
        }
        horizon *= 4.0;
    }
    Err(Error::Period("no oscillation of W found".into()))
}

fn w_zeros(traj: &AveragedTrajectory, want: usize) -> Vec<f64> {
    let sol = &traj.solution;
    let w_at = |tau: f64| sol.eval(tau)[1];
    let mut out = Vec::new();
    for k in 1..sol.t.len() {
        let (a, b) = (sol.t[k - 1], sol.t[k]);
        let (wa, wb) = (sol.y[k - 1][1], sol.y[k][1]);
        if a == 0.0 && wa == 0.0 {
            continue;
        }
        if wa == 0.0 || wa.signum() == wb.signum() {
            continue;
        }
        let (mut lo, mut hi) = (a, b);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if w_at(mid).signum() == wa.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
        if out.len() == want {
            break;
        }
    }
    out
}

/// `W^2 / 2 + E1(0) X(0)^2 / X^2 + E2(0) (1 - X(0))^2 / (1 - X)^2`.
pub fn effective_hamiltonian(h: &SlowState, h0: &SlowState, cfg: &SystemConfig) -> f64 {
    let (e1, e2) = h0.side_energies(cfg);
    let (x0, x) = (h0.x, h.x);
    0.5 * h.w * h.w
        + e1 * x0 * x0 / (x * x)
        + e2 * (1.0 - x0) * (1.0 - x0) / ((1.0 - x) * (1.0 - x))
}

/// Total averaged energy `W^2 / 2 + sum E`, conserved by every averaged field.
pub fn averaged_energy(h: &SlowState, cfg: &SystemConfig) -> f64 {
    let (e1, e2) = h.side_energies(cfg);
    0.5 * h.w * h.w + e1 + e2
}

/// Phase integrals of every gas particle, left then right.
pub fn phase_integrals(h: &SlowState, cfg: &SystemConfig, core: &SoftCore) -> Result<Vec<f64>> {
    let e = h.to_energies(cfg);
    let mut out = Vec::with_capacity(cfg.n1 + cfg.n2);
    for side in [Side::Left, Side::Right] {
        for (&energy, &m) in e.values(side).iter().zip(cfg.masses(side)) {
            out.push(core.adiabatic_invariant(side, h.x, energy, cfg.delta, m)?);
        }
    }
    Ok(out)
}

/// Averaged state of `N - 1` pistons separating `N` chambers.
///
/// Chamber `i` (0-based) lies between pistons `i - 1` and `i`, with the
/// walls at 0 and 1 closing the outermost chambers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NPistonState {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub mhat: Vec<f64>,
    /// Gas masses per chamber.
    pub masses: Vec<Vec<f64>>,
    /// Gas speeds per chamber.
    pub speeds: Vec<Vec<f64>>,
}

impl NPistonState {
    pub fn pistons(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if self.w.len() != n
            || self.mhat.len() != n
            || self.masses.len() != n + 1
            || self.speeds.len() != n + 1
        {
            return Err(Error::Shape(
                "N-piston vectors have inconsistent lengths".into(),
            ));
        }
        if self
            .masses
            .iter()
            .zip(&self.speeds)
            .any(|(m, s)| m.len() != s.len())
        {
            return Err(Error::Shape(
                "chamber masses and speeds differ in length".into(),
            ));
        }
        if let Some(m) = self.mhat.iter().find(|m| !(**m > 0.0)) {
            return Err(Error::config(
                "mhat",
                format!("piston mass {m} must be positive"),
            ));
        }
        for i in 0..=n {
            let width = self.width(i);
            if !(width > 0.0) {
                return Err(Error::Chamber { chamber: i, width });
            }
        }
        Ok(())
    }

    fn wall(&self, i: isize) -> f64 {
        if i < 0 {
            0.0
        } else if i as usize >= self.x.len() {
            1.0
        } else {
            self.x[i as usize]
        }
    }

    pub fn width(&self, chamber: usize) -> f64 {
        self.wall(chamber as isize) - self.wall(chamber as isize - 1)
    }

    fn w_at(&self, i: isize) -> f64 {
        if i < 0 || i as usize >= self.w.len() {
            0.0
        } else {
            self.w[i as usize]
        }
    }

    pub fn chamber_energy(&self, chamber: usize) -> f64 {
        self.masses[chamber]
            .iter()
            .zip(&self.speeds[chamber])
            .map(|(m, s)| 0.5 * m * s * s)
            .sum()
    }

    /// Flattened `[X.., W.., speeds chamber by chamber]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = self.x.clone();
        y.extend_from_slice(&self.w);
        for s in &self.speeds {
            y.extend_from_slice(s);
        }
        y
    }

    /// Inverse of [`to_vec`](Self::to_vec), keeping masses from `self`.
    pub fn with_values(&self, y: &[f64]) -> Self {
        let n = self.x.len();
        let mut out = self.clone();
        out.x.copy_from_slice(&y[..n]);
        out.w.copy_from_slice(&y[n..2 * n]);
        let mut k = 2 * n;
        for s in out.speeds.iter_mut() {
            let len = s.len();
            s.copy_from_slice(&y[k..k + len]);
            k += len;
        }
        out
    }
}

/// Averaged N-piston field, returned in the [`NPistonState::to_vec`] layout.
pub fn avg_field_npiston(state: &NPistonState) -> Result<Vec<f64>> {
    state.validate()?;
    let n = state.pistons();
    let push: Vec<f64> = (0..=n)
        .map(|c| {
            state.masses[c]
                .iter()
                .zip(&state.speeds[c])
                .map(|(m, s)| m * s * s)
                .sum::<f64>()
                / state.width(c)
        })
        .collect();
    let mut out = state.w.clone();
    out.extend((0..n).map(|i| (push[i] - push[i + 1]) / state.mhat[i]));
    for c in 0..=n {
        let rate = (state.w_at(c as isize) - state.w_at(c as isize - 1)) / state.width(c);
        out.extend(state.speeds[c].iter().map(|s| -s * rate));
    }
    Ok(out)
}

/// `1/2 sum Mhat_i W_i^2 + sum E_i(0) width_i(0)^2 / width_i^2`.
pub fn npiston_hamiltonian(state: &NPistonState, initial: &NPistonState) -> f64 {
    let kinetic: f64 = state
        .mhat
        .iter()
        .zip(&state.w)
        .map(|(m, w)| 0.5 * m * w * w)
        .sum();
    let potential: f64 = (0..=state.pistons())
        .map(|c| {
            let (w0, w) = (initial.width(c), state.width(c));
            initial.chamber_energy(c) * w0 * w0 / (w * w)
        })
        .sum();
    kinetic + potential
}

/// Solution of the N-piston averaged equation.
#[derive(Debug, Clone)]
pub struct NPistonTrajectory {
    pub template: NPistonState,
    pub solution: Solution,
    pub stopped_by: Option<String>,
}

impl NPistonTrajectory {
    pub fn eval(&self, tau: f64) -> NPistonState {
        self.template.with_values(&self.solution.eval(tau))
    }

    pub fn states(&self) -> Vec<NPistonState> {
        self.solution
            .y
            .iter()
            .map(|y| self.template.with_values(y))
            .collect()
    }
}

pub fn solve_npiston(
    initial: &NPistonState,
    horizon: f64,
    opts: &SolverOptions,
) -> Result<NPistonTrajectory> {
    initial.validate()?;
    let run = dopri5(
        |_, y, dy| {
            dy.copy_from_slice(&avg_field_npiston(&initial.with_values(y))?);
            Ok(())
        },
        0.0,
        &initial.to_vec(),
        horizon,
        opts,
    )?;
    Ok(NPistonTrajectory {
        template: initial.clone(),
        solution: run.solution,
        stopped_by: run.stopped_by.map(|e| e.to_string()),
    })
}

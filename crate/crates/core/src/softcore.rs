//! Soft-core piston (`delta > 0`): forces from `kappa_delta`, a fixed-step
//! position-Verlet integrator, and the single-particle orbit quantities
//! (periods, the integral `F(E)`, angle variables) computed by quadrature.
//!
//! Chamber-local coordinates are used for the orbit formulas: `y` is the
//! distance from the outer wall and `L` the chamber width (`X` on the left,
//! `1 - X` on the right), so both sides share one set of formulas.

use crate::error::{Error, Result};
use crate::model::{FullState, Side, SlowMode, SlowState, SystemConfig};
use crate::profile::Profile;
use crate::quadrature::{gauss_kronrod, tanh_sinh_dist};

const QUAD_REL: f64 = 1e-13;
const QUAD_ABS: f64 = 1e-15;

/// Orbit quadratures for one profile. `margin` is the band half-gap: energies
/// must lie in `(margin, barrier - margin)` and the singular integrals are
/// split at `margin / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCore {
    pub profile: Profile,
    pub margin: f64,
}

fn chamber_width(side: Side, piston: f64) -> f64 {
    match side {
        Side::Left => piston,
        Side::Right => 1.0 - piston,
    }
}

impl SoftCore {
    pub fn new(profile: Profile, margin: f64) -> Self {
        SoftCore { profile, margin }
    }

    fn check_band(&self, e: f64) -> Result<()> {
        let (lo, hi) = (self.margin, self.profile.barrier() - self.margin);
        if e > lo && e < hi {
            Ok(())
        } else {
            Err(Error::EnergyOutOfBand { energy: e, lo, hi })
        }
    }

    fn split(&self) -> f64 {
        0.5 * self.margin
    }

    /// `int_0^split -(kappa^{-1})'(u) (E - u)^p du`.
    fn lower_piece(&self, e: f64, p: f64) -> f64 {
        let split = self.split();
        match &self.profile {
            // u = w^3 turns -(kappa^{-1})'(u) du into dw
            Profile::Cubic => {
                gauss_kronrod(
                    |w| (e - w * w * w).powf(p),
                    0.0,
                    split.cbrt(),
                    QUAD_ABS,
                    QUAD_REL,
                )
                .value
            }
            profile => {
                tanh_sinh_dist(
                    |u, du, _| -profile.kappa_inv_prime(du.min(u)) * (e - u).powf(p),
                    0.0,
                    split,
                    QUAD_REL,
                )
                .value
            }
        }
    }

    /// `int_split^E -(kappa^{-1})'(u) (E - u)^p du` via `u = E - r^2`.
    fn upper_piece(&self, e: f64, p: f64) -> f64 {
        let top = (e - self.split()).sqrt();
        let profile = &self.profile;
        gauss_kronrod(
            |r| -2.0 * profile.kappa_inv_prime(e - r * r) * r.powf(2.0 * p + 1.0),
            0.0,
            top,
            QUAD_ABS,
            QUAD_REL,
        )
        .value
    }

    /// `F(E) = int_{kappa^{-1}(E)}^1 ds / sqrt(E - kappa(s))`.
    pub fn f_integral(&self, e: f64) -> Result<f64> {
        self.check_band(e)?;
        Ok(self.lower_piece(e, -0.5) + self.upper_piece(e, -0.5))
    }

    /// `F'(E)`, differentiating each piece under the integral sign.
    pub fn f_prime(&self, e: f64) -> Result<f64> {
        self.check_band(e)?;
        let split = self.split();
        let f1 = -0.5 * self.lower_piece(e, -1.5);
        let profile = &self.profile;
        let top = (e - split).sqrt();
        let boundary = -profile.kappa_inv_prime(split) / top;
        let interior = gauss_kronrod(
            |r| -2.0 * profile.kappa_inv_second(e - r * r),
            0.0,
            top,
            QUAD_ABS,
            QUAD_REL,
        )
        .value;
        Ok(f1 + boundary + interior)
    }

    /// `G(E) = int_{kappa^{-1}(E)}^1 sqrt(E - kappa(s)) ds`; `G' = F / 2`.
    pub fn g_integral(&self, e: f64) -> Result<f64> {
        self.check_band(e)?;
        Ok(self.lower_piece(e, 0.5) + self.upper_piece(e, 0.5))
    }

    /// Period of a gas particle of mass `m` and energy `e` in its chamber.
    ///
    /// `T = sqrt(m/2) [ (2L - 4 delta) / sqrt(E) + 4 delta F(E) ]`, which is
    /// `2 L sqrt(m / 2E)` at `delta = 0`.
    pub fn period(&self, side: Side, piston: f64, e: f64, delta: f64, m: f64) -> Result<f64> {
        let l = chamber_width(side, piston);
        let c = (0.5 * m).sqrt();
        if delta == 0.0 {
            return Ok(c * 2.0 * l / e.sqrt());
        }
        self.check_band(e)?;
        Ok(c * ((2.0 * l - 4.0 * delta) / e.sqrt() + 4.0 * delta * self.f_integral(e)?))
    }

    /// `(dT/dX, dT/dE)`.
    pub fn period_partials(
        &self,
        side: Side,
        piston: f64,
        e: f64,
        delta: f64,
        m: f64,
    ) -> Result<(f64, f64)> {
        if delta > 0.0 {
            self.check_band(e)?;
        }
        let l = chamber_width(side, piston);
        let c = (0.5 * m).sqrt();
        let dl_dx = match side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        };
        let dt_dx = c * 2.0 * dl_dx / e.sqrt();
        let plateau = -(l - 2.0 * delta) / e.powf(1.5);
        let skin = if delta == 0.0 {
            0.0
        } else {
            4.0 * delta * self.f_prime(e)?
        };
        Ok((dt_dx, c * (plateau + skin)))
    }

    /// Half-width in angle of the window where the piston force can act:
    /// `sqrt(m/2) delta F(E) / T`.
    pub fn delta_band_width(
        &self,
        side: Side,
        piston: f64,
        e: f64,
        delta: f64,
        m: f64,
    ) -> Result<f64> {
        if delta == 0.0 {
            return Ok(0.0);
        }
        let t = self.period(side, piston, e, delta, m)?;
        Ok((0.5 * m).sqrt() * delta * self.f_integral(e)? / t)
    }

    /// Phase-plane area `int int_{m v^2/2 + U <= E} dx dv`.
    pub fn adiabatic_invariant(
        &self,
        side: Side,
        piston: f64,
        e: f64,
        delta: f64,
        m: f64,
    ) -> Result<f64> {
        let l = chamber_width(side, piston);
        let c = (2.0 / m).sqrt();
        if delta == 0.0 {
            return Ok(2.0 * c * l * e.sqrt());
        }
        self.check_band(e)?;
        Ok(2.0 * c * ((l - 2.0 * delta) * e.sqrt() + 2.0 * delta * self.g_integral(e)?))
    }

    /// Time (in units where the `sqrt(m/2)` factor is applied) from the
    /// turning point to depth `d` inside one skin, `a <= d <= delta`.
    fn skin_time(&self, d: f64, e: f64, delta: f64, m: f64) -> Result<f64> {
        let profile = &self.profile;
        let c = (0.5 * m).sqrt();
        let k = profile.kappa_delta(d, delta);
        if k >= 0.5 * e {
            // near the turning point: integrate over velocity, whose
            // integrand (kappa^{-1})'(E - m w^2 / 2) stays regular here
            let speed = (2.0 * (e - k).max(0.0) / m).sqrt();
            let t = gauss_kronrod(
                |w| -m * delta * profile.kappa_inv_prime(e - 0.5 * m * w * w),
                0.0,
                speed,
                QUAD_ABS,
                QUAD_REL,
            )
            .value;
            Ok(t)
        } else {
            // near the skin edge: subtract the remaining position integral
            let rest = gauss_kronrod(
                |s| 1.0 / (e - profile.kappa_delta(s, delta)).sqrt(),
                d,
                delta,
                QUAD_ABS,
                QUAD_REL,
            )
            .value;
            Ok(c * (delta * self.f_integral(e)? - rest))
        }
    }

    /// Time from the wall-side turning point to wall distance `y`, moving
    /// toward the piston, in a chamber of width `l`.
    fn time_from_turning(
        &self,
        y: f64,
        l: f64,
        e: f64,
        delta: f64,
        m: f64,
        period: f64,
    ) -> Result<f64> {
        let c = (0.5 * m).sqrt();
        if y < delta {
            self.skin_time(y, e, delta, m)
        } else if y <= l - delta {
            Ok(c * (delta * self.f_integral(e)? + (y - delta) / e.sqrt()))
        } else {
            Ok(0.5 * period - self.skin_time(l - y, e, delta, m)?)
        }
    }

    /// Soft angle variable of a single gas particle: elapsed fraction of the
    /// period since the wall-side turning point (`0` there, `1/2` at the
    /// piston-side turning point).
    pub fn angle(
        &self,
        side: Side,
        x: f64,
        v: f64,
        piston: f64,
        delta: f64,
        m: f64,
    ) -> Result<f64> {
        if delta <= 0.0 {
            return Err(Error::NeedsSoftCore { delta });
        }
        let l = chamber_width(side, piston);
        let (y, toward) = match side {
            Side::Left => (x, v),
            Side::Right => (1.0 - x, -v),
        };
        let e = 0.5 * m * v * v
            + self.profile.kappa_delta(y, delta)
            + self.profile.kappa_delta(l - y, delta);
        let period = self.period(side, piston, e, delta, m)?;
        let tau = self.time_from_turning(y, l, e, delta, m, period)? / period;
        let phi = if toward > 0.0 {
            tau
        } else if toward < 0.0 {
            1.0 - tau
        } else if y < 0.5 * l {
            0.0
        } else {
            0.5
        };
        Ok(if phi >= 1.0 { phi - 1.0 } else { phi.max(0.0) })
    }

    /// Angle variables of every gas particle in a soft-core state.
    pub fn angle_variables(
        &self,
        state: &FullState,
        cfg: &SystemConfig,
    ) -> Result<crate::hardcore::AngleState> {
        state.check_shape(cfg)?;
        let mut out = crate::hardcore::AngleState {
            phi_left: Vec::new(),
            phi_right: Vec::new(),
        };
        for side in [Side::Left, Side::Right] {
            let masses = cfg.masses(side);
            for j in 0..cfg.count(side) {
                let phi = self.angle(
                    side,
                    state.positions(side)[j],
                    state.velocities(side)[j],
                    state.x_piston,
                    cfg.delta,
                    masses[j],
                )?;
                match side {
                    Side::Left => out.phi_left.push(phi),
                    Side::Right => out.phi_right.push(phi),
                }
            }
        }
        Ok(out)
    }

    /// Position and velocity on the energy-`e` orbit with angle `phi`.
    pub fn point_at_angle(
        &self,
        side: Side,
        phi: f64,
        piston: f64,
        e: f64,
        delta: f64,
        m: f64,
    ) -> Result<(f64, f64)> {
        if delta <= 0.0 {
            return Err(Error::NeedsSoftCore { delta });
        }
        let l = chamber_width(side, piston);
        let period = self.period(side, piston, e, delta, m)?;
        let phi = phi.rem_euclid(1.0);
        let (target, toward) = if phi < 0.5 {
            (phi * period, 1.0)
        } else {
            ((1.0 - phi) * period, -1.0)
        };
        let a = self.profile.turning_point(e, delta);
        let (mut lo, mut hi) = (a, l - a);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.time_from_turning(mid, l, e, delta, m, period)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let y = 0.5 * (lo + hi);
        let u = self.profile.kappa_delta(y, delta) + self.profile.kappa_delta(l - y, delta);
        let speed = toward * (2.0 * (e - u).max(0.0) / m).sqrt();
        Ok(match side {
            Side::Left => (y, speed),
            Side::Right => (1.0 - y, -speed),
        })
    }

    /// Full state with slow variables `h` (soft mode) and the given angles.
    pub fn state_from_angles(
        &self,
        h: &SlowState,
        angles: &crate::hardcore::AngleState,
        cfg: &SystemConfig,
    ) -> Result<FullState> {
        if h.mode != SlowMode::SoftEnergies {
            return Err(Error::Shape("soft-core states need energies".into()));
        }
        let mut s = FullState {
            t: 0.0,
            x_piston: h.x,
            v_piston: cfg.epsilon * h.w,
            x_left: Vec::new(),
            v_left: Vec::new(),
            x_right: Vec::new(),
            v_right: Vec::new(),
        };
        for side in [Side::Left, Side::Right] {
            let phis = match side {
                Side::Left => &angles.phi_left,
                Side::Right => &angles.phi_right,
            };
            for ((&e, &phi), &m) in h.values(side).iter().zip(phis).zip(cfg.masses(side)) {
                let (x, v) = self.point_at_angle(side, phi, h.x, e, cfg.delta, m)?;
                match side {
                    Side::Left => {
                        s.x_left.push(x);
                        s.v_left.push(v);
                    }
                    Side::Right => {
                        s.x_right.push(x);
                        s.v_right.push(v);
                    }
                }
            }
        }
        s.check_shape(cfg)?;
        Ok(s)
    }
}

/// Time derivative of a full soft-core state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub dx_piston: f64,
    pub dv_piston: f64,
    pub dx_left: Vec<f64>,
    pub dv_left: Vec<f64>,
    pub dx_right: Vec<f64>,
    pub dv_right: Vec<f64>,
}

/// Forces `(on piston, on left particles, on right particles)`.
fn forces(state: &FullState, delta: f64, profile: &Profile, fl: &mut [f64], fr: &mut [f64]) -> f64 {
    let xp = state.x_piston;
    let mut fp = 0.0;
    for (f, &x) in fl.iter_mut().zip(&state.x_left) {
        let k_piston = profile.kappa_delta_prime(xp - x, delta);
        *f = -profile.kappa_delta_prime(x, delta) + k_piston;
        fp -= k_piston;
    }
    for (f, &x) in fr.iter_mut().zip(&state.x_right) {
        let k_piston = profile.kappa_delta_prime(x - xp, delta);
        *f = -k_piston + profile.kappa_delta_prime(1.0 - x, delta);
        fp += k_piston;
    }
    fp
}

/// Right-hand side of the soft-core equations of motion.
pub fn rhs(state: &FullState, cfg: &SystemConfig, profile: &Profile) -> Result<StateRate> {
    if cfg.delta <= 0.0 {
        return Err(Error::NeedsSoftCore { delta: cfg.delta });
    }
    state.check_shape(cfg)?;
    let mut fl = vec![0.0; cfg.n1];
    let mut fr = vec![0.0; cfg.n2];
    let fp = forces(state, cfg.delta, profile, &mut fl, &mut fr);
    let eps2 = cfg.epsilon * cfg.epsilon;
    Ok(StateRate {
        dx_piston: state.v_piston,
        dv_piston: eps2 * fp,
        dx_left: state.v_left.clone(),
        dv_left: fl
            .iter()
            .zip(&cfg.masses_left)
            .map(|(f, m)| f / m)
            .collect(),
        dx_right: state.v_right.clone(),
        dv_right: fr
            .iter()
            .zip(&cfg.masses_right)
            .map(|(f, m)| f / m)
            .collect(),
    })
}

/// Particle energies `m v^2 / 2 + U`.
pub fn particle_energies(
    state: &FullState,
    cfg: &SystemConfig,
    profile: &Profile,
) -> (Vec<f64>, Vec<f64>) {
    let side_e = |side: Side| -> Vec<f64> {
        cfg.masses(side)
            .iter()
            .zip(state.positions(side).iter().zip(state.velocities(side)))
            .map(|(m, (&x, &v))| {
                0.5 * m * v * v + profile.potential_u(side, x, state.x_piston, cfg.delta)
            })
            .collect()
    };
    (side_e(Side::Left), side_e(Side::Right))
}

/// Conserved energy `W^2 / 2 + sum E_{i,j}`.
pub fn hamiltonian(state: &FullState, cfg: &SystemConfig, profile: &Profile) -> f64 {
    let (l, r) = particle_energies(state, cfg, profile);
    let piston = if cfg.epsilon > 0.0 {
        let w = state.v_piston / cfg.epsilon;
        0.5 * w * w
    } else {
        0.0
    };
    piston + l.iter().sum::<f64>() + r.iter().sum::<f64>()
}

/// Upper bound on any gas speed: all energy in the lightest particle.
pub fn speed_bound(state: &FullState, cfg: &SystemConfig, profile: &Profile) -> f64 {
    let h = hamiltonian(state, cfg, profile);
    let m_min = cfg
        .masses_left
        .iter()
        .chain(&cfg.masses_right)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    (2.0 * h / m_min).sqrt().max(state.v_piston.abs())
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Fixed step; `None` uses `delta / (steps_per_skin * v_max)`.
    pub dt: Option<f64>,
    pub steps_per_skin: f64,
    /// Micro-time spacing of samples; `None` samples only the endpoints.
    pub sample_dt: Option<f64>,
    /// Relative Hamiltonian drift that aborts the run, checked at samples.
    pub drift_tol: Option<f64>,
}

/// Steps across one potential skin at the bound speed. Energy error of the
/// scheme scales like `0.2 / K^2`; this keeps relative drift under `1e-8`.
pub const DEFAULT_STEPS_PER_SKIN: f64 = 8000.0;

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt: None,
            steps_per_skin: DEFAULT_STEPS_PER_SKIN,
            sample_dt: None,
            drift_tol: Some(1e-6),
        }
    }
}

impl StepControl {
    pub fn for_epsilon(eps: f64) -> Self {
        StepControl {
            sample_dt: (eps > 0.0).then(|| 1.0 / (512.0 * eps)),
            ..Default::default()
        }
    }

    pub fn step_for(&self, state: &FullState, cfg: &SystemConfig, profile: &Profile) -> f64 {
        self.dt
            .unwrap_or_else(|| cfg.delta / (self.steps_per_skin * speed_bound(state, cfg, profile)))
    }
}

#[derive(Debug, Clone)]
pub struct IntegrateSummary {
    pub state: FullState,
    pub steps: u64,
    pub dt: f64,
    pub max_drift: f64,
}

/// Position-Verlet (drift-kick-drift) integration to micro-time `until`.
///
/// The interval is cut at the sample grid and each piece is split into
/// equal steps no longer than the nominal step, so samples land exactly on
/// grid times. `sample` is called at the start, at every grid time and at
/// the end.
pub fn integrate<F: FnMut(&FullState)>(
    state: FullState,
    until: f64,
    cfg: &SystemConfig,
    profile: &Profile,
    control: &StepControl,
    mut sample: F,
) -> Result<IntegrateSummary> {
    if cfg.delta <= 0.0 {
        return Err(Error::NeedsSoftCore { delta: cfg.delta });
    }
    state.check_shape(cfg)?;
    let dt_nominal = control.step_for(&state, cfg, profile);
    let h0 = hamiltonian(&state, cfg, profile);
    let mut s = state;
    let eps2 = cfg.epsilon * cfg.epsilon;
    let inv_ml: Vec<f64> = cfg.masses_left.iter().map(|m| 1.0 / m).collect();
    let inv_mr: Vec<f64> = cfg.masses_right.iter().map(|m| 1.0 / m).collect();
    let mut fl = vec![0.0; cfg.n1];
    let mut fr = vec![0.0; cfg.n2];
    let mut steps = 0u64;
    let mut max_drift: f64 = 0.0;

    let t_start = s.t;
    let mut boundaries = Vec::new();
    if let Some(ds) = control.sample_dt {
        let mut k = 1u64;
        loop {
            let tb = t_start + k as f64 * ds;
            if tb >= until {
                break;
            }
            boundaries.push(tb);
            k += 1;
        }
    }
    boundaries.push(until);

    sample(&s);
    for &tb in &boundaries {
        let span = tb - s.t;
        if span <= 0.0 {
            continue;
        }
        let n = (span / dt_nominal).ceil().max(1.0) as u64;
        let h = span / n as f64;
        let half = 0.5 * h;
        for _ in 0..n {
            s.x_piston += half * s.v_piston;
            for (x, v) in s.x_left.iter_mut().zip(&s.v_left) {
                *x += half * v;
            }
            for (x, v) in s.x_right.iter_mut().zip(&s.v_right) {
                *x += half * v;
            }
            let fp = forces(&s, cfg.delta, profile, &mut fl, &mut fr);
            s.v_piston += h * eps2 * fp;
            for ((v, f), im) in s.v_left.iter_mut().zip(&fl).zip(&inv_ml) {
                *v += h * f * im;
            }
            for ((v, f), im) in s.v_right.iter_mut().zip(&fr).zip(&inv_mr) {
                *v += h * f * im;
            }
            s.x_piston += half * s.v_piston;
            for (x, v) in s.x_left.iter_mut().zip(&s.v_left) {
                *x += half * v;
            }
            for (x, v) in s.x_right.iter_mut().zip(&s.v_right) {
                *x += half * v;
            }
            s.t += h;
            steps += 1;
            if let Some(j) = s.x_left.iter().position(|&x| !(x > 0.0 && x < s.x_piston)) {
                return Err(Error::BarrierBreach {
                    side: Side::Left,
                    index: j,
                    t: s.t,
                });
            }
            if let Some(j) = s.x_right.iter().position(|&x| !(x > s.x_piston && x < 1.0)) {
                return Err(Error::BarrierBreach {
                    side: Side::Right,
                    index: j,
                    t: s.t,
                });
            }
        }
        s.t = tb;
        let drift = ((hamiltonian(&s, cfg, profile) - h0) / h0).abs();
        max_drift = max_drift.max(drift);
        if let Some(tol) = control.drift_tol {
            if drift > tol {
                return Err(Error::EnergyDrift { drift, tol, t: s.t });
            }
        }
        sample(&s);
    }
    Ok(IntegrateSummary {
        state: s,
        steps,
        dt: dt_nominal,
        max_drift,
    })
}

/// Slow variables of a soft-core state (energies mode).
pub fn soft_slow_state(state: &FullState, cfg: &SystemConfig, profile: &Profile) -> SlowState {
    let (left, right) = particle_energies(state, cfg, profile);
    SlowState {
        x: state.x_piston,
        w: if cfg.epsilon > 0.0 {
            state.v_piston / cfg.epsilon
        } else {
            0.0
        },
        left,
        right,
        mode: SlowMode::SoftEnergies,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    fn core() -> SoftCore {
        SoftCore::new(Profile::Cubic, 0.05)
    }

    /// `F(E) = E^{-1/6} B(1/3, 1/2) / 3` for the cubic profile.
    fn f_closed(e: f64) -> f64 {
        beta(1.0 / 3.0, 0.5) * e.powf(-1.0 / 6.0) / 3.0
    }

    #[test]
    fn f_matches_beta_closed_form() {
        let c = core();
        for &e in &[0.06, 0.2, 0.5, 0.8, 0.94] {
            let f = c.f_integral(e).unwrap();
            assert!(
                (f - f_closed(e)).abs() < 1e-11 * f_closed(e),
                "E = {e}: {f} vs {}",
                f_closed(e)
            );
        }
    }

    #[test]
    fn f_prime_matches_closed_form_and_differences() {
        let c = core();
        for &e in &[0.1f64, 0.5, 0.9] {
            let exact = -beta(1.0 / 3.0, 0.5) * e.powf(-7.0 / 6.0) / 18.0;
            let fp = c.f_prime(e).unwrap();
            assert!(
                (fp - exact).abs() < 1e-9 * exact.abs(),
                "E = {e}: {fp} vs {exact}"
            );
        }
    }

    #[test]
    fn f_is_decreasing_and_band_enforced() {
        let c = core();
        let mut prev = f64::INFINITY;
        for i in 1..90 {
            let e = 0.05 + i as f64 * 0.01;
            if e >= 0.95 {
                break;
            }
            let f = c.f_integral(e).unwrap();
            assert!(f.is_finite() && f < prev);
            prev = f;
        }
        assert!(matches!(
            c.f_integral(0.01),
            Err(Error::EnergyOutOfBand { .. })
        ));
        assert!(matches!(
            c.f_integral(0.99),
            Err(Error::EnergyOutOfBand { .. })
        ));
    }

    #[test]
    fn g_derivative_is_half_f() {
        let c = core();
        let h = 1e-5;
        for &e in &[0.2, 0.6] {
            let fd = (c.g_integral(e + h).unwrap() - c.g_integral(e - h).unwrap()) / (2.0 * h);
            assert!((fd - 0.5 * c.f_integral(e).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn hard_limit_period() {
        let c = core();
        assert_eq!(c.period(Side::Left, 0.5, 1.0, 0.0, 2.0).unwrap(), 1.0);
        let t = c.period(Side::Left, 0.5, 0.5, 0.0, 2.0).unwrap();
        assert!((t - 1.0 / 0.5f64.sqrt()).abs() < 1e-15);
        // general mass: T = 2X / s
        let (m, e, x) = (3.0f64, 0.4f64, 0.3);
        let s = (2.0 * e / m).sqrt();
        assert!((c.period(Side::Left, x, e, 0.0, m).unwrap() - 2.0 * x / s).abs() < 1e-14);
        assert!((c.period(Side::Right, x, e, 0.0, m).unwrap() - 2.0 * (1.0 - x) / s).abs() < 1e-14);
    }

    #[test]
    fn period_is_linear_in_delta() {
        let c = core();
        let t0 = c.period(Side::Left, 0.5, 0.5, 0.0, 2.0).unwrap();
        let slopes: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&d| (c.period(Side::Left, 0.5, 0.5, d, 2.0).unwrap() - t0) / d)
            .collect();
        for s in &slopes {
            assert!((s / slopes[0] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn period_matches_direct_quadrature() {
        // T = 2 int_a^{X-a} sqrt(m / 2 / (E - U)) ds, evaluated with tanh-sinh
        let c = core();
        let (x, e, d, m) = (0.45, 0.37, 0.08, 1.7);
        let p = &c.profile;
        let a = p.turning_point(e, d);
        let direct = 2.0
            * tanh_sinh_dist(
                |s, _, _| {
                    let gap = e - p.potential_u(Side::Left, s, x, d);
                    if gap > 0.0 {
                        (0.5 * m / gap).sqrt()
                    } else {
                        0.0
                    }
                },
                a,
                x - a,
                1e-12,
            )
            .value;
        let t = c.period(Side::Left, x, e, d, m).unwrap();
        assert!((t - direct).abs() < 1e-7 * t, "{t} vs {direct}");
    }

    #[test]
    fn period_partials_against_differences() {
        let c = core();
        let (x, e, d, m) = (0.4, 0.5, 0.05, 1.3);
        for side in [Side::Left, Side::Right] {
            let (px, pe) = c.period_partials(side, x, e, d, m).unwrap();
            let h = 1e-5;
            let fe = (c.period(side, x, e + h, d, m).unwrap()
                - c.period(side, x, e - h, d, m).unwrap())
                / (2.0 * h);
            let fx = (c.period(side, x + h, e, d, m).unwrap()
                - c.period(side, x - h, e, d, m).unwrap())
                / (2.0 * h);
            assert!((pe - fe).abs() < 1e-6);
            assert!((px - fx).abs() < 1e-6);
        }
        let (px, pe) = c.period_partials(Side::Left, 0.3, 0.64, 0.0, 2.0).unwrap();
        assert_eq!(px, 2.0 / 0.64f64.sqrt());
        assert!((pe + 0.3 / 0.64f64.powf(1.5)).abs() < 1e-15);
        let (px2, _) = c.period_partials(Side::Left, 0.6, 0.64, 0.03, 2.0).unwrap();
        let (px1, _) = c.period_partials(Side::Left, 0.3, 0.64, 0.03, 2.0).unwrap();
        assert_eq!(px1, px2);
    }

    #[test]
    fn adiabatic_invariant_limits() {
        let c = core();
        assert!(
            (c.adiabatic_invariant(Side::Left, 0.5, 0.9, 0.0, 2.0)
                .unwrap()
                - 0.9f64.sqrt())
            .abs()
                < 1e-15
        );
        // dI/dE = T / m
        let (x, e, d, m) = (0.5, 0.4, 0.05, 1.5);
        let h = 1e-5;
        let fd = (c.adiabatic_invariant(Side::Left, x, e + h, d, m).unwrap()
            - c.adiabatic_invariant(Side::Left, x, e - h, d, m).unwrap())
            / (2.0 * h);
        assert!((fd - c.period(Side::Left, x, e, d, m).unwrap() / m).abs() < 1e-8);
    }

    #[test]
    fn band_width_is_linear_and_small() {
        let c = core();
        let w1 = c.delta_band_width(Side::Left, 0.5, 0.5, 0.02, 2.0).unwrap();
        let w2 = c.delta_band_width(Side::Left, 0.5, 0.5, 0.01, 2.0).unwrap();
        assert!((w1 / w2 - 2.0).abs() < 0.05);
        assert!(w1 < 0.25);
    }

    #[test]
    fn angle_turning_points() {
        let c = core();
        let (xp, e, d, m) = (0.5, 0.5, 0.02, 2.0);
        let a = c.profile.turning_point(e, d);
        assert!(c.angle(Side::Left, a, 0.0, xp, d, m).unwrap().abs() < 1e-12);
        assert!((c.angle(Side::Left, xp - a, 0.0, xp, d, m).unwrap() - 0.5).abs() < 1e-12);
        // right side mirror: turning point near the wall is phi = 0
        assert!(c.angle(Side::Right, 1.0 - a, 0.0, xp, d, m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn angle_inverse_round_trip() {
        let c = SoftCore::new(Profile::Cubic, 0.2);
        let (xp, e, d, m) = (0.45, 0.5, 0.05, 1.0);
        for side in [Side::Left, Side::Right] {
            for i in 0..40 {
                let phi = i as f64 / 40.0 + 0.003;
                let (x, v) = c.point_at_angle(side, phi, xp, e, d, m).unwrap();
                let energy = 0.5 * m * v * v + c.profile.potential_u(side, x, xp, d);
                assert!((energy - e).abs() < 1e-12);
                let back = c.angle(side, x, v, xp, d, m).unwrap();
                assert!((back - phi).abs() < 1e-10, "{side:?} phi {phi} -> {back}");
            }
        }
    }

    #[test]
    fn rhs_requires_soft_core() {
        let cfg = SystemConfig::symmetric(0.1, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.0,
            x_left: vec![0.25],
            v_left: vec![1.0],
            x_right: vec![0.75],
            v_right: vec![-1.0],
        };
        assert!(matches!(
            rhs(&s, &cfg, &Profile::Cubic),
            Err(Error::NeedsSoftCore { .. })
        ));
        let cfg = cfg.with_delta(0.05);
        let r = rhs(&s, &cfg, &Profile::Cubic).unwrap();
        // plateau: free flight
        assert_eq!(r.dv_left, vec![0.0]);
        assert_eq!(r.dv_piston, 0.0);
        assert_eq!(r.dx_left, vec![1.0]);
    }

    #[test]
    fn energy_rate_identity() {
        // dE1/dt = eps W kappa_d'(X - x1), from the chain rule applied to rhs
        let cfg = SystemConfig::symmetric(0.1, 1.0).with_delta(0.1);
        let p = Profile::Cubic;
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.03,
            x_left: vec![0.45],
            v_left: vec![0.6],
            x_right: vec![0.8],
            v_right: vec![-0.2],
        };
        let r = rhs(&s, &cfg, &p).unwrap();
        let (x, v, xp, d) = (s.x_left[0], s.v_left[0], s.x_piston, cfg.delta);
        let de_dt = v * r.dv_left[0]
            + p.kappa_delta_prime(x, d) * r.dx_left[0]
            + p.kappa_delta_prime(xp - x, d) * (r.dx_piston - r.dx_left[0]);
        let w = s.v_piston / cfg.epsilon;
        let expect = cfg.epsilon * w * p.kappa_delta_prime(xp - x, d);
        assert!((de_dt - expect).abs() < 1e-14);
    }

    #[test]
    fn reversibility() {
        let cfg = SystemConfig::symmetric(0.1, 1.0).with_delta(0.05);
        let p = Profile::Cubic;
        let s0 = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.02,
            x_left: vec![0.3],
            v_left: vec![0.9],
            x_right: vec![0.7],
            v_right: vec![-0.8],
        };
        let ctl = StepControl::default();
        let fwd = integrate(s0.clone(), 5.0, &cfg, &p, &ctl, |_| {}).unwrap();
        let mut back = fwd.state.time_reversed();
        back.t = 0.0;
        let ctl_back = StepControl {
            dt: Some(fwd.dt),
            ..ctl
        };
        let ret = integrate(back, 5.0, &cfg, &p, &ctl_back, |_| {})
            .unwrap()
            .state
            .time_reversed();
        assert!((ret.x_left[0] - s0.x_left[0]).abs() < 1e-8);
        assert!((ret.x_right[0] - s0.x_right[0]).abs() < 1e-8);
        assert!((ret.v_left[0] - s0.v_left[0]).abs() < 1e-8);
        assert!((ret.x_piston - s0.x_piston).abs() < 1e-8);
    }
}

//! Exact event-driven dynamics of the hard-core piston (`delta = 0`).
//!
//! Between collisions every particle moves freely, so collision times are
//! roots of linear gap functions. Events closer than [`EVENT_TIME_TOL`] are
//! processed as one simultaneous group: left piston collisions first, then
//! right piston collisions, then wall reflections, ascending particle index
//! within each class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FullState, Side, SlowMode, SlowState, SystemConfig};

/// Events within this much micro-time of the earliest one are simultaneous.
pub const EVENT_TIME_TOL: f64 = 1e-12;
/// Largest tolerated distance from the collision locus before snapping.
pub const GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Collision {
    Piston { side: Side, index: usize },
    Wall { side: Side, index: usize },
}

impl Collision {
    fn rank(&self) -> (u8, usize) {
        match *self {
            Collision::Piston {
                side: Side::Left,
                index,
            } => (0, index),
            Collision::Piston {
                side: Side::Right,
                index,
            } => (1, index),
            Collision::Wall {
                side: Side::Left,
                index,
            } => (2, index),
            Collision::Wall {
                side: Side::Right,
                index,
            } => (3, index),
        }
    }

    pub fn side(&self) -> Side {
        match *self {
            Collision::Piston { side, .. } | Collision::Wall { side, .. } => side,
        }
    }

    pub fn index(&self) -> usize {
        match *self {
            Collision::Piston { index, .. } | Collision::Wall { index, .. } => index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Piston {
        side: Side,
        index: usize,
    },
    Wall {
        side: Side,
        index: usize,
    },
    /// Ordered: left piston, right piston, then walls; ascending index.
    Simultaneous(Vec<Collision>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn collisions(&self) -> Vec<Collision> {
        match &self.kind {
            EventKind::Piston { side, index } => vec![Collision::Piston {
                side: *side,
                index: *index,
            }],
            EventKind::Wall { side, index } => vec![Collision::Wall {
                side: *side,
                index: *index,
            }],
            EventKind::Simultaneous(list) => list.clone(),
        }
    }
}

/// Angle coordinates on the circle `[0, 1)`; `1/2` is the piston, `0` the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleState {
    pub phi_left: Vec<f64>,
    pub phi_right: Vec<f64>,
}

fn wrap_unit(phi: f64) -> f64 {
    let r = phi.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Time until `side`/`index` hits the piston, if it is closing on it.
fn piston_gap_time(state: &FullState, side: Side, j: usize) -> Option<f64> {
    let x = state.positions(side)[j];
    let v = state.velocities(side)[j];
    let rel = v - state.v_piston;
    match side {
        Side::Left if rel > 0.0 => Some(((state.x_piston - x) / rel).max(0.0)),
        Side::Right if rel < 0.0 => Some(((x - state.x_piston) / -rel).max(0.0)),
        _ => None,
    }
}

fn wall_gap_time(state: &FullState, side: Side, j: usize) -> Option<f64> {
    let x = state.positions(side)[j];
    let v = state.velocities(side)[j];
    match side {
        Side::Left if v < 0.0 => Some((x / -v).max(0.0)),
        Side::Right if v > 0.0 => Some(((1.0 - x) / v).max(0.0)),
        _ => None,
    }
}

/// Earliest upcoming collision (or group of simultaneous collisions).
pub fn next_event(state: &FullState, cfg: &SystemConfig) -> Result<Event> {
    state.check_shape(cfg)?;
    if !state.is_finite() {
        return Err(Error::NonFinite { t: state.t });
    }
    let mut candidates: Vec<(f64, Collision)> = Vec::with_capacity(2 * (cfg.n1 + cfg.n2));
    for side in [Side::Left, Side::Right] {
        for j in 0..cfg.count(side) {
            if let Some(dt) = piston_gap_time(state, side, j) {
                candidates.push((dt, Collision::Piston { side, index: j }));
            }
            if let Some(dt) = wall_gap_time(state, side, j) {
                candidates.push((dt, Collision::Wall { side, index: j }));
            }
        }
    }
    let dt_min = candidates
        .iter()
        .map(|c| c.0)
        .min_by(f64::total_cmp)
        .ok_or(Error::Stalled { t: state.t })?;
    let mut group: Vec<Collision> = candidates
        .into_iter()
        .filter(|(dt, _)| *dt <= dt_min + EVENT_TIME_TOL)
        .map(|(_, c)| c)
        .collect();
    group.sort_by_key(Collision::rank);
    let kind = if group.len() == 1 {
        match group[0] {
            Collision::Piston { side, index } => EventKind::Piston { side, index },
            Collision::Wall { side, index } => EventKind::Wall { side, index },
        }
    } else {
        EventKind::Simultaneous(group)
    };
    Ok(Event {
        time: state.t + dt_min,
        kind,
    })
}

/// Free flight of every particle (and the piston) for `dt`.
pub fn free_flight(state: &mut FullState, dt: f64) {
    state.t += dt;
    state.x_piston += state.v_piston * dt;
    for (x, v) in state.x_left.iter_mut().zip(&state.v_left) {
        *x += v * dt;
    }
    for (x, v) in state.x_right.iter_mut().zip(&state.v_right) {
        *x += v * dt;
    }
}

/// Free flight up to absolute time `t` (the clock is set exactly).
pub fn advance_to(state: &mut FullState, t: f64) {
    let dt = t - state.t;
    free_flight(state, dt);
    state.t = t;
}

/// Post-collision `(v, V)` for a gas particle of mass `m` hitting a piston of
/// mass `M = eps^{-2}`; `eps = 0` is a fixed wall moving with `V`.
#[inline]
pub fn elastic_pair(m: f64, eps: f64, v: f64, vp: f64) -> (f64, f64) {
    // reflection about the centre-of-mass velocity
    let mu = m * eps * eps;
    let u = (mu * v + vp) / (1.0 + mu);
    (2.0 * u - v, 2.0 * u - vp)
}

fn collide_piston_mut(
    state: &mut FullState,
    side: Side,
    j: usize,
    cfg: &SystemConfig,
) -> Result<()> {
    let v = state.velocities(side)[j];
    let rel = v - state.v_piston;
    let closing = match side {
        Side::Left => rel > 0.0,
        Side::Right => rel < 0.0,
    };
    if !closing {
        return Err(Error::SeparatingCollision {
            side,
            index: j,
            rel,
        });
    }
    let m = cfg.masses(side)[j];
    let (v_new, vp_new) = elastic_pair(m, cfg.epsilon, v, state.v_piston);
    state.velocities_mut(side)[j] = v_new;
    state.v_piston = vp_new;
    Ok(())
}

fn collide_wall_mut(state: &mut FullState, side: Side, j: usize) -> Result<()> {
    let x = state.positions(side)[j];
    let v = state.velocities(side)[j];
    let ok = match side {
        Side::Left => x.abs() <= GAP_TOL && v < 0.0,
        Side::Right => (1.0 - x).abs() <= GAP_TOL && v > 0.0,
    };
    if !ok {
        return Err(Error::NotAtWall {
            side,
            index: j,
            x,
            v,
        });
    }
    state.velocities_mut(side)[j] = -v;
    Ok(())
}

/// Elastic collision of gas particle `j` on `side` with the piston.
pub fn apply_piston_collision(
    state: &FullState,
    side: Side,
    j: usize,
    cfg: &SystemConfig,
) -> Result<FullState> {
    let mut s = state.clone();
    collide_piston_mut(&mut s, side, j, cfg)?;
    Ok(s)
}

/// Specular reflection of gas particle `j` at the outer wall of its chamber.
pub fn apply_wall_collision(state: &FullState, side: Side, j: usize) -> Result<FullState> {
    let mut s = state.clone();
    collide_wall_mut(&mut s, side, j)?;
    Ok(s)
}

fn apply_group_mut(state: &mut FullState, group: &[Collision], cfg: &SystemConfig) -> Result<()> {
    let mut ordered = group.to_vec();
    ordered.sort_by_key(Collision::rank);
    for c in ordered {
        match c {
            Collision::Piston { side, index } => {
                // an earlier collision in the group may have turned the
                // piston away from this particle
                let rel = state.velocities(side)[index] - state.v_piston;
                let closing = match side {
                    Side::Left => rel > 0.0,
                    Side::Right => rel < 0.0,
                };
                if closing {
                    collide_piston_mut(state, side, index, cfg)?;
                }
            }
            Collision::Wall { side, index } => collide_wall_mut(state, side, index)?,
        }
    }
    Ok(())
}

/// Sequential exact collisions for a simultaneous group.
pub fn apply_simultaneous(
    state: &FullState,
    group: &[Collision],
    cfg: &SystemConfig,
) -> Result<FullState> {
    let mut s = state.clone();
    apply_group_mut(&mut s, group, cfg)?;
    Ok(s)
}

/// Put colliding particles exactly on their collision locus.
fn snap(state: &mut FullState, group: &[Collision]) -> Result<()> {
    for c in group {
        let (side, j) = (c.side(), c.index());
        let target = match c {
            Collision::Piston { .. } => state.x_piston,
            Collision::Wall {
                side: Side::Left, ..
            } => 0.0,
            Collision::Wall {
                side: Side::Right, ..
            } => 1.0,
        };
        let gap = (state.positions(side)[j] - target).abs();
        if gap > GAP_TOL {
            return Err(Error::GapDrift { gap, t: state.t });
        }
        state.positions_mut(side)[j] = target;
    }
    Ok(())
}

/// Receives samples and events from [`evolve`].
pub trait Observer {
    fn sample(&mut self, _state: &FullState) {}

    /// Whether `event` needs the pre-collision state (costs a clone per event).
    fn wants_events(&self) -> bool {
        false
    }

    fn event(&mut self, _event: &Event, _pre: &FullState, _post: &FullState) {}
}

/// Observer that ignores everything.
pub struct Silent;

impl Observer for Silent {}

/// A collision with the slow variables just before and after it.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub pre: SlowState,
    pub post: SlowState,
}

/// Collects full-state samples and event records.
pub struct Recorder<'a> {
    cfg: &'a SystemConfig,
    pub samples: Vec<FullState>,
    pub events: Vec<EventRecord>,
    keep_events: bool,
}

impl<'a> Recorder<'a> {
    pub fn new(cfg: &'a SystemConfig, keep_events: bool) -> Self {
        Recorder {
            cfg,
            samples: Vec::new(),
            events: Vec::new(),
            keep_events,
        }
    }
}

pub fn hard_slow_state(state: &FullState, cfg: &SystemConfig) -> SlowState {
    SlowState {
        x: state.x_piston,
        w: if cfg.epsilon > 0.0 {
            state.v_piston / cfg.epsilon
        } else {
            0.0
        },
        left: state.v_left.iter().map(|v| v.abs()).collect(),
        right: state.v_right.iter().map(|v| v.abs()).collect(),
        mode: SlowMode::HardSpeeds,
    }
}

impl Observer for Recorder<'_> {
    fn sample(&mut self, state: &FullState) {
        self.samples.push(state.clone());
    }

    fn wants_events(&self) -> bool {
        self.keep_events
    }

    fn event(&mut self, event: &Event, pre: &FullState, post: &FullState) {
        self.events.push(EventRecord {
            time: event.time,
            kind: event.kind.clone(),
            pre: hard_slow_state(pre, self.cfg),
            post: hard_slow_state(post, self.cfg),
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Micro-time spacing of the sample grid; `None` samples only at events.
    pub sample_dt: Option<f64>,
    pub max_events: u64,
}

impl EvolveOptions {
    /// 512 samples per unit slow time, i.e. spacing `1 / (512 eps)` in micro-time.
    pub fn for_epsilon(eps: f64) -> Self {
        EvolveOptions {
            sample_dt: (eps > 0.0).then(|| 1.0 / (512.0 * eps)),
            max_events: 50_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolveSummary {
    pub state: FullState,
    pub events: u64,
    pub piston_hits_left: Vec<u64>,
    pub piston_hits_right: Vec<u64>,
}

/// Run the event loop from `state` to micro-time `until`.
///
/// Grid samples are taken at `state.t + k * sample_dt`; a sample that falls
/// exactly on an event sees the pre-collision state (left-continuous paths).
pub fn evolve<O: Observer>(
    state: FullState,
    until: f64,
    cfg: &SystemConfig,
    opts: &EvolveOptions,
    observer: &mut O,
) -> Result<EvolveSummary> {
    state.check_shape(cfg)?;
    if !cfg.is_hard() {
        return Err(Error::NeedsHardCore { delta: cfg.delta });
    }
    let mut s = state;
    let t0 = s.t;
    let mut k_sample: u64 = 0;
    let mut events: u64 = 0;
    let mut hits_left = vec![0u64; cfg.n1];
    let mut hits_right = vec![0u64; cfg.n2];

    let emit_samples_until = |s: &FullState, limit: f64, k: &mut u64, obs: &mut O| {
        if let Some(dt) = opts.sample_dt {
            loop {
                let ts = t0 + *k as f64 * dt;
                if ts > limit {
                    break;
                }
                let mut snap = s.clone();
                advance_to(&mut snap, ts);
                obs.sample(&snap);
                *k += 1;
            }
        }
    };

    if opts.sample_dt.is_none() {
        observer.sample(&s);
    }
    loop {
        let ev = next_event(&s, cfg)?;
        if ev.time > until {
            emit_samples_until(&s, until, &mut k_sample, observer);
            advance_to(&mut s, until);
            if opts.sample_dt.is_none() {
                observer.sample(&s);
            }
            break;
        }
        emit_samples_until(&s, ev.time, &mut k_sample, observer);
        advance_to(&mut s, ev.time);
        let group = ev.collisions();
        snap(&mut s, &group)?;
        let pre = observer.wants_events().then(|| s.clone());
        apply_group_mut(&mut s, &group, cfg)?;
        for c in &group {
            if let Collision::Piston { side, index } = *c {
                match side {
                    Side::Left => hits_left[index] += 1,
                    Side::Right => hits_right[index] += 1,
                }
            }
        }
        if let Some(pre) = pre {
            observer.event(&ev, &pre, &s);
        }
        if opts.sample_dt.is_none() {
            observer.sample(&s);
        }
        events += 1;
        if events > opts.max_events {
            return Err(Error::EventCap {
                cap: opts.max_events,
                t: s.t,
                until,
            });
        }
        if !s.is_finite() {
            return Err(Error::NonFinite { t: s.t });
        }
    }
    Ok(EvolveSummary {
        state: s,
        events,
        piston_hits_left: hits_left,
        piston_hits_right: hits_right,
    })
}

/// Hard-core angle variables: `x / 2X` moving toward the piston, `1 - x / 2X`
/// moving back (mirrored on the right).
pub fn angle_variables(state: &FullState, cfg: &SystemConfig) -> Result<AngleState> {
    state.check_shape(cfg)?;
    let xp = state.x_piston;
    if !(xp > 0.0 && xp < 1.0) {
        return Err(Error::PistonOutOfRange { x: xp });
    }
    let mut phi_left = Vec::with_capacity(cfg.n1);
    for (j, (&x, &v)) in state.x_left.iter().zip(&state.v_left).enumerate() {
        let base = x / (2.0 * xp);
        phi_left.push(match v {
            v if v > 0.0 => wrap_unit(base),
            v if v < 0.0 => wrap_unit(1.0 - base),
            _ => {
                return Err(Error::ZeroVelocity {
                    side: Side::Left,
                    index: j,
                })
            }
        });
    }
    let mut phi_right = Vec::with_capacity(cfg.n2);
    for (j, (&x, &v)) in state.x_right.iter().zip(&state.v_right).enumerate() {
        let base = (1.0 - x) / (2.0 * (1.0 - xp));
        phi_right.push(match v {
            v if v < 0.0 => wrap_unit(base),
            v if v > 0.0 => wrap_unit(1.0 - base),
            _ => {
                return Err(Error::ZeroVelocity {
                    side: Side::Right,
                    index: j,
                })
            }
        });
    }
    Ok(AngleState {
        phi_left,
        phi_right,
    })
}

/// Inverse of [`angle_variables`]: the full state with slow variables `h`
/// (hard mode) and the given angles, at time 0.
pub fn state_from_angles(
    h: &SlowState,
    angles: &AngleState,
    cfg: &SystemConfig,
) -> Result<FullState> {
    if h.mode != SlowMode::HardSpeeds {
        return Err(Error::Shape("hard-core states need speeds".into()));
    }
    if !(h.x > 0.0 && h.x < 1.0) {
        return Err(Error::PistonOutOfRange { x: h.x });
    }
    let (mut x_left, mut v_left) = (Vec::new(), Vec::new());
    for (&s, &phi) in h.left.iter().zip(&angles.phi_left) {
        let phi = wrap_unit(phi);
        if phi < 0.5 {
            x_left.push(2.0 * h.x * phi);
            v_left.push(s);
        } else {
            x_left.push(2.0 * h.x * (1.0 - phi));
            v_left.push(-s);
        }
    }
    let (mut x_right, mut v_right) = (Vec::new(), Vec::new());
    for (&s, &phi) in h.right.iter().zip(&angles.phi_right) {
        let phi = wrap_unit(phi);
        if phi < 0.5 {
            x_right.push(1.0 - 2.0 * (1.0 - h.x) * phi);
            v_right.push(-s);
        } else {
            x_right.push(1.0 - 2.0 * (1.0 - h.x) * (1.0 - phi));
            v_right.push(s);
        }
    }
    let state = FullState {
        t: 0.0,
        x_piston: h.x,
        v_piston: cfg.epsilon * h.w,
        x_left,
        v_left,
        x_right,
        v_right,
    };
    state.check_shape(cfg)?;
    Ok(state)
}

/// Unnormalized invariant density `X^{n1} (1 - X)^{n2}`.
pub fn liouville_density(h: &SlowState) -> f64 {
    h.x.powi(h.left.len() as i32) * (1.0 - h.x).powi(h.right.len() as i32)
}

/// Collision map on `(s1, W)` for a left particle of mass `m`.
pub fn left_speed_matrix(m: f64, eps: f64) -> [[f64; 2]; 2] {
    let mu = m * eps * eps;
    let d = 1.0 + mu;
    [
        [(1.0 - mu) / d, -2.0 * eps / d],
        [2.0 * eps * m / d, (1.0 - mu) / d],
    ]
}

/// Collision map on `(W, s2)` for a right particle of mass `m`.
pub fn right_speed_matrix(m: f64, eps: f64) -> [[f64; 2]; 2] {
    let mu = m * eps * eps;
    let d = 1.0 + mu;
    [
        [(1.0 - mu) / d, -2.0 * eps * m / d],
        [2.0 * eps / d, (1.0 - mu) / d],
    ]
}

/// Left collision embedded in `(s1, W, s2)`.
pub fn left_block(m1: f64, eps: f64) -> [[f64; 3]; 3] {
    let a = left_speed_matrix(m1, eps);
    [
        [a[0][0], a[0][1], 0.0],
        [a[1][0], a[1][1], 0.0],
        [0.0, 0.0, 1.0],
    ]
}

/// Right collision embedded in `(s1, W, s2)`.
pub fn right_block(m2: f64, eps: f64) -> [[f64; 3]; 3] {
    let a = right_speed_matrix(m2, eps);
    [
        [1.0, 0.0, 0.0],
        [0.0, a[0][0], a[0][1]],
        [0.0, a[1][0], a[1][1]],
    ]
}

pub fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Frobenius norm of `A_R A_L - A_L A_R`.
pub fn collision_commutator_norm(m1: f64, m2: f64, eps: f64) -> f64 {
    let l = left_block(m1, eps);
    let r = right_block(m2, eps);
    let rl = mat3_mul(&r, &l);
    let lr = mat3_mul(&l, &r);
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += (rl[i][j] - lr[i][j]).powi(2);
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_each(eps: f64, x1: f64, v1: f64, xp: f64, vp: f64) -> (SystemConfig, FullState) {
        let cfg = SystemConfig::symmetric(eps, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: xp,
            v_piston: vp,
            x_left: vec![x1],
            v_left: vec![v1],
            x_right: vec![0.9],
            v_right: vec![0.01],
        };
        (cfg, s)
    }

    #[test]
    fn frozen_piston_collision_time() {
        let (cfg, s) = one_each(0.0, 0.25, 1.0, 0.5, 0.0);
        let ev = next_event(&s, &cfg).unwrap();
        assert_eq!(
            ev.kind,
            EventKind::Piston {
                side: Side::Left,
                index: 0
            }
        );
        assert!((ev.time - 0.25).abs() < 1e-15);
    }

    #[test]
    fn wall_collision_time() {
        let (cfg, s) = one_each(0.0, 0.25, -1.0, 0.5, 0.0);
        let ev = next_event(&s, &cfg).unwrap();
        assert_eq!(
            ev.kind,
            EventKind::Wall {
                side: Side::Left,
                index: 0
            }
        );
        assert!((ev.time - 0.25).abs() < 1e-15);
    }

    #[test]
    fn moving_piston_collision_time_matches_bisection() {
        let (cfg, s) = one_each(0.1, 0.2, 2.0, 0.6, -0.5);
        let ev = next_event(&s, &cfg).unwrap();
        // bisection on the gap X + V t - (x + v t)
        let gap = |t: f64| 0.6 - 0.5 * t - (0.2 + 2.0 * t);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 0.16).abs() < 1e-14);
        assert!((ev.time - lo).abs() < 1e-14);
    }

    #[test]
    fn stalled_system_is_an_error() {
        let cfg = SystemConfig::symmetric(0.0, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.0,
            x_left: vec![0.2],
            v_left: vec![0.0],
            x_right: vec![0.7],
            v_right: vec![0.0],
        };
        assert!(matches!(next_event(&s, &cfg), Err(Error::Stalled { .. })));
        let mut bad = s.clone();
        bad.x_left[0] = f64::NAN;
        assert!(matches!(
            next_event(&bad, &cfg),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn equal_masses_exchange_velocities() {
        // M = m = 1 when eps = 1
        let (cfg, s) = one_each(1.0, 0.5, 1.0, 0.5, 0.0);
        let out = apply_piston_collision(&s, Side::Left, 0, &cfg).unwrap();
        assert_eq!(out.v_left[0], 0.0);
        assert_eq!(out.v_piston, 1.0);
    }

    /// Independent two-body solve: the non-trivial root of momentum and
    /// energy conservation, `v' = 2 v_cm - v`.
    fn two_body(m: f64, big: f64, v: f64, vp: f64) -> (f64, f64) {
        let vcm = (m * v + big * vp) / (m + big);
        (2.0 * vcm - v, 2.0 * vcm - vp)
    }

    #[test]
    fn collision_matches_two_body_oracle() {
        let eps: f64 = 0.1;
        let (cfg, s) = one_each(eps, 0.5, 1.0, 0.5, 0.0);
        let out = apply_piston_collision(&s, Side::Left, 0, &cfg).unwrap();
        let (v_o, vp_o) = two_body(1.0, 100.0, 1.0, 0.0);
        assert!((out.v_left[0] - v_o).abs() < 1e-15);
        assert!((out.v_piston - vp_o).abs() < 1e-15);
        // s+ = 0.99/1.01, W+ = 0.2/1.01
        assert!((out.v_left[0].abs() - 0.99 / 1.01).abs() < 1e-15);
        assert!((out.v_piston / eps - 0.2 / 1.01).abs() < 1e-14);
    }

    #[test]
    fn collision_jump_asymptotics() {
        // ds = -2 eps W + O(eps^2), dW = 2 eps m s + O(eps^2)
        let (m, s1, w) = (1.5, 1.2, 0.7);
        let mut prev = None;
        for &eps in &[0.02, 0.01, 0.005] {
            let a = left_speed_matrix(m, eps);
            let s_new = a[0][0] * s1 + a[0][1] * w;
            let w_new = a[1][0] * s1 + a[1][1] * w;
            let r1 = ((s_new - s1) - (-2.0 * eps * w)).abs();
            let r2 = ((w_new - w) - 2.0 * eps * m * s1).abs();
            assert!(r1 < 5.0 * eps * eps && r2 < 5.0 * eps * eps);
            if let Some((p1, _)) = prev {
                let ratio: f64 = p1 / r1;
                assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
            }
            prev = Some((r1, r2));
        }
    }

    #[test]
    fn speed_matrix_matches_velocity_update() {
        let eps = 0.05;
        let (cfg, mut s) = one_each(eps, 0.5, 1.3, 0.5, 0.02);
        let a = left_speed_matrix(1.0, eps);
        let (s1, w) = (1.3, 0.02 / eps);
        let out = apply_piston_collision(&s, Side::Left, 0, &cfg).unwrap();
        assert!((out.v_left[0].abs() - (a[0][0] * s1 + a[0][1] * w)).abs() < 1e-14);
        assert!((out.v_piston / eps - (a[1][0] * s1 + a[1][1] * w)).abs() < 1e-12);
        // right side: particle moving left into the piston
        s.x_right[0] = 0.5;
        s.v_right[0] = -0.9;
        let b = right_speed_matrix(1.0, eps);
        let out = apply_piston_collision(&s, Side::Right, 0, &cfg).unwrap();
        assert!((out.v_piston / eps - (b[0][0] * w + b[0][1] * 0.9)).abs() < 1e-12);
        assert!((out.v_right[0] - (b[1][0] * w + b[1][1] * 0.9)).abs() < 1e-14);
    }

    #[test]
    fn phase_velocity_continuity() {
        // s+ + eps W+ = s- - eps W-
        for &(eps, m, s1, w) in &[
            (0.1, 1.0, 1.0, 0.3),
            (0.03, 2.5, 0.4, -1.0),
            (0.2, 0.5, 2.0, 0.0),
        ] {
            let a = left_speed_matrix(m, eps);
            let sp = a[0][0] * s1 + a[0][1] * w;
            let wp = a[1][0] * s1 + a[1][1] * w;
            assert!((sp + eps * wp - (s1 - eps * w)).abs() < 1e-14);
        }
    }

    #[test]
    fn separating_collision_rejected() {
        let (cfg, s) = one_each(0.1, 0.5, -1.0, 0.5, 0.0);
        assert!(matches!(
            apply_piston_collision(&s, Side::Left, 0, &cfg),
            Err(Error::SeparatingCollision { .. })
        ));
    }

    #[test]
    fn wall_reflections() {
        let (_, s) = one_each(0.1, 0.0, -1.0, 0.5, 0.03);
        let out = apply_wall_collision(&s, Side::Left, 0).unwrap();
        assert_eq!(out.v_left[0], 1.0);
        assert_eq!(out.x_piston, s.x_piston);
        assert_eq!(out.v_piston, s.v_piston);
        let mut s2 = s.clone();
        s2.x_right[0] = 1.0;
        s2.v_right[0] = 2.0;
        let out = apply_wall_collision(&s2, Side::Right, 0).unwrap();
        assert_eq!(out.v_right[0], -2.0);
        assert!(matches!(
            apply_wall_collision(&s, Side::Right, 0),
            Err(Error::NotAtWall { .. })
        ));
    }

    #[test]
    fn simultaneous_left_right_is_block_product() {
        let eps = 0.1;
        let cfg = SystemConfig::symmetric(eps, 1.0);
        let (s1, w, s2) = (1.1, 0.4, 0.8);
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: eps * w,
            x_left: vec![0.5],
            v_left: vec![s1],
            x_right: vec![0.5],
            v_right: vec![-s2],
        };
        let group = [
            Collision::Piston {
                side: Side::Right,
                index: 0,
            },
            Collision::Piston {
                side: Side::Left,
                index: 0,
            },
        ];
        let out = apply_simultaneous(&s, &group, &cfg).unwrap();
        let p = mat3_mul(&right_block(1.0, eps), &left_block(1.0, eps));
        let h = [s1, w, s2];
        let expect: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|k| p[i][k] * h[k]).sum())
            .collect();
        assert!((out.v_left[0].abs() - expect[0]).abs() < 1e-14);
        assert!((out.v_piston / eps - expect[1]).abs() < 1e-13);
        assert!((out.v_right[0].abs() - expect[2]).abs() < 1e-14);
    }

    #[test]
    fn commutator_is_second_order() {
        let mut prev: Option<f64> = None;
        for &eps in &[0.04, 0.02, 0.01, 0.005] {
            let c = collision_commutator_norm(1.0, 2.0, eps);
            if let Some(p) = prev {
                let ratio = p / c;
                assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
            }
            prev = Some(c);
        }
    }

    #[test]
    fn disjoint_wall_and_piston_commute() {
        let eps = 0.1;
        let cfg = SystemConfig::symmetric(eps, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.01,
            x_left: vec![0.5],
            v_left: vec![1.0],
            x_right: vec![1.0],
            v_right: vec![0.7],
        };
        let a = apply_wall_collision(
            &apply_piston_collision(&s, Side::Left, 0, &cfg).unwrap(),
            Side::Right,
            0,
        )
        .unwrap();
        let b = apply_piston_collision(
            &apply_wall_collision(&s, Side::Right, 0).unwrap(),
            Side::Left,
            0,
            &cfg,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn determinant_is_one() {
        for &eps in &[0.3, 0.1, 0.01] {
            for &m in &[0.5, 1.0, 3.0] {
                for a in [left_speed_matrix(m, eps), right_speed_matrix(m, eps)] {
                    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                    assert!((det - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn angle_examples() {
        let cfg = SystemConfig::symmetric(0.1, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: 0.6,
            v_piston: 0.0,
            x_left: vec![0.3],
            v_left: vec![1.0],
            x_right: vec![1.0],
            v_right: vec![-1.0],
        };
        let a = angle_variables(&s, &cfg).unwrap();
        assert!((a.phi_left[0] - 0.25).abs() < 1e-15);
        assert_eq!(a.phi_right[0], 0.0);
        let mut near = s.clone();
        near.x_left[0] = 0.6 - 1e-12;
        assert!((angle_variables(&near, &cfg).unwrap().phi_left[0] - 0.5).abs() < 1e-11);
        let mut zero = s.clone();
        zero.v_left[0] = 0.0;
        assert!(matches!(
            angle_variables(&zero, &cfg),
            Err(Error::ZeroVelocity { .. })
        ));
    }

    #[test]
    fn angles_round_trip() {
        let cfg = SystemConfig::symmetric(0.05, 1.0);
        let h = SlowState {
            x: 0.4,
            w: 0.3,
            left: vec![1.2],
            right: vec![0.7],
            mode: SlowMode::HardSpeeds,
        };
        for &(p1, p2) in &[(0.1, 0.9), (0.6, 0.2), (0.0, 0.5)] {
            let ang = AngleState {
                phi_left: vec![p1],
                phi_right: vec![p2],
            };
            let s = state_from_angles(&h, &ang, &cfg).unwrap();
            let back = angle_variables(&s, &cfg).unwrap();
            assert!((back.phi_left[0] - p1).abs() < 1e-14);
            assert!((back.phi_right[0] - p2).abs() < 1e-14);
            assert_eq!(hard_slow_state(&s, &cfg).left, h.left);
        }
    }

    #[test]
    fn liouville_examples() {
        let mk = |x: f64, n1: usize, n2: usize| SlowState {
            x,
            w: 0.0,
            left: vec![1.0; n1],
            right: vec![1.0; n2],
            mode: SlowMode::HardSpeeds,
        };
        assert_eq!(liouville_density(&mk(0.5, 1, 1)), 0.25);
        assert_eq!(liouville_density(&mk(0.0, 1, 1)), 0.0);
        assert_eq!(liouville_density(&mk(0.5, 3, 4)), 2f64.powi(-7));
    }

    #[test]
    fn frozen_piston_orbit_is_periodic() {
        let cfg = SystemConfig::symmetric(0.0, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.0,
            x_left: vec![0.2],
            v_left: vec![1.0],
            x_right: vec![0.7],
            v_right: vec![0.37],
        };
        let out = evolve(
            s.clone(),
            1.0,
            &cfg,
            &EvolveOptions {
                sample_dt: None,
                max_events: 100,
            },
            &mut Silent,
        )
        .unwrap();
        assert!((out.state.x_left[0] - 0.2).abs() < 1e-14);
        assert_eq!(out.state.v_left[0], 1.0);
        assert_eq!(out.piston_hits_left[0], 1);
    }

    #[test]
    fn recorder_sees_grid_and_events() {
        let cfg = SystemConfig::symmetric(0.1, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.0,
            x_left: vec![0.25],
            v_left: vec![1.0],
            x_right: vec![0.75],
            v_right: vec![1.0],
        };
        let mut rec = Recorder::new(&cfg, true);
        let opts = EvolveOptions {
            sample_dt: Some(0.1),
            max_events: 1000,
        };
        let out = evolve(s, 1.0, &cfg, &opts, &mut rec).unwrap();
        assert_eq!(rec.samples.len(), 11);
        assert_eq!(rec.events.len() as u64, out.events);
        // first event is the simultaneous piston hit (t=0.25) and right wall (t=0.25)
        assert!(matches!(rec.events[0].kind, EventKind::Simultaneous(_)));
        assert!(rec.events[0].post.w > 0.0);
    }

    #[test]
    fn event_cap_reports_diagnostics() {
        let cfg = SystemConfig::symmetric(0.1, 1.0);
        let s = FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston: 0.0,
            x_left: vec![0.25],
            v_left: vec![1.0],
            x_right: vec![0.75],
            v_right: vec![1.0],
        };
        let opts = EvolveOptions {
            sample_dt: None,
            max_events: 5,
        };
        assert!(matches!(
            evolve(s, 100.0, &cfg, &opts, &mut Silent),
            Err(Error::EventCap { cap: 5, .. })
        ));
    }
}

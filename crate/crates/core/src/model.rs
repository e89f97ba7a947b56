//! Shared domain types: system configuration, full and slow states, the
//! compact set used for stopping times, and the slow-variable projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::Profile;

/// Which chamber a gas particle lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

fn default_potential() -> String {
    "cubic".to_string()
}

/// Parameters of one piston system. Field names match the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n1: usize,
    pub n2: usize,
    pub masses_left: Vec<f64>,
    pub masses_right: Vec<f64>,
    /// `M^{-1/2}`; zero freezes the piston.
    pub epsilon: f64,
    /// Smoothing width of the wall/piston potential; zero is the hard core.
    pub delta: f64,
    #[serde(default = "default_potential")]
    pub potential: String,
    #[serde(rename = "horizon_T")]
    pub horizon_t: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SystemConfig {
    /// One particle per side, unit masses, hard core.
    pub fn symmetric(epsilon: f64, horizon_t: f64) -> Self {
        SystemConfig {
            n1: 1,
            n2: 1,
            masses_left: vec![1.0],
            masses_right: vec![1.0],
            epsilon,
            delta: 0.0,
            potential: default_potential(),
            horizon_t,
            seed: 0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 1 {
            return Err(Error::config("n1", "must be at least 1"));
        }
        if self.n2 < 1 {
            return Err(Error::config("n2", "must be at least 1"));
        }
        if self.masses_left.len() != self.n1 {
            return Err(Error::config(
                "masses_left",
                format!(
                    "expected {} entries, got {}",
                    self.n1,
                    self.masses_left.len()
                ),
            ));
        }
        if self.masses_right.len() != self.n2 {
            return Err(Error::config(
                "masses_right",
                format!(
                    "expected {} entries, got {}",
                    self.n2,
                    self.masses_right.len()
                ),
            ));
        }
        for (name, masses) in [
            ("masses_left", &self.masses_left),
            ("masses_right", &self.masses_right),
        ] {
            if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
                return Err(Error::config(name, format!("mass {m} is not positive")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config("epsilon", "must be finite and >= 0"));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::config("delta", "must be finite and >= 0"));
        }
        if !(self.horizon_t.is_finite() && self.horizon_t > 0.0) {
            return Err(Error::config("horizon_T", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Validation that also checks `delta < margin / 2` against the compact set.
    pub fn validate_with(&self, set: &CompactSet) -> Result<()> {
        self.validate()?;
        let margin = set.margin();
        if self.delta > 0.0 && self.delta >= margin / 2.0 {
            return Err(Error::config(
                "delta",
                format!(
                    "must be below half the compact-set margin ({})",
                    margin / 2.0
                ),
            ));
        }
        Ok(())
    }

    pub fn is_hard(&self) -> bool {
        self.delta == 0.0
    }

    pub fn count(&self, side: Side) -> usize {
        match side {
            Side::Left => self.n1,
            Side::Right => self.n2,
        }
    }

    pub fn masses(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.masses_left,
            Side::Right => &self.masses_right,
        }
    }

    /// Piston mass `M = epsilon^{-2}`; infinite for a frozen piston.
    pub fn piston_mass(&self) -> f64 {
        if self.epsilon == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (self.epsilon * self.epsilon)
        }
    }
}

/// Complete microscopic state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub t: f64,
    /// Piston position `X`.
    pub x_piston: f64,
    /// Piston velocity `V = epsilon * W`.
    pub v_piston: f64,
    pub x_left: Vec<f64>,
    pub v_left: Vec<f64>,
    pub x_right: Vec<f64>,
    pub v_right: Vec<f64>,
}

impl FullState {
    pub fn positions(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.x_left,
            Side::Right => &self.x_right,
        }
    }

    pub fn velocities(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.v_left,
            Side::Right => &self.v_right,
        }
    }

    pub fn positions_mut(&mut self, side: Side) -> &mut [f64] {
        match side {
            Side::Left => &mut self.x_left,
            Side::Right => &mut self.x_right,
        }
    }

    pub fn velocities_mut(&mut self, side: Side) -> &mut [f64] {
        match side {
            Side::Left => &mut self.v_left,
            Side::Right => &mut self.v_right,
        }
    }

    pub fn check_shape(&self, cfg: &SystemConfig) -> Result<()> {
        let ok = self.x_left.len() == cfg.n1
            && self.v_left.len() == cfg.n1
            && self.x_right.len() == cfg.n2
            && self.v_right.len() == cfg.n2;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "expected {} left and {} right particles, got {}/{} left and {}/{} right",
                cfg.n1,
                cfg.n2,
                self.x_left.len(),
                self.v_left.len(),
                self.x_right.len(),
                self.v_right.len()
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.x_piston.is_finite()
            && self.v_piston.is_finite()
            && self
                .x_left
                .iter()
                .chain(&self.v_left)
                .chain(&self.x_right)
                .chain(&self.v_right)
                .all(|v| v.is_finite())
    }

    /// Piston kinetic energy plus gas kinetic energy. The piston term is
    /// `W^2 / 2 = M V^2 / 2`.
    pub fn kinetic_energy(&self, cfg: &SystemConfig) -> f64 {
        let piston = if cfg.epsilon > 0.0 {
            let w = self.v_piston / cfg.epsilon;
            0.5 * w * w
        } else {
            0.0
        };
        let gas: f64 = [Side::Left, Side::Right]
            .into_iter()
            .flat_map(|side| {
                cfg.masses(side)
                    .iter()
                    .zip(self.velocities(side))
                    .map(|(m, v)| 0.5 * m * v * v)
            })
            .sum();
        piston + gas
    }

    /// Same configuration with every velocity negated.
    pub fn time_reversed(&self) -> Self {
        let mut s = self.clone();
        s.v_piston = -s.v_piston;
        s.v_left
            .iter_mut()
            .chain(s.v_right.iter_mut())
            .for_each(|v| *v = -*v);
        s
    }
}

/// Whether slow per-particle values are speeds (hard core) or energies (soft core).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlowMode {
    HardSpeeds,
    SoftEnergies,
}

/// Slow variables `(X, W, values)`. `W` is stored, `V` is `epsilon * W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowState {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub mode: SlowMode,
}

impl SlowState {
    pub fn values(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn dim(&self) -> usize {
        2 + self.left.len() + self.right.len()
    }

    /// Flattened `[X, W, left.., right..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.push(self.x);
        out.push(self.w);
        out.extend_from_slice(&self.left);
        out.extend_from_slice(&self.right);
        out
    }

    pub fn from_slice(y: &[f64], n1: usize, mode: SlowMode) -> Self {
        SlowState {
            x: y[0],
            w: y[1],
            left: y[2..2 + n1].to_vec(),
            right: y[2 + n1..].to_vec(),
            mode,
        }
    }

    /// Convert speeds to energies, `E = m s^2 / 2`. No-op in soft mode.
    pub fn to_energies(&self, cfg: &SystemConfig) -> Self {
        match self.mode {
            SlowMode::SoftEnergies => self.clone(),
            SlowMode::HardSpeeds => {
                let conv = |ms: &[f64], ss: &[f64]| -> Vec<f64> {
                    ms.iter().zip(ss).map(|(m, s)| 0.5 * m * s * s).collect()
                };
                SlowState {
                    x: self.x,
                    w: self.w,
                    left: conv(&cfg.masses_left, &self.left),
                    right: conv(&cfg.masses_right, &self.right),
                    mode: SlowMode::SoftEnergies,
                }
            }
        }
    }

    /// Convert energies to speeds, `s = sqrt(2E / m)`. No-op in hard mode.
    pub fn to_speeds(&self, cfg: &SystemConfig) -> Self {
        match self.mode {
            SlowMode::HardSpeeds => self.clone(),
            SlowMode::SoftEnergies => {
                let conv = |ms: &[f64], es: &[f64]| -> Vec<f64> {
                    ms.iter()
                        .zip(es)
                        .map(|(m, e)| (2.0 * e / m).sqrt())
                        .collect()
                };
                SlowState {
                    x: self.x,
                    w: self.w,
                    left: conv(&cfg.masses_left, &self.left),
                    right: conv(&cfg.masses_right, &self.right),
                    mode: SlowMode::HardSpeeds,
                }
            }
        }
    }

    /// Max-norm distance between two states of the same shape and mode.
    pub fn max_abs_diff(&self, other: &SlowState) -> f64 {
        debug_assert_eq!(self.mode, other.mode);
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Total gas energy per side; requires masses in hard mode.
    pub fn side_energies(&self, cfg: &SystemConfig) -> (f64, f64) {
        let e = self.to_energies(cfg);
        (e.left.iter().sum(), e.right.iter().sum())
    }
}

/// Closed bounds on the slow variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactSet {
    pub x_bounds: [f64; 2],
    pub w_max: f64,
    pub value_bounds: [f64; 2],
    pub mode: SlowMode,
    /// Upper forbidden value for the per-particle coordinate: the barrier
    /// `kappa(0)` for energies, infinity for speeds.
    #[serde(default = "infinite")]
    pub value_ceiling: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl CompactSet {
    pub fn default_hard() -> Self {
        CompactSet {
            x_bounds: [0.1, 0.9],
            w_max: 10.0,
            value_bounds: [0.1, 10.0],
            mode: SlowMode::HardSpeeds,
            value_ceiling: f64::INFINITY,
        }
    }

    pub fn default_soft(barrier: f64) -> Self {
        CompactSet {
            x_bounds: [0.1, 0.9],
            w_max: 10.0,
            value_bounds: [0.05 * barrier, 0.95 * barrier],
            mode: SlowMode::SoftEnergies,
            value_ceiling: barrier,
        }
    }

    /// Smallest distance of any bound to the forbidden boundary values.
    pub fn margin(&self) -> f64 {
        let mut m = self.x_bounds[0]
            .min(1.0 - self.x_bounds[1])
            .min(self.value_bounds[0]);
        if self.value_ceiling.is_finite() {
            m = m.min(self.value_ceiling - self.value_bounds[1]);
        }
        m
    }

    pub fn contains(&self, h: &SlowState) -> bool {
        membership(h, self)
    }
}

/// True iff every slow component lies within its closed bound.
pub fn membership(h: &SlowState, set: &CompactSet) -> bool {
    if h.mode != set.mode {
        return false;
    }
    let within = |v: f64, b: [f64; 2]| v >= b[0] && v <= b[1];
    within(h.x, set.x_bounds)
        && h.w.abs() <= set.w_max
        && h.left
            .iter()
            .chain(&h.right)
            .all(|&v| within(v, set.value_bounds))
}

/// Per-side pressures `P1 = 2 E1 / X`, `P2 = 2 E2 / (1 - X)`.
pub fn pressures(h: &SlowState, cfg: &SystemConfig) -> Result<(f64, f64)> {
    if !(h.x > 0.0 && h.x < 1.0) {
        return Err(Error::PistonOutOfRange { x: h.x });
    }
    let (e1, e2) = h.side_energies(cfg);
    Ok((2.0 * e1 / h.x, 2.0 * e2 / (1.0 - h.x)))
}

/// Project a full state onto its slow variables.
///
/// In hard mode (`delta == 0`) the per-particle values are speeds `|v|`; in
/// soft mode they are the particle energies including the wall and piston
/// potential terms.
pub fn slow_state_of(full: &FullState, cfg: &SystemConfig, profile: &Profile) -> Result<SlowState> {
    full.check_shape(cfg)?;
    let w = if cfg.epsilon > 0.0 {
        full.v_piston / cfg.epsilon
    } else if full.v_piston == 0.0 {
        0.0
    } else {
        return Err(Error::UndefinedW { v: full.v_piston });
    };
    if cfg.is_hard() {
        Ok(SlowState {
            x: full.x_piston,
            w,
            left: full.v_left.iter().map(|v| v.abs()).collect(),
            right: full.v_right.iter().map(|v| v.abs()).collect(),
            mode: SlowMode::HardSpeeds,
        })
    } else {
        let energies = |side: Side| -> Vec<f64> {
            cfg.masses(side)
                .iter()
                .zip(full.positions(side).iter().zip(full.velocities(side)))
                .map(|(m, (&x, &v))| {
                    0.5 * m * v * v + profile.potential_u(side, x, full.x_piston, cfg.delta)
                })
                .collect()
        };
        Ok(SlowState {
            x: full.x_piston,
            w,
            left: energies(Side::Left),
            right: energies(Side::Right),
            mode: SlowMode::SoftEnergies,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(v_piston: f64, vl: f64, vr: f64) -> FullState {
        FullState {
            t: 0.0,
            x_piston: 0.5,
            v_piston,
            x_left: vec![0.25],
            v_left: vec![vl],
            x_right: vec![0.75],
            v_right: vec![vr],
        }
    }

    #[test]
    fn hard_projection_takes_speeds() {
        let cfg = SystemConfig::symmetric(0.1, 1.0);
        let h = slow_state_of(&state(0.0, 1.0, -2.0), &cfg, &Profile::Cubic).unwrap();
        assert_eq!(h.x, 0.5);
        assert_eq!(h.w, 0.0);
        assert_eq!(h.left, vec![1.0]);
        assert_eq!(h.right, vec![2.0]);
    }

    #[test]
    fn w_is_rescaled_velocity() {
        let cfg = SystemConfig::symmetric(0.1, 1.0);
        let h = slow_state_of(&state(0.01, 1.0, -1.0), &cfg, &Profile::Cubic).unwrap();
        assert!((h.w - 0.1).abs() < 1e-15);
    }

    #[test]
    fn frozen_piston_with_velocity_is_an_error() {
        let cfg = SystemConfig::symmetric(0.0, 1.0);
        assert!(matches!(
            slow_state_of(&state(0.01, 1.0, -1.0), &cfg, &Profile::Cubic),
            Err(Error::UndefinedW { .. })
        ));
        assert!(slow_state_of(&state(0.0, 1.0, -1.0), &cfg, &Profile::Cubic).is_ok());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let mut cfg = SystemConfig::symmetric(0.1, 1.0);
        cfg.n1 = 2;
        cfg.masses_left = vec![1.0, 1.0];
        assert!(matches!(
            slow_state_of(&state(0.0, 1.0, -1.0), &cfg, &Profile::Cubic),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn soft_projection_includes_wall_potential() {
        let cfg = SystemConfig::symmetric(0.1, 1.0).with_delta(0.1);
        let mut s = state(0.0, 0.5, -0.5);
        s.x_left[0] = 0.05;
        let h = slow_state_of(&s, &cfg, &Profile::Cubic).unwrap();
        // kappa(0.5) = 0.125 with the cubic profile
        assert!((h.left[0] - (0.125 + 0.125)).abs() < 1e-15);
        assert!((h.right[0] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn membership_closed_bounds() {
        let set = CompactSet::default_hard();
        let mut h = SlowState {
            x: 0.5,
            w: 0.0,
            left: vec![1.0],
            right: vec![1.0],
            mode: SlowMode::HardSpeeds,
        };
        assert!(membership(&h, &set));
        h.x = 0.9;
        assert!(membership(&h, &set));
        h.left[0] = 0.0;
        assert!(!membership(&h, &set));
        let soft = h.clone();
        assert!(!membership(
            &SlowState {
                mode: SlowMode::SoftEnergies,
                ..soft
            },
            &set
        ));
    }

    #[test]
    fn pressure_examples() {
        let cfg = SystemConfig::symmetric(0.1, 1.0);
        let h = SlowState {
            x: 0.5,
            w: 0.0,
            left: vec![1.0],
            right: vec![1.0],
            mode: SlowMode::HardSpeeds,
        };
        assert_eq!(pressures(&h, &cfg).unwrap(), (2.0, 2.0));
        let h = SlowState {
            x: 0.25,
            w: 0.0,
            left: vec![1.0],
            right: vec![3.0],
            mode: SlowMode::SoftEnergies,
        };
        let (p1, p2) = pressures(&h, &cfg).unwrap();
        assert_eq!(p1, 8.0);
        // E1/X = E2/(1-X) is mechanical equilibrium
        assert!((p1 - p2).abs() < 1e-12);
        assert!(pressures(&SlowState { x: 1.0, ..h }, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SystemConfig::symmetric(0.1, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.masses_right = vec![-1.0];
        assert!(cfg.validate().is_err());
        let cfg = SystemConfig::symmetric(0.1, 1.0).with_delta(0.1);
        assert!(cfg.validate_with(&CompactSet::default_soft(1.0)).is_err());
        assert!(cfg
            .clone()
            .with_delta(0.02)
            .validate_with(&CompactSet::default_soft(1.0))
            .is_ok());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok = r#"{"n1":1,"n2":1,"masses_left":[1],"masses_right":[1],"epsilon":0.1,
                     "delta":0,"potential":"cubic","horizon_T":1,"seed":3}"#;
        let cfg: SystemConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(cfg.horizon_t, 1.0);
        let bad = r#"{"n1":1,"n2":1,"masses_left":[1],"masses_right":[1],"epsilon":0.1,
                      "delta":0,"horizon_T":1,"bogus":2}"#;
        assert!(serde_json::from_str::<SystemConfig>(bad).is_err());
    }

    fn arb_slow() -> impl Strategy<Value = (SystemConfig, SlowState)> {
        (
            proptest::collection::vec(0.1f64..5.0, 1..4),
            proptest::collection::vec(0.1f64..5.0, 1..4),
            0.05f64..0.95,
            -5.0f64..5.0,
        )
            .prop_flat_map(|(ml, mr, x, w)| {
                let n1 = ml.len();
                let n2 = mr.len();
                (
                    Just((ml, mr, x, w)),
                    proptest::collection::vec(0.01f64..10.0, n1),
                    proptest::collection::vec(0.01f64..10.0, n2),
                )
            })
            .prop_map(|((ml, mr, x, w), sl, sr)| {
                let cfg = SystemConfig {
                    n1: ml.len(),
                    n2: mr.len(),
                    masses_left: ml,
                    masses_right: mr,
                    ..SystemConfig::symmetric(0.1, 1.0)
                };
                let h = SlowState {
                    x,
                    w,
                    left: sl,
                    right: sr,
                    mode: SlowMode::HardSpeeds,
                };
                (cfg, h)
            })
    }

    proptest! {
        #[test]
        fn speed_energy_round_trip((cfg, h) in arb_slow()) {
            let back = h.to_energies(&cfg).to_speeds(&cfg);
            for (a, b) in h.to_vec().iter().zip(back.to_vec()) {
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }

        #[test]
        fn pressures_are_homogeneous((cfg, h) in arb_slow(), c in 0.1f64..10.0) {
            let e = h.to_energies(&cfg);
            let scaled = SlowState {
                left: e.left.iter().map(|v| v * c).collect(),
                right: e.right.iter().map(|v| v * c).collect(),
                ..e.clone()
            };
            let (p1, p2) = pressures(&e, &cfg).unwrap();
            let (q1, q2) = pressures(&scaled, &cfg).unwrap();
            prop_assert!((q1 - c * p1).abs() <= 1e-12 * q1.abs());
            prop_assert!((q2 - c * p2).abs() <= 1e-12 * q2.abs());
        }

        #[test]
        fn membership_monotone_under_inclusion((_cfg, h) in arb_slow(), shrink in 0.0f64..0.04) {
            let big = CompactSet::default_hard();
            let small = CompactSet {
                x_bounds: [big.x_bounds[0] + shrink, big.x_bounds[1] - shrink],
                w_max: big.w_max - shrink,
                value_bounds: [big.value_bounds[0] + shrink, big.value_bounds[1] - shrink],
                ..big.clone()
            };
            if membership(&h, &small) {
                prop_assert!(membership(&h, &big));
            }
        }
    }
}

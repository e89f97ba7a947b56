//! Wall/piston interaction profiles `kappa`, their inverses, and the scaled
//! potentials `kappa_delta(x) = kappa(x / delta)`.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::Side;

/// Profile of the soft-core interaction. `kappa` vanishes on `[1, inf)`,
/// is strictly decreasing on `[0, 1)`, and has barrier height `kappa(0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `kappa(u) = (1 - u)^3` on `[0, 1]`, zero beyond.
    Cubic,
    Tabulated(Arc<TabulatedProfile>),
}

impl Profile {
    /// Resolve a profile by config name: `"cubic"` or `"table:<path>"`.
    pub fn from_name(name: &str) -> Result<Profile> {
        match name {
            "cubic" => Ok(Profile::Cubic),
            other => match other.strip_prefix("table:") {
                Some(path) => Ok(Profile::Tabulated(Arc::new(
                    TabulatedProfile::from_csv_path(path)?,
                ))),
                None => Err(Error::config(
                    "potential",
                    format!("unknown profile {other:?}"),
                )),
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Cubic => "cubic",
            Profile::Tabulated(_) => "tabulated",
        }
    }

    pub fn barrier(&self) -> f64 {
        match self {
            Profile::Cubic => 1.0,
            Profile::Tabulated(t) => t.kappa[0],
        }
    }

    pub fn kappa(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Cubic => {
                let r = 1.0 - u;
                r * r * r
            }
            Profile::Tabulated(t) => t.eval(u).0,
        }
    }

    pub fn kappa_prime(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Cubic => {
                let r = 1.0 - u;
                -3.0 * r * r
            }
            Profile::Tabulated(t) => t.eval(u).1,
        }
    }

    pub fn kappa_second(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Cubic => 6.0 * (1.0 - u),
            Profile::Tabulated(t) => t.eval(u).2,
        }
    }

    /// Inverse of `kappa` on `[0, kappa(0)]`.
    pub fn kappa_inv(&self, y: f64) -> f64 {
        match self {
            Profile::Cubic => 1.0 - y.max(0.0).cbrt(),
            Profile::Tabulated(t) => t.inverse(y),
        }
    }

    pub fn kappa_inv_prime(&self, y: f64) -> f64 {
        match self {
            Profile::Cubic => -1.0 / (3.0 * y.cbrt().powi(2)),
            Profile::Tabulated(t) => match t.tail_inverse(y) {
                Some((_, d1, _)) => -1.0 / d1,
                None => 1.0 / self.kappa_prime(self.kappa_inv(y)),
            },
        }
    }

    pub fn kappa_inv_second(&self, y: f64) -> f64 {
        match self {
            Profile::Cubic => 2.0 / (9.0 * y.cbrt().powi(5)),
            Profile::Tabulated(t) => {
                if let Some((_, d1, d2)) = t.tail_inverse(y) {
                    // kappa'(u) = -d1 and kappa''(u) = d2
                    return d2 / (d1 * d1 * d1);
                }
                let u = self.kappa_inv(y);
                let k1 = self.kappa_prime(u);
                -self.kappa_second(u) / (k1 * k1 * k1)
            }
        }
    }

    pub fn kappa_delta(&self, x: f64, delta: f64) -> f64 {
        self.kappa(x / delta)
    }

    pub fn kappa_delta_prime(&self, x: f64, delta: f64) -> f64 {
        self.kappa_prime(x / delta) / delta
    }

    /// Potential felt by a gas particle at `x` on `side` with the piston at `X`:
    /// `U1 = kappa_d(x) + kappa_d(X - x)`, `U2 = kappa_d(x - X) + kappa_d(1 - x)`.
    pub fn potential_u(&self, side: Side, x: f64, piston: f64, delta: f64) -> f64 {
        match side {
            Side::Left => self.kappa_delta(x, delta) + self.kappa_delta(piston - x, delta),
            Side::Right => self.kappa_delta(x - piston, delta) + self.kappa_delta(1.0 - x, delta),
        }
    }

    /// Penetration depth `a = delta * kappa^{-1}(E)` where the particle turns.
    pub fn turning_point(&self, energy: f64, delta: f64) -> f64 {
        delta * self.kappa_inv(energy)
    }
}

/// Profile given by samples `(u, kappa, kappa')` on `[0, 1]`, interpolated
/// with piecewise cubic Hermite polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    u: Vec<f64>,
    kappa: Vec<f64>,
    slope: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(u: Vec<f64>, kappa: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        let n = u.len();
        if n < 2 || kappa.len() != n || slope.len() != n {
            return Err(Error::Table(
                "need at least two rows of (u, kappa, kappa')".into(),
            ));
        }
        if u[0] != 0.0 || u[n - 1] != 1.0 {
            return Err(Error::Table("u must run from 0 to 1".into()));
        }
        if kappa[n - 1] != 0.0 {
            return Err(Error::Table("kappa(1) must be 0".into()));
        }
        for i in 0..n - 1 {
            let h = u[i + 1] - u[i];
            if !(h > 0.0) {
                return Err(Error::Table(format!(
                    "u not strictly increasing at row {i}"
                )));
            }
            if !(kappa[i + 1] < kappa[i]) {
                return Err(Error::Table(format!(
                    "kappa not strictly decreasing at row {i}"
                )));
            }
            if !(slope[i] < 0.0) {
                return Err(Error::Table(format!(
                    "kappa' must be negative below u = 1 (row {i})"
                )));
            }
            // Fritsch-Carlson: the Hermite segment is monotone iff the
            // scaled end slopes lie in the circle of radius 3.
            let secant = (kappa[i + 1] - kappa[i]) / h;
            let alpha = slope[i] / secant;
            let beta = slope[i + 1] / secant;
            if alpha * alpha + beta * beta > 9.0 {
                return Err(Error::Table(format!("segment {i} is not monotone")));
            }
        }
        if slope[n - 1] > 0.0 {
            return Err(Error::Table("kappa'(1) must be <= 0".into()));
        }
        Ok(TabulatedProfile { u, kappa, slope })
    }

    /// Parse CSV text with rows `u,kappa,kappa'`; a non-numeric first line is a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (mut u, mut k, mut d) = (Vec::new(), Vec::new(), Vec::new());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 3 => {
                    u.push(v[0]);
                    k.push(v[1]);
                    d.push(v[2]);
                }
                Err(_) if lineno == 0 => continue,
                _ => return Err(Error::Table(format!("bad row {}: {line:?}", lineno + 1))),
            }
        }
        Self::new(u, k, d)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    fn segment(&self, u: f64) -> usize {
        match self.u.partition_point(|&x| x <= u) {
            0 => 0,
            i => (i - 1).min(self.u.len() - 2),
        }
    }

    /// Value, first and second derivative at `u`.
    fn eval(&self, u: f64) -> (f64, f64, f64) {
        let i = self.segment(u);
        let h = self.u[i + 1] - self.u[i];
        let t = (u - self.u[i]) / h;
        let (p0, p1) = (self.kappa[i], self.kappa[i + 1]);
        let (m0, m1) = (self.slope[i] * h, self.slope[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let d1 = (6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1;
        let d2 = (12.0 * t - 6.0) * p0
            + (6.0 * t - 4.0) * m0
            + (-12.0 * t + 6.0) * p1
            + (6.0 * t - 2.0) * m1;
        (val, d1 / h, d2 / (h * h))
    }

    /// Last segment as `kappa(1 - r) = c1 r + c2 r^2 + c3 r^3` on `[0, h]`.
    fn tail_coefficients(&self) -> (f64, f64, f64, f64) {
        let n = self.u.len();
        let h = self.u[n - 1] - self.u[n - 2];
        let (p0, s0) = (self.kappa[n - 2], self.slope[n - 2]);
        let c1 = -self.slope[n - 1];
        // c2 h^2 + c3 h^3 = p0 - c1 h and 2 c2 h + 3 c3 h^2 = -s0 - c1
        let a = p0 - c1 * h;
        let b = -s0 - c1;
        let c3 = (b * h - 2.0 * a) / (h * h * h);
        let c2 = (a - c3 * h * h * h) / (h * h);
        (h, c1, c2, c3)
    }

    /// For `y` below the last interior knot: `(r, dkappa/dr, d2kappa/dr2)`
    /// with `kappa(1 - r) = y`, solved in `r` so tiny `y` keep full precision.
    fn tail_inverse(&self, y: f64) -> Option<(f64, f64, f64)> {
        let n = self.u.len();
        if !(y > 0.0 && y < self.kappa[n - 2]) {
            return None;
        }
        let (h, c1, c2, c3) = self.tail_coefficients();
        let f = |r: f64| r * (c1 + r * (c2 + r * c3));
        let df = |r: f64| c1 + r * (2.0 * c2 + 3.0 * r * c3);
        let (mut lo, mut hi) = (0.0, h);
        // leading-order start: the lowest nonzero power dominates
        let mut r = if c1 > 0.0 {
            y / c1
        } else if c2 > 0.0 {
            (y / c2).sqrt()
        } else {
            (y / c3).cbrt()
        };
        if !(r > lo && r < hi) {
            r = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let res = f(r) - y;
            if res.abs() <= 1e-15 * y {
                break;
            }
            if res > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let d = df(r);
            let newton = r - res / d;
            r = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        Some((r, df(r), 2.0 * c2 + 6.0 * c3 * r))
    }

    fn inverse(&self, y: f64) -> f64 {
        let n = self.u.len();
        if y <= 0.0 {
            return 1.0;
        }
        if y >= self.kappa[0] {
            return 0.0;
        }
        if let Some((r, _, _)) = self.tail_inverse(y) {
            return 1.0 - r;
        }
        // kappa is decreasing: find i with kappa[i] >= y > kappa[i+1]
        let i = self
            .kappa
            .partition_point(|&k| k >= y)
            .saturating_sub(1)
            .min(n - 2);
        let (mut lo, mut hi) = (self.u[i], self.u[i + 1]);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (k, dk, _) = self.eval(x);
            let r = k - y;
            if r.abs() <= 1e-15 * y {
                break;
            }
            if r > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - r / dk;
            x = if dk < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        x
    }
}

//! Dormand-Prince 5(4) with step-size control and the standard fourth-order
//! continuous extension.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

impl Segment {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}

/// Discrete steps plus a dense interpolant on `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    segments: Vec<Segment>,
}

impl Solution {
    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("non-empty")
    }

    pub fn dim(&self) -> usize {
        self.y[0].len()
    }

    /// Dense evaluation; clamps to the covered interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.segments.is_empty() || t <= self.t_start() {
            out.copy_from_slice(&self.y[0]);
            return;
        }
        if t >= self.t_end() {
            out.copy_from_slice(self.y.last().expect("non-empty"));
            return;
        }
        let i = self
            .t
            .partition_point(|&s| s <= t)
            .saturating_sub(1)
            .min(self.segments.len() - 1);
        self.segments[i].eval_into(t, out);
    }

    /// Drop everything after `t` (used when integration had to stop early).
    fn truncate_at_step(&mut self, n_steps: usize) {
        self.t.truncate(n_steps + 1);
        self.y.truncate(n_steps + 1);
        self.segments.truncate(n_steps);
    }
}

fn axpy(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Outcome of an integration that may stop early when the right-hand side
/// fails (e.g. after the state leaves the domain where it is defined).
#[derive(Debug)]
pub struct Integration {
    pub solution: Solution,
    /// The error that stopped integration before `t_end`, if any.
    pub stopped_by: Option<Error>,
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end`.
pub fn dopri5<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Integration>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let dir = (t_end - t0).signum();
    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        segments: Vec::new(),
    };
    if t_end == t0 {
        return Ok(Integration {
            solution: sol,
            stopped_by: None,
        });
    }

    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut y = y0.to_vec();
    let mut t = t0;
    f(t, &y, &mut k[0])?;

    let scale =
        |y0: &[f64], y1: &[f64], i: usize| opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());

    let mut h = match opts.h_init {
        Some(h) => h.abs() * dir,
        None => {
            let d0 = (y
                .iter()
                .enumerate()
                .map(|(i, v)| (v / scale(&y, &y, i)).powi(2))
                .sum::<f64>()
                / n as f64)
                .sqrt();
            let d1 = (k[0]
                .iter()
                .enumerate()
                .map(|(i, v)| (v / scale(&y, &y, i)).powi(2))
                .sum::<f64>()
                / n as f64)
                .sqrt();
            let h0 = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            };
            h0.min((t_end - t0).abs()) * dir
        }
    };

    let mut steps = 0usize;
    let mut rejected_last = false;
    while (t_end - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow { tau: t, h });
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let stage = (|| -> Result<()> {
            let (k1, rest) = k.split_at_mut(1);
            let k1 = &k1[0];
            axpy(&mut ytmp, &y, h, &[(A21, k1)]);
            f(t + C2 * h, &ytmp, &mut rest[0])?;
            axpy(&mut ytmp, &y, h, &[(A31, k1), (A32, &rest[0])]);
            f(t + C3 * h, &ytmp, &mut rest[1])?;
            axpy(
                &mut ytmp,
                &y,
                h,
                &[(A41, k1), (A42, &rest[0]), (A43, &rest[1])],
            );
            f(t + C4 * h, &ytmp, &mut rest[2])?;
            axpy(
                &mut ytmp,
                &y,
                h,
                &[(A51, k1), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])],
            );
            f(t + C5 * h, &ytmp, &mut rest[3])?;
            axpy(
                &mut ytmp,
                &y,
                h,
                &[
                    (A61, k1),
                    (A62, &rest[0]),
                    (A63, &rest[1]),
                    (A64, &rest[2]),
                    (A65, &rest[3]),
                ],
            );
            f(t + h, &ytmp, &mut rest[4])?;
            axpy(
                &mut ynew,
                &y,
                h,
                &[
                    (A71, k1),
                    (A73, &rest[1]),
                    (A74, &rest[2]),
                    (A75, &rest[3]),
                    (A76, &rest[4]),
                ],
            );
            f(t + h, &ynew, &mut rest[5])?;
            Ok(())
        })();
        if let Err(e) = stage {
            // the trial step stepped out of the domain of f; shrink and retry
            if h.abs() > opts.h_min * 1e3 {
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            let steps_done = sol.segments.len();
            sol.truncate_at_step(steps_done);
            return Ok(Integration {
                solution: sol,
                stopped_by: Some(e),
            });
        }

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i]);
            let s = scale(&y, &ynew, i);
            err += (e / s).powi(2);
        }
        let err = (err / n as f64).sqrt();

        if err <= 1.0 {
            let mut rcont: [Vec<f64>; 5] = Default::default();
            rcont[0] = y.clone();
            rcont[1] = (0..n).map(|i| ynew[i] - y[i]).collect();
            rcont[2] = (0..n).map(|i| h * k[0][i] - rcont[1][i]).collect();
            rcont[3] = (0..n)
                .map(|i| rcont[1][i] - h * k[6][i] - rcont[2][i])
                .collect();
            rcont[4] = (0..n)
                .map(|i| {
                    h * (D1 * k[0][i]
                        + D3 * k[2][i]
                        + D4 * k[3][i]
                        + D5 * k[4][i]
                        + D6 * k[5][i]
                        + D7 * k[6][i])
                })
                .collect();
            sol.segments.push(Segment { t0: t, h, rcont });
            t += h;
            y.copy_from_slice(&ynew);
            sol.t.push(t);
            sol.y.push(y.clone());
            let k7 = k[6].clone();
            k[0].copy_from_slice(&k7);
            steps += 1;
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= if rejected_last { fac.min(1.0) } else { fac };
            rejected_last = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            rejected_last = true;
        }
        if h.abs() < opts.h_min {
            return Err(Error::StepUnderflow { tau: t, h });
        }
    }
    Ok(Integration {
        solution: sol,
        stopped_by: None,
    })
}

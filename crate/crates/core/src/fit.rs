//! Least-squares fits used to read convergence orders off error tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope window accepted as first order.
pub const SLOPE_WINDOW: [f64; 2] = [0.7, 1.3];

/// Result of fitting `log y = intercept + slope * log x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(x, y)` pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
    pub window: [f64; 2],
}

impl SlopeFit {
    pub fn within_window(&self) -> bool {
        self.slope >= self.window[0] && self.slope <= self.window[1]
    }

    /// Fitted constant `C` in `y ~ C x^slope`.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit {
            need: 2,
            got: n.min(y.len()),
        });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit { need: 2, got: 1 });
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Log-log slope through positive points.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .collect();
    if usable.len() < 2 {
        return Err(Error::Fit {
            need: 2,
            got: usable.len(),
        });
    }
    let lx: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let (intercept, slope) = linear_fit(&lx, &ly)?;
    Ok(SlopeFit {
        slope,
        intercept,
        points: usable,
        window: SLOPE_WINDOW,
    })
}

/// Points used for a convergence slope: the three smallest `x` when the grid
/// spans more than 1.5 decades, otherwise all of them.
pub fn asymptotic_points(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return sorted,
    };
    if lo > 0.0 && (hi / lo).log10() > 1.5 && sorted.len() > 3 {
        sorted.truncate(3);
    }
    sorted
}

/// Convergence slope of `y` against `x` using [`asymptotic_points`].
pub fn convergence_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    loglog_fit(&asymptotic_points(points))
}

/// Slope of the part of `y` above `floor`: fits `log(y - floor)` on the
/// points where `y >= 2 floor`, so the floor is at most half the signal.
pub fn slope_above_floor(points: &[(f64, f64)], floor: f64) -> Result<SlopeFit> {
    let lifted: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, y)| y >= 2.0 * floor)
        .map(|&(x, y)| (x, y - floor))
        .collect();
    loglog_fit(&lifted)
}

/// Least squares `z = a x + b y` without intercept; returns `(a, b)`.
pub fn two_variable_fit(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Fit {
            need: 2,
            got: points.len(),
        });
    }
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, z) in points {
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * z;
        syz += y * z;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() <= 1e-14 * sxx * syy {
        return Err(Error::Fit { need: 2, got: 1 });
    }
    Ok(((sxz * syy - syz * sxy) / det, (syz * sxx - sxz * sxy) / det))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01]
            .iter()
            .map(|&e| (e, 3.0 * e))
            .collect();
        let f = loglog_fit(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.constant() - 3.0).abs() < 1e-10);
        assert!(f.within_window());
    }

    #[test]
    fn asymptotic_selection() {
        let short: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01, 0.005]
            .iter()
            .map(|&e| (e, e))
            .collect();
        assert_eq!(asymptotic_points(&short).len(), 5);
        let long: Vec<(f64, f64)> = [0.5, 0.1, 0.05, 0.01, 0.005]
            .iter()
            .map(|&e| (e, e))
            .collect();
        let sel = asymptotic_points(&long);
        assert_eq!(
            sel.iter().map(|p| p.0).collect::<Vec<_>>(),
            vec![0.005, 0.01, 0.05]
        );
    }

    #[test]
    fn floor_is_removed() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&d| (d, 0.01 + 2.0 * d))
            .collect();
        let f = slope_above_floor(&pts, 0.01).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        let raw = loglog_fit(&pts).unwrap();
        assert!(raw.slope < 0.9);
    }

    #[test]
    fn two_variables() {
        let mut pts = Vec::new();
        for &e in &[0.1, 0.02, 0.005] {
            for &d in &[0.1, 0.05, 0.025] {
                pts.push((e, d, 2.0 * e + 0.5 * d));
            }
        }
        let (a, b) = two_variable_fit(&pts).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(loglog_fit(&[(1.0, 1.0)]), Err(Error::Fit { .. })));
        assert!(matches!(
            loglog_fit(&[(1.0, 1.0), (2.0, 0.0)]),
            Err(Error::Fit { need: 2, got: 1 })
        ));
    }
}

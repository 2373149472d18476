//! Even threshold polynomials in the Chebyshev basis, built from a smoothed
//! (error-function) step and truncated to the smallest even degree that meets
//! the band contract.

use serde::Serialize;
use libm::{erf, erfc};

use crate::error::{QtdaError, Result};

/// Empirical constant in `degree <= C * (1/w) * ln(1/eps)`, checked over a
/// (w, eps) grid by the test suite.
pub const DEGREE_CONSTANT: f64 = 2.5;

/// Largest degree bound accepted before a band is reported infeasible; past
/// this the dense Chebyshev transform dominates the run time.
pub const MAX_DEGREE: f64 = 12_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// ≈1 near zero, ≈0 beyond the band.
    LowPass,
    /// ≈0 near zero, ≈1 beyond the band.
    HighPass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdPolynomial {
    /// Chebyshev coefficients a_0..a_n (odd entries are zero).
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
    pub eps: f64,
    pub orientation: Orientation,
}

impl ThresholdPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Clenshaw evaluation of Σ a_n T_n(x).
    pub fn eval(&self, x: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &a in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + a;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
    }

    /// Ideal step this polynomial approximates (0.5 inside the band).
    pub fn target(&self, x: f64) -> f64 {
        let ax = x.abs();
        let high = if ax >= self.center + self.half_width {
            1.0
        } else if ax <= self.center - self.half_width {
            0.0
        } else {
            0.5
        };
        match self.orientation {
            Orientation::HighPass => high,
            Orientation::LowPass => 1.0 - high,
        }
    }

    pub fn in_band(&self, x: f64) -> bool {
        let ax = x.abs();
        ax > self.center - self.half_width && ax < self.center + self.half_width
    }

    /// Largest |P − step| over an evenly spaced grid on [0, 1], band excluded.
    pub fn band_error(&self, grid_points: usize) -> f64 {
        let mut worst = 0.0f64;
        for g in 0..grid_points {
            let x = g as f64 / (grid_points - 1) as f64;
            if self.in_band(x) {
                continue;
            }
            worst = worst.max((self.eval(x) - self.target(x)).abs());
        }
        worst
    }

    /// max |P(x)| over an evenly spaced grid on [−1, 1].
    pub fn sup_norm(&self, grid_points: usize) -> f64 {
        (0..grid_points)
            .map(|g| -1.0 + 2.0 * g as f64 / (grid_points - 1) as f64)
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }
}

/// Inverse of erfc on (0, 1] by bisection; erfc is monotone there.
fn erfc_inv(y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erfc(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Chebyshev coefficients of `f` from `m` Chebyshev–Gauss nodes, up to `n_max`.
fn chebyshev_coeffs(f: impl Fn(f64) -> f64, m: usize, n_max: usize) -> Vec<f64> {
    // cos(nθ_j) = cos(π·(n(2j+1) mod 4m) / 2m); a table avoids recurrence drift.
    let period = 4 * m;
    let table: Vec<f64> = (0..period)
        .map(|t| (std::f64::consts::PI * t as f64 / (2 * m) as f64).cos())
        .collect();
    let vals: Vec<f64> = (0..m).map(|j| f(table[2 * j + 1])).collect();
    let scale = 2.0 / m as f64;
    let mut coeffs: Vec<f64> = (0..=n_max)
        .map(|n| {
            let mut acc = 0.0;
            if n % 2 == 1 {
                return 0.0;
            }
            let mut t = n % period;
            let step = (2 * n) % period;
            for v in &vals {
                acc += v * table[t];
                t += step;
                if t >= period {
                    t -= period;
                }
            }
            acc * scale
        })
        .collect();
    coeffs[0] *= 0.5;
    coeffs
}

/// Build the even polynomial for a threshold at `center` with transition
/// half-width `half_width` and sup error `eps` outside the band.
pub fn threshold_polynomial(center: f64, half_width: f64, eps: f64, orientation: Orientation) -> Result<ThresholdPolynomial> {
    if !(half_width > 0.0 && center > 0.0 && half_width < center) {
        return Err(QtdaError::Infeasible(format!(
            "threshold band needs 0 < w < c (got c = {center}, w = {half_width})"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(QtdaError::InvalidArgument(format!("eps must be positive (got {eps})")));
    }
    if center - half_width >= 1.0 {
        return Err(QtdaError::Infeasible(format!(
            "threshold band [{}, {}] lies outside [0, 1]",
            center - half_width,
            center + half_width
        )));
    }
    if eps >= 0.5 {
        return Ok(ThresholdPolynomial {
            coeffs: vec![0.5],
            center,
            half_width,
            eps,
            orientation,
        });
    }
    // Budget: eps/2 for the smoothed step, eps/16 for truncation, eps/8 for
    // the affine squeeze that keeps |P| <= 1.
    let kappa = erfc_inv(eps / 2.0) / half_width;
    let high = move |x: f64| 1.0 - 0.5 * (erf(kappa * (x + center)) - erf(kappa * (x - center)));
    let tau = eps / 8.0;
    let bound = degree_bound(half_width, eps);
    if bound > MAX_DEGREE {
        return Err(QtdaError::Infeasible(format!(
            "degree bound {bound:.0} exceeds the cap {MAX_DEGREE:.0} (w = {half_width:e}, eps = {eps:e})"
        )));
    }
    let estimate = 1.2 * bound;
    let mut m = (estimate.ceil() as usize).max(64).next_power_of_two();
    let (coeffs, noise) = loop {
        let c = chebyshev_coeffs(high, m, m - 1);
        // Resolved once the last quarter sits at roundoff or below the budget.
        let noise = c[3 * m / 4..].iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
        if noise <= (tau / m as f64).max(64.0 * f64::EPSILON) || m >= 1 << 16 {
            break (c, noise);
        }
        m *= 2;
    };
    // Smallest even degree whose discarded tail is within tau / 2; entries
    // at the roundoff level are not counted.
    let floor = 4.0 * noise;
    let mut tail = 0.0;
    let mut degree = 0;
    for n in (0..coeffs.len()).rev() {
        let a = coeffs[n].abs();
        if a <= floor {
            continue;
        }
        if tail + a > tau / 2.0 {
            degree = n;
            break;
        }
        tail += a;
    }
    if degree % 2 == 1 {
        degree += 1;
    }
    let mut kept: Vec<f64> = coeffs[..=degree.min(coeffs.len() - 1)].to_vec();
    for (n, a) in kept.iter_mut().enumerate() {
        if n % 2 == 1 {
            *a = 0.0;
        }
    }
    let squeeze = 1.0 + 2.0 * tau;
    for a in kept.iter_mut() {
        *a /= squeeze;
    }
    kept[0] += tau / squeeze;
    if orientation == Orientation::LowPass {
        for a in kept.iter_mut() {
            *a = -*a;
        }
        kept[0] += 1.0;
    }
    Ok(ThresholdPolynomial {
        coeffs: kept,
        center,
        half_width,
        eps,
        orientation,
    })
}

/// The degree bound C·(1/w)·ln(1/ε) with [`DEGREE_CONSTANT`].
pub fn degree_bound(half_width: f64, eps: f64) -> f64 {
    DEGREE_CONSTANT / half_width * (1.0 / eps).ln().max(std::f64::consts::LN_2)
}

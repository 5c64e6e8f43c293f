//! Least-squares fit of `R = a/q + b` to a resistance trace.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::trace::ExperimentTrace;
use crate::error::{Error, Result};

/// Fill fraction below which a sample counts as unsaturated.
pub const UNSATURATED_FILL: f64 = 0.1;

/// Relative size of the `a/q` term below which the fit is flagged
/// degenerate.
pub const DEGENERATE_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Flux-constant estimate. Equal to `a`, which for a noiseless trace is
    /// `l_x * l_y / mu_e`.
    pub k_fit: f64,
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    /// `R_fit - R` at each used sample, in ohm, on the corrected resistance.
    pub residuals: Vec<f64>,
    pub samples_used: usize,
    /// Set when the data carries no `1/q` component.
    pub degenerate: bool,
}

/// Fits `R' = a/q + b`, where `R' = 1/(1/R - g0)` removes the parallel
/// baseline conductance. `g0` comes from the `g0_S` metadata entry (zero when
/// absent). When `q_max_C` is recorded only samples with `q < 0.1 q_max`
/// are used; samples with `q <= 0` are always skipped.
pub fn fit_k_model(trace: &ExperimentTrace) -> Result<FitResult> {
    let q = trace.require("q_C")?;
    let r = trace.require("R_ohm")?;
    let g0 = trace.get_meta_number("g0_S").unwrap_or(0.0);
    let q_cap = trace
        .get_meta_number("q_max_C")
        .map_or(f64::INFINITY, |qm| UNSATURATED_FILL * qm);

    let (xs, ys): (Vec<f64>, Vec<f64>) = q
        .iter()
        .zip(r)
        .filter(|&(&q, &r)| q > 0.0 && q < q_cap && r.is_finite() && r > 0.0 && 1.0 / r - g0 > 0.0)
        .map(|(&q, &r)| (1.0 / q, 1.0 / (1.0 / r - g0)))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientSamples { found: xs.len() });
    }

    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        // Every sample at the same charge: nothing separates a from b.
        return Ok(FitResult {
            k_fit: 0.0,
            a: 0.0,
            b: y_mean,
            r_squared: 0.0,
            residuals: ys.iter().map(|y| y_mean - y).collect(),
            samples_used: xs.len(),
            degenerate: true,
        });
    }
    let a = sxy / sxx;
    let b = y_mean - a * x_mean;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b - y).collect();
    let ss_res: f64 = residuals.iter().map(|e| e * e).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let degenerate = libm::fabs(a * x_mean) <= DEGENERATE_RATIO * libm::fabs(y_mean) || syy == 0.0;
    Ok(FitResult {
        k_fit: a,
        a,
        b,
        r_squared,
        residuals,
        samples_used: xs.len(),
        degenerate,
    })
}

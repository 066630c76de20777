//! Recovery error, PSNR and convergence-rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{RcurcError, Result};
use crate::linalg::DenseMatrix;

/// `||x_hat - x_true||_F / ||x_true||_F`.
pub fn recovery_error(x_hat: &DenseMatrix, x_true: &DenseMatrix) -> Result<f64> {
    let norm = x_true.frob_norm();
    if norm == 0.0 {
        return Err(RcurcError::arg("recovery error undefined for a zero reference"));
    }
    Ok(x_hat.sub(x_true)?.frob_norm() / norm)
}

/// Peak value for [`psnr`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Peak {
    /// Largest absolute entry of the reference.
    #[default]
    Auto,
    Value(f64),
}

impl std::str::FromStr for Peak {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Peak::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Peak::Value(v)),
            _ => Err(format!("peak must be \"auto\" or a positive number, got {s:?}")),
        }
    }
}

/// `10 log10(peak^2 / MSE)` in dB, with the MSE over all entries.
/// Identical inputs give `f64::INFINITY`.
pub fn psnr(reference: &DenseMatrix, estimate: &DenseMatrix, peak: Peak) -> Result<f64> {
    let n = reference.rows() * reference.cols();
    let sq = reference.sub(estimate)?.frob_norm().powi(2);
    if n == 0 {
        return Err(RcurcError::arg("PSNR of an empty matrix"));
    }
    let mse = sq / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = match peak {
        Peak::Auto => reference.max_abs(),
        Peak::Value(p) => p,
    };
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    /// Least-squares slope of `ln e_k` against `k`.
    pub slope: f64,
    /// Coefficient of determination of the fit, in `[0, 1]`.
    pub r2: f64,
    pub iters_used: usize,
}

/// Fits `ln e_k = a + slope * k` over the leading run of positive, finite
/// errors. A trace with no variation in `ln e_k` reports `r2 = 0`.
pub fn fit_linear_rate(trace: &[(usize, f64)]) -> Result<ConvergenceFit> {
    let points: Vec<(f64, f64)> = trace
        .iter()
        .take_while(|(_, e)| *e > 0.0 && e.is_finite())
        .map(|&(k, e)| (k as f64, e.ln()))
        .collect();
    if points.len() < 2 {
        return Err(RcurcError::arg(format!(
            "need at least 2 positive errors to fit a rate, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_k = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut skk, mut skl, mut sll) = (0.0, 0.0, 0.0);
    for &(k, l) in &points {
        let (dk, dl) = (k - mean_k, l - mean_l);
        skk += dk * dk;
        skl += dk * dl;
        sll += dl * dl;
    }
    if skk == 0.0 {
        return Err(RcurcError::arg("iteration indices do not vary"));
    }
    let slope = skl / skk;
    let r2 = if sll == 0.0 {
        0.0
    } else {
        (skl * skl / (skk * sll)).clamp(0.0, 1.0)
    };
    Ok(ConvergenceFit {
        slope,
        r2,
        iters_used: points.len(),
    })
}

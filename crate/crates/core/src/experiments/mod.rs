//! Empirical norm estimates, δ-scaling fits and the sharpness experiment.

pub mod bessel;
pub mod counterexample;
pub mod norms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bessel::{bessel_j, kernel_at_origin, kernel_closed_form};
pub use counterexample::{
    counterexample_pairing, necessary_exponent_fit, pairing_scan, CounterexampleConfig, NecessaryFit, Pairing, PairingMethod,
};

/// Minimum number of points in a log–log fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares line through `(log parameter, log value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    /// False when any input behind a point was flagged.
    pub reliable: bool,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Domain("non-finite point in power-law fit".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power-law fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        points: points.to_vec(),
        slope,
        intercept,
        max_residual,
        reliable: true,
    })
}

//! Estimators computed from a [`PathBundle`].

use super::{simulate_paths, McEstimate, PathBundle, SimConfig, ZeroPolicy};
use crate::error::{Error, Result};
use crate::params::{derive_constants, ModelParams};

/// Monte Carlo estimate of
/// `E[int_t^{t_end} (f(c*, w) + penalty) dr + w(t_end, X, Y)]`,
/// which equals `w(t, x, y)` for the optimal bundle.
pub fn feynman_kac_estimate(bundle: &PathBundle) -> Result<McEstimate> {
    if bundle.terminal_value.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain(
            "bundle carries no value information; simulate with a value-aware policy".into(),
        ));
    }
    let per_path: Vec<f64> = bundle
        .running_reward
        .iter()
        .zip(&bundle.terminal_value)
        .map(|(r, w)| r + w)
        .collect();
    let est = McEstimate::from_samples(&bundle.grouped(&per_path));
    if !est.mean.is_finite() {
        return Err(Error::InstabilityDetected {
            t: *bundle.record_times.last().unwrap_or(&f64::NAN),
            y: f64::NAN,
            value: est.mean,
        });
    }
    Ok(est)
}

/// Mean and standard error of the terminal `int w_z^T Lambda dB`.
pub fn martingale_diagnostic(bundle: &PathBundle) -> McEstimate {
    McEstimate::from_samples(&bundle.grouped(&bundle.stochastic_integral))
}

/// `E[X^q(1-gamma)]` at the last record.
pub fn wealth_moment(bundle: &PathBundle, exponent: f64) -> McEstimate {
    let last = bundle.n_records() - 1;
    let per_path: Vec<f64> = (0..bundle.n_paths)
        .map(|i| bundle.x_at(i, last).powf(exponent))
        .collect();
    McEstimate::from_samples(&bundle.grouped(&per_path))
}

/// Fraction of steps at which the variance exceeded its comparison process.
pub fn comparison_violation_fraction(bundle: &PathBundle) -> f64 {
    bundle.comparison_violations as f64 / (bundle.n_paths as f64 * bundle.n_steps.max(1) as f64)
}

/// `E[Y_s] = y e^{-m (s-t)} + (nu/m)(1 - e^{-m (s-t)})`.
pub fn cir_mean(y0: f64, nu: f64, m: f64, elapsed: f64) -> f64 {
    let decay = (-m * elapsed).exp();
    y0 * decay + nu / m * (1.0 - decay)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirMeanRow {
    pub s: f64,
    pub estimate: McEstimate,
    pub exact: f64,
}

/// Simulates the undistorted variance with zero controls from `(0, p.y0)`
/// and compares the sample mean with the exact mean at each time in `at`.
///
/// The factor dynamics do not involve the horizon, so the horizon is moved
/// past the last requested time.
pub fn cir_mean_check(p: &ModelParams, at: &[f64], n_paths: usize, dt: f64, seed: u64) -> Result<Vec<CirMeanRow>> {
    let s_max = at.iter().copied().fold(0.0, f64::max);
    let q = ModelParams {
        a: 0.0,
        a1: 0.0,
        t0: 0.0,
        horizon: p.horizon.max(s_max) + 1.0,
        ..*p
    };
    let c = derive_constants(&q)?;
    let stride = (1.0 / dt).round() as usize;
    let mut cfg = SimConfig::new(n_paths, dt, seed, 0.0, s_max);
    cfg.record_stride = stride.max(1);
    cfg.antithetic = false;
    let bundle = simulate_paths(&cfg, &ZeroPolicy, &q, &c, None)?;
    at.iter()
        .map(|&s| {
            let r = bundle
                .record_times
                .iter()
                .position(|&t| (t - s).abs() < 1e-9)
                .ok_or_else(|| Error::Domain(format!("time {s} is not on the record grid")))?;
            let ys: Vec<f64> = (0..bundle.n_paths).map(|i| bundle.y_at(i, r)).collect();
            Ok(CirMeanRow {
                s,
                estimate: McEstimate::from_samples(&ys),
                exact: cir_mean(q.y0, q.nu, q.m, s),
            })
        })
        .collect()
}

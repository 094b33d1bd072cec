//! Classical RK4 for the Riccati system, integrated backward from `s`.
//!
//! Coefficients are rebuilt from the raw parameters and `k` only, so a slip in
//! the derived `b`, `kappa` or level rate shows up as a disagreement with the
//! closed form.

use crate::error::{Error, Result};
use crate::params::{DerivedConstants, ModelParams};

/// `A` and `B` at the nodes of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPath {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Right-hand sides of the system in `tau = s - t`:
/// `dB/dtau = -kappa B - beta^2 B^2 / 2 + b0`, `dA/dtau = level - nu B`.
#[derive(Debug, Clone, Copy)]
struct System {
    kappa: f64,
    half_beta_sq: f64,
    b0: f64,
    nu: f64,
    level: f64,
}

impl System {
    fn from_params(p: &ModelParams, k: f64) -> Self {
        let ga = p.gamma + p.a;
        let theta = (1.0 - p.gamma) / (1.0 - 1.0 / pinned_psi(p));
        Self {
            kappa: p.m - (1.0 - p.gamma - p.a) / ga * p.rho * p.lambda_bar * p.beta_bar,
            half_beta_sq: 0.5 * p.beta_bar * p.beta_bar,
            b0: -(1.0 - p.gamma) * p.lambda_bar * p.lambda_bar / (2.0 * k * ga),
            nu: p.nu,
            level: ((1.0 - p.gamma) * p.r - p.delta * theta) / k,
        }
    }

    fn rhs(&self, _a: f64, b: f64) -> (f64, f64) {
        (
            self.level - self.nu * b,
            self.b0 - self.kappa * b - self.half_beta_sq * b * b,
        )
    }

    fn step(&self, a: f64, b: f64, h: f64) -> (f64, f64) {
        let (ka1, kb1) = self.rhs(a, b);
        let (ka2, kb2) = self.rhs(a + 0.5 * h * ka1, b + 0.5 * h * kb1);
        let (ka3, kb3) = self.rhs(a + 0.5 * h * ka2, b + 0.5 * h * kb2);
        let (ka4, kb4) = self.rhs(a + h * ka3, b + h * kb3);
        (
            a + h / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4),
            b + h / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4),
        )
    }
}

/// EIS pinned by `(gamma, a, rho)`, recomputed here from the parameters.
fn pinned_psi(p: &ModelParams) -> f64 {
    let ga = p.gamma + p.a;
    let s = 1.0 - p.gamma - p.a;
    2.0 - p.gamma - p.a + s * s * p.rho * p.rho / ga
}

/// Integrates backward from `s_terminal` and records `(A, B)` at every node
/// of `t_grid` (ascending, inside `[0, s_terminal]`, uniform).
///
/// The step is the grid spacing; the gap between the last node and
/// `s_terminal` is covered with substeps no longer than that.
pub fn solve_riccati_ode(
    s_terminal: f64,
    t_grid: &[f64],
    p: &ModelParams,
    c: &DerivedConstants,
) -> Result<RiccatiPath> {
    let n = t_grid.len();
    if n == 0 {
        return Ok(RiccatiPath {
            t: vec![],
            a: vec![],
            b: vec![],
        });
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    if !(t_grid[0] >= 0.0) || !(t_grid[n - 1] <= s_terminal) {
        return Err(Error::Domain(format!("time grid must lie inside [0, {s_terminal}]")));
    }
    let h = if n > 1 {
        (t_grid[n - 1] - t_grid[0]) / (n - 1) as f64
    } else {
        1e-3
    };
    if h > 1e-2 {
        return Err(Error::StepTooLarge { step: h });
    }

    let sys = System::from_params(p, c.k);
    let mut a_out = vec![0.0; n];
    let mut b_out = vec![0.0; n];
    let (mut a, mut b) = (0.0, 0.0);
    let mut upper = s_terminal;
    for i in (0..n).rev() {
        let gap = upper - t_grid[i];
        if gap > 0.0 {
            let m = (gap / h * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let sub = gap / m as f64;
            for _ in 0..m {
                (a, b) = sys.step(a, b, sub);
            }
        }
        a_out[i] = a;
        b_out[i] = b;
        upper = t_grid[i];
    }
    Ok(RiccatiPath {
        t: t_grid.to_vec(),
        a: a_out,
        b: b_out,
    })
}

/// Uniform grid `start, start + h, ..., end` with `n` nodes.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => {
            let h = (end - start) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { end } else { start + h * i as f64 })
                .collect()
        }
    }
}

//! Crank-Nicolson solver for the linear parabolic equation
//!
//! ```text
//! u_t + H1(t, y) u + H2(t, y) u_y + beta(t, y)^2 u_yy / 2 + S = 0,   u(T, y) = u_T
//! ```
//!
//! on a uniform `(t, y)` grid, integrated backward from `T`. At `y = 0` the
//! diffusion is dropped and `u_y` uses the second-order one-sided stencil; at
//! `y_max` the solution is extrapolated linearly (`u_yy = 0`).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{DerivedConstants, ModelParams};

/// Coefficients of a one-factor model: excess return `lambda`, stock
/// volatility `sigma`, factor drift `alpha` and factor volatility `beta`.
pub trait CoefficientSet: Sync {
    fn lambda(&self, t: f64, y: f64) -> f64;
    fn sigma(&self, t: f64, y: f64) -> f64;
    fn alpha(&self, t: f64, y: f64) -> f64;
    fn beta(&self, t: f64, y: f64) -> f64;

    /// `lambda / sigma`. Override where both vanish together.
    fn market_price(&self, t: f64, y: f64) -> f64 {
        self.lambda(t, y) / self.sigma(t, y)
    }
}

/// `lambda = lambda_bar y`, `sigma = sqrt y`, `alpha = nu - m y`, `beta = beta_bar sqrt y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonCoefficients {
    pub lambda_bar: f64,
    pub nu: f64,
    pub m: f64,
    pub beta_bar: f64,
}

impl HestonCoefficients {
    pub fn heston_instance(p: &ModelParams) -> Self {
        Self {
            lambda_bar: p.lambda_bar,
            nu: p.nu,
            m: p.m,
            beta_bar: p.beta_bar,
        }
    }
}

impl CoefficientSet for HestonCoefficients {
    fn lambda(&self, _t: f64, y: f64) -> f64 {
        self.lambda_bar * y
    }
    fn sigma(&self, _t: f64, y: f64) -> f64 {
        y.max(0.0).sqrt()
    }
    fn alpha(&self, _t: f64, y: f64) -> f64 {
        self.nu - self.m * y
    }
    fn beta(&self, _t: f64, y: f64) -> f64 {
        self.beta_bar * y.max(0.0).sqrt()
    }
    fn market_price(&self, _t: f64, y: f64) -> f64 {
        self.lambda_bar * y.max(0.0).sqrt()
    }
}

/// Coefficients given by closures.
pub struct FnCoefficients<L, S, A, B> {
    pub lambda: L,
    pub sigma: S,
    pub alpha: A,
    pub beta: B,
}

impl<L, S, A, B> CoefficientSet for FnCoefficients<L, S, A, B>
where
    L: Fn(f64, f64) -> f64 + Sync,
    S: Fn(f64, f64) -> f64 + Sync,
    A: Fn(f64, f64) -> f64 + Sync,
    B: Fn(f64, f64) -> f64 + Sync,
{
    fn lambda(&self, t: f64, y: f64) -> f64 {
        (self.lambda)(t, y)
    }
    fn sigma(&self, t: f64, y: f64) -> f64 {
        (self.sigma)(t, y)
    }
    fn alpha(&self, t: f64, y: f64) -> f64 {
        (self.alpha)(t, y)
    }
    fn beta(&self, t: f64, y: f64) -> f64 {
        (self.beta)(t, y)
    }
}

/// Uniform `(t, y)` grid with a surface stored row-major by `(t, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeGrid {
    pub t_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl PdeGrid {
    pub const MIN_NODES: usize = 64;

    /// `n_t` nodes on `[t0, t1]` and `n_y` nodes on `[0, y_max]`, values zeroed.
    pub fn uniform(t0: f64, t1: f64, n_t: usize, y_max: f64, n_y: usize) -> Result<Self> {
        if n_t < Self::MIN_NODES || n_y < Self::MIN_NODES {
            return Err(Error::InvalidParams(format!(
                "PDE grid needs at least {} nodes per axis (got {n_t} x {n_y})",
                Self::MIN_NODES
            )));
        }
        if !(t1 > t0) || !(y_max > 0.0) {
            return Err(Error::InvalidParams(format!(
                "PDE grid needs t1 > t0 and y_max > 0 (t = [{t0}, {t1}], y_max = {y_max})"
            )));
        }
        Ok(Self {
            t_nodes: super::riccati_ode::uniform_grid(t0, t1, n_t),
            y_nodes: super::riccati_ode::uniform_grid(0.0, y_max, n_y),
            values: vec![0.0; n_t * n_y],
        })
    }

    /// Grid on `[0, T]` with `y_max` ten times the long-run variance.
    pub fn for_model(p: &ModelParams, n_t: usize, n_y: usize) -> Result<Self> {
        Self::uniform(0.0, p.horizon, n_t, 10.0 * p.nu / p.m, n_y)
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn n_y(&self) -> usize {
        self.y_nodes.len()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_y() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_y();
        &self.values[i * n..(i + 1) * n]
    }

    /// Largest `|u - f(t, y)| / |f(t, y)|` over nodes whose indices sit in the
    /// central `interior` fraction of both axes.
    pub fn max_relative_discrepancy<F>(&self, interior: f64, f: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let margin = (1.0 - interior) / 2.0;
        let range = |n: usize| {
            let last = (n - 1) as f64;
            let lo = (margin * last).ceil() as usize;
            let hi = ((1.0 - margin) * last).floor() as usize;
            lo..=hi
        };
        let cols = range(self.n_y());
        range(self.n_t())
            .into_par_iter()
            .map(|i| {
                let t = self.t_nodes[i];
                cols.clone()
                    .map(|j| {
                        let exact = f(t, self.y_nodes[j]);
                        ((self.value(i, j) - exact) / exact).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// A linear equation of the form solved by [`solve_linear_pde`].
pub struct LinearPde<'a> {
    /// `H1(t, y)`.
    pub potential: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// `H2(t, y)`.
    pub drift: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// `beta(t, y)^2`.
    pub diffusion_sq: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    pub source: f64,
    pub terminal: f64,
}

/// Tridiagonal rows `lower u[j-1] + diag u[j] + upper u[j+1]` for the
/// spatial operator at time `t`, plus the extra `u[2]` weight in row 0.
struct Operator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    row0_far: f64,
}

fn assemble(pde: &LinearPde, t: f64, y: &[f64], dy: f64) -> Operator {
    let n = y.len();
    let mut op = Operator {
        lower: vec![0.0; n],
        diag: vec![0.0; n],
        upper: vec![0.0; n],
        row0_far: 0.0,
    };
    for j in 0..n {
        let h1 = (pde.potential)(t, y[j]);
        let h2 = (pde.drift)(t, y[j]);
        if j == 0 {
            op.diag[0] = h1 - 1.5 * h2 / dy;
            op.upper[0] = 2.0 * h2 / dy;
            op.row0_far = -0.5 * h2 / dy;
        } else if j == n - 1 {
            op.lower[j] = -h2 / dy;
            op.diag[j] = h1 + h2 / dy;
        } else {
            let half_diff = 0.5 * (pde.diffusion_sq)(t, y[j]) / (dy * dy);
            op.lower[j] = half_diff - 0.5 * h2 / dy;
            op.diag[j] = h1 - 2.0 * half_diff;
            op.upper[j] = half_diff + 0.5 * h2 / dy;
        }
    }
    op
}

fn apply(op: &Operator, u: &[f64], out: &mut [f64]) {
    let n = u.len();
    out[0] = op.diag[0] * u[0] + op.upper[0] * u[1] + op.row0_far * u[2];
    for j in 1..n - 1 {
        out[j] = op.lower[j] * u[j - 1] + op.diag[j] * u[j] + op.upper[j] * u[j + 1];
    }
    out[n - 1] = op.lower[n - 1] * u[n - 2] + op.diag[n - 1] * u[n - 1];
}

/// Thomas algorithm; `a` sub-, `b` main, `c` super-diagonal.
fn solve_tridiagonal(a: &[f64], b: &mut [f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    for j in 1..n {
        let w = a[j] / b[j - 1];
        b[j] -= w * c[j - 1];
        d[j] -= w * d[j - 1];
    }
    d[n - 1] /= b[n - 1];
    for j in (0..n - 1).rev() {
        d[j] = (d[j] - c[j] * d[j + 1]) / b[j];
    }
}

/// Integrates `pde` backward over `grid`, filling `grid.values`.
pub fn solve_linear_pde(pde: &LinearPde, mut grid: PdeGrid) -> Result<PdeGrid> {
    let (n_t, n_y) = (grid.n_t(), grid.n_y());
    let dy = grid.y_nodes[1] - grid.y_nodes[0];
    let y = grid.y_nodes.clone();
    let mut u = vec![pde.terminal; n_y];
    grid.values[(n_t - 1) * n_y..].copy_from_slice(&u);

    let mut lu = vec![0.0; n_y];
    let mut lower = vec![0.0; n_y];
    let mut diag = vec![0.0; n_y];
    let mut upper = vec![0.0; n_y];
    for i in (0..n_t - 1).rev() {
        let (t_lo, t_hi) = (grid.t_nodes[i], grid.t_nodes[i + 1]);
        let dt = t_hi - t_lo;
        let op = assemble(pde, 0.5 * (t_lo + t_hi), &y, dy);

        // (I - dt L / 2) u^n = (I + dt L / 2) u^{n+1} + dt S
        apply(&op, &u, &mut lu);
        let mut rhs: Vec<f64> = u
            .iter()
            .zip(&lu)
            .map(|(v, l)| v + 0.5 * dt * l + dt * pde.source)
            .collect();
        for j in 0..n_y {
            lower[j] = -0.5 * dt * op.lower[j];
            diag[j] = 1.0 - 0.5 * dt * op.diag[j];
            upper[j] = -0.5 * dt * op.upper[j];
        }
        // Row 0 reaches u[2]; eliminate it with row 1.
        let far = -0.5 * dt * op.row0_far;
        if far != 0.0 {
            let w = far / upper[1];
            diag[0] -= w * lower[1];
            upper[0] -= w * diag[1];
            rhs[0] -= w * rhs[1];
        }
        solve_tridiagonal(&lower, &mut diag, &upper, &mut rhs);
        u = rhs;

        for (j, &v) in u.iter().enumerate() {
            if !v.is_finite() || v < -1e-8 {
                return Err(Error::InstabilityDetected {
                    t: t_lo,
                    y: y[j],
                    value: v,
                });
            }
        }
        grid.values[i * n_y..(i + 1) * n_y].copy_from_slice(&u);
    }
    Ok(grid)
}

/// `H1 = [(1-gamma) r + (1-gamma) lambda^2 / (2 (gamma+a) sigma^2) - delta theta] / k`.
fn potential<'a, C: CoefficientSet>(
    coeffs: &'a C,
    p: &ModelParams,
    c: &DerivedConstants,
) -> Box<dyn Fn(f64, f64) -> f64 + Sync + 'a> {
    let (g, a, r, delta, theta, k) = (p.gamma, p.a, p.r, p.delta, c.theta, c.k);
    Box::new(move |t, y| {
        let mp = coeffs.market_price(t, y);
        ((1.0 - g) * r + (1.0 - g) * mp * mp / (2.0 * (g + a)) - delta * theta) / k
    })
}

/// `H2 = ((1-gamma-a)/(gamma+a)) beta rho lambda / sigma + alpha`.
fn tilted_drift<'a, C: CoefficientSet>(coeffs: &'a C, p: &ModelParams) -> Box<dyn Fn(f64, f64) -> f64 + Sync + 'a> {
    let (g, a, rho) = (p.gamma, p.a, p.rho);
    Box::new(move |t, y| {
        (1.0 - g - a) / (g + a) * coeffs.beta(t, y) * rho * coeffs.market_price(t, y) + coeffs.alpha(t, y)
    })
}

/// Solves the equation for `g` with source `delta^psi` and terminal value
/// `epsilon^(1/k)`.
pub fn solve_g_pde<C: CoefficientSet>(
    coeffs: &C,
    grid: PdeGrid,
    p: &ModelParams,
    c: &DerivedConstants,
) -> Result<PdeGrid> {
    let pde = LinearPde {
        potential: potential(coeffs, p, c),
        drift: tilted_drift(coeffs, p),
        diffusion_sq: Box::new(|t, y| coeffs.beta(t, y).powi(2)),
        source: p.delta.powf(c.psi),
        terminal: p.epsilon.powf(1.0 / c.k),
    };
    solve_linear_pde(&pde, grid)
}

/// Solves the source-free equation for `h(., .; s)` with `h(s, y; s) = 1`.
/// The grid's last time node plays the role of `s`.
pub fn solve_h_pde<C: CoefficientSet>(
    coeffs: &C,
    grid: PdeGrid,
    p: &ModelParams,
    c: &DerivedConstants,
) -> Result<PdeGrid> {
    let pde = LinearPde {
        potential: potential(coeffs, p, c),
        drift: tilted_drift(coeffs, p),
        diffusion_sq: Box::new(|t, y| coeffs.beta(t, y).powi(2)),
        source: 0.0,
        terminal: 1.0,
    };
    solve_linear_pde(&pde, grid)
}

/// Closed form against Crank-Nicolson on an `n x n` grid and on the grid with
/// both steps halved, compared at the coarse nodes only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementStudy {
    pub coarse_error: f64,
    pub fine_error: f64,
}

impl RefinementStudy {
    pub fn ratio(&self) -> f64 {
        self.coarse_error / self.fine_error
    }
}

/// Runs the Heston `g` solve at `n` and `2n - 1` nodes per axis and measures
/// the largest relative gap to `exact` over the central `interior` fraction.
pub fn refinement_study<F>(
    p: &ModelParams,
    c: &DerivedConstants,
    n: usize,
    interior: f64,
    exact: F,
) -> Result<RefinementStudy>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let coeffs = HestonCoefficients::heston_instance(p);
    let coarse = solve_g_pde(&coeffs, PdeGrid::for_model(p, n, n)?, p, c)?;
    let fine = solve_g_pde(&coeffs, PdeGrid::for_model(p, 2 * n - 1, 2 * n - 1)?, p, c)?;
    let margin = (1.0 - interior) / 2.0;
    let last = (n - 1) as f64;
    let lo = (margin * last).ceil() as usize;
    let hi = ((1.0 - margin) * last).floor() as usize;
    let (ce, fe) = (lo..=hi)
        .into_par_iter()
        .map(|i| {
            let t = coarse.t_nodes[i];
            (lo..=hi).fold((0.0f64, 0.0f64), |(ce, fe), j| {
                let e = exact(t, coarse.y_nodes[j]);
                (
                    ce.max(((coarse.value(i, j) - e) / e).abs()),
                    fe.max(((fine.value(2 * i, 2 * j) - e) / e).abs()),
                )
            })
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(RefinementStudy {
        coarse_error: ce,
        fine_error: fe,
    })
}

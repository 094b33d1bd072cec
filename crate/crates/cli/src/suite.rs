//! Cross-checks of the closed form against its oracles, shared by the
//! `verify` command and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rzeh::oracles::{refinement_study, solve_riccati_ode, uniform_grid};
use rzeh::{HestonModel, Result};

/// Worst value of a check statistic and the `(t, y)` where it occurred
/// (`y` is NaN for checks without a variance coordinate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worst {
    pub value: f64,
    pub t: f64,
    pub y: f64,
}

impl Worst {
    fn none() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            t: f64::NAN,
            y: f64::NAN,
        }
    }

    /// Keeps the larger value; NaN counts as larger than anything.
    fn update(&mut self, value: f64, t: f64, y: f64) {
        if !self.value.is_nan() && (value.is_nan() || value > self.value) {
            *self = Self { value, t, y };
        }
    }
}

/// Closed-form `A`, `B` against RK4 on an `n x n` grid of `(t, s)` pairs
/// with `t <= s`, both ranging over `[t0, T]`. Errors are normalised as
/// `|diff| / (1 + |closed form|)`. Reports the worst error at `(t, s)`.
pub fn riccati_agreement(model: &HestonModel, n: usize) -> Result<Worst> {
    let p = model.params();
    // RK4 nodes: 11 steps per outer interval keeps the step below 1e-2 on a
    // ten-year horizon with 100 nodes.
    let per = ((p.horizon - p.t0) / (n - 1) as f64 / 1e-2).ceil().max(1.0) as usize;
    let fine = uniform_grid(p.t0, p.horizon, per * (n - 1) + 1);
    let mut worst = Worst::none();
    for j in 0..n {
        let s = fine[per * j];
        let path = solve_riccati_ode(s, &fine[..=per * j], p, model.consts())?;
        for i in 0..=j {
            let t = fine[per * i];
            let cf = model.riccati(t, s)?;
            let k = per * i;
            let ea = (path.a[k] - cf.a).abs() / (1.0 + cf.a.abs());
            let eb = (path.b[k] - cf.b).abs() / (1.0 + cf.b.abs());
            worst.update(ea.max(eb), t, s);
        }
    }
    Ok(worst)
}

/// Quadrature `g` against Crank-Nicolson on `n x n` nodes (central 80%) and
/// on the grid with both steps halved. Returns `(coarse error, ratio)`.
pub fn pde_agreement(model: &HestonModel, n: usize) -> Result<(f64, f64)> {
    let exact = |t: f64, y: f64| model.g(t, y).map(|g| g.g).unwrap_or(f64::NAN);
    let study = refinement_study(model.params(), model.consts(), n, 0.8, exact)?;
    if study.coarse_error.is_nan() || study.fine_error.is_nan() {
        return Err(rzeh::Error::Domain("closed form failed inside the PDE grid".into()));
    }
    Ok((study.coarse_error, study.ratio()))
}

/// Worst `|normalised HJBI residual|` over an `n x n` grid,
/// `t in [t0, T - 0.1]`, `y in [0.005, 0.09]`, at wealth `x0`.
pub fn hjbi_agreement(model: &HestonModel, n: usize) -> Result<Worst> {
    let p = model.params();
    let mut worst = Worst::none();
    for &t in &uniform_grid(p.t0, p.horizon - 0.1, n) {
        for &y in &uniform_grid(0.005, 0.09, n) {
            let r = model.hjbi_residual(t, p.x0, y)?;
            worst.update(r.normalized_residual.abs(), t, y);
        }
    }
    Ok(worst)
}

/// Largest saddle violation over `n` random states: the gain from moving
/// `(c, pi)` away from the optimum, or the loss from moving `v`, under
/// perturbations of size `step`. Non-positive when the saddle holds.
pub fn saddle_agreement(model: &HestonModel, n: usize, step: f64, seed: u64) -> Result<Worst> {
    let p = model.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Worst::none();
    for _ in 0..n {
        let t = rng.random_range(p.t0..p.horizon - 0.1);
        let x = rng.random_range(0.5..2.0);
        let y = rng.random_range(0.0025..0.25);
        let r = model.saddle_check(t, x, y, step)?;
        worst.update((-r.v_min_gain).max(r.u_max_gain), t, y);
    }
    Ok(worst)
}

/// Worst excess over each bound the closed form is known to satisfy;
/// a value `<= 0` means the bound holds everywhere on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// `max(-B, B - b/kappa)`.
    pub b: Worst,
    /// Distance outside `[-(b/kappa) nu T - |C| T, |C| T]`, `C` the level rate.
    pub a: Worst,
    /// Distance outside `[lambda_bar / (gamma + a), K_pi]`.
    pub pi: Worst,
    /// `c/x - (1/(T - t) + b y + nu b (T - t) / 2)`.
    pub cx: Worst,
}

impl BoundReport {
    pub fn rows(&self) -> [(&'static str, Worst); 4] {
        [
            ("bound_b", self.b),
            ("bound_a", self.a),
            ("bound_pi", self.pi),
            ("bound_cx", self.cx),
        ]
    }
}

/// Checks the Riccati, portfolio and consumption bounds at every `(t, y)`.
/// `A`, `B` are taken at `(t, T)`.
pub fn bound_invariants(model: &HestonModel, ts: &[f64], ys: &[f64]) -> Result<BoundReport> {
    let (p, c) = (model.params(), model.consts());
    let horizon = p.horizon;
    let level = c.level_rate.abs() * horizon;
    let (a_lo, a_hi) = (-c.b_bound() * p.nu * horizon - level, level);
    let pi_lo = p.lambda_bar / (p.gamma + p.a);
    let mut r = BoundReport {
        b: Worst::none(),
        a: Worst::none(),
        pi: Worst::none(),
        cx: Worst::none(),
    };
    for &t in ts {
        let rp = model.riccati(t, horizon)?;
        r.b.update((-rp.b).max(rp.b - c.b_bound()), t, f64::NAN);
        r.a.update((a_lo - rp.a).max(rp.a - a_hi), t, f64::NAN);
        let tau = horizon - t;
        for &y in ys {
            let s = model.strategy(t, 1.0, y)?;
            r.pi.update((pi_lo - s.pi_star).max(s.pi_star - c.k_pi), t, y);
            let cap = 1.0 / tau + c.b * y + 0.5 * p.nu * c.b * tau;
            r.cx.update(s.cx_star - cap, t, y);
        }
    }
    Ok(r)
}

//! Epstein-Zin aggregator, robustness penalty and the HJBI Hamiltonian, with
//! numerical checks that the closed form solves the dynamic programming
//! equation and is a saddle point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::closed_form::{eval_g, eval_g_t, optimal_strategy, EvalOptions, GTriple, HestonModel};
use crate::error::{Error, Result};
use crate::params::{DerivedConstants, ModelParams, PreferenceCase};

/// Epstein-Zin preferences `(gamma, delta, psi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsteinZin {
    pub gamma: f64,
    pub delta: f64,
    pub psi: f64,
}

impl EpsteinZin {
    pub fn from_model(p: &ModelParams, c: &DerivedConstants) -> Self {
        Self {
            gamma: p.gamma,
            delta: p.delta,
            psi: c.psi,
        }
    }

    pub fn theta(&self) -> f64 {
        (1.0 - self.gamma) / (1.0 - 1.0 / self.psi)
    }

    /// `f(c, v) = delta theta v [(c / ((1-gamma) v)^(1/(1-gamma)))^(1 - 1/psi) - 1]`.
    #[inline]
    pub fn f(&self, c: f64, v: f64) -> Result<f64> {
        let u = (1.0 - self.gamma) * v;
        if !(c > 0.0) || !(u > 0.0) {
            return Err(Error::Domain(format!(
                "aggregator needs c > 0 and (1-gamma) v > 0 (c = {c}, v = {v})"
            )));
        }
        Ok(self.f_log(c.ln(), u.ln(), v))
    }

    /// `f` from `ln c` and `ln((1-gamma) v)`, for callers that already hold
    /// the logarithms. Works in log form, which keeps the bracket accurate
    /// near the certainty equivalent.
    #[inline]
    pub fn f_log(&self, log_c: f64, log_scaled_v: f64, v: f64) -> f64 {
        let log_ratio = log_c - log_scaled_v / (1.0 - self.gamma);
        let bracket = ((1.0 - 1.0 / self.psi) * log_ratio).exp_m1();
        self.delta * self.theta() * v * bracket
    }

    /// `f` given the consumption term `(c / ((1-gamma) v)^(1/(1-gamma)))^(1 - 1/psi)`.
    #[inline]
    pub fn f_from_term(&self, term: f64, v: f64) -> f64 {
        self.delta * self.theta() * v * (term - 1.0)
    }

    /// `df/dv = delta (theta - 1) c^(1 - 1/psi) ((1-gamma) v)^(-1/theta) - delta theta`.
    pub fn f_v(&self, c: f64, v: f64) -> Result<f64> {
        let u = (1.0 - self.gamma) * v;
        if !(c > 0.0) || !(u > 0.0) {
            return Err(Error::Domain(format!(
                "aggregator needs c > 0 and (1-gamma) v > 0 (c = {c}, v = {v})"
            )));
        }
        let theta = self.theta();
        Ok(self.delta * (theta - 1.0) * c.powf(1.0 - 1.0 / self.psi) * u.powf(-1.0 / theta) - self.delta * theta)
    }
}

pub fn aggregator_f(c: f64, v: f64, prefs: &EpsteinZin) -> Result<f64> {
    prefs.f(c, v)
}

/// Outcome of the one-sided Lipschitz probe
/// `f(c, v1) - f(c, v2) <= |delta theta| (v1 - v2)` for `v1 > v2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityProbe {
    pub case: PreferenceCase,
    pub draws: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` seen; negative when every draw has room.
    pub worst_excess: f64,
}

/// Draws `n` random `(gamma, psi, delta, c, v1 > v2)` inside one preference
/// case and counts bound violations beyond `slack`.
pub fn aggregator_monotonicity_probe(case: PreferenceCase, n: usize, seed: u64, slack: f64) -> MonotonicityProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut draws = 0;
    while draws < n {
        let (gamma, psi) = match case {
            PreferenceCase::A => (rng.random_range(1.05..6.0), rng.random_range(1.05..4.0)),
            PreferenceCase::B => {
                let g: f64 = rng.random_range(1.05..6.0);
                (g, rng.random_range(0.05..1.0 / g))
            }
            PreferenceCase::C => (rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)),
            PreferenceCase::D => {
                let g: f64 = rng.random_range(0.3..0.95);
                (g, rng.random_range((1.0 / g).max(1.05)..6.0))
            }
            PreferenceCase::Violated => {
                return MonotonicityProbe {
                    case,
                    draws: 0,
                    violations: 0,
                    worst_excess: f64::NAN,
                }
            }
        };
        if crate::params::validate_preference_case(gamma, psi) != case {
            continue;
        }
        let prefs = EpsteinZin {
            gamma,
            delta: rng.random_range(0.005..0.3),
            psi,
        };
        let c = rng.random_range(0.01..5.0);
        let u1: f64 = rng.random_range(0.05..5.0);
        let u2: f64 = rng.random_range(0.05..5.0);
        if u1 == u2 {
            continue;
        }
        let (v1, v2) = {
            let (a, b) = (u1 / (1.0 - gamma), u2 / (1.0 - gamma));
            if a > b {
                (a, b)
            } else {
                (b, a)
            }
        };
        let lhs = prefs.f(c, v1).unwrap() - prefs.f(c, v2).unwrap();
        let rhs = (prefs.delta * prefs.theta()).abs() * (v1 - v2);
        let excess = lhs - rhs;
        worst = worst.max(excess);
        if excess > slack {
            violations += 1;
        }
        draws += 1;
    }
    MonotonicityProbe {
        case,
        draws,
        violations,
        worst_excess: worst,
    }
}

/// Covariance `Sigma = Lambda Lambda^T` of the `(X, Y)` noise, with
/// `Lambda = [[x pi sigma, 0], [beta rho, beta sqrt(1 - rho^2)]]`.
pub fn sigma_matrix(x: f64, y: f64, pi: f64, p: &ModelParams) -> [[f64; 2]; 2] {
    let ys = y.max(0.0);
    let s_xx = x * x * pi * pi * ys;
    let s_xy = x * pi * p.rho * p.beta_bar * ys;
    let s_yy = p.beta_bar * p.beta_bar * ys;
    [[s_xx, s_xy], [s_xy, s_yy]]
}

fn quad_form(s: &[[f64; 2]; 2], u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * (s[0][0] * v[0] + s[0][1] * v[1]) + u[1] * (s[1][0] * v[0] + s[1][1] * v[1])
}

/// `(1 / 2 eta) v^T Sigma v` with `eta = a / ((1 - gamma) w)`, given the
/// value `w` at the point. The sign follows `1/eta` unreduced. At `a = 0` the
/// penalty is `0` for `v = 0` and `+inf` otherwise.
#[inline]
pub fn penalty_with_value(v: [f64; 2], x: f64, y: f64, pi: f64, w: f64, p: &ModelParams) -> Result<f64> {
    if !(x > 0.0) || !(y >= 0.0) {
        return Err(Error::Domain(format!("penalty needs x > 0, y >= 0 (x = {x}, y = {y})")));
    }
    if w == 0.0 {
        return Err(Error::Domain("penalty undefined where w = 0".into()));
    }
    let q = quad_form(&sigma_matrix(x, y, pi, p), v, v);
    if p.a == 0.0 {
        return Ok(if v == [0.0, 0.0] || q == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok((1.0 - p.gamma) * w / (2.0 * p.a) * q)
}

/// Penalty at `(t, x, y)` using the closed-form value there.
#[allow(clippy::too_many_arguments)]
pub fn penalty(
    v: [f64; 2],
    t: f64,
    x: f64,
    y: f64,
    pi: f64,
    p: &ModelParams,
    c: &DerivedConstants,
    opts: &EvalOptions,
) -> Result<f64> {
    let w = crate::closed_form::value_function(t, x, y, c, p, opts)?;
    penalty_with_value(v, x, y, pi, w, p)
}

/// Value-function partials at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WDerivatives {
    pub w: f64,
    pub w_t: f64,
    pub w_x: f64,
    pub w_y: f64,
    pub w_xx: f64,
    pub w_yy: f64,
    pub w_xy: f64,
}

impl WDerivatives {
    /// Partials of `w = x^(1-gamma) g^k / (1-gamma)` from `g`, its
    /// `y`-derivatives and `g_t`.
    pub fn from_ansatz(x: f64, g: &GTriple, g_t: f64, p: &ModelParams, c: &DerivedConstants) -> Self {
        let k = c.k;
        let w = crate::closed_form::value_from_g(x, g.g, p, c);
        let s = g.g_y / g.g;
        let s2 = g.g_yy / g.g;
        Self {
            w,
            w_t: k * w * g_t / g.g,
            w_x: (1.0 - p.gamma) * w / x,
            w_y: k * w * s,
            w_xx: -p.gamma * (1.0 - p.gamma) * w / (x * x),
            w_yy: w * (k * (k - 1.0) * s * s + k * s2),
            w_xy: (1.0 - p.gamma) * k / x * s * w,
        }
    }
}

/// Arguments of the Hamiltonian. `c` is the consumption rate in money units.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianInput<'a> {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub c: f64,
    pub pi: f64,
    pub v: [f64; 2],
    pub w: WDerivatives,
    pub params: &'a ModelParams,
    pub consts: &'a DerivedConstants,
}

/// The Hamiltonian split into its additive pieces.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HamiltonianTerms {
    pub aggregator: f64,
    pub time: f64,
    pub wealth_drift: f64,
    pub consumption: f64,
    pub wealth_diffusion: f64,
    pub factor_drift: f64,
    pub factor_diffusion: f64,
    pub cross_diffusion: f64,
    pub tilt: f64,
    pub penalty: f64,
}

impl HamiltonianTerms {
    pub fn as_array(&self) -> [(&'static str, f64); 10] {
        [
            ("aggregator", self.aggregator),
            ("time", self.time),
            ("wealth_drift", self.wealth_drift),
            ("consumption", self.consumption),
            ("wealth_diffusion", self.wealth_diffusion),
            ("factor_drift", self.factor_drift),
            ("factor_diffusion", self.factor_diffusion),
            ("cross_diffusion", self.cross_diffusion),
            ("tilt", self.tilt),
            ("penalty", self.penalty),
        ]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().map(|(_, v)| v).sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.as_array().iter().map(|(_, v)| v.abs()).sum()
    }
}

/// Evaluates every term of
/// `f + w_t + L^{c,pi} w + v^T Sigma (w_x, w_y) + (1/2 eta) v^T Sigma v`
/// for the Heston coefficients `lambda = lambda_bar y`, `sigma = sqrt y`,
/// `alpha = nu - m y`, `beta = beta_bar sqrt y`.
pub fn hamiltonian_terms(inp: &HamiltonianInput) -> Result<HamiltonianTerms> {
    let HamiltonianInput {
        x,
        y,
        c,
        pi,
        v,
        w,
        params: p,
        consts,
        ..
    } = *inp;
    if !(x > 0.0) || !(y >= 0.0) || !(c >= 0.0) {
        return Err(Error::Domain(format!(
            "Hamiltonian needs x > 0, y >= 0, c >= 0 (x = {x}, y = {y}, c = {c})"
        )));
    }
    let prefs = EpsteinZin::from_model(p, consts);
    let sigma = sigma_matrix(x, y, pi, p);
    let beta_sq = p.beta_bar * p.beta_bar * y;
    Ok(HamiltonianTerms {
        aggregator: prefs.f(c, w.w)?,
        time: w.w_t,
        wealth_drift: x * (p.r + pi * p.lambda_bar * y) * w.w_x,
        consumption: -c * w.w_x,
        wealth_diffusion: 0.5 * x * x * pi * pi * y * w.w_xx,
        factor_drift: (p.nu - p.m * y) * w.w_y,
        factor_diffusion: 0.5 * beta_sq * w.w_yy,
        cross_diffusion: x * pi * y * p.beta_bar * p.rho * w.w_xy,
        tilt: quad_form(&sigma, v, [w.w_x, w.w_y]),
        penalty: penalty_with_value(v, x, y, pi, w.w, p)?,
    })
}

pub fn hamiltonian(inp: &HamiltonianInput) -> Result<f64> {
    Ok(hamiltonian_terms(inp)?.total())
}

/// Closed-form optimum plugged into the Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub residual: f64,
    /// `residual / (1 + sum |term|)`.
    pub normalized_residual: f64,
    pub term_breakdown: HamiltonianTerms,
    /// `g_t + H1 g + H2 g_y + beta^2 g_yy / 2 + delta^psi`.
    pub g_pde_residual: f64,
    /// `g_pde_residual / (1 + sum |term|)`.
    pub g_pde_normalized: f64,
}

/// Builds the Hamiltonian input at the closed-form optimum.
fn optimum_input<'a>(
    t: f64,
    x: f64,
    y: f64,
    p: &'a ModelParams,
    c: &'a DerivedConstants,
    opts: &EvalOptions,
) -> Result<(HamiltonianInput<'a>, GTriple, f64)> {
    let strat = optimal_strategy(t, x, y, c, p, opts)?;
    let g = eval_g(t, y, c, p, opts.quadrature_n)?;
    let g_t = eval_g_t(t, y, c, p, opts.quadrature_n)?;
    let w = WDerivatives::from_ansatz(x, &g, g_t, p, c);
    let inp = HamiltonianInput {
        t,
        x,
        y,
        c: strat.cx_star * x,
        pi: strat.pi_star,
        v: [strat.v1_star, strat.v2_star],
        w,
        params: p,
        consts: c,
    };
    Ok((inp, g, g_t))
}

/// Residual of the HJBI equation and of the linear `g` equation at the
/// closed-form optimum. `H1` and `H2` are rebuilt from the raw parameters.
pub fn hjbi_residual(
    t: f64,
    x: f64,
    y: f64,
    p: &ModelParams,
    c: &DerivedConstants,
    opts: &EvalOptions,
) -> Result<ResidualReport> {
    if p.horizon - t < opts.t_guard {
        return Err(Error::TerminalSingularity {
            t,
            horizon: p.horizon,
            guard: opts.t_guard,
        });
    }
    let (inp, g, g_t) = optimum_input(t, x, y, p, c, opts)?;
    let terms = hamiltonian_terms(&inp)?;
    let residual = terms.total();

    let ga = p.gamma + p.a;
    let theta = (1.0 - p.gamma) / (1.0 - 1.0 / c.psi);
    let level = ((1.0 - p.gamma) * p.r - p.delta * theta) / c.k;
    let b = -(1.0 - p.gamma) * p.lambda_bar * p.lambda_bar / (2.0 * c.k * ga);
    let h1 = level - b * y;
    let h2 = p.nu + ((1.0 - p.gamma - p.a) / ga * p.rho * p.lambda_bar * p.beta_bar - p.m) * y;
    let source = p.delta.powf(c.psi);
    let pieces = [
        g_t,
        h1 * g.g,
        h2 * g.g_y,
        0.5 * p.beta_bar * p.beta_bar * y * g.g_yy,
        source,
    ];
    let g_pde_residual: f64 = pieces.iter().sum();
    let g_scale: f64 = pieces.iter().map(|v| v.abs()).sum();

    Ok(ResidualReport {
        residual,
        normalized_residual: residual / (1.0 + terms.abs_sum()),
        term_breakdown: terms,
        g_pde_residual,
        g_pde_normalized: g_pde_residual / (1.0 + g_scale),
    })
}

/// Worst outcomes of the coordinate perturbation test around the optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleReport {
    /// `min_i,± H(v* ± step e_i) - H(v*)`; should be `>= -slack`.
    pub v_min_gain: f64,
    /// `max H(c* ± step x, pi*) - H*` and `H(c*, pi* ± step) - H*`; should be `<= slack`.
    pub u_max_gain: f64,
}

impl SaddleReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.v_min_gain >= -slack && self.u_max_gain <= slack
    }
}

/// Perturbs `v` and `(c, pi)` one coordinate at a time by `±step`
/// (consumption by `±step x`) and records the worst Hamiltonian change.
pub fn saddle_check(
    t: f64,
    x: f64,
    y: f64,
    p: &ModelParams,
    c: &DerivedConstants,
    opts: &EvalOptions,
    step: f64,
) -> Result<SaddleReport> {
    let (inp, _, _) = optimum_input(t, x, y, p, c, opts)?;
    let h0 = hamiltonian(&inp)?;
    let mut v_min = f64::INFINITY;
    for i in 0..2 {
        for sgn in [-1.0, 1.0] {
            let mut q = inp;
            q.v[i] += sgn * step;
            v_min = v_min.min(hamiltonian(&q)? - h0);
        }
    }
    let mut u_max = f64::NEG_INFINITY;
    for sgn in [-1.0, 1.0] {
        let mut q = inp;
        q.c += sgn * step * x;
        u_max = u_max.max(hamiltonian(&q)? - h0);
        let mut q = inp;
        q.pi += sgn * step;
        u_max = u_max.max(hamiltonian(&q)? - h0);
    }
    Ok(SaddleReport {
        v_min_gain: v_min,
        u_max_gain: u_max,
    })
}

impl HestonModel {
    pub fn hjbi_residual(&self, t: f64, x: f64, y: f64) -> Result<ResidualReport> {
        hjbi_residual(t, x, y, self.params(), self.consts(), &self.options())
    }

    pub fn saddle_check(&self, t: f64, x: f64, y: f64, step: f64) -> Result<SaddleReport> {
        saddle_check(t, x, y, self.params(), self.consts(), &self.options(), step)
    }
}

//! Raw model inputs, derived constants and the validity gates.

use std::fmt;

use crate::error::{Error, Result};

/// Market, preference and robustness inputs.
///
/// Units: rates are per year, `lambda_bar` is excess return per unit of
/// variance, `y0` is an instantaneous variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Relative risk aversion.
    pub gamma: f64,
    /// Rate of time preference.
    pub delta: f64,
    /// Correlation between stock and variance shocks.
    pub rho: f64,
    /// Riskless rate.
    pub r: f64,
    /// Excess-return slope: the stock earns `r + lambda_bar * y`.
    pub lambda_bar: f64,
    /// Mean-reversion speed of the variance.
    pub m: f64,
    /// Constant drift of the variance (long-run mean is `nu / m`).
    pub nu: f64,
    /// Volatility of variance.
    pub beta_bar: f64,
    /// Preference for robustness; zero recovers the non-robust investor.
    pub a: f64,
    /// Distortion scale used by the admissible set, normally equal to `a`.
    pub a1: f64,
    /// Bequest weight. Must be zero for the Heston closed form.
    pub epsilon: f64,
    /// Investment horizon `T`.
    pub horizon: f64,
    pub t0: f64,
    pub x0: f64,
    pub y0: f64,
}

impl ModelParams {
    /// Comparison parameter set used for the figures: `gamma = 1.4`,
    /// `delta = 0.08`, `rho = -0.5`, `r = 0.05`, long-run volatility 0.15,
    /// long-run Sharpe ratio `lambda_bar * 0.15 = 0.07`, `m = 5`,
    /// `beta_bar = 0.25`, ten-year horizon, no robustness.
    pub fn baseline() -> Self {
        let long_run_vol: f64 = 0.15;
        let long_run_var = long_run_vol * long_run_vol;
        let m = 5.0;
        Self {
            gamma: 1.4,
            delta: 0.08,
            rho: -0.5,
            r: 0.05,
            lambda_bar: 0.07 / long_run_vol,
            m,
            nu: m * long_run_var,
            beta_bar: 0.25,
            a: 0.0,
            a1: 0.0,
            epsilon: 0.0,
            horizon: 10.0,
            t0: 0.0,
            x0: 1.0,
            y0: long_run_var,
        }
    }

    /// Copy with robustness `a` and the matching distortion scale `a1 = a`.
    pub fn with_robustness(mut self, a: f64) -> Self {
        self.a = a;
        self.a1 = a;
        self
    }

    /// Long-run mean of the variance, `nu / m`.
    pub fn long_run_variance(&self) -> f64 {
        self.nu / self.m
    }

    /// Checks the raw invariants that every code path relies on.
    pub fn check(&self) -> Result<()> {
        let mut bad = Vec::new();
        let finite = [
            self.gamma,
            self.delta,
            self.rho,
            self.r,
            self.lambda_bar,
            self.m,
            self.nu,
            self.beta_bar,
            self.a,
            self.a1,
            self.epsilon,
            self.horizon,
            self.t0,
            self.x0,
            self.y0,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            bad.push("all parameters must be finite".to_string());
        }
        if !(self.gamma > 0.0) || self.gamma == 1.0 {
            bad.push(format!("gamma must be > 0 and != 1 (got {})", self.gamma));
        }
        if !(self.delta > 0.0) {
            bad.push(format!("delta must be > 0 (got {})", self.delta));
        }
        if !(self.r > 0.0) {
            bad.push(format!("r must be > 0 (got {})", self.r));
        }
        if !(self.rho.abs() <= 1.0) {
            bad.push(format!("|rho| must be <= 1 (got {})", self.rho));
        }
        for (name, v) in [("m", self.m), ("nu", self.nu), ("T", self.horizon), ("x0", self.x0)] {
            if !(v > 0.0) {
                bad.push(format!("{name} must be > 0 (got {v})"));
            }
        }
        for (name, v) in [
            ("y0", self.y0),
            ("beta_bar", self.beta_bar),
            ("a", self.a),
            ("a1", self.a1),
            ("epsilon", self.epsilon),
        ] {
            if !(v >= 0.0) {
                bad.push(format!("{name} must be >= 0 (got {v})"));
            }
        }
        if !(self.t0 >= 0.0 && self.t0 < self.horizon) {
            bad.push(format!("t0 must lie in [0, T) (got {})", self.t0));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad.join("; ")))
        }
    }
}

/// Quantities derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Elasticity of intertemporal substitution, pinned by `(gamma, a, rho)`.
    pub psi: f64,
    pub phi: f64,
    pub theta: f64,
    /// Exponent of `g` in the value-function ansatz.
    pub k: f64,
    pub zeta: f64,
    /// Riccati source constant, positive when `gamma > 1`.
    pub b: f64,
    /// Effective mean reversion of the Riccati system.
    pub kappa: f64,
    /// `sqrt(kappa^2 + 2 b beta_bar^2)`; NaN when the radicand is negative
    /// (possible only for `gamma < 1`).
    pub d: f64,
    /// Upper bound of the optimal portfolio.
    pub k_pi: f64,
    pub b_tilde: f64,
    /// Linear rate of `A`: `((1 - gamma) r - delta theta) / k`.
    pub level_rate: f64,
}

impl DerivedConstants {
    /// `b / kappa`, the uniform bound on `B`.
    pub fn b_bound(&self) -> f64 {
        self.b / self.kappa
    }

    /// Long-horizon limit of `B`, `2b / (kappa + d)`.
    pub fn b_limit(&self) -> f64 {
        2.0 * self.b / (self.kappa + self.d)
    }
}

/// Denominator of `k`. With `a = 0` this reduces to `(1 - gamma) rho^2 / gamma + 1`.
pub fn k_denominator(gamma: f64, a: f64, rho: f64) -> f64 {
    let s = 1.0 - gamma - a;
    s * s * rho * rho / ((gamma + a) * (1.0 - gamma)) + 1.0 - a / (1.0 - gamma)
}

pub fn derive_constants(p: &ModelParams) -> Result<DerivedConstants> {
    p.check()?;
    let g = p.gamma;
    let a = p.a;
    let ga = g + a;
    let s = 1.0 - g - a;

    let kden = k_denominator(g, a, p.rho);
    if kden.abs() < 1e-14 {
        return Err(Error::ZeroDenominator);
    }
    let k = 1.0 / kden;
    let psi = 2.0 - g - a + s * s / ga * p.rho * p.rho;
    let phi = 1.0 / psi;
    if (1.0 - phi).abs() < 1e-14 {
        return Err(Error::InvalidParams(
            "derived EIS equals one; theta is undefined".into(),
        ));
    }
    let theta = (1.0 - g) / (1.0 - phi);
    let zeta = -k / theta;

    let b = -(1.0 / (2.0 * k)) * ((1.0 - g) / ga) * p.lambda_bar * p.lambda_bar;
    let kappa = p.m - (s / ga) * p.rho * p.lambda_bar * p.beta_bar;
    let d = (kappa * kappa + 2.0 * b * p.beta_bar * p.beta_bar).sqrt();
    let k_pi = p.lambda_bar / ga + s / (ga * (1.0 - g)) * k * p.beta_bar * p.rho.abs() * (b / kappa);
    let b_tilde = b + ((2.0 * g - 1.0) / 2.0 + p.a1) * k_pi * k_pi;
    let level_rate = ((1.0 - g) * p.r - p.delta * theta) / k;

    Ok(DerivedConstants {
        psi,
        phi,
        theta,
        k,
        zeta,
        b,
        kappa,
        d,
        k_pi,
        b_tilde,
        level_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferenceCase {
    /// `gamma > 1`, `psi > 1`.
    A,
    /// `gamma > 1`, `psi < 1`, `gamma psi <= 1`.
    B,
    /// `gamma < 1`, `psi < 1`.
    C,
    /// `gamma < 1`, `psi > 1`, `gamma psi >= 1`.
    D,
    Violated,
}

impl fmt::Display for PreferenceCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::A => "a",
            Self::B => "b",
            Self::C => "c",
            Self::D => "d",
            Self::Violated => "violated",
        };
        f.write_str(s)
    }
}

/// Classifies `(gamma, psi)` into the admissible preference cases.
pub fn validate_preference_case(gamma: f64, psi: f64) -> PreferenceCase {
    if !(gamma > 0.0 && psi > 0.0) || gamma == 1.0 || psi == 1.0 {
        return PreferenceCase::Violated;
    }
    match (gamma > 1.0, psi > 1.0) {
        (true, true) => PreferenceCase::A,
        (true, false) if gamma * psi <= 1.0 => PreferenceCase::B,
        (false, false) => PreferenceCase::C,
        (false, true) if gamma * psi >= 1.0 => PreferenceCase::D,
        _ => PreferenceCase::Violated,
    }
}

/// Outcome of every gate a Heston solve depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub preference_case: PreferenceCase,
    /// `k > 0` and the pinned `psi` is a valid EIS.
    pub pinned_eis_ok: bool,
    /// `psi_expected` (when supplied) agrees with the derived `psi`.
    pub psi_expected_ok: bool,
    pub h1_ok: bool,
    /// Smallest gap in `1 < gamma < min(k + 2, 1/q + 1)`.
    pub h1_slack: f64,
    pub h2_ok: bool,
    pub h2_slack: f64,
    pub h3_ok: bool,
    pub h3_lhs: f64,
    pub h3_rhs: f64,
    /// `epsilon == 0`, required by the Heston closed form.
    pub bequest_ok: bool,
    /// `a1 != a`; accepted but outside the analysed case.
    pub a1_nonstandard: bool,
    /// `2 nu >= beta_bar^2`; informational.
    pub feller_ok: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.preference_case != PreferenceCase::Violated
            && self.pinned_eis_ok
            && self.psi_expected_ok
            && self.h1_ok
            && self.h2_ok
            && self.h3_ok
            && self.bequest_ok
    }

    /// Names of the failing gates, comma separated.
    pub fn summary(&self) -> String {
        let mut failed = Vec::new();
        if self.preference_case == PreferenceCase::Violated {
            failed.push("preference case");
        }
        if !self.pinned_eis_ok {
            failed.push("pinned EIS");
        }
        if !self.psi_expected_ok {
            failed.push("psi_expected");
        }
        if !self.h1_ok {
            failed.push("H1");
        }
        if !self.h2_ok {
            failed.push("H2");
        }
        if !self.h3_ok {
            failed.push("H3");
        }
        if !self.bequest_ok {
            failed.push("epsilon = 0");
        }
        if failed.is_empty() {
            "all checks pass".into()
        } else {
            format!("failed: {}", failed.join(", "))
        }
    }

    /// Records the consistency check against a user-supplied EIS.
    pub fn check_psi_expected(&mut self, psi_expected: Option<f64>, psi: f64) {
        if let Some(expected) = psi_expected {
            let ok = (expected - psi).abs() <= 1e-6 * psi.abs().max(1.0);
            self.psi_expected_ok = ok;
            if !ok {
                self.messages
                    .push(format!("psi_expected = {expected} does not match derived psi = {psi}"));
            }
        }
    }
}

/// Evaluates the Heston gates (H1)-(H3) together with the preference cases.
/// `q` is the moment exponent in (H1); it must exceed 2.
pub fn validate_heston(p: &ModelParams, c: &DerivedConstants, q: f64) -> ValidationReport {
    let mut messages = Vec::new();
    let g = p.gamma;
    let ga = g + p.a;

    let preference_case = validate_preference_case(g, c.psi);
    if preference_case == PreferenceCase::Violated {
        messages.push(format!(
            "(gamma, psi) = ({g}, {:.7}) matches none of the four preference cases (gamma*psi = {:.4})",
            c.psi,
            g * c.psi
        ));
    }

    let pinned_eis_ok = c.k.is_finite() && c.k > 0.0 && c.psi > 0.0 && c.psi != 1.0;
    if !pinned_eis_ok {
        messages.push(format!(
            "derived k = {:.6}, psi = {:.6}: need k > 0 and a positive EIS",
            c.k, c.psi
        ));
    }

    let q_bound = if q > 2.0 { 1.0 / q + 1.0 } else { f64::NAN };
    if !(q > 2.0) {
        messages.push(format!("q_exponent must exceed 2 (got {q})"));
    }
    let gamma_upper = (c.k + 2.0).min(q_bound);
    let h1_slack = (g - 1.0).min(c.k + 2.0 - g).min(q_bound - g);
    let mut h1_ok = g > 1.0 && g < gamma_upper;
    if !h1_ok {
        messages.push(format!(
            "H1: need 1 < gamma < min(k + 2, 1/q + 1) = min({:.6}, {:.6}); gamma = {g}",
            c.k + 2.0,
            q_bound
        ));
    }
    if p.rho > 0.0 {
        h1_ok = false;
        messages.push(format!("H1: need rho <= 0 (got {})", p.rho));
    }
    if !(p.lambda_bar > 0.0) {
        h1_ok = false;
        messages.push(format!("H1: need lambda_bar > 0 (got {})", p.lambda_bar));
    }

    let robust_slope = (1.0 - g - p.a) / ga * p.lambda_bar * p.beta_bar * p.rho;
    let pi_drag = p.beta_bar * c.k_pi * (2.0 * (g - 1.0) + p.a1);
    let h2_slack = p.m - robust_slope.max(pi_drag);
    let h2_ok = h2_slack > 0.0;
    if !h2_ok {
        messages.push(format!(
            "H2: need m > max({robust_slope:.6}, {pi_drag:.6}); m = {}",
            p.m
        ));
    }

    let h3_lhs = 4.0 * (g - 1.0) * p.beta_bar * p.beta_bar * c.b_tilde;
    let h3_rhs = (p.m - pi_drag).powi(2);
    let h3_ok = h3_lhs < h3_rhs;
    if !h3_ok {
        messages.push(format!("H3: need {h3_lhs:.6} < {h3_rhs:.6}"));
    }

    let bequest_ok = p.epsilon == 0.0;
    if !bequest_ok {
        messages.push(format!(
            "the Heston closed form requires epsilon = 0 (got {})",
            p.epsilon
        ));
    }
    let a1_nonstandard = p.a1 != p.a;
    if a1_nonstandard {
        messages.push(format!("nonstandard: a1 = {} differs from a = {}", p.a1, p.a));
    }
    let feller_ok = 2.0 * p.nu >= p.beta_bar * p.beta_bar;
    if !feller_ok {
        messages.push("Feller condition 2 nu >= beta_bar^2 fails; variance can touch zero".into());
    }

    ValidationReport {
        preference_case,
        pinned_eis_ok,
        psi_expected_ok: true,
        h1_ok,
        h1_slack,
        h2_ok,
        h2_slack,
        h3_ok,
        h3_lhs,
        h3_rhs,
        bequest_ok,
        a1_nonstandard,
        feller_ok,
        messages,
    }
}

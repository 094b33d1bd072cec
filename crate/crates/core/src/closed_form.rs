//! Exponential-affine closed form of the robust Heston solution.
//!
//! With `tau = s - t`, the Riccati pair `(A, B)` gives
//! `h(t, y; s) = exp(A(t, s) - B(t, s) y)` and
//! `g(t, y) = delta^psi * int_t^T h(t, y; s) ds`.
//! The value function is `w = x^(1-gamma) g^k / (1 - gamma)`.

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::params::{derive_constants, validate_heston, DerivedConstants, ModelParams, ValidationReport};
use crate::quadrature::simpson_multi;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Simpson subintervals over `[t, T]`.
    pub quadrature_n: usize,
    /// Strategies are only evaluated for `T - t >= t_guard`.
    pub t_guard: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            quadrature_n: 512,
            t_guard: 1e-6,
        }
    }
}

/// Values of the Riccati pair at one `(t, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiPair {
    pub a: f64,
    pub b: f64,
}

/// Coefficients of the Riccati system
///
/// ```text
/// dB/dt = kappa B + beta_bar^2 B^2 / 2 - b,   B(s, s) = 0
/// dA/dt = nu B - level_rate,                  A(s, s) = 0
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiCoefficients {
    pub kappa: f64,
    pub beta_bar: f64,
    pub b: f64,
    pub nu: f64,
    pub level_rate: f64,
    d: f64,
}

impl RiccatiCoefficients {
    pub fn new(p: &ModelParams, c: &DerivedConstants) -> Self {
        Self::from_parts(c.kappa, p.beta_bar, c.b, p.nu, c.level_rate)
    }

    pub fn from_parts(kappa: f64, beta_bar: f64, b: f64, nu: f64, level_rate: f64) -> Self {
        let d = (kappa * kappa + 2.0 * b * beta_bar * beta_bar).sqrt();
        Self {
            kappa,
            beta_bar,
            b,
            nu,
            level_rate,
            d,
        }
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Closed form at time-to-maturity `tau = s - t >= 0`.
    ///
    /// Both functions are written in `exp(-d tau)` so nothing overflows for
    /// long horizons. `A` uses `(d - kappa) / beta_bar^2 = 2b / (kappa + d)`
    /// and a `ln_1p` ratio, which stays exact as `beta_bar -> 0`.
    pub fn at(&self, tau: f64) -> RiccatiPair {
        if tau == 0.0 {
            return RiccatiPair { a: 0.0, b: 0.0 };
        }
        let (kappa, d) = (self.kappa, self.d);
        let em1 = (-d * tau).exp_m1(); // exp(-d tau) - 1, in (-1, 0]
        let decay = em1 + 1.0;
        let denom = (kappa + d) + (d - kappa) * decay;
        let b_val = 2.0 * self.b * (-em1) / denom;

        let limit = 2.0 * self.b / (kappa + d);
        // ln(denom / 2d) = ln_1p(x) with x = (d - kappa) (exp(-d tau) - 1) / (2d)
        let x = (d - kappa) * em1 / (2.0 * d);
        let log_ratio = if x == 0.0 { 1.0 } else { x.ln_1p() / x };
        let a_val = -self.nu * limit * (log_ratio * em1 / d + tau) + self.level_rate * tau;
        RiccatiPair { a: a_val, b: b_val }
    }
}

/// Closed-form `A(t, s)`, `B(t, s)` for `t <= s`.
pub fn riccati_closed_form(t: f64, s: f64, c: &DerivedConstants, p: &ModelParams) -> Result<RiccatiPair> {
    if !(t <= s) {
        return Err(Error::Domain(format!("Riccati pair needs t <= s (t = {t}, s = {s})")));
    }
    Ok(RiccatiCoefficients::new(p, c).at(s - t))
}

/// `g` and its first two `y`-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTriple {
    pub g: f64,
    pub g_y: f64,
    pub g_yy: f64,
}

impl GTriple {
    /// `g_y / g`, zero at the horizon where both vanish.
    pub fn log_slope(&self) -> f64 {
        if self.g == 0.0 {
            0.0
        } else {
            self.g_y / self.g
        }
    }
}

/// Evaluates `g` on `[t, horizon]` without domain checks; `t` may be negative.
pub(crate) fn g_raw(coeffs: &RiccatiCoefficients, delta_psi: f64, t: f64, horizon: f64, y: f64, n: usize) -> GTriple {
    if t >= horizon {
        return GTriple {
            g: 0.0,
            g_y: 0.0,
            g_yy: 0.0,
        };
    }
    let [i0, i1, i2] = simpson_multi(
        |s| {
            let RiccatiPair { a, b } = coeffs.at(s - t);
            let e = (a - b * y).exp();
            [e, -b * e, b * b * e]
        },
        t,
        horizon,
        n,
    );
    GTriple {
        g: delta_psi * i0,
        g_y: delta_psi * i1,
        g_yy: delta_psi * i2,
    }
}

fn check_ty(t: f64, y: f64, horizon: f64) -> Result<()> {
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    if !(y >= 0.0) {
        return Err(Error::Domain(format!("variance y = {y} must be >= 0")));
    }
    Ok(())
}

/// `g(t, y)`, `g_y`, `g_yy` by composite Simpson over `s in [t, T]`.
/// The derivatives integrate `-B h` and `B^2 h`.
pub fn eval_g(t: f64, y: f64, c: &DerivedConstants, p: &ModelParams, quadrature_n: usize) -> Result<GTriple> {
    check_ty(t, y, p.horizon)?;
    let coeffs = RiccatiCoefficients::new(p, c);
    Ok(g_raw(&coeffs, p.delta.powf(c.psi), t, p.horizon, y, quadrature_n))
}

/// `g_t` by a central difference of the quadrature surface, step
/// `min(1e-4, (T - t) / 2)`. Returns the exact limit `-delta^psi` at `t = T`.
pub fn eval_g_t(t: f64, y: f64, c: &DerivedConstants, p: &ModelParams, quadrature_n: usize) -> Result<f64> {
    check_ty(t, y, p.horizon)?;
    let delta_psi = p.delta.powf(c.psi);
    let tau = p.horizon - t;
    if tau == 0.0 {
        return Ok(-delta_psi);
    }
    let h = (1e-4f64).min(tau / 2.0);
    let coeffs = RiccatiCoefficients::new(p, c);
    let up = g_raw(&coeffs, delta_psi, t + h, p.horizon, y, quadrature_n).g;
    let down = g_raw(&coeffs, delta_psi, t - h, p.horizon, y, quadrature_n).g;
    Ok((up - down) / (2.0 * h))
}

/// Optimal controls, value and worst-case distortion at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyPoint {
    pub pi_star: f64,
    pub cx_star: f64,
    pub w: f64,
    pub v1_star: f64,
    pub v2_star: f64,
}

/// Coefficient of `g_y / g` in the optimal portfolio.
pub fn hedging_coefficient(p: &ModelParams, c: &DerivedConstants) -> f64 {
    let ga = p.gamma + p.a;
    (1.0 - p.gamma - p.a) * c.k * p.beta_bar * p.rho / (ga * (1.0 - p.gamma))
}

/// Optimal portfolio given the log-slope `g_y / g`.
pub fn portfolio_from_slope(log_slope: f64, p: &ModelParams, c: &DerivedConstants) -> f64 {
    p.lambda_bar / (p.gamma + p.a) + hedging_coefficient(p, c) * log_slope
}

/// Worst-case variance distortion given the log-slope `g_y / g`.
pub fn distortion_from_slope(log_slope: f64, p: &ModelParams, c: &DerivedConstants) -> f64 {
    p.a * c.k / (p.gamma - 1.0) * log_slope
}

/// `w = x^(1-gamma) g^k / (1 - gamma)`.
pub fn value_from_g(x: f64, g: f64, p: &ModelParams, c: &DerivedConstants) -> f64 {
    if g == 0.0 {
        return 0.0;
    }
    ((1.0 - p.gamma) * x.ln() + c.k * g.ln()).exp() / (1.0 - p.gamma)
}

pub fn optimal_strategy(
    t: f64,
    x: f64,
    y: f64,
    c: &DerivedConstants,
    p: &ModelParams,
    opts: &EvalOptions,
) -> Result<StrategyPoint> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("wealth x = {x} must be > 0")));
    }
    check_ty(t, y, p.horizon)?;
    // The relative slack lets `t = T - t_guard` itself through despite rounding.
    if p.horizon - t < opts.t_guard * (1.0 - 1e-6) {
        return Err(Error::TerminalSingularity {
            t,
            horizon: p.horizon,
            guard: opts.t_guard,
        });
    }
    let gt = eval_g(t, y, c, p, opts.quadrature_n)?;
    let slope = gt.log_slope();
    Ok(StrategyPoint {
        pi_star: portfolio_from_slope(slope, p, c),
        cx_star: p.delta.powf(c.psi) / gt.g,
        w: value_from_g(x, gt.g, p, c),
        v1_star: -p.a / x,
        v2_star: distortion_from_slope(slope, p, c),
    })
}

pub fn value_function(
    t: f64,
    x: f64,
    y: f64,
    c: &DerivedConstants,
    p: &ModelParams,
    opts: &EvalOptions,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("wealth x = {x} must be > 0")));
    }
    let gt = eval_g(t, y, c, p, opts.quadrature_n)?;
    Ok(value_from_g(x, gt.g, p, c))
}

/// Validated parameters bundled with their derived constants and knobs.
#[derive(Debug, Clone)]
pub struct HestonModel {
    params: ModelParams,
    consts: DerivedConstants,
    settings: Settings,
    report: ValidationReport,
}

impl HestonModel {
    /// Derives constants and refuses to build unless every gate passes.
    pub fn new(params: ModelParams, settings: Settings) -> Result<Self> {
        let model = Self::unchecked(params, settings)?;
        if model.report.all_ok() {
            Ok(model)
        } else {
            Err(Error::ValidationFailed(Box::new(model.report)))
        }
    }

    /// Derives constants and records the validation report without enforcing it.
    pub fn unchecked(params: ModelParams, settings: Settings) -> Result<Self> {
        let consts = derive_constants(&params)?;
        let mut report = validate_heston(&params, &consts, settings.q_exponent);
        report.check_psi_expected(settings.psi_expected, consts.psi);
        Ok(Self {
            params,
            consts,
            settings,
            report,
        })
    }

    /// Replaces the derived constants. Used by mutation tests.
    pub fn with_consts(mut self, consts: DerivedConstants) -> Self {
        self.consts = consts;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn consts(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn options(&self) -> EvalOptions {
        self.settings.eval_options()
    }

    pub fn riccati(&self, t: f64, s: f64) -> Result<RiccatiPair> {
        riccati_closed_form(t, s, &self.consts, &self.params)
    }

    pub fn g(&self, t: f64, y: f64) -> Result<GTriple> {
        eval_g(t, y, &self.consts, &self.params, self.settings.quadrature_n)
    }

    pub fn g_t(&self, t: f64, y: f64) -> Result<f64> {
        eval_g_t(t, y, &self.consts, &self.params, self.settings.quadrature_n)
    }

    pub fn strategy(&self, t: f64, x: f64, y: f64) -> Result<StrategyPoint> {
        optimal_strategy(t, x, y, &self.consts, &self.params, &self.options())
    }

    pub fn value(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        value_function(t, x, y, &self.consts, &self.params, &self.options())
    }

    /// `delta^psi`.
    pub fn delta_psi(&self) -> f64 {
        self.params.delta.powf(self.consts.psi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model(a: f64) -> HestonModel {
        HestonModel::new(ModelParams::baseline().with_robustness(a), Settings::default()).unwrap()
    }

    fn premium_model() -> HestonModel {
        let p = ModelParams {
            lambda_bar: 0.07 / 0.0225,
            ..ModelParams::baseline()
        };
        HestonModel::new(p, Settings::default()).unwrap()
    }

    #[test]
    fn terminal_conditions() {
        let m = model(0.1);
        for s in [0.0, 3.3, 10.0] {
            let pair = m.riccati(s, s).unwrap();
            assert_eq!(pair, RiccatiPair { a: 0.0, b: 0.0 });
        }
        assert!(matches!(m.riccati(2.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn long_horizon_b_limit() {
        // Positive root of beta^2 B^2/2 + kappa B - b = 0, evaluated by hand.
        let m = premium_model();
        let far = RiccatiCoefficients::new(m.params(), m.consts()).at(1e4);
        assert_relative_eq!(far.b, 0.262_186_860_956_855_2, max_relative = 1e-12);
        assert!(far.b <= m.consts().b_bound());
        assert_relative_eq!(m.consts().b_bound(), 0.262_626_262_626_262_7, max_relative = 1e-12);
        assert!(far.a.is_finite());
    }

    #[test]
    fn zero_vol_of_vol_limit_is_smooth() {
        let lin = RiccatiCoefficients::from_parts(4.0, 0.0, 1.2, 0.1, -0.05);
        let tiny = RiccatiCoefficients::from_parts(4.0, 1e-7, 1.2, 0.1, -0.05);
        for tau in [0.01f64, 0.5, 3.0, 20.0] {
            let exact_b = 1.2 / 4.0 * (1.0 - (-4.0 * tau).exp());
            let exact_a = -0.1 * (1.2 / 4.0) * (tau - (1.0 - (-4.0 * tau).exp()) / 4.0) - 0.05 * tau;
            let p = lin.at(tau);
            assert_relative_eq!(p.b, exact_b, max_relative = 1e-13);
            assert_relative_eq!(p.a, exact_a, max_relative = 1e-12);
            let q = tiny.at(tau);
            assert_relative_eq!(q.a, exact_a, max_relative = 1e-9);
        }
    }

    #[test]
    fn g_vanishes_at_horizon() {
        let m = model(0.0);
        let gt = m.g(10.0, 0.3).unwrap();
        assert_eq!(
            gt,
            GTriple {
                g: 0.0,
                g_y: 0.0,
                g_yy: 0.0
            }
        );
        assert_eq!(m.value(10.0, 1.7, 0.04).unwrap(), 0.0);
    }

    #[test]
    fn g_at_zero_variance_drops_b() {
        let m = model(0.1);
        let coeffs = RiccatiCoefficients::new(m.params(), m.consts());
        let direct = m.delta_psi() * crate::quadrature::simpson(|s| coeffs.at(s).a.exp(), 0.0, 10.0, 512);
        assert_relative_eq!(m.g(0.0, 0.0).unwrap().g, direct, max_relative = 1e-14);
    }

    #[test]
    fn g_domain_errors() {
        let m = model(0.0);
        assert!(matches!(m.g(10.5, 0.1), Err(Error::Domain(_))));
        assert!(matches!(m.g(1.0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn g_derivatives_match_finite_differences() {
        let m = model(0.2);
        let (t, y, h) = (2.0, 0.04, 1e-4);
        let mid = m.g(t, y).unwrap();
        let up = m.g(t, y + h).unwrap();
        let dn = m.g(t, y - h).unwrap();
        assert_relative_eq!(mid.g_y, (up.g - dn.g) / (2.0 * h), max_relative = 1e-6);
        assert_relative_eq!(mid.g_yy, (up.g_y - dn.g_y) / (2.0 * h), max_relative = 1e-6);
    }

    #[test]
    fn g_t_tends_to_minus_delta_psi() {
        let m = model(0.1);
        let gt = m.g_t(10.0 - 1e-6, 0.04).unwrap();
        assert_relative_eq!(gt, -m.delta_psi(), max_relative = 1e-5);
        assert_eq!(m.g_t(10.0, 0.04).unwrap(), -m.delta_psi());
    }

    #[test]
    fn quadrature_is_converged() {
        let m = model(0.1);
        let (p, c) = (m.params(), m.consts());
        for (t, y) in [(0.0, 0.0225), (3.0, 0.005), (7.5, 0.2)] {
            let g1 = eval_g(t, y, c, p, 512).unwrap().g;
            let g2 = eval_g(t, y, c, p, 1024).unwrap().g;
            assert!(((g1 - g2) / g2).abs() < 1e-9, "t = {t}, y = {y}");
        }
    }

    #[test]
    fn myopic_portfolio_without_correlation() {
        let p = ModelParams {
            rho: 0.0,
            lambda_bar: 0.07 / 0.0225,
            ..ModelParams::baseline()
        };
        let c = derive_constants(&p).unwrap();
        let s = optimal_strategy(0.0, 1.0, 0.04, &c, &p, &EvalOptions::default()).unwrap();
        assert_relative_eq!(s.pi_star, 2.222_222_222_222_222, max_relative = 1e-12);
    }

    #[test]
    fn non_robust_distortion_is_zero() {
        let s = model(0.0).strategy(1.0, 2.0, 0.05).unwrap();
        assert_eq!(s.v1_star, 0.0);
        assert_eq!(s.v2_star, 0.0);
    }

    #[test]
    fn robust_distortion_signs() {
        let s = model(0.2).strategy(1.0, 2.0, 0.05).unwrap();
        assert_eq!(s.v1_star, -0.1);
        assert!(s.v2_star < 0.0);
    }

    #[test]
    fn more_robust_is_more_cautious() {
        let y = 0.04;
        let pis: Vec<f64> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&a| model(a).strategy(0.0, 1.0, y).unwrap().pi_star)
            .collect();
        assert!(pis[0] > pis[1] && pis[1] > pis[2], "{pis:?}");
    }

    #[test]
    fn strategy_errors() {
        let m = model(0.0);
        assert!(matches!(
            m.strategy(10.0 - 1e-7, 1.0, 0.04),
            Err(Error::TerminalSingularity { .. })
        ));
        assert!(matches!(m.strategy(1.0, 0.0, 0.04), Err(Error::Domain(_))));
        assert!(matches!(m.value(1.0, -1.0, 0.04), Err(Error::Domain(_))));
    }

    #[test]
    fn value_is_negative_and_homogeneous() {
        let m = model(0.1);
        let w1 = m.value(2.0, 1.3, 0.03).unwrap();
        let w2 = m.value(2.0, 2.6, 0.03).unwrap();
        assert!(w1 < 0.0);
        assert_relative_eq!(w2 / w1, 2f64.powf(1.0 - 1.4), max_relative = 1e-12);
    }

    #[test]
    fn unvalidated_params_are_refused() {
        let p = ModelParams {
            gamma: 3.5,
            ..ModelParams::baseline()
        };
        assert!(matches!(
            HestonModel::new(p, Settings::default()),
            Err(Error::ValidationFailed(_))
        ));
        assert!(HestonModel::unchecked(p, Settings::default()).is_ok());
    }

    proptest! {
        #[test]
        fn riccati_bounds(a in 0.0f64..0.3, t in 0.0f64..10.0, frac in 0.0f64..1.0) {
            let m = model(a);
            let (p, c) = (m.params(), m.consts());
            let s = t + frac * (10.0 - t);
            let pair = m.riccati(t, s).unwrap();
            let lvl = c.level_rate.abs() * p.horizon;
            prop_assert!(pair.b >= 0.0 && pair.b <= c.b_bound());
            prop_assert!(pair.a <= lvl);
            prop_assert!(pair.a >= -c.b_bound() * p.nu * p.horizon - lvl);
        }

        #[test]
        fn g_signs_and_slope_bound(a in 0.0f64..0.3, t in 0.0f64..9.9, y in 0.0f64..0.5) {
            let m = model(a);
            let gt = m.g(t, y).unwrap();
            prop_assert!(gt.g > 0.0);
            prop_assert!(gt.g_y <= 0.0 && gt.g_yy >= 0.0);
            prop_assert!(gt.log_slope().abs() <= m.consts().b_bound());
        }

        #[test]
        fn portfolio_decreases_in_variance(a in 0.0f64..0.3, t in 0.0f64..9.9, y in 0.0f64..0.4) {
            let m = model(a);
            let lo = m.strategy(t, 1.0, y).unwrap().pi_star;
            let hi = m.strategy(t, 1.0, y + 0.05).unwrap().pi_star;
            prop_assert!(hi <= lo);
        }
    }
}

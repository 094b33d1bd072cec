//! Flat `key = value` configuration files.
//!
//! The files are TOML restricted to top-level numbers: one `key = value`
//! per line, `#` starts a comment. Keys are the [`ModelParams`] field names in snake case (the horizon is
//! `t`, also accepted as `T`) plus the solver knobs of [`Settings`]. Unknown
//! or repeated keys are errors.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::closed_form::EvalOptions;
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Solver knobs that are not model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Moment exponent `q > 2` in (H1).
    pub q_exponent: f64,
    /// Optional consistency check on the derived EIS.
    pub psi_expected: Option<f64>,
    /// Minimum distance to the horizon for strategy evaluation, in years.
    pub t_guard: f64,
    /// Composite Simpson subintervals for `g`.
    pub quadrature_n: usize,
    /// Constant `K` in the admissible consumption bound
    /// `c/x <= 1/(T - s) + b y + K`. `None` selects the default of
    /// [`crate::simulation::default_consumption_bound`].
    pub consumption_bound_k: Option<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            q_exponent: 2.01,
            psi_expected: None,
            t_guard: 1e-6,
            quadrature_n: 512,
            consumption_bound_k: None,
        }
    }
}

impl Settings {
    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            quadrature_n: self.quadrature_n,
            t_guard: self.t_guard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub settings: Settings,
}

/// File contents before defaults are applied. `T` is accepted for `t`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    gamma: Option<f64>,
    delta: Option<f64>,
    rho: Option<f64>,
    r: Option<f64>,
    lambda_bar: Option<f64>,
    m: Option<f64>,
    nu: Option<f64>,
    beta_bar: Option<f64>,
    a: Option<f64>,
    #[serde(alias = "T")]
    t: Option<f64>,
    a1: Option<f64>,
    epsilon: Option<f64>,
    t0: Option<f64>,
    x0: Option<f64>,
    y0: Option<f64>,
    q_exponent: Option<f64>,
    psi_expected: Option<f64>,
    t_guard: Option<Spanned<f64>>,
    quadrature_n: Option<Spanned<i64>>,
    consumption_bound_k: Option<f64>,
}

/// 1-based line containing byte `offset`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Config {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            settings: Settings::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Renders the config in the file format, round-trippable through `parse`.
    pub fn render(&self) -> String {
        let p = &self.params;
        let s = &self.settings;
        let mut out = String::new();
        let pairs = [
            ("gamma", p.gamma),
            ("delta", p.delta),
            ("rho", p.rho),
            ("r", p.r),
            ("lambda_bar", p.lambda_bar),
            ("m", p.m),
            ("nu", p.nu),
            ("beta_bar", p.beta_bar),
            ("a", p.a),
            ("a1", p.a1),
            ("epsilon", p.epsilon),
            ("t", p.horizon),
            ("t0", p.t0),
            ("x0", p.x0),
            ("y0", p.y0),
            ("q_exponent", s.q_exponent),
            ("t_guard", s.t_guard),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v:?}");
        }
        let _ = writeln!(out, "quadrature_n = {}", s.quadrature_n);
        if let Some(v) = s.psi_expected {
            let _ = writeln!(out, "psi_expected = {v:?}");
        }
        if let Some(v) = s.consumption_bound_k {
            let _ = writeln!(out, "consumption_bound_k = {v:?}");
        }
        out
    }
}

impl std::str::FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;

        let required = [
            ("gamma", raw.gamma),
            ("delta", raw.delta),
            ("rho", raw.rho),
            ("r", raw.r),
            ("lambda_bar", raw.lambda_bar),
            ("m", raw.m),
            ("nu", raw.nu),
            ("beta_bar", raw.beta_bar),
            ("a", raw.a),
            ("t", raw.t),
        ];
        let missing: Vec<&str> = required.iter().filter(|(_, v)| v.is_none()).map(|(k, _)| *k).collect();
        if !missing.is_empty() {
            return Err(Error::Config {
                line: 0,
                message: format!("missing required keys: {}", missing.join(", ")),
            });
        }
        let [gamma, delta, rho, r, lambda_bar, m, nu, beta_bar, a, horizon] =
            required.map(|(_, v)| v.unwrap_or_default());
        let params = ModelParams {
            gamma,
            delta,
            rho,
            r,
            lambda_bar,
            m,
            nu,
            beta_bar,
            a,
            a1: raw.a1.unwrap_or(a),
            epsilon: raw.epsilon.unwrap_or(0.0),
            horizon,
            t0: raw.t0.unwrap_or(0.0),
            x0: raw.x0.unwrap_or(1.0),
            y0: raw.y0.unwrap_or(nu / m),
        };

        let defaults = Settings::default();
        let quadrature_n = match raw.quadrature_n {
            None => defaults.quadrature_n,
            Some(n) => {
                let v = *n.get_ref();
                if v < 2 || v % 2 != 0 || v > 100_000_000 {
                    return Err(Error::Config {
                        line: line_of(text, n.span().start),
                        message: format!("quadrature_n must be an even integer >= 2 (got {v})"),
                    });
                }
                v as usize
            }
        };
        let t_guard = match raw.t_guard {
            None => defaults.t_guard,
            Some(g) => {
                let v = *g.get_ref();
                if !(v > 0.0) {
                    return Err(Error::Config {
                        line: line_of(text, g.span().start),
                        message: format!("t_guard must be > 0 (got {v})"),
                    });
                }
                v
            }
        };
        let settings = Settings {
            q_exponent: raw.q_exponent.unwrap_or(defaults.q_exponent),
            psi_expected: raw.psi_expected,
            t_guard,
            quadrature_n,
            consumption_bound_k: raw.consumption_bound_k,
        };
        Ok(Config { params, settings })
    }
}

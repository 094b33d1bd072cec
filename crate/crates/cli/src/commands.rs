//! The five commands. Each is a pure function of its inputs, so repeated
//! runs with the same config, flags and seed give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use rzeh::oracles::uniform_grid;
use rzeh::params::k_denominator;
use rzeh::simulation::{
    cir_mean_check, feynman_kac_estimate, martingale_diagnostic, simulate_paths, write_dump, McEstimate, OptimalPolicy,
    SimConfig,
};
use rzeh::{derive_constants, validate_heston, Config, Error, HestonModel, ModelParams};

use crate::suite;
use crate::table::{Cell, Table};
use crate::{CliError, CliResult};

/// Robustness levels compared in the figures.
pub const FIGURE_ROBUSTNESS: [f64; 3] = [0.0, 0.1, 0.2];
/// Risk aversions compared in the non-robust sweep.
pub const FIGURE_GAMMAS: [f64; 3] = [1.2, 1.4, 1.6];

/// Builds the validated model, turning a failed gate into a check failure
/// that names it.
pub fn model(cfg: &Config) -> CliResult<HestonModel> {
    HestonModel::new(cfg.params, cfg.settings).map_err(|e| match e {
        Error::ValidationFailed(r) => CliError::CheckFailed(format!(
            "parameters fail validation ({}); run `rzeh validate` for details",
            r.summary()
        )),
        Error::InvalidParams(m) => CliError::CheckFailed(format!("invalid parameters: {m}")),
        Error::ZeroDenominator => CliError::CheckFailed("k is undefined for these parameters".into()),
        other => other.into(),
    })
}

/// Human-readable derived constants and validation report. The flag is true
/// when every gate passes.
pub fn validate(cfg: &Config) -> (String, bool) {
    let p = &cfg.params;
    let mut out = String::new();
    let c = match derive_constants(p) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "cannot derive constants: {e}");
            if matches!(e, Error::ZeroDenominator) {
                let _ = writeln!(out, "k denominator = {:e}", k_denominator(p.gamma, p.a, p.rho));
            }
            let _ = writeln!(out, "result: failed");
            return (out, false);
        }
    };
    let mut r = validate_heston(p, &c, cfg.settings.q_exponent);
    r.check_psi_expected(cfg.settings.psi_expected, c.psi);
    let pf = |ok: bool| if ok { "pass" } else { "FAIL" };

    let _ = writeln!(out, "derived constants");
    for (name, v) in [
        ("psi", c.psi),
        ("phi", c.phi),
        ("theta", c.theta),
        ("k", c.k),
        ("zeta", c.zeta),
        ("b", c.b),
        ("kappa", c.kappa),
        ("d", c.d),
        ("K_pi", c.k_pi),
        ("b_tilde", c.b_tilde),
        ("level_rate", c.level_rate),
        ("b/kappa", c.b_bound()),
    ] {
        let _ = writeln!(out, "  {name:<10} = {v:.10}");
    }
    let _ = writeln!(out, "validation");
    let _ = writeln!(
        out,
        "  preference case: ({}) {}",
        r.preference_case,
        pf(r.preference_case != rzeh::PreferenceCase::Violated)
    );
    let _ = writeln!(out, "  pinned EIS: {}", pf(r.pinned_eis_ok));
    if cfg.settings.psi_expected.is_some() {
        let _ = writeln!(out, "  psi_expected: {}", pf(r.psi_expected_ok));
    }
    let _ = writeln!(out, "  H1: {} (slack {:.6})", pf(r.h1_ok), r.h1_slack);
    let _ = writeln!(out, "  H2: {} (slack {:.6})", pf(r.h2_ok), r.h2_slack);
    let _ = writeln!(out, "  H3: {} ({:.6} < {:.6})", pf(r.h3_ok), r.h3_lhs, r.h3_rhs);
    let _ = writeln!(out, "  epsilon = 0: {}", pf(r.bequest_ok));
    let _ = writeln!(
        out,
        "  Feller (informational): {}",
        if r.feller_ok { "holds" } else { "fails" }
    );
    for m in &r.messages {
        let _ = writeln!(out, "  note: {m}");
    }
    let _ = writeln!(out, "result: {}", r.summary());
    (out, r.all_ok())
}

pub const SOLVE_HEADER: [&str; 12] = [
    "t",
    "y",
    "volatility",
    "A",
    "B_ref",
    "g",
    "g_y_over_g",
    "pi_star",
    "cx_star",
    "w_at_x1",
    "v1_star_at_x1",
    "v2_star",
];

/// Closed-form surface on the `(t, y)` grid, rows ordered by `t` then `y`.
/// `A` and `B_ref` are `A(t, T)` and `B(t, T)`.
pub fn solve(cfg: &Config, ts: &[f64], ys: &[f64]) -> CliResult<Table> {
    let m = model(cfg)?;
    let horizon = m.params().horizon;
    let mut table = Table::new(SOLVE_HEADER);
    for &t in ts {
        let rp = m.riccati(t, horizon)?;
        for &y in ys {
            let g = m.g(t, y)?;
            let s = m.strategy(t, 1.0, y)?;
            table.push(
                [
                    t,
                    y,
                    y.sqrt(),
                    rp.a,
                    rp.b,
                    g.g,
                    g.log_slope(),
                    s.pi_star,
                    s.cx_star,
                    s.w,
                    s.v1_star,
                    s.v2_star,
                ]
                .into_iter()
                .map(Cell::from)
                .collect(),
            );
        }
    }
    Ok(table)
}

/// Figure selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// `pi*` against volatility at the initial time.
    Portfolio,
    /// `pi*` against time at volatility 0.2.
    PortfolioOverTime,
    /// `c/x*` against volatility at the initial time.
    Consumption,
    /// The three panels for `a = 0` and several risk aversions.
    GammaSweep,
}

impl Figure {
    pub const ALL: [Figure; 4] = [
        Figure::Portfolio,
        Figure::PortfolioOverTime,
        Figure::Consumption,
        Figure::GammaSweep,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Figure::Portfolio => "fig1.csv",
            Figure::PortfolioOverTime => "fig2.csv",
            Figure::Consumption => "fig3.csv",
            Figure::GammaSweep => "figG.csv",
        }
    }
}

/// 100 volatilities on `[0.05, 0.5]`.
pub fn figure_volatilities() -> Vec<f64> {
    uniform_grid(0.05, 0.5, 100)
}

/// 101 times on `[t0, T]`, the last moved back to `T - t_guard` where the
/// strategy is still defined.
pub fn figure_times(p: &ModelParams, t_guard: f64) -> Vec<f64> {
    let mut ts = uniform_grid(p.t0, p.horizon, 101);
    if let Some(last) = ts.last_mut() {
        *last = p.horizon - t_guard;
    }
    ts
}

fn column_label(prefix: &str, v: f64) -> String {
    format!("{prefix}{}", crate::table::format_number(v))
}

/// One panel: `x` in the first column, one column per model.
fn panel(
    x_name: &str,
    xs: &[f64],
    models: &[(String, HestonModel)],
    eval: impl Fn(&HestonModel, f64) -> rzeh::Result<f64>,
) -> CliResult<Table> {
    let mut header = vec![x_name.to_owned()];
    header.extend(models.iter().map(|(l, _)| l.clone()));
    let mut table = Table::new(header);
    for &x in xs {
        let mut row = vec![Cell::Num(x)];
        for (_, m) in models {
            row.push(Cell::Num(eval(m, x)?));
        }
        table.push(row);
    }
    Ok(table)
}

/// Computes one figure. Returns the table and any warnings (models that
/// fail validation but are still evaluated for comparison).
pub fn figure(cfg: &Config, which: Figure) -> CliResult<(Table, Vec<String>)> {
    let base = cfg.params;
    let t0 = base.t0;
    let vols = figure_volatilities();
    let robust = || -> CliResult<Vec<(String, HestonModel)>> {
        FIGURE_ROBUSTNESS
            .iter()
            .map(|&a| {
                let c = Config {
                    params: base.with_robustness(a),
                    settings: cfg.settings,
                };
                Ok((column_label("a", a), model(&c)?))
            })
            .collect()
    };
    let pi_vol = |m: &HestonModel, v: f64| m.strategy(t0, 1.0, v * v).map(|s| s.pi_star);
    let cx_vol = |m: &HestonModel, v: f64| m.strategy(t0, 1.0, v * v).map(|s| s.cx_star);
    let pi_time = |m: &HestonModel, t: f64| m.strategy(t, 1.0, 0.04).map(|s| s.pi_star);
    let ts = figure_times(&base, cfg.settings.t_guard);
    let prefixed = |models: Vec<(String, HestonModel)>, p: &str| {
        models
            .into_iter()
            .map(|(l, m)| (format!("{p}_{l}"), m))
            .collect::<Vec<_>>()
    };
    match which {
        Figure::Portfolio => Ok((
            panel("volatility", &vols, &prefixed(robust()?, "pi_star"), pi_vol)?,
            vec![],
        )),
        Figure::PortfolioOverTime => Ok((panel("t", &ts, &prefixed(robust()?, "pi_star"), pi_time)?, vec![])),
        Figure::Consumption => Ok((
            panel("volatility", &vols, &prefixed(robust()?, "cx_star"), cx_vol)?,
            vec![],
        )),
        Figure::GammaSweep => {
            let mut warnings = Vec::new();
            let mut models = Vec::new();
            for &gamma in &FIGURE_GAMMAS {
                let params = ModelParams {
                    gamma,
                    ..base.with_robustness(0.0)
                };
                let m = match HestonModel::new(params, cfg.settings) {
                    Ok(m) => m,
                    Err(Error::ValidationFailed(r)) => {
                        warnings.push(format!(
                            "gamma = {gamma}: {}; evaluated anyway for comparison",
                            r.summary()
                        ));
                        HestonModel::unchecked(params, cfg.settings)?
                    }
                    Err(e) => return Err(e.into()),
                };
                models.push((column_label("gamma", gamma), m));
            }
            // Long format: panel number, abscissa, one column per gamma.
            let mut header = vec!["panel".to_owned(), "x".to_owned()];
            header.extend(models.iter().map(|(l, _)| l.clone()));
            let mut table = Table::new(header);
            let panels: [(f64, &[f64], &dyn Fn(&HestonModel, f64) -> rzeh::Result<f64>); 3] =
                [(1.0, &vols, &pi_vol), (2.0, &ts, &pi_time), (3.0, &vols, &cx_vol)];
            for (id, xs, eval) in panels {
                for &x in xs {
                    let mut row = vec![Cell::Num(id), Cell::Num(x)];
                    for (_, m) in &models {
                        row.push(Cell::Num(eval(m, x)?));
                    }
                    table.push(row);
                }
            }
            Ok((table, warnings))
        }
    }
}

/// Monte Carlo settings for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// The Feynman-Kac window stops this long before the horizon.
    pub cutoff: f64,
    /// Relative tolerance of the Feynman-Kac check.
    pub fk_rel_tol: f64,
    /// Records every this many steps for the path dump (0: endpoints only).
    pub record_stride: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            paths: 10_000,
            dt: 1e-3,
            seed: 2024,
            cutoff: 0.05,
            fk_rel_tol: 0.01,
            record_stride: 0,
        }
    }
}

pub const SIMULATE_HEADER: [&str; 5] = ["check", "estimate", "reference", "std_error", "pass"];

/// Times at which the simulated variance mean is compared with the exact one.
pub const CIR_TIMES: [f64; 3] = [1.0, 5.0, 10.0];

fn mc_row(name: &str, est: &McEstimate, reference: f64, pass: bool) -> Vec<Cell> {
    vec![
        name.into(),
        est.mean.into(),
        reference.into(),
        est.standard_error.into(),
        pass.into(),
    ]
}

/// Feynman-Kac check of the value function from `(t0, x0, y0)`, CIR mean
/// checks and the martingale diagnostic. The Feynman-Kac row passes when
/// its 3-sigma interval lies within `fk_rel_tol` of the closed form; the
/// others pass within 3 standard errors. Optionally dumps the paths.
pub fn simulate(cfg: &Config, opts: &SimulateOptions, dump: Option<&Path>) -> CliResult<Table> {
    let m = model(cfg)?;
    let p = *m.params();
    let t_end = p.horizon - opts.cutoff;
    if !(t_end >= p.t0) {
        return Err(CliError::Input(format!(
            "cutoff {} leaves no simulation window",
            opts.cutoff
        )));
    }
    let mut sc = SimConfig::new(opts.paths, opts.dt, opts.seed, p.t0, t_end);
    sc.record_stride = opts.record_stride;
    let policy = OptimalPolicy::new(&m, &sc.times()?)?;
    let bundle = simulate_paths(&sc, &policy, &p, m.consts(), cfg.settings.consumption_bound_k)?;
    if let Some(path) = dump {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
        write_dump(&bundle, std::io::BufWriter::new(file))?;
    }

    let mut table = Table::new(SIMULATE_HEADER);
    let fk = feynman_kac_estimate(&bundle)?;
    let w = m.value(p.t0, p.x0, p.y0)?;
    let fk_pass = (fk.mean - w).abs() + 3.0 * fk.standard_error <= opts.fk_rel_tol * w.abs();
    table.push(mc_row("feynman_kac", &fk, w, fk_pass));

    for row in cir_mean_check(&p, &CIR_TIMES, opts.paths, opts.dt, opts.seed ^ 0x5eed)? {
        let name = format!("cir_mean_s{}", crate::table::format_number(row.s));
        table.push(mc_row(
            &name,
            &row.estimate,
            row.exact,
            row.estimate.within(row.exact, 3.0),
        ));
    }

    let mart = martingale_diagnostic(&bundle);
    table.push(mc_row("martingale", &mart, 0.0, mart.within(0.0, 3.0)));
    Ok(table)
}

/// Tolerances for `verify`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tol_ode: f64,
    pub tol_pde: f64,
    pub tol_residual: f64,
    /// Required error reduction when the PDE grid is refined.
    pub min_refinement: f64,
    pub saddle_step: f64,
    pub saddle_slack: f64,
    pub saddle_states: usize,
    pub seed: u64,
    /// Scales the derived `b` before checking; a mutation hook for tests.
    pub corrupt_b: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tol_ode: 1e-8,
            tol_pde: 1e-3,
            tol_residual: 1e-6,
            min_refinement: 3.0,
            saddle_step: 1e-3,
            saddle_slack: 1e-10,
            saddle_states: 400,
            seed: 2024,
            corrupt_b: None,
        }
    }
}

pub const VERIFY_HEADER: [&str; 6] = ["check", "measured", "tolerance", "pass", "worst_t", "worst_y"];

/// Runs the oracle cross-checks. Returns the report table and, when any
/// check fails, a message naming the worst offender.
pub fn verify(cfg: &Config, opts: &VerifyOptions) -> CliResult<(Table, Option<String>)> {
    let mut m = model(cfg)?;
    if let Some(f) = opts.corrupt_b {
        let mut c = *m.consts();
        c.b *= f;
        m = m.with_consts(c);
    }
    let mut table = Table::new(VERIFY_HEADER);
    let mut failures = Vec::new();
    let mut push = |name: &str, measured: f64, tol: f64, pass: bool, t: f64, y: f64| {
        if !pass {
            failures.push(format!(
                "{name} = {measured:.4e} (tolerance {tol:e}) worst at t = {t:.6}, y = {y:.6}"
            ));
        }
        table.push(vec![
            name.into(),
            measured.into(),
            tol.into(),
            pass.into(),
            t.into(),
            y.into(),
        ]);
    };

    let ode = suite::riccati_agreement(&m, 100)?;
    push(
        "riccati_ode",
        ode.value,
        opts.tol_ode,
        ode.value < opts.tol_ode,
        ode.t,
        ode.y,
    );

    let (pde, ratio) = suite::pde_agreement(&m, 256)?;
    push("pde_g", pde, opts.tol_pde, pde < opts.tol_pde, f64::NAN, f64::NAN);
    push(
        "pde_refinement_ratio",
        ratio,
        opts.min_refinement,
        ratio >= opts.min_refinement,
        f64::NAN,
        f64::NAN,
    );

    let res = suite::hjbi_agreement(&m, 20)?;
    push(
        "hjbi_residual",
        res.value,
        opts.tol_residual,
        res.value < opts.tol_residual,
        res.t,
        res.y,
    );

    let sad = suite::saddle_agreement(&m, opts.saddle_states, opts.saddle_step, opts.seed)?;
    push(
        "saddle",
        sad.value,
        opts.saddle_slack,
        sad.value <= opts.saddle_slack,
        sad.t,
        sad.y,
    );

    let failure = (!failures.is_empty()).then(|| failures.join("; "));
    Ok((table, failure))
}

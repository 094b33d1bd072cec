//! Feedback controls for the simulator, including a tabulated closed-form
//! optimum that avoids a quadrature per path step.

use crate::closed_form::{
    distortion_from_slope, eval_g, hedging_coefficient, portfolio_from_slope, HestonModel, RiccatiCoefficients,
};
use crate::error::Result;
use crate::params::{DerivedConstants, ModelParams};

/// Controls at one state. The wealth distortion enters scaled by wealth,
/// `v1_x = v1 * x`, which the admissible set pins to `-a1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    /// Consumption-wealth ratio `c / x`.
    pub cx: f64,
    pub pi: f64,
    pub v1_x: f64,
    pub v2: f64,
}

/// `w` and its first partials at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuePoint {
    pub w: f64,
    /// `ln((1 - gamma) w)`.
    pub log_scaled: f64,
    /// Aggregator consumption term `(c / ((1-gamma) w)^(1/(1-gamma)))^(1 - 1/psi)`
    /// for the attached controls.
    pub consumption_term: f64,
    /// `x w_x`, the wealth sensitivity per unit of log-wealth.
    pub x_w_x: f64,
    pub w_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    pub controls: Controls,
    pub value: Option<ValuePoint>,
}

/// A control rule evaluated on the simulation time grid. `step` indexes the
/// grid node `t`.
pub trait FeedbackPolicy: Sync {
    fn evaluate(&self, step: usize, t: f64, x: f64, y: f64) -> Result<PolicyOutput>;

    /// Same as [`evaluate`](Self::evaluate) with wealth given as `ln x`.
    #[inline]
    fn evaluate_log(&self, step: usize, t: f64, ln_x: f64, y: f64) -> Result<PolicyOutput> {
        self.evaluate(step, t, ln_x.exp(), y)
    }
}

/// `c = pi = v = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl FeedbackPolicy for ZeroPolicy {
    fn evaluate(&self, step: usize, t: f64, _x: f64, y: f64) -> Result<PolicyOutput> {
        self.evaluate_log(step, t, 0.0, y)
    }

    #[inline]
    fn evaluate_log(&self, _step: usize, _t: f64, _ln_x: f64, _y: f64) -> Result<PolicyOutput> {
        Ok(PolicyOutput {
            controls: Controls {
                cx: 0.0,
                pi: 0.0,
                v1_x: 0.0,
                v2: 0.0,
            },
            value: None,
        })
    }
}

/// Controls from a closure of `(t, x, y)`; no value information.
pub struct FnPolicy<F>(pub F);

impl<F> FeedbackPolicy for FnPolicy<F>
where
    F: Fn(f64, f64, f64) -> Controls + Sync,
{
    fn evaluate(&self, _step: usize, t: f64, x: f64, y: f64) -> Result<PolicyOutput> {
        Ok(PolicyOutput {
            controls: (self.0)(t, x, y),
            value: None,
        })
    }
}

/// `g`, `g_y`, `g_yy` on a `(step, y)` lattice, with cubic Hermite
/// interpolation in `y` and direct quadrature above the last node.
#[derive(Debug, Clone)]
pub struct GTable {
    times: Vec<f64>,
    dy: f64,
    inv_dy: f64,
    n_y: usize,
    /// `[g, g_y, g_yy]` per node, row-major by step.
    nodes: Vec<[f64; 3]>,
    /// `[ln g, g_y / g]` per node.
    log_nodes: Vec<[f64; 2]>,
}

impl GTable {
    /// Tabulates `g` at the given times (ascending, all `<= T`).
    ///
    /// The value at the last time comes from Simpson quadrature; earlier rows
    /// add one panel of the `s`-integral each, with the end-corrected
    /// trapezoid rule (fourth order, using the Riccati right-hand sides for
    /// the integrand derivatives).
    pub fn build(
        p: &ModelParams,
        c: &DerivedConstants,
        times: &[f64],
        y_max: f64,
        n_y: usize,
        quadrature_n: usize,
    ) -> Result<Self> {
        assert!(n_y >= 2 && !times.is_empty());
        let dy = y_max / (n_y - 1) as f64;
        let ys: Vec<f64> = (0..n_y).map(|j| j as f64 * dy).collect();
        let n = times.len();
        let mut nodes = vec![[0.0; 3]; n * n_y];

        let last = n - 1;
        for (j, &y) in ys.iter().enumerate() {
            let g = eval_g(times[last], y, c, p, quadrature_n)?;
            nodes[last * n_y + j] = [g.g, g.g_y, g.g_yy];
        }

        let coeffs = RiccatiCoefficients::new(p, c);
        let delta_psi = p.delta.powf(c.psi);
        // Integrands [h, -B h, B^2 h] and their tau-derivatives.
        let panel = |tau: f64| -> Vec<([f64; 3], [f64; 3])> {
            let rp = coeffs.at(tau);
            let (a_val, b_val) = (rp.a, rp.b);
            let a_d = coeffs.level_rate - coeffs.nu * b_val;
            let b_d = coeffs.b - coeffs.kappa * b_val - 0.5 * coeffs.beta_bar.powi(2) * b_val * b_val;
            ys.iter()
                .map(|&y| {
                    let e = (a_val - b_val * y).exp();
                    let e_d = (a_d - b_d * y) * e;
                    (
                        [e, -b_val * e, b_val * b_val * e],
                        [e_d, -b_d * e - b_val * e_d, 2.0 * b_val * b_d * e + b_val * b_val * e_d],
                    )
                })
                .collect()
        };
        let mut upper = panel(p.horizon - times[last]);
        for i in (0..last).rev() {
            let tau_hi = p.horizon - times[i];
            let width = times[i + 1] - times[i];
            let lower = panel(tau_hi);
            for j in 0..n_y {
                let (fa, da) = upper[j];
                let (fb, db) = lower[j];
                let prev = nodes[(i + 1) * n_y + j];
                let mut row = [0.0; 3];
                for q in 0..3 {
                    let add = 0.5 * width * (fa[q] + fb[q]) - width * width / 12.0 * (db[q] - da[q]);
                    row[q] = prev[q] + delta_psi * add;
                }
                nodes[i * n_y + j] = row;
            }
            upper = lower;
        }
        let log_nodes = nodes.iter().map(|n| [n[0].ln(), n[1] / n[0]]).collect();
        Ok(Self {
            times: times.to_vec(),
            dy,
            inv_dy: 1.0 / dy,
            n_y,
            nodes,
            log_nodes,
        })
    }

    pub fn y_max(&self) -> f64 {
        self.dy * (self.n_y - 1) as f64
    }

    /// `(g, g_y)` at `(times[step], y)`, or `None` above the table.
    #[inline]
    pub fn lookup(&self, step: usize, y: f64) -> Option<(f64, f64)> {
        self.lookup_with_log(step, y).map(|(g, g_y, _)| (g, g_y))
    }

    /// `(g, g_y, ln g)`; `ln g` is interpolated on its own nodes.
    #[inline]
    pub fn lookup_with_log(&self, step: usize, y: f64) -> Option<(f64, f64, f64)> {
        let y = y.max(0.0);
        let pos = y * self.inv_dy;
        if pos > (self.n_y - 1) as f64 {
            return None;
        }
        let j = (pos as usize).min(self.n_y - 2);
        let u = pos - j as f64;
        let base = step * self.n_y + j;
        let (lo, hi) = (self.nodes[base], self.nodes[base + 1]);
        let (llo, lhi) = (self.log_nodes[base], self.log_nodes[base + 1]);
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        let herm = |f0: f64, d0: f64, f1: f64, d1: f64| h00 * f0 + h10 * self.dy * d0 + h01 * f1 + h11 * self.dy * d1;
        Some((
            herm(lo[0], lo[1], hi[0], hi[1]),
            herm(lo[1], lo[2], hi[1], hi[2]),
            herm(llo[0], llo[1], lhi[0], lhi[1]),
        ))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// The closed-form optimum `(c*, pi*, v*)` with the value attached.
#[derive(Debug, Clone)]
pub struct OptimalPolicy {
    params: ModelParams,
    consts: DerivedConstants,
    quadrature_n: usize,
    table: GTable,
    delta_psi: f64,
    /// Exponent of `g` in the consumption term. With the pinned EIS it is
    /// exactly `-1` and the term reduces to `delta^(psi - 1) / g`.
    term_g_power: f64,
    log_delta_psi: f64,
    myopic: f64,
    hedge: f64,
    distortion: f64,
}

impl OptimalPolicy {
    /// Default tabulation: 64 variance nodes up to `max(0.5, 20 nu / m)`.
    pub fn new(model: &HestonModel, times: &[f64]) -> Result<Self> {
        let p = model.params();
        let y_max = (20.0 * p.nu / p.m).max(0.5);
        Self::with_table(model, times, y_max, 64)
    }

    pub fn with_table(model: &HestonModel, times: &[f64], y_max: f64, n_y: usize) -> Result<Self> {
        let (p, c) = (*model.params(), *model.consts());
        let quadrature_n = model.settings().quadrature_n;
        let table = GTable::build(&p, &c, times, y_max, n_y, quadrature_n)?;
        Ok(Self {
            params: p,
            consts: c,
            quadrature_n,
            table,
            delta_psi: p.delta.powf(c.psi),
            term_g_power: -(1.0 - 1.0 / c.psi) * (1.0 + c.k / (1.0 - p.gamma)),
            log_delta_psi: c.psi * p.delta.ln(),
            myopic: portfolio_from_slope(0.0, &p, &c),
            hedge: hedging_coefficient(&p, &c),
            distortion: distortion_from_slope(1.0, &p, &c),
        })
    }

    pub fn table(&self) -> &GTable {
        &self.table
    }

    /// Consumption term at `c/x = delta^psi / g`; wealth cancels.
    #[inline]
    fn consumption_term(&self, g: f64, log_g: f64) -> f64 {
        if (self.term_g_power + 1.0).abs() < 1e-12 {
            self.delta_psi / (self.params.delta * g)
        } else {
            ((1.0 - 1.0 / self.consts.psi) * self.log_delta_psi + self.term_g_power * log_g).exp()
        }
    }

    #[inline]
    fn g_triple(&self, step: usize, t: f64, y: f64) -> Result<(f64, f64, f64)> {
        match self.table.lookup_with_log(step, y) {
            Some(v) => Ok(v),
            None => {
                let g = eval_g(t, y.max(0.0), &self.consts, &self.params, self.quadrature_n)?;
                Ok((g.g, g.g_y, g.g.ln()))
            }
        }
    }
}

impl FeedbackPolicy for OptimalPolicy {
    #[inline]
    fn evaluate(&self, step: usize, t: f64, x: f64, y: f64) -> Result<PolicyOutput> {
        self.evaluate_log(step, t, x.ln(), y)
    }

    #[inline]
    fn evaluate_log(&self, step: usize, t: f64, ln_x: f64, y: f64) -> Result<PolicyOutput> {
        let (p, c) = (&self.params, &self.consts);
        let (g, g_y, log_g) = self.g_triple(step, t, y)?;
        let slope = g_y / g;
        let log_scaled = (1.0 - p.gamma) * ln_x + c.k * log_g;
        let w = log_scaled.exp() / (1.0 - p.gamma);
        Ok(PolicyOutput {
            controls: Controls {
                cx: self.delta_psi / g,
                pi: self.myopic + self.hedge * slope,
                v1_x: -p.a,
                v2: self.distortion * slope,
            },
            value: Some(ValuePoint {
                w,
                log_scaled,
                consumption_term: self.consumption_term(g, log_g),
                x_w_x: (1.0 - p.gamma) * w,
                w_y: c.k * w * slope,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Settings;
    use crate::oracles::uniform_grid;

    #[test]
    fn table_matches_quadrature() {
        let m = HestonModel::new(ModelParams::baseline().with_robustness(0.1), Settings::default()).unwrap();
        let times = uniform_grid(0.0, 9.95, 9951);
        let policy = OptimalPolicy::new(&m, &times).unwrap();
        for (step, y) in [(0usize, 0.0225), (17, 0.0031), (5000, 0.2), (9950, 0.07), (9000, 0.49)] {
            let (g, g_y) = policy.table().lookup(step, y).unwrap();
            let exact = m.g(times[step], y).unwrap();
            assert!(
                ((g - exact.g) / exact.g).abs() < 1e-9,
                "step {step}: {g} vs {}",
                exact.g
            );
            assert!(((g_y - exact.g_y) / exact.g_y).abs() < 1e-7, "step {step}");
        }
        assert!(policy.table().lookup(0, 0.6).is_none());
    }

    #[test]
    fn consumption_term_matches_aggregator() {
        use crate::verification::EpsteinZin;
        for a in [0.0, 0.2] {
            let m = HestonModel::new(ModelParams::baseline().with_robustness(a), Settings::default()).unwrap();
            let times = uniform_grid(0.0, 5.0, 51);
            let policy = OptimalPolicy::new(&m, &times).unwrap();
            let prefs = EpsteinZin::from_model(m.params(), m.consts());
            for (step, x, y) in [(0, 1.0, 0.0225), (20, 3.5, 0.1), (50, 0.2, 0.004)] {
                let out = policy.evaluate(step, times[step], x, y).unwrap();
                let v = out.value.unwrap();
                let direct = prefs.f(out.controls.cx * x, v.w).unwrap();
                let fast = prefs.f_from_term(v.consumption_term, v.w);
                assert!(
                    (fast - direct).abs() < 1e-12 * (1.0 + direct.abs()),
                    "{fast} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn optimal_policy_matches_closed_form() {
        let m = HestonModel::new(ModelParams::baseline().with_robustness(0.2), Settings::default()).unwrap();
        let times = uniform_grid(1.0, 2.0, 101);
        let policy = OptimalPolicy::new(&m, &times).unwrap();
        for (step, x, y) in [(0usize, 1.0, 0.0225), (50, 2.5, 0.1), (100, 0.3, 0.9)] {
            let out = policy.evaluate(step, times[step], x, y).unwrap();
            let s = m.strategy(times[step], x, y).unwrap();
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            assert!(rel(out.controls.pi, s.pi_star) < 1e-9);
            assert!(rel(out.controls.cx, s.cx_star) < 1e-9);
            assert!(rel(out.controls.v1_x / x, s.v1_star) < 1e-12);
            assert!(rel(out.controls.v2, s.v2_star) < 1e-6);
            assert!(rel(out.value.unwrap().w, s.w) < 1e-9);
        }
    }
}

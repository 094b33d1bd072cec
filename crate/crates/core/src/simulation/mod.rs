//! Monte Carlo simulation of the distorted Heston dynamics
//!
//! ```text
//! dX = [X (r + pi lambda_bar Y) - c + X^2 pi^2 Y v1 + X pi rho beta_bar Y v2] dt + X pi sqrt(Y) dB
//! dY = [nu - m Y + X pi rho beta_bar Y v1 + beta_bar^2 Y v2] dt + beta_bar sqrt(Y) (rho dB + sqrt(1 - rho^2) dB')
//! ```
//!
//! Wealth is stepped in logs, variance with full-truncation Euler.

mod dump;
mod estimators;
mod policy;

pub use dump::{read_dump, write_dump, DUMP_MAGIC, DUMP_VERSION};
pub use estimators::{
    cir_mean, cir_mean_check, comparison_violation_fraction, feynman_kac_estimate, martingale_diagnostic,
    wealth_moment, CirMeanRow,
};
pub use policy::{Controls, FeedbackPolicy, FnPolicy, GTable, OptimalPolicy, PolicyOutput, ValuePoint, ZeroPolicy};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{DerivedConstants, ModelParams};
use crate::verification::{penalty_with_value, EpsteinZin};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub t_start: f64,
    pub t_end: f64,
    /// Paths come in pairs driven by `(Z, -Z)`; an odd count leaves the last
    /// path unpaired.
    pub antithetic: bool,
    /// Record the state every `record_stride` steps (plus the last step);
    /// `0` keeps only the endpoints.
    pub record_stride: usize,
    /// Also simulate the comparison variance with rate `m - a1 beta_bar K_pi`.
    pub track_comparison: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, seed: u64, t_start: f64, t_end: f64) -> Self {
        Self {
            n_paths,
            dt,
            seed,
            t_start,
            t_end,
            antithetic: true,
            record_stride: 0,
            track_comparison: false,
        }
    }

    /// Number of Euler steps; `(t_end - t_start) / dt` must be an integer to
    /// within a few ulps.
    pub fn n_steps(&self) -> Result<usize> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParams("n_paths must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(Error::InvalidParams(format!(
                "dt must be in (0, 0.01] (got {})",
                self.dt
            )));
        }
        if !(self.t_end >= self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::InvalidParams(format!(
                "need t_start <= t_end (got {} and {})",
                self.t_start, self.t_end
            )));
        }
        let ratio = (self.t_end - self.t_start) / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 8.0 * f64::EPSILON * ratio.max(1.0) {
            return Err(Error::InvalidParams(format!(
                "(t_end - t_start) / dt = {ratio} is not an integer"
            )));
        }
        Ok(n as usize)
    }

    /// Step times `t_start + n dt`, ending exactly at `t_end`.
    pub fn times(&self) -> Result<Vec<f64>> {
        let n = self.n_steps()?;
        Ok((0..=n)
            .map(|i| {
                if i == n {
                    self.t_end
                } else {
                    self.t_start + i as f64 * self.dt
                }
            })
            .collect())
    }

    /// Step indices at which states are recorded.
    pub fn record_steps(&self) -> Result<Vec<usize>> {
        let n = self.n_steps()?;
        let mut steps: Vec<usize> = if self.record_stride == 0 {
            vec![0]
        } else {
            (0..=n).step_by(self.record_stride).collect()
        };
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        Ok(steps)
    }
}

/// Bounds of the admissible control set at time `s`:
/// `pi in [0, K_pi]`, `c/x <= 1/(T - s) + b y + K`, `v1 x = -a1`,
/// `-a1 k b / ((gamma - 1) kappa) <= v2 <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSet {
    pub k_pi: f64,
    pub b: f64,
    pub consumption_k: f64,
    pub a1: f64,
    pub v2_floor: f64,
    pub horizon: f64,
}

impl AdmissibleSet {
    pub fn new(p: &ModelParams, c: &DerivedConstants, consumption_k: Option<f64>) -> Self {
        let v2_floor = if p.a1 == 0.0 {
            0.0
        } else {
            -(p.a1 * c.k / (p.gamma - 1.0) * c.b_bound()).abs()
        };
        Self {
            k_pi: c.k_pi,
            b: c.b,
            consumption_k: consumption_k.unwrap_or_else(|| default_consumption_bound(p, c)),
            a1: p.a1,
            v2_floor,
            horizon: p.horizon,
        }
    }

    #[inline]
    pub fn check(&self, t: f64, y: f64, u: &Controls) -> Result<()> {
        const REL: f64 = 1e-9;
        let fail = |what: String| Err(Error::AdmissibilityViolation(format!("t = {t}, y = {y}: {what}")));
        if !(u.pi >= -REL * self.k_pi && u.pi <= self.k_pi * (1.0 + REL)) {
            return fail(format!("pi = {} outside [0, {}]", u.pi, self.k_pi));
        }
        let cap = 1.0 / (self.horizon - t) + self.b * y + self.consumption_k;
        if !(u.cx >= 0.0 && u.cx <= cap * (1.0 + REL)) {
            return fail(format!("c/x = {} outside [0, {cap}]", u.cx));
        }
        if !((u.v1_x + self.a1).abs() <= REL * self.a1.max(1.0)) {
            return fail(format!("v1 x = {} but must equal {}", u.v1_x, -self.a1));
        }
        let floor = self.v2_floor * (1.0 + REL) - 1e-15;
        if !(u.v2 <= 0.0 && u.v2 >= floor) {
            return fail(format!("v2 = {} outside [{}, 0]", u.v2, self.v2_floor));
        }
        Ok(())
    }
}

/// `K = |level_rate| + nu b / kappa`, enough for the closed-form consumption
/// rule to stay admissible on the whole horizon.
pub fn default_consumption_bound(p: &ModelParams, c: &DerivedConstants) -> f64 {
    c.level_rate.abs() + p.nu * c.b / c.kappa
}

/// Simulated paths. Per-path arrays are indexed `path * n_records + record`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub antithetic: bool,
    /// Times of the recorded states.
    pub record_times: Vec<f64>,
    pub x: Vec<f64>,
    /// Recorded `max(Y, 0)`.
    pub y: Vec<f64>,
    pub comparison: Option<Vec<f64>>,
    /// `int (f + penalty) dr` per path; zero without value information.
    pub running_reward: Vec<f64>,
    /// `int w_z^T Lambda dB` per path; zero without value information.
    pub stochastic_integral: Vec<f64>,
    /// `w` at the final state, NaN without value information.
    pub terminal_value: Vec<f64>,
    /// `w` at the initial state, NaN without value information.
    pub initial_value: f64,
    /// Steps at which `Y` exceeded the comparison process.
    pub comparison_violations: u64,
    pub path_seeds: Vec<u64>,
}

impl PathBundle {
    pub fn n_records(&self) -> usize {
        self.record_times.len()
    }

    pub fn x_at(&self, path: usize, record: usize) -> f64 {
        self.x[path * self.n_records() + record]
    }

    pub fn y_at(&self, path: usize, record: usize) -> f64 {
        self.y[path * self.n_records() + record]
    }

    /// Per-path values folded into antithetic pair means where applicable.
    pub fn grouped(&self, per_path: &[f64]) -> Vec<f64> {
        if !self.antithetic {
            return per_path.to_vec();
        }
        per_path
            .chunks(2)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_effective)`; infinite for a
    /// single sample.
    pub standard_error: f64,
    pub n_effective: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let standard_error = if n < 2 {
            f64::INFINITY
        } else {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self {
            mean,
            standard_error,
            n_effective: n,
        }
    }

    /// `|mean - reference| <= z * standard_error`.
    pub fn within(&self, reference: f64, z: f64) -> bool {
        (self.mean - reference).abs() <= z * self.standard_error
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator seed for one path group.
pub fn path_seed(seed: u64, group: u64) -> u64 {
    mix(mix(seed) ^ group)
}

/// Groups advanced together, so each step's policy data is reused across
/// the batch while it is still in cache.
const BATCH_GROUPS: usize = 128;

struct PathState {
    ln_x: f64,
    y: f64,
    y_cmp: f64,
    sign: f64,
    x: Vec<f64>,
    y_rec: Vec<f64>,
    cmp: Vec<f64>,
    reward: f64,
    rate: f64,
    integral: f64,
    terminal_value: f64,
    violations: u64,
}

struct Engine<'a, P: FeedbackPolicy> {
    p: &'a ModelParams,
    prefs: EpsteinZin,
    policy: &'a P,
    bounds: AdmissibleSet,
    times: Vec<f64>,
    /// `(dt, sqrt dt)` of each step.
    steps: Vec<(f64, f64)>,
    record_steps: Vec<usize>,
    x0: f64,
    y0: f64,
    comparison_rate: Option<f64>,
    rho_c: f64,
}

impl<P: FeedbackPolicy> Engine<'_, P> {
    fn start(&self, sign: f64) -> PathState {
        let n_rec = self.record_steps.len();
        PathState {
            ln_x: self.x0.ln(),
            y: self.y0,
            y_cmp: self.y0,
            sign,
            x: Vec::with_capacity(n_rec),
            y_rec: Vec::with_capacity(n_rec),
            cmp: Vec::new(),
            reward: 0.0,
            rate: 0.0,
            integral: 0.0,
            terminal_value: f64::NAN,
            violations: 0,
        }
    }

    /// Records the state if `step` is on the schedule and, before the last
    /// step, advances it with normals `(z0, z1)`.
    fn step(&self, s: &mut PathState, step: usize, record: bool, z0: f64, z1: f64) -> Result<()> {
        let p = self.p;
        let n = self.times.len() - 1;
        let t = self.times[step];
        let yp = s.y.max(0.0);
        // Wealth itself is only needed for the record; everything else runs
        // on ln x.
        if !s.ln_x.is_finite() || !s.y.is_finite() || s.ln_x > f64::MAX.ln() {
            return Err(Error::InstabilityDetected {
                t,
                y: s.y,
                value: s.ln_x.exp(),
            });
        }
        if record {
            s.x.push(s.ln_x.exp());
            s.y_rec.push(yp);
            if self.comparison_rate.is_some() {
                s.cmp.push(s.y_cmp.max(0.0));
            }
        }
        let PolicyOutput { controls: u, value } = self.policy.evaluate_log(step, t, s.ln_x, yp)?;
        if let Some(v) = value {
            // Trapezoid rule in time for the running reward.
            let f = if u.cx > 0.0 && v.w * (1.0 - p.gamma) > 0.0 {
                self.prefs.f_from_term(v.consumption_term, v.w)
            } else if u.cx > 0.0 {
                self.prefs.f(u.cx * s.ln_x.exp(), v.w)?
            } else {
                0.0
            };
            // The penalty depends on wealth only through v1 x.
            let rate = f + penalty_with_value([u.v1_x, u.v2], 1.0, yp, u.pi, v.w, p)?;
            if step > 0 {
                s.reward += 0.5 * (s.rate + rate) * (t - self.times[step - 1]);
            }
            s.rate = rate;
        }
        if step == n {
            if let Some(v) = value {
                s.terminal_value = v.w;
            }
            return Ok(());
        }
        self.bounds.check(t, yp, &u)?;
        let (dt, sq) = self.steps[step];
        let db = s.sign * z0 * sq;
        let db_perp = s.sign * z1 * sq;
        let vol = yp.sqrt();

        if let Some(v) = value {
            s.integral += (v.x_w_x * u.pi * vol + v.w_y * p.beta_bar * vol * p.rho) * db
                + v.w_y * p.beta_bar * vol * self.rho_c * db_perp;
        }

        let pi = u.pi;
        s.ln_x += (p.r + pi * p.lambda_bar * yp - u.cx + pi * pi * u.v1_x * yp + pi * p.rho * p.beta_bar * u.v2 * yp
            - 0.5 * pi * pi * yp)
            * dt
            + pi * vol * db;
        let factor_noise = p.beta_bar * (p.rho * db + self.rho_c * db_perp);
        s.y += (p.nu - p.m * yp + pi * p.rho * p.beta_bar * u.v1_x * yp + p.beta_bar * p.beta_bar * u.v2 * yp) * dt
            + vol * factor_noise;
        if let Some(k2) = self.comparison_rate {
            let cp = s.y_cmp.max(0.0);
            s.y_cmp += (p.nu - k2 * cp) * dt + cp.sqrt() * factor_noise;
            if s.y.max(0.0) > s.y_cmp.max(0.0) + 1e-12 {
                s.violations += 1;
            }
        }
        Ok(())
    }

    /// Runs groups `groups` in lockstep. Each group owns one generator; its
    /// members share the draws with signs `+1, -1`.
    fn run_batch(&self, seeds: &[u64], members: &[usize]) -> Result<Vec<(u64, PathState)>> {
        let n = self.times.len() - 1;
        let mut rngs: Vec<ChaCha8Rng> = seeds.iter().map(|&s| ChaCha8Rng::seed_from_u64(s)).collect();
        let mut states: Vec<Vec<PathState>> = members
            .iter()
            .map(|&k| (0..k).map(|i| self.start(if i == 0 { 1.0 } else { -1.0 })).collect())
            .collect();
        let mut next_rec = 0;
        for step in 0..=n {
            let record = next_rec < self.record_steps.len() && self.record_steps[next_rec] == step;
            if record {
                next_rec += 1;
            }
            for (rng, group) in rngs.iter_mut().zip(states.iter_mut()) {
                let (z0, z1) = if step < n {
                    (StandardNormal.sample(rng), StandardNormal.sample(rng))
                } else {
                    (0.0, 0.0)
                };
                for s in group.iter_mut() {
                    self.step(s, step, record, z0, z1)?;
                }
            }
        }
        Ok(seeds
            .iter()
            .zip(states)
            .flat_map(|(&seed, group)| group.into_iter().map(move |s| (seed, s)))
            .collect())
    }
}

/// Simulates `cfg.n_paths` paths from `(p.x0, p.y0)` at `cfg.t_start` under
/// `policy`, checking every control against the admissible set.
///
/// Paths are independent and seeded from `(cfg.seed, group index)`, so the
/// output does not depend on how the work is scheduled.
pub fn simulate_paths<P: FeedbackPolicy>(
    cfg: &SimConfig,
    policy: &P,
    p: &ModelParams,
    c: &DerivedConstants,
    consumption_k: Option<f64>,
) -> Result<PathBundle> {
    let n_steps = cfg.n_steps()?;
    if !(cfg.t_end < p.horizon) {
        return Err(Error::InvalidParams(format!(
            "simulation must stop before the horizon (t_end = {}, T = {})",
            cfg.t_end, p.horizon
        )));
    }
    let times = cfg.times()?;
    let record_steps = cfg.record_steps()?;
    let record_times: Vec<f64> = record_steps.iter().map(|&s| times[s]).collect();
    let engine = Engine {
        p,
        prefs: EpsteinZin::from_model(p, c),
        policy,
        bounds: AdmissibleSet::new(p, c, consumption_k),
        steps: times.windows(2).map(|w| (w[1] - w[0], (w[1] - w[0]).sqrt())).collect(),
        times,
        record_steps,
        x0: p.x0,
        y0: p.y0,
        comparison_rate: cfg.track_comparison.then_some(p.m - p.a1 * p.beta_bar * c.k_pi),
        rho_c: (1.0 - p.rho * p.rho).max(0.0).sqrt(),
    };

    let group_size = if cfg.antithetic { 2 } else { 1 };
    let n_groups = cfg.n_paths.div_ceil(group_size);
    let batches: Vec<Vec<(u64, PathState)>> = (0..n_groups.div_ceil(BATCH_GROUPS))
        .into_par_iter()
        .map(|b| {
            let range = b * BATCH_GROUPS..((b + 1) * BATCH_GROUPS).min(n_groups);
            let seeds: Vec<u64> = range.clone().map(|g| path_seed(cfg.seed, g as u64)).collect();
            let members: Vec<usize> = range.map(|g| group_size.min(cfg.n_paths - g * group_size)).collect();
            engine.run_batch(&seeds, &members)
        })
        .collect::<Result<Vec<_>>>()?;

    let initial_value = policy
        .evaluate(0, cfg.t_start, p.x0, p.y0.max(0.0))?
        .value
        .map_or(f64::NAN, |v| v.w);
    let n_rec = record_times.len();
    let mut bundle = PathBundle {
        n_paths: cfg.n_paths,
        n_steps,
        dt: cfg.dt,
        antithetic: cfg.antithetic,
        record_times,
        x: Vec::with_capacity(cfg.n_paths * n_rec),
        y: Vec::with_capacity(cfg.n_paths * n_rec),
        comparison: cfg.track_comparison.then(|| Vec::with_capacity(cfg.n_paths * n_rec)),
        running_reward: Vec::with_capacity(cfg.n_paths),
        stochastic_integral: Vec::with_capacity(cfg.n_paths),
        terminal_value: Vec::with_capacity(cfg.n_paths),
        initial_value,
        comparison_violations: 0,
        path_seeds: Vec::with_capacity(cfg.n_paths),
    };
    for (seed, r) in batches.into_iter().flatten() {
        bundle.x.extend_from_slice(&r.x);
        bundle.y.extend_from_slice(&r.y_rec);
        if let Some(cmp) = bundle.comparison.as_mut() {
            cmp.extend_from_slice(&r.cmp);
        }
        bundle.running_reward.push(r.reward);
        bundle.stochastic_integral.push(r.integral);
        bundle.terminal_value.push(r.terminal_value);
        bundle.comparison_violations += r.violations;
        bundle.path_seeds.push(seed);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::HestonModel;
    use crate::config::Settings;
    use crate::params::derive_constants;

    fn baseline(a: f64) -> (ModelParams, DerivedConstants) {
        let p = ModelParams::baseline().with_robustness(a);
        (p, derive_constants(&p).unwrap())
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(SimConfig::new(1, 1e-3, 0, 0.0, 9.95).n_steps().unwrap(), 9950);
        assert_eq!(SimConfig::new(1, 1e-3, 0, 2.0, 2.0).n_steps().unwrap(), 0);
        assert!(SimConfig::new(1, 3e-3, 0, 0.0, 1.0).n_steps().is_err());
        assert!(SimConfig::new(1, 0.02, 0, 0.0, 1.0).n_steps().is_err());
        assert!(SimConfig::new(0, 1e-3, 0, 0.0, 1.0).n_steps().is_err());
        assert!(SimConfig::new(1, 1e-3, 0, 1.0, 0.5).n_steps().is_err());
    }

    #[test]
    fn record_schedule() {
        let mut cfg = SimConfig::new(1, 1e-2, 0, 0.0, 0.1);
        assert_eq!(cfg.record_steps().unwrap(), vec![0, 10]);
        cfg.record_stride = 4;
        assert_eq!(cfg.record_steps().unwrap(), vec![0, 4, 8, 10]);
    }

    #[test]
    fn riskless_growth() {
        let (p, c) = baseline(0.0);
        let mut cfg = SimConfig::new(3, 1e-2, 9, 0.0, 5.0);
        cfg.record_stride = 100;
        let b = simulate_paths(&cfg, &ZeroPolicy, &p, &c, None).unwrap();
        for path in 0..3 {
            for (r, &t) in b.record_times.iter().enumerate() {
                let exact = p.x0 * (p.r * t).exp();
                assert!((b.x_at(path, r) - exact).abs() < 1e-12 * exact);
            }
        }
        assert!(b.stochastic_integral.iter().all(|&v| v == 0.0));
        assert!(b.terminal_value.iter().all(|v| v.is_nan()));
    }

    #[test]
    fn variance_stays_nonnegative() {
        // Vol-of-vol far above the Feller bound pushes Euler below zero often.
        let p = ModelParams {
            beta_bar: 1.2,
            ..ModelParams::baseline()
        };
        let c = derive_constants(&p).unwrap();
        let mut cfg = SimConfig::new(64, 1e-2, 1, 0.0, 2.0);
        cfg.record_stride = 1;
        let b = simulate_paths(&cfg, &ZeroPolicy, &p, &c, None).unwrap();
        assert!(b.y.iter().all(|&v| v >= 0.0));
        assert!(b.y.contains(&0.0));
    }

    #[test]
    fn reproducible_and_schedule_free() {
        let m = HestonModel::new(ModelParams::baseline().with_robustness(0.1), Settings::default()).unwrap();
        let cfg = SimConfig::new(9, 1e-2, 42, 0.0, 1.0);
        let policy = OptimalPolicy::new(&m, &cfg.times().unwrap()).unwrap();
        let a = simulate_paths(&cfg, &policy, m.params(), m.consts(), None).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| simulate_paths(&cfg, &policy, m.params(), m.consts(), None).unwrap());
        assert_eq!(a, b);
        let other = simulate_paths(&SimConfig { seed: 43, ..cfg }, &policy, m.params(), m.consts(), None).unwrap();
        assert_ne!(a.x, other.x);
    }

    #[test]
    fn antithetic_pairs_mirror_noise() {
        let (p, c) = baseline(0.0);
        let pol = FnPolicy(|_t, _x, _y| Controls {
            cx: 0.0,
            pi: 0.3,
            v1_x: 0.0,
            v2: 0.0,
        });
        let cfg = SimConfig::new(2, 1e-2, 3, 0.0, 0.01);
        let b = simulate_paths(&cfg, &pol, &p, &c, None).unwrap();
        // One step: ln X = drift dt +/- pi sqrt(y0) dB.
        let drift = (p.r + 0.3 * p.lambda_bar * p.y0 - 0.5 * 0.09 * p.y0) * 0.01;
        let up = b.x_at(0, 1).ln() - drift;
        let down = b.x_at(1, 1).ln() - drift;
        assert!((up + down).abs() < 1e-15);
        assert_eq!(b.path_seeds[0], b.path_seeds[1]);
    }

    #[test]
    fn inadmissible_controls_are_rejected() {
        let (p, c) = baseline(0.1);
        let cfg = SimConfig::new(2, 1e-2, 3, 0.0, 0.1);
        let too_much_stock = FnPolicy(|_t, _x, _y| Controls {
            cx: 0.1,
            pi: 5.0,
            v1_x: -0.1,
            v2: 0.0,
        });
        assert!(matches!(
            simulate_paths(&cfg, &too_much_stock, &p, &c, None),
            Err(Error::AdmissibilityViolation(_))
        ));
        let wrong_v1 = FnPolicy(|_t, _x, _y| Controls {
            cx: 0.1,
            pi: 0.3,
            v1_x: 0.0,
            v2: 0.0,
        });
        assert!(simulate_paths(&cfg, &wrong_v1, &p, &c, None).is_err());
        let positive_v2 = FnPolicy(|_t, _x, _y| Controls {
            cx: 0.1,
            pi: 0.3,
            v1_x: -0.1,
            v2: 1e-3,
        });
        assert!(simulate_paths(&cfg, &positive_v2, &p, &c, None).is_err());
        let gluttony = FnPolicy(|_t, _x, _y| Controls {
            cx: 50.0,
            pi: 0.3,
            v1_x: -0.1,
            v2: 0.0,
        });
        assert!(simulate_paths(&cfg, &gluttony, &p, &c, None).is_err());
    }

    #[test]
    fn horizon_is_excluded() {
        let (p, c) = baseline(0.0);
        let cfg = SimConfig::new(1, 1e-2, 0, 9.0, 10.0);
        assert!(simulate_paths(&cfg, &ZeroPolicy, &p, &c, None).is_err());
    }

    #[test]
    fn optimal_controls_are_admissible_with_default_bound() {
        for a in [0.0, 0.1, 0.2] {
            let m = HestonModel::new(ModelParams::baseline().with_robustness(a), Settings::default()).unwrap();
            let cfg = SimConfig::new(8, 1e-2, 5, 0.0, 9.99);
            let policy = OptimalPolicy::new(&m, &cfg.times().unwrap()).unwrap();
            simulate_paths(&cfg, &policy, m.params(), m.consts(), None).unwrap();
        }
    }

    #[test]
    fn standard_error_conventions() {
        let one = McEstimate::from_samples(&[2.0]);
        assert_eq!(one.mean, 2.0);
        assert!(one.standard_error.is_infinite());
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.standard_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(e.within(2.6, 1.0));
    }
}

//! Monte Carlo estimates compared against the analytic large-deviation
//! objects: log-Laplace transforms against the variational semigroup, tube
//! probabilities against the action, and the averaging error against zero.

use statrs::distribution::{Beta, ContinuousCDF};
use switchcir_core::action::{nisio_value, PathDiscretization};
use switchcir_core::averaging::limit_ode;
use switchcir_core::sim::{path_rng, plan_steps, SimConfig, Simulator};
use switchcir_core::stats::{scaled_log_mean_exp, spearman, strictly_decreasing, strictly_increasing, Moments};
use switchcir_core::{Error, ModelSpec, Result};

use crate::ensemble::{map_paths, scalar_moments};

/// Confidence level of the exact binomial intervals.
pub const CONFIDENCE: f64 = 0.95;
/// Minimum ensemble size for log-Laplace estimates.
pub const MIN_PATHS: u64 = 100;

/// Shared Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub t_end: f64,
    /// Requested step; refined per `n` by the switching guard unless a ladder
    /// fixes a common step.
    pub dt: f64,
    pub x0: f64,
    /// Initial regime, 0-based.
    pub regime0: usize,
    pub n_paths: u64,
    pub seed: u64,
}

impl McSettings {
    fn sim_config(&self, n: u64, dt: f64) -> SimConfig {
        SimConfig { n, t_end: self.t_end, dt, x0: self.x0, regime0: self.regime0 }
    }
}

/// Step small enough for every scale in the ladder, so that all entries
/// share one grid and consume the same random numbers.
pub fn common_step(spec: &ModelSpec, ladder: &[u64], t_end: f64, dt: f64) -> f64 {
    ladder.iter().map(|&n| plan_steps(spec, n, t_end, dt).0).fold(dt, f64::min)
}

/// Monotonicity of the gap `|estimate − analytic|` along the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Decreasing,
    Increasing,
    Mixed,
}

impl Trend {
    pub fn of(values: &[f64]) -> Trend {
        if strictly_decreasing(values) {
            Trend::Decreasing
        } else if strictly_increasing(values) {
            Trend::Increasing
        } else {
            Trend::Mixed
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpReport {
    pub n_ladder: Vec<u64>,
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub analytic: Vec<f64>,
    /// Trend of [`LdpReport::gaps`].
    pub trend: Trend,
}

impl LdpReport {
    fn new(n_ladder: Vec<u64>, estimates: Vec<f64>, stderrs: Vec<f64>, analytic: Vec<f64>) -> Self {
        let gaps: Vec<f64> = estimates.iter().zip(&analytic).map(|(e, a)| (e - a).abs()).collect();
        LdpReport { trend: Trend::of(&gaps), n_ladder, estimates, stderrs, analytic }
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.estimates.iter().zip(&self.analytic).map(|(e, a)| (e - a).abs()).collect()
    }

    /// Rank correlation between `n` and the gap; negative when the gap
    /// shrinks with `n`.
    pub fn gap_rank_correlation(&self) -> f64 {
        let n: Vec<f64> = self.n_ladder.iter().map(|&n| n as f64).collect();
        spearman(&n, &self.gaps())
    }
}

fn check_ladder(ladder: &[u64]) -> Result<()> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] == 0 {
        return Err(Error::InvalidArgument("n ladder must be positive and strictly increasing"));
    }
    Ok(())
}

/// `(1/n) log mean exp(n f(X_n(T), Λ_n(T)))` over `n_paths` simulations,
/// with a delta-method standard error.
pub fn mc_log_laplace<F>(spec: &ModelSpec, n: u64, settings: &McSettings, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64, usize) -> f64 + Sync + Send,
{
    if settings.n_paths < MIN_PATHS {
        return Err(Error::InvalidArgument("log-Laplace estimates need at least 100 paths"));
    }
    let sim = Simulator::new(spec, settings.sim_config(n, settings.dt))?;
    let steps = sim.steps();
    let values = map_paths(settings.n_paths, |i| {
        let mut end = (0.0, 0);
        sim.run(&mut path_rng(settings.seed, i), |k, x, r| {
            if k == steps {
                end = (x, r);
            }
        });
        f(end.0, end.1)
    });
    Ok(scaled_log_mean_exp(&values, n as f64))
}

/// Log-Laplace estimates for `f(x, i) = −(x − target)²` along a ladder with
/// common random numbers, against the variational semigroup value.
pub fn verify_log_laplace(
    spec: &ModelSpec,
    ladder: &[u64],
    settings: &McSettings,
    target: f64,
    segments: usize,
) -> Result<LdpReport> {
    check_ladder(ladder)?;
    let f = |x: f64| -(x - target) * (x - target);
    let analytic = nisio_value(spec, f, settings.x0, settings.t_end, segments)?;
    if !analytic.converged {
        return Err(Error::NonConvergence {
            what: "variational semigroup optimization",
            iterations: analytic.iterations,
            residual: f64::NAN,
        });
    }
    let common = McSettings { dt: common_step(spec, ladder, settings.t_end, settings.dt), ..*settings };
    let mut estimates = Vec::new();
    let mut stderrs = Vec::new();
    for &n in ladder {
        let (v, s) = mc_log_laplace(spec, n, &common, |x, _| f(x))?;
        estimates.push(v);
        stderrs.push(s);
    }
    Ok(LdpReport::new(ladder.to_vec(), estimates, stderrs, vec![analytic.value; ladder.len()]))
}

/// Result of a tube-probability estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeEstimate {
    pub hits: u64,
    pub n_paths: u64,
    pub p_hat: f64,
    pub stderr: f64,
    /// Exact (Clopper-Pearson) interval at [`CONFIDENCE`]; one-sided upper
    /// bound when there are no hits.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `−(1/n) log p̂`, or `−(1/n) log ci_high` when there are no hits.
    pub rate: f64,
    /// Standard error of `rate` by the delta method.
    pub rate_stderr: f64,
    /// True when `rate` is only a lower bound (zero hits).
    pub rate_is_lower_bound: bool,
}

fn clopper_pearson(hits: u64, total: u64) -> (f64, f64) {
    let alpha = 1.0 - CONFIDENCE;
    if hits == 0 {
        return (0.0, 1.0 - alpha.powf(1.0 / total as f64));
    }
    let (k, m) = (hits as f64, total as f64);
    let lo = Beta::new(k, m - k + 1.0).map(|b| b.inverse_cdf(alpha / 2.0)).unwrap_or(0.0);
    let hi = if hits == total {
        1.0
    } else {
        Beta::new(k + 1.0, m - k).map(|b| b.inverse_cdf(1.0 - alpha / 2.0)).unwrap_or(1.0)
    };
    (lo, hi)
}

/// Fraction of paths started at `γ(0)` that stay within `delta` of `γ` at
/// every node time of `gamma`. `dt` is refined so node times fall on the
/// simulation grid.
pub fn tube_probability(
    spec: &ModelSpec,
    n: u64,
    gamma: &PathDiscretization,
    delta: f64,
    dt: f64,
    regime0: usize,
    n_paths: u64,
    seed: u64,
) -> Result<TubeEstimate> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("tube radius must be positive"));
    }
    if n_paths == 0 {
        return Err(Error::InvalidArgument("need at least one path"));
    }
    let nodes = gamma.nodes();
    let segments = gamma.segments();
    let cfg = SimConfig { n, t_end: gamma.t_end(), dt, x0: nodes[0], regime0 };
    let sim = Simulator::new(spec, cfg)?.with_step_multiple(segments);
    let stride = sim.steps() / segments;
    let inside = map_paths(n_paths, |i| {
        let mut inside = true;
        sim.run(&mut path_rng(seed, i), |k, x, _| {
            if k % stride == 0 && (x - nodes[k / stride]).abs() >= delta {
                inside = false;
            }
        });
        inside
    });
    let hits = inside.iter().filter(|b| **b).count() as u64;
    let p_hat = hits as f64 / n_paths as f64;
    let (ci_low, ci_high) = clopper_pearson(hits, n_paths);
    let stderr = (p_hat * (1.0 - p_hat) / n_paths as f64).sqrt();
    let nf = n as f64;
    let (rate, rate_stderr, lower) = if hits == 0 {
        (-ci_high.ln() / nf, f64::INFINITY, true)
    } else {
        (-p_hat.ln() / nf, stderr / (p_hat * nf), false)
    };
    Ok(TubeEstimate {
        hits,
        n_paths,
        p_hat,
        stderr,
        ci_low,
        ci_high,
        rate,
        rate_stderr,
        rate_is_lower_bound: lower,
    })
}

/// Tube-rate estimates `−(1/n) log p̂` along a ladder with common random
/// numbers, against the action of `gamma`.
pub fn verify_tube(
    spec: &ModelSpec,
    ladder: &[u64],
    gamma: &PathDiscretization,
    delta: f64,
    settings: &McSettings,
) -> Result<(LdpReport, Vec<TubeEstimate>)> {
    check_ladder(ladder)?;
    let action = switchcir_core::action::action(spec, gamma)?.action;
    let dt = common_step(spec, ladder, gamma.t_end(), settings.dt);
    let mut tubes = Vec::new();
    for &n in ladder {
        tubes.push(tube_probability(spec, n, gamma, delta, dt, settings.regime0, settings.n_paths, settings.seed)?);
    }
    let report = LdpReport::new(
        ladder.to_vec(),
        tubes.iter().map(|t| t.rate).collect(),
        tubes.iter().map(|t| t.rate_stderr).collect(),
        vec![action; ladder.len()],
    );
    Ok((report, tubes))
}

/// Mean over paths of `sup_k |X_n(t_k) − X̄(t_k)|` on the simulation grid,
/// for each `n`; the analytic limit is zero.
pub fn averaging_error_curve(spec: &ModelSpec, ladder: &[u64], settings: &McSettings) -> Result<LdpReport> {
    check_ladder(ladder)?;
    let mut estimates = Vec::new();
    let mut stderrs = Vec::new();
    for &n in ladder {
        let sim = Simulator::new(spec, settings.sim_config(n, settings.dt))?;
        let flow = limit_ode(spec, settings.x0, settings.t_end, sim.dt())?;
        if flow.xbar.len() != sim.steps() + 1 {
            return Err(Error::InvalidArgument("flow grid does not match the simulation grid"));
        }
        let m: Moments = scalar_moments(settings.n_paths, |i| {
            let mut worst = 0.0f64;
            sim.run(&mut path_rng(settings.seed, i), |k, x, _| {
                worst = worst.max((x - flow.xbar[k]).abs());
            });
            worst
        });
        estimates.push(m.mean);
        stderrs.push(m.std_error());
    }
    Ok(LdpReport::new(ladder.to_vec(), estimates, stderrs, vec![0.0; ladder.len()]))
}

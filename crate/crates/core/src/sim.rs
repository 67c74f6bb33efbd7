//! Simulation of the slow-fast pair `(X_n, Λ_n)`.
//!
//! The slow component uses full-truncation Euler,
//!
//! ```text
//! x⁺ = max(x, 0)
//! x ← max(x + η(μ(λ) − x⁺)dt + θ √(x⁺/n) √dt ξ, 0),
//! ```
//!
//! and the regime jumps at most once per step: one uniform `u` is compared
//! against consecutive intervals of length `n q_λj(x) dt`, the discrete
//! counterpart of the Poisson-measure construction with intervals
//! proportional to `q_ij(x)`. The step is refined until
//! `n · sup q_i · dt ≤ 0.1`.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path index)`,
//! so ensembles do not depend on how paths are scheduled.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spectral::SimplexMeasure;

/// Upper bound on the per-step jump probability `n q_i(x) dt`.
pub const SWITCH_GUARD: f64 = 0.1;

/// Run parameters for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Scale parameter: noise `1/√n`, switching rate `n`.
    pub n: u64,
    pub t_end: f64,
    /// Requested step; may be refined, see [`Simulator::dt`].
    pub dt: f64,
    pub x0: f64,
    /// Initial regime, 0-based.
    pub regime0: usize,
}

/// Independent stream for path `path` of a run seeded with `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// One simulated path on a uniform grid. Regimes are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub regime: Vec<usize>,
    pub n: u64,
    pub seed: u64,
    /// Effective step after refinement.
    pub dt: f64,
    /// Steps where the Euler update went negative before clamping.
    pub clamped_steps: usize,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn clamped_fraction(&self) -> f64 {
        let steps = self.times.len().saturating_sub(1);
        if steps == 0 {
            0.0
        } else {
            self.clamped_steps as f64 / steps as f64
        }
    }
}

/// Validated model plus step plan; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    spec: &'a ModelSpec,
    cfg: SimConfig,
    dt: f64,
    steps: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ModelSpec, cfg: SimConfig) -> Result<Self> {
        spec.ensure_valid()?;
        if !(cfg.x0 > 0.0 && cfg.x0.is_finite()) {
            return Err(Error::InvalidArgument("x0 must be positive"));
        }
        if cfg.regime0 >= spec.n_regimes() {
            return Err(Error::RegimeOutOfRange {
                index: cfg.regime0,
                n_regimes: spec.n_regimes(),
            });
        }
        if cfg.n == 0 {
            return Err(Error::InvalidArgument("n must be positive"));
        }
        if !(cfg.t_end > 0.0 && cfg.t_end.is_finite() && cfg.dt > 0.0) {
            return Err(Error::InvalidArgument("horizon and step must be positive"));
        }
        let (dt, steps) = plan_steps(spec, cfg.n, cfg.t_end, cfg.dt);
        Ok(Simulator { spec, cfg, dt, steps })
    }

    /// Rounds the step count up to a multiple of `m`, so that every `m`-th
    /// grid point of a coarser uniform grid is a simulation time.
    pub fn with_step_multiple(mut self, m: usize) -> Self {
        let m = m.max(1);
        let per = self.steps.div_ceil(m);
        self.steps = per * m;
        self.dt = self.cfg.t_end / self.steps as f64;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.dt).collect()
    }

    /// Runs one path, calling `visit(k, x_k, λ_k)` for `k = 0..=steps`.
    /// Returns the number of clamped steps.
    pub fn run<R, V>(&self, rng: &mut R, mut visit: V) -> usize
    where
        R: rand_chacha::rand_core::RngCore,
        V: FnMut(usize, f64, usize),
    {
        let spec = self.spec;
        let nreg = spec.n_regimes();
        let n = self.cfg.n as f64;
        let dt = self.dt;
        let sqrt_dt = dt.sqrt();
        let noise = spec.theta / n.sqrt();
        let eta = spec.eta;
        let mut x = self.cfg.x0;
        let mut regime = self.cfg.regime0;
        let mut clamped = 0usize;
        visit(0, x, regime);
        for k in 1..=self.steps {
            let xp = x.max(0.0);
            let xi: f64 = StandardNormal.sample(rng);
            let next = x + eta * (spec.mu[regime] - xp) * dt + noise * xp.sqrt() * sqrt_dt * xi;
            if nreg > 1 {
                let u: f64 = StandardUniform.sample(rng);
                let scale = n * dt;
                let mut edge = 0.0;
                for j in 0..nreg {
                    if j == regime {
                        continue;
                    }
                    edge += scale * spec.q.rate(regime, j, xp);
                    if u < edge {
                        regime = j;
                        break;
                    }
                }
            }
            x = if next < 0.0 {
                clamped += 1;
                0.0
            } else {
                next
            };
            visit(k, x, regime);
        }
        clamped
    }

    /// Materializes path `index` of a run seeded with `seed`.
    pub fn path(&self, seed: u64, index: u64) -> Trajectory {
        let len = self.steps + 1;
        let mut xs = Vec::with_capacity(len);
        let mut regimes = Vec::with_capacity(len);
        let clamped = self.run(&mut path_rng(seed, index), |_, x, r| {
            xs.push(x);
            regimes.push(r);
        });
        Trajectory {
            times: self.times(),
            x: xs,
            regime: regimes,
            n: self.cfg.n,
            seed,
            dt: self.dt,
            clamped_steps: clamped,
        }
    }
}

/// Effective step and step count: `T / K` with `K ≥ T / dt` and the
/// switching guard `n · sup q_i · (T/K) ≤ 0.1` enforced.
pub fn plan_steps(spec: &ModelSpec, n: u64, t_end: f64, dt: f64) -> (f64, usize) {
    let mut steps = (t_end / dt).ceil().max(1.0);
    let rate = n as f64 * spec.q.sup_exit_rate();
    if rate > 0.0 {
        steps = steps.max((t_end * rate / SWITCH_GUARD).ceil());
    }
    let steps = steps as usize;
    (t_end / steps as f64, steps)
}

/// Simulates path 0 of a run seeded with `seed`; identical inputs give a
/// bit-identical trajectory.
pub fn simulate_path(spec: &ModelSpec, cfg: SimConfig, seed: u64) -> Result<Trajectory> {
    Ok(Simulator::new(spec, cfg)?.path(seed, 0))
}

/// Fraction of time spent in each regime over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    pub weights: SimplexMeasure,
}

/// Time fraction of each regime on `[t, t + window]`, treating the regime as
/// right-continuous and piecewise constant between grid times.
pub fn occupation(traj: &Trajectory, n_regimes: usize, t: f64, window: f64) -> Result<OccupationMeasure> {
    let horizon = traj.horizon();
    let end = t + window;
    let slack = 1e-9 * horizon.max(1.0);
    if !(window > 0.0) || t < -slack || end > horizon + slack {
        return Err(Error::WindowOutOfRange { start: t, end, horizon });
    }
    let mut weights = alloc::vec![0.0; n_regimes];
    for k in 0..traj.times.len().saturating_sub(1) {
        let a = traj.times[k].max(t);
        let b = traj.times[k + 1].min(end);
        if b > a {
            let r = traj.regime[k];
            if r >= n_regimes {
                return Err(Error::RegimeOutOfRange { index: r, n_regimes });
            }
            weights[r] += b - a;
        }
    }
    Ok(OccupationMeasure {
        weights: SimplexMeasure::normalized(weights)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RateMatrixField;
    use alloc::vec;

    fn two_state() -> ModelSpec {
        let q = RateMatrixField::constant(2, vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        ModelSpec::new(1.0, 1.0, vec![1.0, 2.0], q)
    }

    fn cfg(n: u64) -> SimConfig {
        SimConfig { n, t_end: 1.0, dt: 0.01, x0: 1.0, regime0: 0 }
    }

    #[test]
    fn deterministic() {
        let spec = two_state();
        let a = simulate_path(&spec, cfg(100), 42).unwrap();
        let b = simulate_path(&spec, cfg(100), 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&spec, cfg(100), 43).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn step_refinement() {
        let spec = two_state();
        let sim = Simulator::new(&spec, cfg(1000)).unwrap();
        assert!(1000.0 * 2.0 * sim.dt() <= SWITCH_GUARD * (1.0 + 1e-12));
        assert_eq!(sim.steps(), 20_000);
        let sim = Simulator::new(&spec, cfg(1)).unwrap();
        assert_eq!(sim.steps(), 100);
    }

    #[test]
    fn step_multiple() {
        let spec = two_state();
        let sim = Simulator::new(&spec, cfg(1)).unwrap().with_step_multiple(30);
        assert_eq!(sim.steps(), 120);
        assert!((sim.dt() * 120.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = two_state();
        let mut c = cfg(10);
        c.x0 = 0.0;
        assert!(simulate_path(&spec, c, 1).is_err());
        let mut c = cfg(10);
        c.regime0 = 2;
        assert_eq!(
            simulate_path(&spec, c, 1),
            Err(Error::RegimeOutOfRange { index: 2, n_regimes: 2 })
        );
    }

    #[test]
    fn occupation_counts_time() {
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            x: vec![1.0; 5],
            regime: vec![0, 1, 0, 1, 1],
            n: 1,
            seed: 0,
            dt: 1.0,
            clamped_steps: 0,
        };
        let occ = occupation(&traj, 2, 0.0, 4.0).unwrap();
        assert_eq!(occ.weights.probs(), &[0.5, 0.5]);
        let occ = occupation(&traj, 2, 0.5, 1.0).unwrap();
        assert_eq!(occ.weights.probs(), &[0.5, 0.5]);
        assert!(occupation(&traj, 2, 3.5, 1.0).is_err());
    }
}

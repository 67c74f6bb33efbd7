//! Stationary law of the frozen fast chain and the averaged limit ODE
//! `dX̄/dt = η(Σ_i μ(i) π^x_i − X̄)`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, solve, Matrix};
use crate::model::ModelSpec;
use crate::spectral::SimplexMeasure;

/// Solves `π q(x) = 0`, `Σπ = 1`, replacing the last balance equation with
/// the normalization row.
pub fn stationary(spec: &ModelSpec, x: f64) -> Result<SimplexMeasure> {
    spec.check_domain(x)?;
    let n = spec.n_regimes();
    if n == 1 {
        return SimplexMeasure::new(vec![1.0]);
    }
    let q = spec.q.matrix(x);
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut pi = solve(&a, &rhs)?;
    // One step of iterative refinement keeps ‖πQ‖ at rounding level.
    let mut r = vec![0.0; n];
    a.mul_vec(&pi, &mut r);
    for (ri, bi) in r.iter_mut().zip(&rhs) {
        *ri = bi - *ri;
    }
    let corr = solve(&a, &r)?;
    for (p, c) in pi.iter_mut().zip(&corr) {
        *p += c;
    }
    if pi.iter().any(|p| !(*p > -1e-12)) {
        return Err(Error::Singular);
    }
    for p in pi.iter_mut() {
        *p = p.max(0.0);
    }
    SimplexMeasure::normalized(pi)
}

/// `‖π q(x)‖_∞`.
pub fn stationary_residual(spec: &ModelSpec, x: f64, pi: &SimplexMeasure) -> f64 {
    let q: Matrix = spec.q.matrix(x);
    let mut out = vec![0.0; spec.n_regimes()];
    q.vec_mul(pi.probs(), &mut out);
    inf_norm(&out)
}

/// Averaged drift `v̄(x) = η(Σ_i μ(i) π^x_i − x)`.
pub fn averaged_drift(spec: &ModelSpec, x: f64) -> Result<f64> {
    let pi = stationary(spec, x)?;
    Ok(spec.eta * (pi.expectation(&spec.mu) - x))
}

/// Solution of the limit ODE on a uniform output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedFlow {
    pub times: Vec<f64>,
    pub xbar: Vec<f64>,
    /// Internal step actually used (a divisor of the output step).
    pub internal_dt: f64,
    /// Step-halving estimate of the global error per unit time.
    pub error_estimate: f64,
}

impl AveragedFlow {
    pub fn endpoint(&self) -> f64 {
        *self.xbar.last().expect("flow has at least one point")
    }

    /// Linear interpolation of the flow at time `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.len();
        if k == 1 || t <= self.times[0] {
            return self.xbar[0];
        }
        let dt = self.times[1] - self.times[0];
        let pos = (t - self.times[0]) / dt;
        let i = (pos.floor() as usize).min(k - 2);
        let w = pos - i as f64;
        self.xbar[i] + w * (self.xbar[i + 1] - self.xbar[i])
    }
}

/// Target of the step-halving error estimate, per unit time.
pub const ODE_TOL: f64 = 1e-8;
const ODE_MAX_REFINEMENTS: usize = 12;

/// Classical RK4 for the averaged ODE. The internal step is halved until
/// the Richardson estimate `max|x_h − x_{h/2}| / 15` divided by `T` is
/// below [`ODE_TOL`]; output is reported on the requested grid `k·dt`.
pub fn limit_ode(spec: &ModelSpec, x0: f64, t_end: f64, dt: f64) -> Result<AveragedFlow> {
    if !(x0 > 0.0) {
        return Err(Error::InvalidArgument("x0 must be positive"));
    }
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument("horizon and step must be positive"));
    }
    spec.ensure_valid()?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let out_dt = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * out_dt).collect();
    let mut sub = 1usize;
    let mut coarse = rk4(spec, x0, out_dt, steps, sub)?;
    for _ in 0..ODE_MAX_REFINEMENTS {
        let fine = rk4(spec, x0, out_dt, steps, 2 * sub)?;
        let diff = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let estimate = diff / 15.0 / t_end.max(1.0);
        sub *= 2;
        coarse = fine;
        if estimate <= ODE_TOL {
            return Ok(AveragedFlow {
                times,
                xbar: coarse,
                internal_dt: out_dt / sub as f64,
                error_estimate: estimate,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "limit ODE step halving",
        iterations: ODE_MAX_REFINEMENTS,
        residual: f64::NAN,
    })
}

fn rk4(spec: &ModelSpec, x0: f64, out_dt: f64, steps: usize, sub: usize) -> Result<Vec<f64>> {
    let h = out_dt / sub as f64;
    // The analytic drift is only defined above x_min; clamp stages there.
    let f = |x: f64| averaged_drift(spec, x.max(spec.x_min));
    let mut x = x0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x);
    for _ in 0..steps {
        for _ in 0..sub {
            let k1 = f(x)?;
            let k2 = f(x + 0.5 * h * k1)?;
            let k3 = f(x + 0.5 * h * k2)?;
            let k4 = f(x + h * k3)?;
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(x);
    }
    Ok(out)
}

/// A root of `v̄` in `[min μ, max μ]` by bisection. The averaged drift is
/// positive below `min μ` and negative above `max μ`, so one always exists.
pub fn equilibrium(spec: &ModelSpec) -> Result<f64> {
    let lo_mu = spec.mu.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_mu = spec.mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_mu.max(spec.x_min), hi_mu.max(spec.x_min));
    if averaged_drift(spec, lo)? <= 0.0 {
        return Ok(lo);
    }
    if averaged_drift(spec, hi)? >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if averaged_drift(spec, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

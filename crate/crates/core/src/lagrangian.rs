//! Legendre dual `L(x, v) = sup_p { p v − H(x, p) }` of the Hamiltonian.


use crate::averaging::averaged_drift;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spectral::{hamiltonian, hamiltonian_gradient, HamiltonianGradient};

/// Stationarity tolerance `|∂H/∂p(p*) − v|`, relative to `max(1, |v|)`.
pub const LEGENDRE_TOL: f64 = 1e-8;
/// Bracket half-width beyond which a velocity is declared unreachable.
pub const MAX_MOMENTUM: f64 = 1e6;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreEval {
    /// `L(x, v)`; `+∞` when `reachable` is false.
    pub value: f64,
    pub p_star: f64,
    pub converged: bool,
    /// False when no momentum in `[−MAX_MOMENTUM, MAX_MOMENTUM]` produces
    /// velocity `v`.
    pub reachable: bool,
}

impl LegendreEval {
    fn unreachable(p: f64) -> Self {
        LegendreEval {
            value: f64::INFINITY,
            p_star: p,
            converged: false,
            reachable: false,
        }
    }
}

/// Maximizes the concave map `p ↦ pv − H(x, p)`.
///
/// The stationarity condition `∂H/∂p = v` is solved by Newton steps on the
/// momentum, starting at `p = 0` (where `∂H/∂p = v̄(x)`), inside a bracket
/// that doubles from `[−1, 1]`. The curvature `∂²H/∂p²` comes from a central
/// difference of the eigen-perturbation derivative; a step that leaves the
/// bracket or meets non-positive curvature is replaced by bisection.
pub fn legendre(spec: &ModelSpec, x: f64, v: f64) -> Result<LegendreEval> {
    spec.check_domain(x)?;
    if !v.is_finite() {
        return Err(Error::InvalidArgument("velocity must be finite"));
    }
    let tol = LEGENDRE_TOL * v.abs().max(1.0);
    let at = |p: f64| hamiltonian_gradient(spec, x, p);
    let finish = |p: f64, g: HamiltonianGradient, converged: bool| LegendreEval {
        value: (p * v - g.value).max(0.0),
        p_star: p,
        converged,
        reachable: true,
    };

    let g0 = at(0.0)?;
    if (g0.d_dp - v).abs() <= tol {
        return Ok(finish(0.0, g0, true));
    }
    // ∂H/∂p is nondecreasing in p, so the root lies on the side where the
    // derivative has to grow (or shrink) toward v.
    let upward = g0.d_dp < v;
    let (mut lo, mut hi) = if upward { (0.0, 1.0) } else { (-1.0, 0.0) };
    loop {
        let edge = if upward { hi } else { lo };
        let d = at(edge)?.d_dp;
        if (upward && d >= v) || (!upward && d <= v) {
            break;
        }
        if upward {
            lo = hi;
            hi *= 2.0;
        } else {
            hi = lo;
            lo *= 2.0;
        }
        if hi.abs() > MAX_MOMENTUM || lo.abs() > MAX_MOMENTUM {
            return Ok(LegendreEval::unreachable(if upward { hi } else { lo }));
        }
    }

    let mut p = if upward { lo } else { hi };
    let mut g = if p == 0.0 { g0 } else { at(p)? };
    for _ in 0..NEWTON_MAX_ITER {
        let resid = g.d_dp - v;
        if resid.abs() <= tol {
            return Ok(finish(p, g, true));
        }
        if resid < 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let h = 1e-5 * p.abs().max(1.0);
        let curvature = (at(p + h)?.d_dp - at(p - h)?.d_dp) / (2.0 * h);
        let newton = p - resid / curvature;
        p = if curvature > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        g = at(p)?;
        if hi - lo <= f64::EPSILON * p.abs().max(1.0) {
            break;
        }
    }
    let converged = (g.d_dp - v).abs() <= tol;
    Ok(finish(p, g, converged))
}

/// `sup_v { p v − L(x, v) }`, maximized over velocity.
///
/// By the envelope theorem the derivative in `v` is `p − p*(v)`, where `p*`
/// comes from [`legendre`]; the root is bracketed by doubling around the
/// averaged drift (where `p* = 0`) and refined by the Illinois variant of
/// regula falsi.
pub fn duality_roundtrip(spec: &ModelSpec, x: f64, p: f64) -> Result<f64> {
    spec.check_domain(x)?;
    let objective = |v: f64| -> Result<(f64, f64)> {
        let l = legendre(spec, x, v)?;
        if !l.reachable {
            return Err(Error::NonConvergence {
                what: "velocity bracket in duality round-trip",
                iterations: 0,
                residual: v,
            });
        }
        Ok((l.p_star - p, p * v - l.value))
    };
    let v0 = averaged_drift(spec, x)?;
    let (r0, f0) = objective(v0)?;
    if r0 == 0.0 {
        return Ok(f0);
    }
    let dir = if r0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = v0.abs().max(1.0);
    let (mut a, mut ra) = (v0, r0);
    let (mut b, mut rb);
    loop {
        b = v0 + dir * step;
        rb = objective(b)?.0;
        if rb.signum() != ra.signum() || rb == 0.0 {
            break;
        }
        a = b;
        ra = rb;
        step *= 2.0;
        if step > 1e12 {
            return Err(Error::NonConvergence {
                what: "velocity bracket in duality round-trip",
                iterations: 0,
                residual: step,
            });
        }
    }
    let tol = 1e-10 * p.abs().max(1.0);
    let mut side = 0i8;
    let mut best = if ra.abs() < rb.abs() { a } else { b };
    for _ in 0..200 {
        if rb.abs() <= tol {
            best = b;
            break;
        }
        let c = (a * rb - b * ra) / (rb - ra);
        let rc = objective(c)?.0;
        best = c;
        if rc.abs() <= tol {
            break;
        }
        if rc.signum() == rb.signum() {
            b = c;
            rb = rc;
            if side == -1 {
                ra *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ra = rc;
            if side == 1 {
                rb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 1e-15 * a.abs().max(1.0) {
            break;
        }
    }
    Ok(objective(best)?.1)
}

/// Convenience wrapper returning only `H(x, p)`.
pub fn hamiltonian_value(spec: &ModelSpec, x: f64, p: f64) -> Result<f64> {
    hamiltonian(spec, x, p).map(|h| h.value)
}

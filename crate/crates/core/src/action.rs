//! Discrete action functionals, fixed-endpoint minimum-action paths and the
//! variational semigroup `V(T)f(x0) = sup_γ { f(γ(T)) − ∫ L(γ, γ̇) }`.
//!
//! Paths are piecewise linear on a uniform grid. A segment contributes
//! `Δt · L((γ_k + γ_{k+1})/2, (γ_{k+1} − γ_k)/Δt)`; the initial point is
//! always deterministic, so no initial rate term appears.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::averaging::limit_ode;
use crate::error::{Error, Result};
use crate::lagrangian::legendre;
use crate::model::ModelSpec;
use crate::optim::{minimize_bfgs, BfgsOptions};

/// Finite-difference step for node gradients, relative to `max(1, |γ_k|)`.
pub const FD_STEP: f64 = 1e-6;
/// Projected-gradient tolerance of the path optimizers.
pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 10_000;

/// Uniform-grid piecewise-linear path on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDiscretization {
    t_end: f64,
    nodes: Vec<f64>,
}

impl PathDiscretization {
    /// `nodes` holds `γ(t_0), …, γ(t_K)` with `K ≥ 1`.
    pub fn new(t_end: f64, nodes: Vec<f64>) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidArgument("path horizon must be positive"));
        }
        if nodes.len() < 2 || nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("path needs at least two finite nodes"));
        }
        Ok(PathDiscretization { t_end, nodes })
    }

    /// Straight line from `a` to `b` with `segments` pieces.
    pub fn linear(a: f64, b: f64, t_end: f64, segments: usize) -> Result<Self> {
        let nodes = (0..=segments)
            .map(|k| a + (b - a) * k as f64 / segments.max(1) as f64)
            .collect();
        Self::new(t_end, nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.segments() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.nodes.len()).map(|k| k as f64 * dt).collect()
    }

    /// Sub-path over segments `[from, to)`, with time shifted to start at 0.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.segments() {
            return Err(Error::InvalidArgument("invalid segment range"));
        }
        Self::new(self.dt() * (to - from) as f64, self.nodes[from..=to].to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionResult {
    /// Sum of `per_segment`; `+∞` if any segment velocity is unreachable.
    pub action: f64,
    pub per_segment: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// `Δt · L(midpoint, slope)` for one segment.
pub fn segment_action(spec: &ModelSpec, a: f64, b: f64, dt: f64) -> Result<f64> {
    let l = legendre(spec, 0.5 * (a + b), (b - a) / dt)?;
    Ok(if l.reachable { dt * l.value } else { f64::INFINITY })
}

/// Midpoint-rule action of a path.
pub fn action(spec: &ModelSpec, path: &PathDiscretization) -> Result<ActionResult> {
    for &x in path.nodes() {
        spec.check_domain(x)?;
    }
    let dt = path.dt();
    let per_segment = path
        .nodes
        .windows(2)
        .map(|w| segment_action(spec, w[0], w[1], dt))
        .collect::<Result<Vec<f64>>>()?;
    let action = if per_segment.iter().any(|s| s.is_infinite()) {
        f64::INFINITY
    } else {
        per_segment.iter().sum()
    };
    Ok(ActionResult {
        action,
        per_segment,
        converged: true,
        iterations: 0,
    })
}

fn total_action(spec: &ModelSpec, nodes: &[f64], dt: f64) -> Result<f64> {
    let mut total = 0.0;
    for w in nodes.windows(2) {
        total += segment_action(spec, w[0], w[1], dt)?;
    }
    Ok(total)
}

/// Central-difference derivative of the action with respect to node `k`.
/// Only the two adjacent segments depend on it. Falls back to a one-sided
/// difference when the backward probe would cross `x_min`.
fn node_derivative(spec: &ModelSpec, nodes: &[f64], k: usize, dt: f64, step: f64) -> Result<f64> {
    let h = step * nodes[k].abs().max(1.0);
    let local = |v: f64| -> Result<f64> {
        let mut s = 0.0;
        if k > 0 {
            s += segment_action(spec, nodes[k - 1], v, dt)?;
        }
        if k + 1 < nodes.len() {
            s += segment_action(spec, v, nodes[k + 1], dt)?;
        }
        Ok(s)
    };
    let x = nodes[k];
    if x - h >= spec.x_min {
        Ok((local(x + h)? - local(x - h)?) / (2.0 * h))
    } else {
        Ok((local(x + h)? - local(x)?) / h)
    }
}

/// Largest node-variation derivative of the discrete action over interior
/// nodes, probed with central differences of relative step `step`.
pub fn euler_lagrange_residual(spec: &ModelSpec, path: &PathDiscretization, step: f64) -> Result<f64> {
    let nodes = path.nodes();
    let dt = path.dt();
    let mut worst = 0.0f64;
    for k in 1..nodes.len() - 1 {
        worst = worst.max(node_derivative(spec, nodes, k, dt, step)?.abs());
    }
    Ok(worst)
}

/// Fixed-endpoint minimum of the discrete action over interior nodes.
///
/// Starts from `init` (all `segments + 1` nodes, endpoints overwritten) or
/// the straight line, and runs projected BFGS with node bounds `x_min`.
/// A non-converged optimization is reported through
/// [`ActionResult::converged`], not as an error.
pub fn minimize_action(
    spec: &ModelSpec,
    x_start: f64,
    x_end: f64,
    t_end: f64,
    segments: usize,
    init: Option<&[f64]>,
) -> Result<(PathDiscretization, ActionResult)> {
    spec.check_domain(x_start)?;
    spec.check_domain(x_end)?;
    if segments < 2 {
        return Err(Error::InvalidArgument("minimum-action paths need at least two segments"));
    }
    let mut start = match init {
        Some(nodes) if nodes.len() == segments + 1 => nodes.to_vec(),
        Some(_) => return Err(Error::InvalidArgument("initial path has the wrong number of nodes")),
        None => PathDiscretization::linear(x_start, x_end, t_end, segments)?.nodes,
    };
    start[0] = x_start;
    start[segments] = x_end;
    let dt = t_end / segments as f64;
    let assemble = |inner: &[f64]| -> Vec<f64> {
        let mut nodes = Vec::with_capacity(segments + 1);
        nodes.push(x_start);
        nodes.extend_from_slice(inner);
        nodes.push(x_end);
        nodes
    };
    let objective = |inner: &[f64]| total_action(spec, &assemble(inner), dt);
    let gradient = |inner: &[f64]| -> Result<Vec<f64>> {
        let nodes = assemble(inner);
        (1..segments).map(|k| node_derivative(spec, &nodes, k, dt, FD_STEP)).collect()
    };
    let opts = BfgsOptions {
        grad_tol: GRAD_TOL,
        max_iter: MAX_ITER,
        lower: spec.x_min,
    };
    let out = minimize_bfgs(objective, gradient, &start[1..segments], opts)?;
    let path = PathDiscretization::new(t_end, assemble(&out.x))?;
    let mut result = action(spec, &path)?;
    result.converged = out.converged;
    result.iterations = out.iterations;
    Ok((path, result))
}

/// Outcome of a variational-semigroup evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NisioResult {
    /// `f(γ(T)) − A(γ)` at the optimizer.
    pub value: f64,
    pub path: PathDiscretization,
    pub action: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `V(T)f(x0) = sup_γ { f(γ(T)) − A(γ) }` over discretized paths from `x0`
/// with a free endpoint. The search starts at the averaged flow, which has
/// zero action in the continuum.
pub fn nisio_value<F>(spec: &ModelSpec, f: F, x0: f64, t_end: f64, segments: usize) -> Result<NisioResult>
where
    F: Fn(f64) -> f64,
{
    spec.check_domain(x0)?;
    if segments < 1 {
        return Err(Error::InvalidArgument("need at least one segment"));
    }
    let dt = t_end / segments as f64;
    let flow = limit_ode(spec, x0, t_end, dt)?;
    let assemble = |free: &[f64]| -> Vec<f64> {
        let mut nodes = Vec::with_capacity(segments + 1);
        nodes.push(x0);
        nodes.extend_from_slice(free);
        nodes
    };
    let objective = |free: &[f64]| -> Result<f64> {
        let nodes = assemble(free);
        Ok(total_action(spec, &nodes, dt)? - f(nodes[segments]))
    };
    let gradient = |free: &[f64]| -> Result<Vec<f64>> {
        let nodes = assemble(free);
        let mut g = (1..=segments)
            .map(|k| node_derivative(spec, &nodes, k, dt, FD_STEP))
            .collect::<Result<Vec<f64>>>()?;
        let y = nodes[segments];
        let h = FD_STEP * y.abs().max(1.0);
        let df = if y - h >= spec.x_min {
            (f(y + h) - f(y - h)) / (2.0 * h)
        } else {
            (f(y + h) - f(y)) / h
        };
        g[segments - 1] -= df;
        Ok(g)
    };
    let opts = BfgsOptions {
        grad_tol: GRAD_TOL,
        max_iter: MAX_ITER,
        lower: spec.x_min,
    };
    let start: Vec<f64> = flow.xbar[1..].iter().map(|v| v.max(spec.x_min)).collect();
    let out = minimize_bfgs(objective, gradient, &start, opts)?;
    let path = PathDiscretization::new(t_end, assemble(&out.x))?;
    let a = total_action(spec, path.nodes(), dt)?;
    Ok(NisioResult {
        value: f(path.nodes()[segments]) - a,
        path,
        action: a,
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// Convenience: the averaged-flow path sampled on `segments` pieces.
pub fn flow_path(spec: &ModelSpec, x0: f64, t_end: f64, segments: usize) -> Result<PathDiscretization> {
    let flow = limit_ode(spec, x0, t_end, t_end / segments as f64)?;
    PathDiscretization::new(t_end, flow.xbar)
}

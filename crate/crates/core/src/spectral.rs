//! The limiting Hamiltonian as a principal eigenvalue.
//!
//! For fixed `(x, p)` the tilted generator
//!
//! ```text
//! Q_{x,p} = diag(B_{x,p}) + q(x),   B_{x,p}(i) = η(μ(i)−x)p + ½θ²xp²
//! ```
//!
//! is an irreducible Metzler matrix. Its Perron root is
//!
//! ```text
//! H(x, p) = sup_π { Σ_i π_i B_{x,p}(i) − I(x, π) },
//! I(x, π) = −inf_{g>0} Σ_i π_i (q(x) g)_i / g_i,
//! ```
//!
//! so the value returned by [`hamiltonian`] is the largest eigenvalue itself
//! (no sign flip). [`variational_hamiltonian_oracle`] evaluates the right-hand
//! side by brute force and is what the tests compare against.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, solve, Matrix};
use crate::model::{log_grid, ModelSpec};

/// Iteration cap for the shifted power iteration.
pub const POWER_MAX_ITER: usize = 100_000;
/// Required relative width of the Collatz-Wielandt bracket.
pub const POWER_TOL: f64 = 1e-12;
/// Bracket width the iteration keeps pushing toward once `POWER_TOL` is met.
const POWER_POLISH_TOL: f64 = 1e-15;
/// Power-iteration steps before switching to inverse iteration.
const POWER_PHASE: usize = 500;

/// Largest regime count accepted by the simplex-grid oracle.
pub const ORACLE_MAX_REGIMES: usize = 4;

/// Probability vector on the regime set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexMeasure {
    probs: Vec<f64>,
}

impl SimplexMeasure {
    /// Accepts nonnegative weights summing to one within `1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.is_empty()
            || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (total - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidMeasure);
        }
        Ok(SimplexMeasure { probs })
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure);
        }
        Ok(SimplexMeasure {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        SimplexMeasure {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total_variation(&self, other: &SimplexMeasure) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.probs.iter().zip(f).map(|(p, v)| p * v).sum()
    }
}

/// Value of `H(x, p)` with its Perron eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    /// Right eigenvector, max component 1.
    pub right_eigvec: Vec<f64>,
    /// Left eigenvector, scaled so that `ψ · φ̄ = 1`.
    pub left_eigvec: Vec<f64>,
    pub iterations: usize,
    /// `‖Q φ̄ − H φ̄‖_∞`.
    pub residual: f64,
}

/// Tilted generator `Q_{x,p} = diag(B_{x,p}) + q(x)`.
pub fn build_q(spec: &ModelSpec, x: f64, p: f64) -> Result<Matrix> {
    spec.check_domain(x)?;
    let mut m = spec.q.matrix(x);
    for i in 0..spec.n_regimes() {
        m[(i, i)] += spec.slow_exponent(i, x, p);
    }
    Ok(m)
}

#[derive(Debug)]
struct Perron {
    value: f64,
    vector: Vec<f64>,
    iterations: usize,
}

/// Perron root and positive eigenvector of an irreducible Metzler matrix.
///
/// Starts with power iteration on `M + cI`, `c = max|M_ii| + 1`. If that has
/// not converged after [`POWER_PHASE`] steps (close leading eigenvalues
/// relative to `c`), switches to inverse iteration with `(σI − M)^{-1}`,
/// `σ` just above the current upper bound on the root; that inverse is
/// positive, so iterates stay positive.
///
/// Convergence is judged on the Collatz-Wielandt bracket
/// `min_i (Mv)_i/v_i ≤ ρ(M) ≤ max_i (Mv)_i/v_i`, which holds for any positive
/// `v`. The required width is [`POWER_TOL`] relative to the root, or the
/// rounding floor of the ratios if that is larger.
fn perron(m: &Matrix) -> Result<Perron> {
    let n = m.dim();
    let shift = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max) + 1.0;
    let mut a = m.clone();
    let mut abs_m = m.clone();
    for i in 0..n {
        a[(i, i)] += shift;
        for j in 0..n {
            abs_m[(i, j)] = m[(i, j)].abs();
        }
    }
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut aw = vec![0.0; n];
    let mut best_gap = f64::INFINITY;
    let mut since_improved = 0usize;
    let mut estimate = 0.0;
    let mut upper = 0.0;
    let mut width = 0.0;
    for it in 1..=POWER_MAX_ITER {
        if it > 1 {
            let next = if it <= POWER_PHASE {
                a.mul_vec(&v, &mut w);
                w.clone()
            } else {
                inverse_step(m, &v, upper, width)?
            };
            let top = next.iter().fold(0.0f64, |s, x| s.max(*x));
            if !(top > 0.0 && top.is_finite()) {
                break;
            }
            for (vi, wi) in v.iter_mut().zip(&next) {
                // Components cannot underflow to zero for irreducible inputs of
                // moderate size; guard anyway so ratios stay defined.
                *vi = (wi / top).max(f64::MIN_POSITIVE);
            }
        }
        m.mul_vec(&v, &mut w);
        abs_m.mul_vec(&v, &mut aw);
        let (mut lo, mut hi, mut round) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for i in 0..n {
            let r = w[i] / v[i];
            lo = lo.min(r);
            hi = hi.max(r);
            round = round.max(aw[i] / v[i]);
        }
        estimate = 0.5 * (lo + hi);
        upper = hi;
        width = hi - lo;
        let scale = estimate.abs().max(1.0);
        let gap = width / scale;
        let floor = 16.0 * f64::EPSILON * round / scale;
        if gap < best_gap {
            best_gap = gap;
            since_improved = 0;
        } else {
            since_improved += 1;
        }
        if gap <= POWER_POLISH_TOL.max(floor) || (best_gap <= POWER_TOL.max(floor) && since_improved >= 8) {
            return Ok(Perron {
                value: estimate,
                vector: v,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "Perron eigenvalue iteration",
        iterations: POWER_MAX_ITER,
        residual: if best_gap.is_finite() { best_gap } else { estimate },
    })
}

/// One step of `v ← (σI − M)^{-1} v` with `σ = upper + δ`, widening `δ`
/// while the shifted matrix is numerically singular.
fn inverse_step(m: &Matrix, v: &[f64], upper: f64, width: f64) -> Result<Vec<f64>> {
    let n = m.dim();
    let mut delta = width.max(f64::EPSILON * upper.abs().max(1.0));
    for _ in 0..64 {
        let mut s = m.clone();
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = -s[(i, j)];
            }
            s[(i, i)] += upper + delta;
        }
        match solve(&s, v) {
            Ok(y) => return Ok(y),
            Err(Error::Singular) => delta *= 4.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Singular)
}

/// `H(x, p)` as the principal eigenvalue of [`build_q`].
pub fn hamiltonian(spec: &ModelSpec, x: f64, p: f64) -> Result<HamiltonianEval> {
    let m = build_q(spec, x, p)?;
    eigen_from_matrix(&m)
}

fn eigen_from_matrix(m: &Matrix) -> Result<HamiltonianEval> {
    let right = perron(m)?;
    let left = perron(&m.transpose())?;
    let value = right.value;
    let phi = right.vector;
    let dot: f64 = left.vector.iter().zip(&phi).map(|(a, b)| a * b).sum();
    let psi: Vec<f64> = left.vector.iter().map(|l| l / dot).collect();
    let mut mphi = vec![0.0; phi.len()];
    m.mul_vec(&phi, &mut mphi);
    let residual = mphi
        .iter()
        .zip(&phi)
        .map(|(a, b)| (a - value * b).abs())
        .fold(0.0, f64::max);
    Ok(HamiltonianEval {
        value,
        right_eigvec: phi,
        left_eigvec: psi,
        iterations: right.iterations.max(left.iterations),
        residual,
    })
}

/// Partial derivatives of `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianGradient {
    pub value: f64,
    pub d_dx: f64,
    pub d_dp: f64,
}

/// First-order eigenvalue perturbation: `∂H = ψᵀ (∂Q) φ̄` with `ψ · φ̄ = 1`.
pub fn hamiltonian_gradient(spec: &ModelSpec, x: f64, p: f64) -> Result<HamiltonianGradient> {
    let eval = hamiltonian(spec, x, p)?;
    Ok(gradient_from_eval(spec, x, p, &eval))
}

/// Gradient from an existing eigen-solve, avoiding a second one.
pub fn gradient_from_eval(
    spec: &ModelSpec,
    x: f64,
    p: f64,
    eval: &HamiltonianEval,
) -> HamiltonianGradient {
    let n = spec.n_regimes();
    let phi = &eval.right_eigvec;
    let psi = &eval.left_eigvec;
    let th2 = spec.theta * spec.theta;
    let mut d_dp = 0.0;
    let mut d_dx = 0.0;
    for i in 0..n {
        let w = psi[i] * phi[i];
        d_dp += w * (spec.eta * (spec.mu[i] - x) + th2 * x * p);
        d_dx += w * (-spec.eta * p + 0.5 * th2 * p * p);
    }
    if n > 1 {
        let dq = spec.q.matrix_derivative(x);
        let mut tmp = vec![0.0; n];
        dq.mul_vec(phi, &mut tmp);
        d_dx += psi.iter().zip(&tmp).map(|(a, b)| a * b).sum::<f64>();
    }
    HamiltonianGradient {
        value: eval.value,
        d_dx,
        d_dp,
    }
}

/// Gradient tolerance of the Donsker-Varadhan minimization.
pub const DV_GRAD_TOL: f64 = 1e-10;
const DV_MAX_ITER: usize = 2_000;

/// Donsker-Varadhan functional `I(x, π)`.
///
/// Minimizes the convex function
/// `F(φ) = Σ_i π_i Σ_{j≠i} q_ij(x)(e^{φ_j−φ_i} − 1)` with the gauge fixed at
/// the first regime carrying mass, and returns `−min F`. Regimes with zero
/// mass are sent to `φ = −∞` analytically. Where the infimum is not attained
/// (reducible support) the damped Newton iteration drifts off to infinity and
/// stops once the gradient is below tolerance, at which point `F` is within
/// that tolerance of its infimum.
pub fn dv_functional(spec: &ModelSpec, x: f64, pi: &SimplexMeasure) -> Result<f64> {
    spec.check_domain(x)?;
    let n = spec.n_regimes();
    if pi.len() != n {
        return Err(Error::InvalidMeasure);
    }
    let q = spec.q.matrix(x);
    let probs = pi.probs();
    let support: Vec<usize> = (0..n).filter(|&i| probs[i] > 0.0).collect();
    if support.is_empty() {
        return Err(Error::InvalidMeasure);
    }
    // Mass flowing out of the support contributes −π_i q_ij with g_j = 0.
    let leak: f64 = support
        .iter()
        .map(|&i| {
            probs[i]
                * (0..n)
                    .filter(|j| *j != i && probs[*j] == 0.0)
                    .map(|j| q[(i, j)])
                    .sum::<f64>()
        })
        .sum();
    let s = support.len();
    if s == 1 {
        return Ok(leak.max(0.0));
    }
    // Weighted rates restricted to the support: c_ab = π_a q_ab.
    let mut c = Matrix::zeros(s);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            if a != b {
                c[(a, b)] = probs[i] * q[(i, j)];
            }
        }
    }
    let objective = |phi: &[f64]| -> f64 {
        let mut f = 0.0;
        for a in 0..s {
            for b in 0..s {
                if a != b && c[(a, b)] != 0.0 {
                    f += c[(a, b)] * ((phi[b] - phi[a]).exp() - 1.0);
                }
            }
        }
        f
    };
    // Free variables are φ_1..φ_{s−1}; φ_0 = 0.
    let dim = s - 1;
    let mut phi = vec![0.0; s];
    let mut f = objective(&phi);
    let mut damping = 0.0;
    let rounding = 8.0 * f64::EPSILON * c.as_slice().iter().sum::<f64>();
    for _ in 0..DV_MAX_ITER {
        // w_ab = c_ab e^{φ_b − φ_a}
        let mut w = Matrix::zeros(s);
        for a in 0..s {
            for b in 0..s {
                if a != b && c[(a, b)] != 0.0 {
                    w[(a, b)] = c[(a, b)] * (phi[b] - phi[a]).exp();
                }
            }
        }
        let mut grad = vec![0.0; dim];
        let mut hess = Matrix::zeros(dim);
        for k in 1..s {
            let inflow: f64 = (0..s).map(|a| w[(a, k)]).sum();
            let outflow: f64 = (0..s).map(|b| w[(k, b)]).sum();
            grad[k - 1] = inflow - outflow;
            hess[(k - 1, k - 1)] = inflow + outflow;
            for l in 1..s {
                if l != k {
                    hess[(k - 1, l - 1)] = -(w[(l, k)] + w[(k, l)]);
                }
            }
        }
        if inf_norm(&grad) <= DV_GRAD_TOL {
            return Ok((leak - f).max(0.0));
        }
        // Damped Newton with Armijo backtracking; damping grows when the
        // Hessian is singular or the step fails to decrease F.
        let mut accepted = false;
        for _ in 0..60 {
            let mut h = hess.clone();
            let diag_scale = (0..dim).map(|k| hess[(k, k)]).fold(0.0, f64::max).max(1e-300);
            for k in 0..dim {
                h[(k, k)] += damping * diag_scale;
            }
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let step = match solve(&h, &neg) {
                Ok(step) => step,
                Err(_) => {
                    damping = if damping == 0.0 { 1e-10 } else { damping * 10.0 };
                    continue;
                }
            };
            let slope: f64 = step.iter().zip(&grad).map(|(a, b)| a * b).sum();
            let mut t = 1.0;
            while t > 1e-12 {
                let mut trial = phi.clone();
                for k in 1..s {
                    trial[k] += t * step[k - 1];
                }
                let ft = objective(&trial);
                // The slack lets Newton finish once F stops resolving the decrease.
                if ft <= f + 1e-4 * t * slope + rounding {
                    phi = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                damping *= 0.1;
                if damping < 1e-12 {
                    damping = 0.0;
                }
                break;
            }
            damping = if damping == 0.0 { 1e-10 } else { damping * 10.0 };
        }
        if !accepted {
            // No descent at machine precision: accept if already tiny.
            if inf_norm(&grad) <= 1e-8 {
                return Ok((leak - f).max(0.0));
            }
            return Err(Error::NonConvergence {
                what: "Donsker-Varadhan minimization",
                iterations: DV_MAX_ITER,
                residual: inf_norm(&grad),
            });
        }
    }
    Err(Error::NonConvergence {
        what: "Donsker-Varadhan minimization",
        iterations: DV_MAX_ITER,
        residual: f64::NAN,
    })
}

/// `sup_π { π·B_{x,p} − I(x, π) }` without any eigenvalue computation.
///
/// A brute-force pass over the barycentric grid with coordinates
/// `k / resolution` (see [`simplex_grid_sup`]) is followed by compass search
/// along the transfer directions `e_i − e_j`, halving the step down to
/// `1e-12`. The objective is concave, so the polish reaches the global
/// supremum rather than a local one. Exponential in the regime count; test
/// use only.
pub fn variational_hamiltonian_oracle(
    spec: &ModelSpec,
    x: f64,
    p: f64,
    resolution: usize,
) -> Result<f64> {
    let (mut best, start) = simplex_grid_sup(spec, x, p, resolution)?;
    let n = spec.n_regimes();
    let b: Vec<f64> = (0..n).map(|i| spec.slow_exponent(i, x, p)).collect();
    let mut pi = start.probs;
    let mut step = 1.0 / resolution as f64;
    while step > 1e-12 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                // Move up to `step` of mass from j to i.
                let moved = step.min(pi[j]);
                if i == j || moved <= 0.0 {
                    continue;
                }
                let mut trial = pi.clone();
                trial[i] += moved;
                trial[j] -= moved;
                let trial = SimplexMeasure::normalized(trial)?;
                let value = trial.expectation(&b) - dv_functional(spec, x, &trial)?;
                if value > best {
                    best = value;
                    pi = trial.probs;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

/// Plain grid supremum of the variational objective and its maximizing grid
/// measure; a lower bound for `H(x, p)`.
pub fn simplex_grid_sup(
    spec: &ModelSpec,
    x: f64,
    p: f64,
    resolution: usize,
) -> Result<(f64, SimplexMeasure)> {
    let n = spec.n_regimes();
    if n > ORACLE_MAX_REGIMES {
        return Err(Error::TooManyRegimes { n, max: ORACLE_MAX_REGIMES });
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("oracle resolution must be positive"));
    }
    spec.check_domain(x)?;
    let b: Vec<f64> = (0..n).map(|i| spec.slow_exponent(i, x, p)).collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_pi = SimplexMeasure::uniform(n);
    let mut counts = vec![0usize; n];
    counts[n - 1] = resolution;
    loop {
        let pi = SimplexMeasure {
            probs: counts.iter().map(|&k| k as f64 / resolution as f64).collect(),
        };
        let value = pi.expectation(&b) - dv_functional(spec, x, &pi)?;
        if value > best {
            best = value;
            best_pi = pi;
        }
        if !next_composition(&mut counts) {
            break;
        }
    }
    Ok((best, best_pi))
}

/// Steps through all weak compositions of `sum(counts)` into `counts.len()`
/// parts. Returns `false` after the last one.
fn next_composition(counts: &mut [usize]) -> bool {
    let n = counts.len();
    if n <= 1 {
        return false;
    }
    // Find the rightmost position (excluding the last) that can take one more
    // unit from the tail.
    let tail = counts[n - 1];
    if tail > 0 {
        counts[n - 1] -= 1;
        counts[n - 2] += 1;
        return true;
    }
    // Move everything accumulated at the last nonzero interior slot back to the tail.
    let mut k = n - 2;
    loop {
        if counts[k] > 0 {
            if k == 0 {
                return false;
            }
            let moved = counts[k];
            counts[k] = 0;
            counts[k - 1] += 1;
            counts[n - 1] = moved - 1;
            return true;
        }
        if k == 0 {
            return false;
        }
        k -= 1;
    }
}

/// Containment function `Υ(x) = −log x + log(1 + ½x²) − log √2`.
pub fn upsilon(x: f64) -> f64 {
    -x.ln() + (1.0 + 0.5 * x * x).ln() - 0.5 * 2.0f64.ln()
}

/// `Υ'(x) = −1/x + x/(1 + ½x²)`.
pub fn upsilon_derivative(x: f64) -> f64 {
    -1.0 / x + x / (1.0 + 0.5 * x * x)
}

/// `C_Υ = sup_{x, i} B_{x, Υ'(x)}(i)` over `count` log-spaced points of
/// `[x_min, x_max]`. Finite iff the drift dominates the noise near zero.
pub fn containment_constant(spec: &ModelSpec, x_max: f64, count: usize) -> f64 {
    log_grid(spec.x_min, x_max, count)
        .into_iter()
        .flat_map(|x| {
            let p = upsilon_derivative(x);
            (0..spec.n_regimes()).map(move |i| spec.slow_exponent(i, x, p))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

//! Projected BFGS for smooth objectives with a uniform lower bound on every
//! coordinate. Gradients are supplied by the caller.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::Result;
use crate::linalg::inf_norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    /// Stop once the projected gradient's ∞-norm is at most this.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub lower: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            grad_tol: 1e-6,
            max_iter: 10_000,
            lower: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Gradient with components pinned at the bound and pointing outward zeroed.
fn projected(x: &[f64], g: &[f64], lower: f64) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| if xi <= lower && gi > 0.0 { 0.0 } else { gi })
        .collect()
}

pub fn minimize_bfgs<F, G>(mut f: F, mut grad: G, x0: &[f64], opts: BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(opts.lower)).collect();
    let mut fx = f(&x)?;
    if n == 0 {
        return Ok(BfgsOutcome {
            x,
            value: fx,
            grad_norm: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let mut g = grad(&x)?;
    // Inverse Hessian approximation, row-major.
    let mut hinv = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    loop {
        let pg = projected(&x, &g, opts.lower);
        let gnorm = inf_norm(&pg);
        if gnorm <= opts.grad_tol {
            return Ok(BfgsOutcome { x, value: fx, grad_norm: gnorm, iterations, converged: true });
        }
        if iterations >= opts.max_iter {
            return Ok(BfgsOutcome { x, value: fx, grad_norm: gnorm, iterations, converged: false });
        }
        iterations += 1;

        let mut dir: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| hinv[i * n + j] * pg[j]).sum::<f64>())
            .collect();
        for i in 0..n {
            // Do not push further into an active bound.
            if x[i] <= opts.lower && dir[i] < 0.0 {
                dir[i] = 0.0;
            }
        }
        if dot(&dir, &pg) >= 0.0 {
            hinv = identity(n);
            fresh = true;
            dir = pg.iter().map(|v| -v).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-16 {
            let trial: Vec<f64> = x
                .iter()
                .zip(&dir)
                .map(|(xi, di)| (xi + t * di).max(opts.lower))
                .collect();
            let ft = f(&trial)?;
            let decrease: f64 = trial.iter().zip(&x).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum();
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && ft <= fx {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh {
                return Ok(BfgsOutcome { x, value: fx, grad_norm: gnorm, iterations, converged: false });
            }
            hinv = identity(n);
            fresh = true;
            continue;
        };
        let g_new = grad(&x_new)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if fresh {
                let scale = sy / dot(&y, &y);
                for i in 0..n {
                    hinv[i * n + i] = scale;
                }
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`, `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#![allow(dead_code)]

use switchcir_core::{ModelSpec, RateMatrixField};

/// Two regimes with state-dependent switching; same data as the shipped
/// `two_regime.toml` fixture.
pub fn two_regime() -> ModelSpec {
    let q = RateMatrixField::new(2, vec![0.0, 1.0, 2.0, 0.0], vec![0.0, 0.5, -1.0, 0.0]).unwrap();
    ModelSpec::new(1.0, 1.0, vec![1.0, 3.0], q)
}

/// Three regimes; same data as `three_regime.toml`.
pub fn three_regime() -> ModelSpec {
    let q = RateMatrixField::new(
        3,
        vec![0.0, 1.0, 0.5, 0.7, 0.0, 1.2, 0.4, 0.9, 0.0],
        vec![0.0, 0.5, 0.0, 0.3, 0.0, -0.6, 0.0, 0.2, 0.0],
    )
    .unwrap();
    ModelSpec::new(1.5, 1.0, vec![0.8, 2.0, 3.5], q)
}

pub fn single(eta: f64, theta: f64, mu: f64) -> ModelSpec {
    ModelSpec::new(eta, theta, vec![mu], RateMatrixField::constant(1, vec![0.0]).unwrap())
}

/// `η = θ = 1`, `μ = (0, 2)`, symmetric unit rates. `μ(1) = 0` violates the
/// model invariants, so only unvalidated analytic routines accept it.
pub fn symmetric_closed_form() -> ModelSpec {
    ModelSpec::new(1.0, 1.0, vec![0.0, 2.0], RateMatrixField::constant(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap())
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

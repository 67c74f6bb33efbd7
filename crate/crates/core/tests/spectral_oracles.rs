mod common;

use common::*;
use switchcir_core::averaging::{averaged_drift, stationary};
use switchcir_core::spectral::{
    containment_constant, dv_functional, hamiltonian, hamiltonian_gradient, simplex_grid_sup,
    variational_hamiltonian_oracle,
};
use switchcir_core::{ModelSpec, RateMatrixField, SimplexMeasure};

#[test]
fn closed_form_point_matches_eigenvalue_and_oracle() {
    let spec = symmetric_closed_form();
    // trace −1, det −1.75
    let exact = (-1.0 + 8.0f64.sqrt()) / 2.0;
    let h = hamiltonian(&spec, 1.0, 1.0).unwrap();
    assert!((h.value - exact).abs() <= 1e-9);
    let oracle = variational_hamiltonian_oracle(&spec, 1.0, 1.0, 200).unwrap();
    assert!((oracle - exact).abs() <= 1e-4, "{oracle} vs {exact}");
    // The principal eigenvalue itself is the variational supremum: no sign flip.
    assert!(oracle > 0.0 && h.value > 0.0);
}

#[test]
fn eigen_matches_simplex_oracle_on_coarse_grid() {
    for (spec, m) in [(two_regime(), 200usize), (three_regime(), 60)] {
        for &x in &[0.2, 1.0, 5.0] {
            for &p in &[-3.0, -0.5, 0.0, 1.0, 3.0] {
                let h = hamiltonian(&spec, x, p).unwrap().value;
                let (raw, _) = simplex_grid_sup(&spec, x, p, m).unwrap();
                assert!(raw <= h + 1e-9, "grid sup above eigenvalue at x={x} p={p}");
                let o = variational_hamiltonian_oracle(&spec, x, p, m).unwrap();
                assert!(o >= raw);
                assert!((h - o).abs() <= 1e-4, "N={} x={x} p={p}: eigen {h} oracle {o}", spec.n_regimes());
            }
        }
    }
}

/// Mass on regimes 2 and 3 only: the exit flux `π₂q₂₁ + π₃q₃₁` adds to a
/// one-dimensional problem in `φ₃ − φ₂`, scanned densely.
#[test]
fn dv_with_empty_regime_matches_scan() {
    let spec = three_regime();
    let x = 1.0;
    let q = spec.q.matrix(x);
    let leak = 0.5 * q[(1, 0)] + 0.5 * q[(2, 0)];
    let points = 1_000_000;
    let scan_min = (0..=points)
        .map(|k| -10.0 + 20.0 * k as f64 / points as f64)
        .map(|t| 0.5 * q[(1, 2)] * (t.exp() - 1.0) + 0.5 * q[(2, 1)] * ((-t).exp() - 1.0))
        .fold(f64::INFINITY, f64::min);
    let pi = SimplexMeasure::new(vec![0.0, 0.5, 0.5]).unwrap();
    let got = dv_functional(&spec, x, &pi).unwrap();
    assert!((got - (leak - scan_min)).abs() <= 1e-6, "{got} vs {}", leak - scan_min);
}

#[test]
fn oracle_at_zero_momentum_is_zero() {
    let spec = two_regime();
    let o = variational_hamiltonian_oracle(&spec, 1.3, 0.0, 200).unwrap();
    assert!(o.abs() <= 1e-4 && o <= 1e-12);
    let one = single(1.0, 1.0, 2.0);
    let o = variational_hamiltonian_oracle(&one, 0.7, 1.1, 10).unwrap();
    assert!((o - one.slow_exponent(0, 0.7, 1.1)).abs() < 1e-15);
}

#[test]
fn eigen_residual_and_positivity() {
    for spec in [two_regime(), three_regime()] {
        for &x in &linspace(0.2, 5.0, 10) {
            for &p in &linspace(-3.0, 3.0, 10) {
                let h = hamiltonian(&spec, x, p).unwrap();
                assert!(h.residual <= 1e-10);
                assert!(h.right_eigvec.iter().all(|v| *v > 0.0));
                assert!(h.left_eigvec.iter().all(|v| *v > 0.0));
            }
            assert!(hamiltonian(&spec, x, 0.0).unwrap().value.abs() <= 1e-12);
        }
    }
}

/// Dense 1-D scan of `F(φ₂) = 0.9(e^{φ₂}−1) + 0.1(e^{−φ₂}−1)` on `[−10, 10]`.
#[test]
fn dv_matches_dense_scan() {
    let q = RateMatrixField::constant(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let spec = ModelSpec::new(1.0, 1.0, vec![1.0, 2.0], q);
    let pi = SimplexMeasure::new(vec![0.9, 0.1]).unwrap();
    let points = 1_000_000;
    let scan_min = (0..=points)
        .map(|k| -10.0 + 20.0 * k as f64 / points as f64)
        .map(|t| 0.9 * (t.exp() - 1.0) + 0.1 * ((-t).exp() - 1.0))
        .fold(f64::INFINITY, f64::min);
    let oracle = -scan_min;
    let got = dv_functional(&spec, 1.0, &pi).unwrap();
    assert!((got - oracle).abs() <= 1e-6, "{got} vs {oracle}");
    assert!((oracle - 0.4).abs() < 1e-9);
}

#[test]
fn dv_vanishes_only_at_stationary_law() {
    for spec in [two_regime(), three_regime()] {
        for x in switchcir_core::model::log_grid(1e-3, 1e3, 13) {
            let pi = stationary(&spec, x).unwrap();
            assert!(dv_functional(&spec, x, &pi).unwrap() <= 1e-10);
            // Shift 0.05 of mass from the heaviest regime to the lightest.
            let probs = pi.probs();
            let (imax, _) = probs.iter().enumerate().fold((0, -1.0), |b, (i, &p)| if p > b.1 { (i, p) } else { b });
            let (imin, _) = probs.iter().enumerate().fold((0, 2.0), |b, (i, &p)| if p < b.1 { (i, p) } else { b });
            let mut moved = probs.to_vec();
            moved[imax] -= 0.05;
            moved[imin] += 0.05;
            let moved = SimplexMeasure::normalized(moved).unwrap();
            assert!(moved.total_variation(&pi) >= 0.05 - 1e-12);
            assert!(dv_functional(&spec, x, &moved).unwrap() >= 1e-6);
        }
    }
}

fn central_difference(f: impl Fn(f64) -> f64, at: f64, h: f64) -> f64 {
    (f(at + h) - f(at - h)) / (2.0 * h)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut state = 0x2545F4914F6CDD1Du64;
    let mut uniform = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for spec in [two_regime(), three_regime()] {
        for _ in 0..25 {
            let x = 0.2 + 4.8 * uniform();
            let p = -3.0 + 6.0 * uniform();
            let g = hamiltonian_gradient(&spec, x, p).unwrap();
            let h = 1e-6;
            let fd_p = central_difference(|p| hamiltonian(&spec, x, p).unwrap().value, p, h);
            let fd_x = central_difference(|x| hamiltonian(&spec, x, p).unwrap().value, x, h);
            assert!((g.d_dp - fd_p).abs() <= 1e-6 * fd_p.abs().max(1.0), "dp {} vs {fd_p}", g.d_dp);
            assert!((g.d_dx - fd_x).abs() <= 1e-6 * fd_x.abs().max(1.0), "dx {} vs {fd_x}", g.d_dx);
        }
    }
}

#[test]
fn momentum_derivative_at_zero_is_averaged_drift() {
    for spec in [two_regime(), three_regime()] {
        for x in switchcir_core::model::log_grid(0.05, 20.0, 15) {
            let g = hamiltonian_gradient(&spec, x, 0.0).unwrap();
            let v = averaged_drift(&spec, x).unwrap();
            assert!((g.d_dp - v).abs() <= 1e-8, "x={x}: {} vs {v}", g.d_dp);
        }
    }
    let one = single(1.0, 1.0, 2.0);
    let g = hamiltonian_gradient(&one, 1.5, 0.8).unwrap();
    assert!((g.d_dp - (0.5 + 1.5 * 0.8)).abs() < 1e-14);
}

#[test]
fn containment_constant_is_finite() {
    for spec in [two_regime(), three_regime()] {
        let c = containment_constant(&spec, 1e4, 400);
        assert!(c.is_finite());
        // Near zero B_{x,Υ'(x)}(i) ≈ (θ²/2 − ημ(i))/x + η, bounded by η under the Feller condition.
        assert!(c <= spec.eta + 1e-9 + 1.0, "{c}");
    }
}

#[test]
fn containment_constant_blows_up_without_feller() {
    let spec = single(1.0, 2.0, 1.0).with_allow_nonfeller(true);
    let c = containment_constant(&spec, 1e4, 400);
    assert!(c > 1e5);
}

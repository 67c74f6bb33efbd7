use proptest::prelude::*;
use switchcir_core::action::PathDiscretization;
use switchcir_core::lagrangian::legendre;
use switchcir_core::spectral::{containment_constant, dv_functional, hamiltonian};
use switchcir_core::{ModelSpec, RateMatrixField, SimplexMeasure};

/// Random valid 2- or 3-regime model with state-dependent rates.
fn arb_spec() -> impl Strategy<Value = ModelSpec> {
    (2usize..=3)
        .prop_flat_map(|n| {
            (
                Just(n),
                0.3f64..2.0,
                0.3f64..1.5,
                prop::collection::vec(0.0f64..3.0, n),
                prop::collection::vec(0.1f64..2.0, n * n),
                prop::collection::vec(-1.0f64..1.0, n * n),
            )
        })
        .prop_map(|(n, eta, theta, extra, base, slope)| {
            let floor = theta * theta / (2.0 * eta);
            let mu = extra.iter().map(|e| floor + 0.1 + e).collect();
            // Keep a_ij + b_ij > 0 so every rate stays positive.
            let slope: Vec<f64> = slope.iter().zip(&base).map(|(s, b)| s * b * 0.9).collect();
            let mut b = base;
            for i in 0..n {
                b[i * n + i] = 0.0;
            }
            ModelSpec::new(eta, theta, mu, RateMatrixField::new(n, b, slope).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_rows_and_lipschitz(spec in arb_spec(), x in 1e-3f64..50.0, y in 1e-3f64..50.0) {
        let n = spec.n_regimes();
        let a = spec.q.matrix(x);
        let b = spec.q.matrix(y);
        let lip: f64 = spec.q.slope_row_major().iter().fold(0.0, |m, s| m.max(s.abs()));
        for i in 0..n {
            let row: f64 = (0..n).map(|j| a[(i, j)]).sum();
            prop_assert!(row.abs() <= 1e-12);
            for j in 0..n {
                if i != j {
                    prop_assert!(a[(i, j)] >= 0.0);
                    prop_assert!((a[(i, j)] - b[(i, j)]).abs() <= lip * (x - y).abs() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_vanishes_at_zero_momentum(spec in arb_spec(), x in 1e-3f64..50.0) {
        prop_assert!(hamiltonian(&spec, x, 0.0).unwrap().value.abs() <= 1e-12);
    }

    #[test]
    fn hamiltonian_convex_in_momentum(spec in arb_spec(), x in 0.05f64..10.0, p in -3.0f64..3.0, q in -3.0f64..3.0, t in 0.0f64..1.0) {
        let h = |p| hamiltonian(&spec, x, p).unwrap().value;
        let mid = h(t * p + (1.0 - t) * q);
        let chord = t * h(p) + (1.0 - t) * h(q);
        prop_assert!(mid <= chord + 1e-9 * chord.abs().max(1.0));
    }

    #[test]
    fn dv_nonnegative(spec in arb_spec(), x in 1e-2f64..20.0, weights in prop::collection::vec(0.0f64..1.0, 3)) {
        let w = weights[..spec.n_regimes()].to_vec();
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let pi = SimplexMeasure::normalized(w).unwrap();
        prop_assert!(dv_functional(&spec, x, &pi).unwrap() >= 0.0);
    }

    #[test]
    fn lagrangian_nonnegative_and_convex(spec in arb_spec(), x in 0.1f64..5.0, v in -4.0f64..4.0, w in -4.0f64..4.0, t in 0.0f64..1.0) {
        let l = |v| legendre(&spec, x, v).unwrap().value;
        let (lv, lw) = (l(v), l(w));
        prop_assert!(lv >= 0.0 && lw >= 0.0);
        let mid = l(t * v + (1.0 - t) * w);
        let chord = t * lv + (1.0 - t) * lw;
        prop_assert!(mid <= chord + 1e-7 * chord.max(1.0));
    }

    #[test]
    fn lagrangian_superlinear(spec in arb_spec(), x in 0.1f64..5.0, sign in prop::bool::ANY) {
        let s = if sign { 1.0 } else { -1.0 };
        let ratio = |v: f64| legendre(&spec, x, v).unwrap().value / v.abs();
        let (a, b, c) = (ratio(s * 5.0), ratio(s * 20.0), ratio(s * 80.0));
        prop_assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn action_time_additive(spec in arb_spec(), nodes in prop::collection::vec(0.2f64..4.0, 11)) {
        let path = PathDiscretization::new(1.0, nodes).unwrap();
        let whole = switchcir_core::action::action(&spec, &path).unwrap().action;
        let a = switchcir_core::action::action(&spec, &path.slice(0, 5).unwrap()).unwrap().action;
        let b = switchcir_core::action::action(&spec, &path.slice(5, 10).unwrap()).unwrap().action;
        prop_assert!(whole >= 0.0);
        prop_assert!((whole - a - b).abs() <= 1e-12 * whole.max(1.0));
    }

    #[test]
    fn containment_finite_under_feller(spec in arb_spec()) {
        prop_assert!(containment_constant(&spec, 1e4, 200).is_finite());
    }
}

mod common;

use common::*;
use switchcir_core::model::RateMatrixField;
use switchcir_core::sim::{occupation, path_rng, simulate_path, SimConfig, Simulator};
use switchcir_core::stats::Moments;
use switchcir_core::ModelSpec;

#[test]
fn weak_noise_mean_follows_ode() {
    let spec = single(1.0, 1.0, 2.0);
    let cfg = SimConfig { n: 1_000_000, t_end: 1.0, dt: 1e-5, x0: 1.0, regime0: 0 };
    let sim = Simulator::new(&spec, cfg).unwrap();
    let steps = sim.steps();
    let mut m = Moments::default();
    for path in 0..1000 {
        let mut end = 0.0;
        sim.run(&mut path_rng(7, path), |k, x, _| {
            if k == steps {
                end = x;
            }
        });
        m.push(end);
    }
    let exact = 2.0 - (-1.0f64).exp();
    assert!((m.mean - exact).abs() <= 3.0 * m.std_error(), "{} ± {}", m.mean, m.std_error());
    assert!((exact - 1.632).abs() < 1e-3);
}

#[test]
fn occupation_matches_stationary_law() {
    let q = RateMatrixField::constant(2, vec![0.0, 1.0, 2.0, 0.0]).unwrap();
    let spec = ModelSpec::new(1.0, 1.0, vec![1.0, 2.0], q);
    let cfg = SimConfig { n: 1000, t_end: 100.0, dt: 0.01, x0: 1.0, regime0: 0 };
    let traj = simulate_path(&spec, cfg, 11).unwrap();
    let occ = occupation(&traj, 2, 0.0, 100.0).unwrap();
    let w = occ.weights.probs();
    assert!((w[0] - 2.0 / 3.0).abs() <= 0.02 && (w[1] - 1.0 / 3.0).abs() <= 0.02, "{w:?}");
}

/// With constant rates the per-step jump count from regime `i` is binomial
/// with success probability `n q_i dt`.
#[test]
fn transition_frequencies_match_rates() {
    let q = RateMatrixField::constant(3, vec![0.0, 1.0, 0.5, 0.7, 0.0, 1.2, 0.4, 0.9, 0.0]).unwrap();
    let spec = ModelSpec::new(1.0, 1.0, vec![1.0, 2.0, 3.0], q.clone());
    let cfg = SimConfig { n: 10, t_end: 1.0, dt: 1e-5, x0: 1.0, regime0: 0 };
    let sim = Simulator::new(&spec, cfg).unwrap();
    let dt = sim.dt();
    let mut visits = [0u64; 3];
    let mut jumps = [[0u64; 3]; 3];
    let mut prev = None;
    sim.run(&mut path_rng(3, 0), |_, _, r| {
        if let Some(p) = prev {
            visits[p] += 1;
            if r != p {
                jumps[p][r] += 1;
            }
        }
        prev = Some(r);
    });
    assert_eq!(visits.iter().sum::<u64>(), 100_000);
    for i in 0..3 {
        for j in 0..3 {
            if i == j || visits[i] < 1000 {
                continue;
            }
            let prob = 10.0 * q.rate(i, j, 1.0) * dt;
            let expected = prob * visits[i] as f64;
            let sd = (expected * (1.0 - prob)).sqrt();
            let got = jumps[i][j] as f64;
            assert!((got - expected).abs() <= 3.0 * sd.max(1.0), "{i}->{j}: {got} vs {expected} ± {sd}");
        }
    }
}

#[test]
fn truncation_is_rare_at_default_settings() {
    let spec = two_regime();
    let cfg = SimConfig { n: 100, t_end: 1.0, dt: 1e-3, x0: 1.0, regime0: 0 };
    let sim = Simulator::new(&spec, cfg).unwrap();
    let mut clamped = 0usize;
    for path in 0..100 {
        clamped += sim.run(&mut path_rng(5, path), |_, _, _| {});
    }
    assert!((clamped as f64) / (100.0 * sim.steps() as f64) < 0.01);
}

#[test]
fn paths_are_reproducible_and_independent_of_order() {
    let spec = three_regime();
    let cfg = SimConfig { n: 50, t_end: 0.5, dt: 1e-3, x0: 1.0, regime0: 2 };
    let sim = Simulator::new(&spec, cfg).unwrap();
    let forward: Vec<_> = (0..4).map(|i| sim.path(9, i)).collect();
    let backward: Vec<_> = (0..4).rev().map(|i| sim.path(9, i)).collect();
    for (a, b) in forward.iter().zip(backward.iter().rev()) {
        assert_eq!(a, b);
    }
    assert_ne!(forward[0].x, forward[1].x);
    assert!(forward.iter().all(|t| t.x.iter().all(|x| *x >= 0.0)));
}

//! Parallel Monte Carlo ensembles with results independent of the worker
//! count.
//!
//! Paths are grouped into fixed chunks of [`CHUNK`] consecutive indices. Each
//! chunk is reduced sequentially and chunk results are merged in index
//! order, so floating-point sums do not depend on scheduling.

use rayon::prelude::*;
use switchcir_core::sim::{path_rng, Simulator};
use switchcir_core::stats::Moments;

pub const CHUNK: u64 = 64;
/// Chunks processed per parallel wave; bounds memory for per-time moments.
const WAVE: usize = 16;

/// `f(i)` for every path index, in index order.
pub fn map_paths<T, F>(n_paths: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n_paths).into_par_iter().map(f).collect()
}

/// Moments of a per-path scalar, merged in chunk order.
pub fn scalar_moments<F>(n_paths: u64, f: F) -> Moments
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    let chunks = n_paths.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                m.push(f(i));
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Per-time mean and variance of the slow component across paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub moments: Vec<Moments>,
    pub n_paths: u64,
    pub clamped_steps: u64,
}

pub fn ensemble(sim: &Simulator<'_>, seed: u64, n_paths: u64) -> EnsembleSummary {
    let len = sim.steps() + 1;
    let chunks: Vec<u64> = (0..n_paths.div_ceil(CHUNK)).collect();
    let mut total = vec![Moments::default(); len];
    let mut clamped = 0u64;
    for wave in chunks.chunks(WAVE) {
        let parts: Vec<(Vec<Moments>, u64)> = wave
            .par_iter()
            .map(|&c| {
                let mut m = vec![Moments::default(); len];
                let mut clamped = 0u64;
                for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                    clamped += sim.run(&mut path_rng(seed, i), |k, x, _| m[k].push(x)) as u64;
                }
                (m, clamped)
            })
            .collect();
        for (m, c) in &parts {
            for (t, p) in total.iter_mut().zip(m) {
                t.merge(p);
            }
            clamped += c;
        }
    }
    EnsembleSummary {
        times: sim.times(),
        moments: total,
        n_paths,
        clamped_steps: clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use switchcir_core::sim::SimConfig;
    use switchcir_core::{ModelSpec, RateMatrixField};

    fn spec() -> ModelSpec {
        let q = RateMatrixField::constant(2, vec![0.0, 1.0, 2.0, 0.0]).unwrap();
        ModelSpec::new(1.0, 1.0, vec![1.0, 2.0], q)
    }

    #[test]
    fn same_result_for_any_pool_size() {
        let spec = spec();
        let cfg = SimConfig { n: 20, t_end: 0.5, dt: 0.01, x0: 1.0, regime0: 0 };
        let sim = Simulator::new(&spec, cfg).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble(&sim, 5, 300))
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a, b);
        assert_eq!(a.moments[0].count, 300);
        let s1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| scalar_moments(200, |i| i as f64));
        let s3 = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| scalar_moments(200, |i| i as f64));
        assert_eq!(s1, s3);
        assert!((s1.mean - 99.5).abs() < 1e-12);
    }
}

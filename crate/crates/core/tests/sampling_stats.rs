//! Statistical verification of the path samplers: moment match against the
//! covariance function, Brownian increment independence, and agreement of
//! the two exact backends.

mod common;

use std::sync::Arc;

use frachedge_core::fbm::{generate_paths, SamplerBackend};
use frachedge_core::{covariance, HurstIndex, TimeGrid};

use common::{ks_statistic, mean_and_se};

#[test]
fn sample_covariance_matches_model() {
    let h = HurstIndex::new(0.75).unwrap();
    let grid = Arc::new(TimeGrid::uniform(1.0, 2, 2).unwrap());
    let n = 100_000;
    for backend in [SamplerBackend::Cholesky, SamplerBackend::Circulant] {
        let paths = generate_paths(&grid, h, n, 314, backend).unwrap();
        // pair (t, s) = (1.0, 0.5): products B_t B_s
        let t_idx = grid.subgrid_index_of(1.0).unwrap();
        let s_idx = grid.subgrid_index_of(0.5).unwrap();
        let products: Vec<f64> = paths
            .iter()
            .map(|p| p.value_at_index(t_idx) * p.value_at_index(s_idx))
            .collect();
        let (mean, se) = mean_and_se(&products);
        let target = covariance(1.0, 0.5, h).unwrap();
        assert!(
            (mean - target).abs() < 4.0 * se,
            "{backend:?}: sample covariance {mean:.5} vs {target:.5} (se {se:.2e})"
        );
    }
}

#[test]
fn brownian_increments_are_uncorrelated() {
    let h = HurstIndex::brownian();
    let grid = Arc::new(TimeGrid::uniform(1.0, 4, 1).unwrap());
    let n = 100_000;
    let paths = generate_paths(&grid, h, n, 99, SamplerBackend::Cholesky).unwrap();
    // disjoint increments over [0, 0.25] and [0.5, 0.75]
    let xs: Vec<f64> = paths.iter().map(|p| p.value_at_index(1)).collect();
    let ys: Vec<f64> = paths
        .iter()
        .map(|p| p.value_at_index(3) - p.value_at_index(2))
        .collect();
    let (mx, _) = mean_and_se(&xs);
    let (my, _) = mean_and_se(&ys);
    let n_f = n as f64;
    let cov_xy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (n_f - 1.0);
    let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / (n_f - 1.0);
    let vy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / (n_f - 1.0);
    let corr = cov_xy / (vx * vy).sqrt();
    // SE of a sample correlation near zero is ~ 1/sqrt(n)
    assert!(
        corr.abs() < 4.0 / n_f.sqrt(),
        "increment correlation {corr:.5}"
    );
}

#[test]
fn backends_agree_in_distribution() {
    // two-sample KS on the B_T marginal, 1e4 paths per backend, below the
    // 1% critical value c(0.01) sqrt((n+m)/(n m)) with c(0.01) = 1.628
    let h = HurstIndex::new(0.75).unwrap();
    let grid = Arc::new(TimeGrid::uniform(1.0, 4, 16).unwrap());
    let n = 10_000;
    let t_idx = grid.subgrid().len() - 1;
    let chol: Vec<f64> = generate_paths(&grid, h, n, 2024, SamplerBackend::Cholesky)
        .unwrap()
        .iter()
        .map(|p| p.value_at_index(t_idx))
        .collect();
    let circ: Vec<f64> = generate_paths(&grid, h, n, 4048, SamplerBackend::Circulant)
        .unwrap()
        .iter()
        .map(|p| p.value_at_index(t_idx))
        .collect();
    let d = ks_statistic(chol, circ);
    let critical = 1.628 * ((2 * n) as f64 / (n as f64 * n as f64)).sqrt();
    assert!(d < critical, "KS statistic {d:.5} vs critical {critical:.5}");
}

#[test]
fn circulant_variance_scaling() {
    // marginal variance of B_T must be T^{2H} for the circulant backend
    let h = HurstIndex::new(0.9).unwrap();
    let grid = Arc::new(TimeGrid::uniform(2.0, 4, 8).unwrap());
    let n = 50_000;
    let t_idx = grid.subgrid().len() - 1;
    let vals: Vec<f64> = generate_paths(&grid, h, n, 8, SamplerBackend::Circulant)
        .unwrap()
        .iter()
        .map(|p| p.value_at_index(t_idx))
        .collect();
    let (m, _) = mean_and_se(&vals);
    let var = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0);
    let target = 2.0f64.powf(1.8);
    // sample variance of a Gaussian: SE ~ var * sqrt(2/n)
    let se = target * (2.0 / n as f64).sqrt();
    assert!(
        (var - target).abs() < 4.0 * se,
        "variance {var:.4} vs {target:.4}"
    );
}

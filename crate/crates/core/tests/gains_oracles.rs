//! Oracle verification of the conditional-gains formulas: the closed call
//! form against quadrature of the defining integrand, and the conditional
//! payoff expectation against plain Monte Carlo.

mod common;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use frachedge_core::gains::{
    call_gain_closed_form, conditional_payoff_expectation, expected_asset_gain,
    expected_option_gain, put_gain_closed_form, StepState,
};
use frachedge_core::quadrature::QuadratureConfig;
use frachedge_core::{HurstIndex, ModelParams, PayoffSpec};

use common::{mean_and_se, tanh_sinh};

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn random_state(rng: &mut StdRng) -> (StepState, f64) {
    let mu = rng.random_range(-0.2..0.2);
    let sigma = rng.random_range(0.05..0.6);
    let s = rng.random_range(20.0..200.0);
    let strike = rng.random_range(20.0..200.0);
    let dt = rng.random_range(0.01..1.0);
    let dbhat = rng.random_range(-0.8..0.8);
    let rhat = rng.random_range(1e-3..1.0);
    let params =
        ModelParams::new(mu, sigma, s, HurstIndex::new(0.75).unwrap(), 0.0).unwrap();
    (
        StepState::new(s, 0.0, dt, dbhat, rhat, params).unwrap(),
        strike,
    )
}

#[test]
fn call_closed_form_matches_quadrature_on_random_sweep() {
    let mut rng = StdRng::seed_from_u64(40);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (state, strike) = random_state(&mut rng);
        let payoff = PayoffSpec::call(strike).unwrap();
        let quad = expected_option_gain(&state, &payoff, &q()).unwrap();
        let closed = call_gain_closed_form(&state, strike).unwrap();
        worst = worst.max((closed - quad.value).abs());
    }
    assert!(worst < 1e-8, "max |closed - quadrature| = {worst:.3e}");
}

#[test]
fn put_closed_form_matches_quadrature_on_random_sweep() {
    let mut rng = StdRng::seed_from_u64(41);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (state, strike) = random_state(&mut rng);
        let payoff = PayoffSpec::put(strike).unwrap();
        let quad = expected_option_gain(&state, &payoff, &q()).unwrap();
        let closed = put_gain_closed_form(&state, strike).unwrap();
        worst = worst.max((closed - quad.value).abs());
    }
    assert!(worst < 1e-8, "max |closed - quadrature| = {worst:.3e}");
}

#[test]
fn asset_gain_matches_independent_quadrature() {
    // the defining integrand of dShat, integrated by a rule family the
    // implementation does not use
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..20 {
        let (state, _) = random_state(&mut rng);
        let a = state.params.mu * state.dt() + state.params.sigma * state.delta_bhat;
        let v = state.params.sigma * state.rhat.sqrt();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let oracle = state.s_now
            * (tanh_sinh(&|z: f64| (a + v * z).exp() * phi(z), -16.0, 16.0, 1e-13) - 1.0);
        let ours = expected_asset_gain(&state);
        assert!(
            (ours - oracle).abs() <= 1e-10 * (1.0 + ours.abs()),
            "{ours} vs {oracle}"
        );
    }
}

#[test]
fn payoff_expectation_from_time_zero_matches_monte_carlo() {
    // u = 0: dBhat = 0 and rhat = t1^{2H}; compare against 10^6-sample
    // plain Monte Carlo of f(S_{t1})
    let h = HurstIndex::new(0.75).unwrap();
    let params = ModelParams::new(0.1, 0.3, 100.0, h, 0.0).unwrap();
    let t1 = 0.25f64;
    let rhat = t1.powf(h.two_h());
    let state = StepState::new(params.spot, 0.0, t1, 0.0, rhat, params).unwrap();
    let payoff = PayoffSpec::call(105.0).unwrap();
    let ours = conditional_payoff_expectation(&state, &payoff, &q()).unwrap();

    let mut rng = StdRng::seed_from_u64(7);
    let n = 1_000_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let s = params.spot * (params.mu * t1 + params.sigma * rhat.sqrt() * z).exp();
            payoff.value(s)
        })
        .collect();
    let (mc_mean, mc_se) = mean_and_se(&samples);
    assert!(
        (ours.value - mc_mean).abs() < 4.0 * mc_se,
        "expectation {:.6} vs MC {:.6} +- {:.2e}",
        ours.value,
        mc_mean,
        mc_se
    );
}

#[test]
fn lognormal_mean_from_time_zero_closed_form() {
    // identity payoff, mu = 0: E[S_{t1}] = S0 exp(sigma^2 t1^{2H} / 2)
    let h = HurstIndex::new(0.75).unwrap();
    let params = ModelParams::new(0.0, 0.3, 100.0, h, 0.0).unwrap();
    let t1 = 0.5f64;
    let rhat = t1.powf(h.two_h());
    let state = StepState::new(params.spot, 0.0, t1, 0.0, rhat, params).unwrap();
    let e = conditional_payoff_expectation(&state, &PayoffSpec::Identity, &q()).unwrap();
    let expected = 100.0 * (0.5 * 0.09 * rhat).exp();
    assert!((e.value - expected).abs() < 1e-7 * expected);
}

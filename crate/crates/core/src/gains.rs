//! One-step conditional gains under the predicted law.
//!
//! Conditioned on the information at t_i, the next-step log increment of the
//! asset is Gaussian: ln(S_{t_{i+1}} / S_{t_i}) ~ N(mu dt + sigma dBhat,
//! sigma^2 rhat), with dBhat and rhat supplied by the prediction law. All
//! one-step expectations are integrals of a payoff against that lognormal
//! conditional law:
//!
//! ```text
//!   dShat = S (E[e^{mu dt + sigma dBhat + sigma sqrt(rhat) Z}] - 1)
//!         = S (e^{mu dt + sigma dBhat + sigma^2 rhat / 2} - 1),
//!   dVhat = E[f(S e^{...Z})] - f(S).
//! ```
//!
//! The closed-form lognormal mean serves the hot path; the quadrature route
//! is kept alongside for cross-checking. For the call payoff the expectation
//! has a Black-Scholes-like closed form whose Phi arguments are re-derived
//! here from the integral itself (the quadrature equivalence test is the
//! authority on the signs):
//!
//! ```text
//!   E[(S e^{a + v Z} - K)^+] = S e^{a + v^2/2} Phi(d+) - K Phi(d-),
//!   d- = (ln(S/K) + a) / v,   d+ = d- + v,
//! ```
//!
//! with a = mu dt + sigma dBhat and v = sigma sqrt(rhat).

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::payoff::PayoffSpec;
use crate::quadrature::{adaptive_gl_with_floor, gauss_hermite_normal, QuadValue, QuadratureConfig};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inputs of one rebalancing step: current asset level, step times, and the
/// conditional-law summary (dBhat, rhat) for the step.
#[derive(Debug, Clone, Copy)]
pub struct StepState {
    pub s_now: f64,
    pub t_now: f64,
    pub t_next: f64,
    pub delta_bhat: f64,
    pub rhat: f64,
    pub params: ModelParams,
}

impl StepState {
    pub fn new(
        s_now: f64,
        t_now: f64,
        t_next: f64,
        delta_bhat: f64,
        rhat: f64,
        params: ModelParams,
    ) -> Result<Self> {
        if !(s_now > 0.0) {
            return Err(Error::InvalidParameter {
                name: "s_now",
                value: s_now,
                constraint: "s_now > 0",
            });
        }
        if !(t_next > t_now) {
            return Err(Error::InvalidParameter {
                name: "t_next",
                value: t_next,
                constraint: "t_next > t_now",
            });
        }
        if !(rhat >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rhat",
                value: rhat,
                constraint: "rhat >= 0",
            });
        }
        Ok(Self {
            s_now,
            t_now,
            t_next,
            delta_bhat,
            rhat,
            params,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t_next - self.t_now
    }

    /// Conditional log-drift a = mu dt + sigma dBhat.
    fn log_drift(&self) -> f64 {
        self.params.mu * self.dt() + self.params.sigma * self.delta_bhat
    }

    /// Conditional log-volatility v = sigma sqrt(rhat).
    fn log_vol(&self) -> f64 {
        self.params.sigma * self.rhat.sqrt()
    }
}

/// Expected asset gain dShat over the step (closed-form lognormal mean).
pub fn expected_asset_gain(state: &StepState) -> f64 {
    let v = state.log_vol();
    state.s_now * ((state.log_drift() + 0.5 * v * v).exp() - 1.0)
}

/// Quadrature route for dShat, kept for cross-checking the closed form.
pub fn expected_asset_gain_quadrature(state: &StepState, order: usize) -> f64 {
    let a = state.log_drift();
    let v = state.log_vol();
    let rule = gauss_hermite_normal(order.max(8));
    let mean: f64 = rule
        .0
        .iter()
        .zip(rule.1.iter())
        .map(|(z, w)| w * (a + v * z).exp())
        .sum();
    state.s_now * (mean - 1.0)
}

/// E[g(Z)] for g(z) = payoff(s e^{a + v z}), splitting the integration range
/// at the payoff kink so each segment is smooth times the Gaussian density.
///
/// Vanilla payoffs are evaluated in the log domain,
/// s e^x - K = K expm1(x - ln(K/s)), which stays fully accurate when the
/// conditional variance is many orders below the asset scale.
fn lognormal_payoff_expectation(
    s: f64,
    a: f64,
    v: f64,
    payoff: &PayoffSpec,
    q: &QuadratureConfig,
) -> Result<QuadValue> {
    if v == 0.0 {
        return Ok(QuadValue {
            value: payoff.value(s * a.exp()),
            error_estimate: 0.0,
        });
    }
    let integrand: Box<dyn Fn(f64) -> f64> = match payoff {
        PayoffSpec::Call { strike } => {
            let x0 = (strike / s).ln();
            let k = *strike;
            Box::new(move |z: f64| {
                let x = a + v * z - x0;
                if x > 0.0 {
                    k * x.exp_m1() * normal_pdf(z)
                } else {
                    0.0
                }
            })
        }
        PayoffSpec::Put { strike } => {
            let x0 = (strike / s).ln();
            let k = *strike;
            Box::new(move |z: f64| {
                let x = a + v * z - x0;
                if x < 0.0 {
                    -k * x.exp_m1() * normal_pdf(z)
                } else {
                    0.0
                }
            })
        }
        _ => Box::new(move |z: f64| payoff.value(s * (a + v * z).exp()) * normal_pdf(z)),
    };
    // beyond |z| = limit the Gaussian tail of payoff * phi is below 1e-30
    // relative for vanilla payoffs with growth at most e^{v z}
    let limit = 14.0 + v;
    let mut cuts = vec![-limit, limit];
    if let Some(k) = payoff.kink() {
        let z0 = ((k / s).ln() - a) / v;
        if z0 > -limit && z0 < limit {
            cuts.insert(1, z0);
        }
    }
    // payoff expectations can sit many orders below the asset level; anchor
    // the convergence test at the conditional asset scale
    let scale_floor = s * (a + 0.5 * v * v).exp();
    let mut value = 0.0;
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let seg = adaptive_gl_with_floor(&integrand, w[0], w[1], q.tolerance, scale_floor)?;
        value += seg.value;
        err += seg.error_estimate;
    }
    Ok(QuadValue {
        value,
        error_estimate: err,
    })
}

/// Expected frictionless option-value gain dVhat over the step, by
/// Gaussian-weight quadrature of the payoff against the conditional law.
pub fn expected_option_gain(
    state: &StepState,
    payoff: &PayoffSpec,
    q: &QuadratureConfig,
) -> Result<QuadValue> {
    let e = lognormal_payoff_expectation(
        state.s_now,
        state.log_drift(),
        state.log_vol(),
        payoff,
        q,
    )?;
    Ok(QuadValue {
        value: e.value - payoff.value(state.s_now),
        error_estimate: e.error_estimate,
    })
}

/// Conditional expectation of the payoff at the next step,
/// Vhat = E[f(S_next) | info now] = f(S_now) + dVhat.
pub fn conditional_payoff_expectation(
    state: &StepState,
    payoff: &PayoffSpec,
    q: &QuadratureConfig,
) -> Result<QuadValue> {
    let gain = expected_option_gain(state, payoff, q)?;
    Ok(QuadValue {
        value: payoff.value(state.s_now) + gain.value,
        error_estimate: gain.error_estimate,
    })
}

/// Closed-form conditional call expectation E[(S e^{a + v Z} - K)^+].
fn call_expectation_closed(s: f64, a: f64, v: f64, strike: f64) -> f64 {
    if v == 0.0 {
        return (s * a.exp() - strike).max(0.0);
    }
    let xhat = a + 0.5 * v * v;
    let d_minus = ((s / strike).ln() + a) / v;
    let d_plus = d_minus + v;
    s * xhat.exp() * normal_cdf(d_plus) - strike * normal_cdf(d_minus)
}

/// Closed-form call gain dVhat_call = E[(S e^{...} - K)^+] - (S - K)^+.
pub fn call_gain_closed_form(state: &StepState, strike: f64) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(Error::InvalidParameter {
            name: "strike",
            value: strike,
            constraint: "strike > 0",
        });
    }
    let e = call_expectation_closed(state.s_now, state.log_drift(), state.log_vol(), strike);
    Ok(e - (state.s_now - strike).max(0.0))
}

/// Closed-form put gain via conditional put-call parity:
/// put expectation = call expectation - (Shat_next - K).
pub fn put_gain_closed_form(state: &StepState, strike: f64) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(Error::InvalidParameter {
            name: "strike",
            value: strike,
            constraint: "strike > 0",
        });
    }
    let s = state.s_now;
    let call_e = call_expectation_closed(s, state.log_drift(), state.log_vol(), strike);
    let shat_next = s + expected_asset_gain(state);
    let put_e = call_e - shat_next + strike;
    Ok(put_e - (strike - s).max(0.0))
}

/// dVhat for the hedge hot path: closed forms where they exist, quadrature
/// otherwise. Closed forms and quadrature agree to quadrature tolerance; the
/// equivalence is enforced by the verification suite.
pub fn expected_option_gain_fast(
    state: &StepState,
    payoff: &PayoffSpec,
    q: &QuadratureConfig,
) -> Result<f64> {
    match payoff {
        PayoffSpec::Call { strike } => call_gain_closed_form(state, *strike),
        PayoffSpec::Put { strike } => put_gain_closed_form(state, *strike),
        PayoffSpec::Identity => Ok(expected_asset_gain(state)),
        PayoffSpec::Custom(_) => Ok(expected_option_gain(state, payoff, q)?.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::HurstIndex;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn params(mu: f64, sigma: f64) -> ModelParams {
        ModelParams::new(mu, sigma, 100.0, HurstIndex::new(0.75).unwrap(), 0.0).unwrap()
    }

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn asset_gain_drift_only() {
        // sigma cannot be zero by construction; rhat = 0 and dBhat = 0 leave
        // only the drift term
        let p = params(0.05, 0.2);
        let st = StepState::new(100.0, 0.0, 0.5, 0.0, 0.0, p).unwrap();
        assert_relative_eq!(
            expected_asset_gain(&st),
            100.0 * ((0.05f64 * 0.5).exp() - 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn asset_gain_brownian_case() {
        // H = 1/2 with mu = 0: dBhat = 0, rhat = dt
        let p = ModelParams::new(0.0, 0.3, 100.0, HurstIndex::brownian(), 0.0).unwrap();
        let dt = 0.25;
        let st = StepState::new(100.0, 0.0, dt, 0.0, dt, p).unwrap();
        assert_relative_eq!(
            expected_asset_gain(&st),
            100.0 * ((0.5 * 0.3f64 * 0.3 * dt).exp() - 1.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn closed_form_matches_quadrature_route() {
        let p = params(0.1, 0.35);
        let st = StepState::new(80.0, 0.2, 0.7, 0.15, 0.4, p).unwrap();
        let closed = expected_asset_gain(&st);
        let quad = expected_asset_gain_quadrature(&st, 64);
        assert_relative_eq!(closed, quad, epsilon = 1e-10);
    }

    #[test]
    fn option_gain_identity_equals_asset_gain() {
        let p = params(0.05, 0.25);
        let st = StepState::new(120.0, 0.0, 0.5, -0.1, 0.3, p).unwrap();
        let og = expected_option_gain(&st, &PayoffSpec::Identity, &q()).unwrap();
        assert_relative_eq!(og.value, expected_asset_gain(&st), epsilon = 1e-9);
    }

    #[test]
    fn option_gain_constant_payoff_is_zero() {
        struct Constant(f64);
        impl crate::payoff::PayoffFn for Constant {
            fn value(&self, _s: f64) -> f64 {
                self.0
            }
            fn left_derivative(&self, _s: f64) -> f64 {
                0.0
            }
        }
        let p = params(0.05, 0.25);
        let st = StepState::new(120.0, 0.0, 0.5, -0.1, 0.3, p).unwrap();
        let payoff = PayoffSpec::Custom(Arc::new(Constant(4.2)));
        let og = expected_option_gain(&st, &payoff, &q()).unwrap();
        assert_relative_eq!(og.value, 0.0, epsilon = 1e-10);
        let ce = conditional_payoff_expectation(&st, &payoff, &q()).unwrap();
        assert_relative_eq!(ce.value, 4.2, epsilon = 1e-10);
    }

    #[test]
    fn call_gain_zero_strike_limit_is_asset_gain() {
        let p = params(0.05, 0.25);
        let st = StepState::new(100.0, 0.0, 0.5, 0.1, 0.4, p).unwrap();
        let g = call_gain_closed_form(&st, 1e-9).unwrap();
        // K -> 0: both Phi terms -> 1 and the strike itself is negligible
        assert_relative_eq!(g, expected_asset_gain(&st), epsilon = 1e-8);
    }

    #[test]
    fn call_gain_deep_out_of_the_money_vanishes() {
        let p = params(0.0, 0.2);
        let st = StepState::new(100.0, 0.0, 0.1, 0.0, 0.05, p).unwrap();
        let g = call_gain_closed_form(&st, 1e9).unwrap();
        assert!(g.abs() < 1e-12, "gain {g}");
    }

    #[test]
    fn call_gain_degenerate_variance_is_pointwise() {
        let p = params(0.05, 0.25);
        let st = StepState::new(100.0, 0.0, 0.5, 0.1, 0.0, p).unwrap();
        let s_next = 100.0 * (0.05f64 * 0.5 + 0.25 * 0.1).exp();
        let g = call_gain_closed_form(&st, 90.0).unwrap();
        assert_relative_eq!(g, (s_next - 90.0).max(0.0) - 10.0, epsilon = 1e-12);
    }

    #[test]
    fn call_gain_monotone_in_strike() {
        let p = params(0.05, 0.3);
        let st = StepState::new(100.0, 0.0, 0.5, 0.05, 0.3, p).unwrap();
        let mut prev = f64::INFINITY;
        for i in 1..40 {
            let k = 5.0 * i as f64;
            let g = call_gain_closed_form(&st, k).unwrap();
            let e_call = g + (100.0 - k).max(0.0);
            assert!(e_call <= prev + 1e-12);
            prev = e_call;
        }
    }

    #[test]
    fn put_call_parity_at_conditional_level() {
        let p = params(0.08, 0.3);
        let st = StepState::new(95.0, 0.1, 0.6, -0.05, 0.35, p).unwrap();
        for &k in &[60.0, 95.0, 140.0] {
            let call_e =
                call_gain_closed_form(&st, k).unwrap() + (95.0f64 - k).max(0.0);
            let put_e = put_gain_closed_form(&st, k).unwrap() + (k - 95.0f64).max(0.0);
            let shat = 95.0 + expected_asset_gain(&st);
            assert_relative_eq!(call_e - put_e, shat - k, epsilon = 1e-9);
        }
    }

    #[test]
    fn jensen_direction_for_convex_payoffs() {
        let p = params(0.03, 0.4);
        let st = StepState::new(100.0, 0.0, 0.5, 0.1, 0.5, p).unwrap();
        let shat_next = 100.0 + expected_asset_gain(&st);
        for &k in &[70.0, 100.0, 130.0] {
            let e_call = call_gain_closed_form(&st, k).unwrap() + (100.0f64 - k).max(0.0);
            assert!(e_call >= (shat_next - k).max(0.0) - 1e-10);
        }
    }
}

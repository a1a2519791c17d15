//! The minimal-cost initial position command.

use anyhow::Result;

use frachedge_core::gains::{conditional_payoff_expectation, expected_asset_gain, StepState};
use frachedge_core::Error;

use crate::config::ExperimentConfig;
use crate::report::{
    CommandResults, Diagnostics, InitialPositionResults, Report, SCHEMA_VERSION,
};

/// Boundary determination for the minimal-cost inception: position 0 with
/// all wealth riskless when the cost rate covers the expected first-interval
/// return, otherwise the minimization is unbounded.
pub fn initial_position(cfg: &ExperimentConfig) -> Result<Report> {
    let grid = cfg.time_grid()?;
    let params = cfg.params()?;
    let payoff = cfg.payoff_spec()?;
    let q = cfg.quadrature_config()?;

    let t1 = grid.trading_times()[1];
    let rhat = t1.powf(params.hurst.two_h());
    let state = StepState::new(params.spot, 0.0, t1, 0.0, rhat, params)?;
    let delta_shat = expected_asset_gain(&state);
    let expected_return = delta_shat.abs() / params.spot;

    let results = match frachedge_core::minimal_initial_position(&params, &grid, &payoff, &q) {
        Ok((riskless, position)) => InitialPositionResults {
            delta_shat,
            expected_return,
            cost: params.cost,
            bounded: true,
            riskless: Some(riskless),
            position: Some(position),
        },
        Err(Error::Unbounded { .. }) => InitialPositionResults {
            delta_shat,
            expected_return,
            cost: params.cost,
            bounded: false,
            riskless: None,
            position: None,
        },
        Err(e) => return Err(e.into()),
    };
    let quad_err = conditional_payoff_expectation(&state, &payoff, &q)
        .map(|v| v.error_estimate)
        .unwrap_or(f64::NAN);

    Ok(Report {
        config_echo: cfg.clone(),
        results: CommandResults::Initial(results),
        diagnostics: Diagnostics {
            schema_version: SCHEMA_VERSION,
            command: "initial-position".into(),
            seed: cfg.run.seed,
            max_quadrature_error: quad_err,
            engine_errors: vec![],
        },
    })
}

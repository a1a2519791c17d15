//! Seeded Monte Carlo ensemble runner.

use anyhow::Result;
use rayon::prelude::*;

use frachedge_core::fbm::{asset_path, substream_rng, PathSampler};
use frachedge_core::hedge::run_hedge;
use frachedge_core::prediction::KernelCache;

use crate::config::ExperimentConfig;
use crate::report::{
    mean_std, CommandResults, Diagnostics, EnsembleSummary, HedgeResults, PathRow, Report,
    StepRow, StepSummaryRow, SCHEMA_VERSION,
};

/// Run the configured ensemble: generate n_paths fBm/asset paths, hedge each
/// one, and aggregate. Output is deterministic in (config, seed): path i
/// always consumes RNG stream i and rows are ordered by path index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let grid = cfg.time_grid()?;
    let params = cfg.params()?;
    let payoff = cfg.payoff_spec()?;
    let q = cfg.quadrature_config()?;
    let opts = cfg.hedge_options()?;
    let hurst = cfg.hurst()?;
    let backend = cfg.backend()?;

    let cache = KernelCache::new(grid.clone(), hurst, q);
    cache.warm_trading_steps()?;
    let sampler = PathSampler::new(grid.clone(), hurst, backend)?;

    let n = cfg.run.n_paths;
    let runs: Vec<(usize, frachedge_core::Result<frachedge_core::HedgeRun>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream_rng(cfg.run.seed, i as u64);
            let fbm = sampler.sample(&mut rng);
            let asset = asset_path(&fbm, &params);
            (i, run_hedge(&fbm, &asset, &payoff, &params, &cache, &opts))
        })
        .collect();

    let trading = grid.trading_times().to_vec();
    let n_steps = grid.n_intervals();

    let mut per_path = Vec::with_capacity(n);
    let mut per_step = Vec::with_capacity(n * (n_steps + 1));
    let mut engine_errors = Vec::new();
    let mut terminal_errors = Vec::new();
    let mut cum_costs = Vec::new();

    let mut gaps_by_step = vec![Vec::with_capacity(n); n_steps + 1];
    let mut positions_by_step = vec![Vec::with_capacity(n); n_steps];
    let mut costs_by_step = vec![Vec::with_capacity(n); n_steps + 1];

    for (i, outcome) in &runs {
        match outcome {
            Ok(run) => {
                per_path.push(PathRow {
                    path: *i,
                    terminal_value: *run.ledger.value.last().unwrap(),
                    frictionless_terminal: *run.frictionless.last().unwrap(),
                    terminal_error: run.terminal_error,
                    cum_cost: *run.ledger.cum_cost.last().unwrap(),
                    n_hold_violations: run.hold_violations.len(),
                });
                terminal_errors.push(run.terminal_error);
                cum_costs.push(*run.ledger.cum_cost.last().unwrap());
                for step in 0..=n_steps {
                    per_step.push(StepRow {
                        path: *i,
                        step,
                        time: trading[step],
                        position: if step < n_steps {
                            run.ledger.positions[step]
                        } else {
                            run.ledger.positions[n_steps - 1]
                        },
                        trade: if step < n_steps {
                            run.ledger.trades[step]
                        } else {
                            0.0
                        },
                        step_cost: if step < n_steps {
                            run.ledger.cum_cost[step]
                                - if step == 0 {
                                    0.0
                                } else {
                                    run.ledger.cum_cost[step - 1]
                                }
                        } else {
                            0.0
                        },
                        value: run.ledger.value[step],
                        frictionless: run.frictionless[step],
                        tracking_gap: run.tracking_gap[step],
                    });
                    gaps_by_step[step].push(run.tracking_gap[step]);
                    costs_by_step[step].push(run.ledger.cum_cost[step]);
                    if step < n_steps {
                        positions_by_step[step].push(run.ledger.positions[step]);
                    }
                }
            }
            Err(e) => engine_errors.push(format!("path {i}: {e}")),
        }
    }

    let step_summary: Vec<StepSummaryRow> = (0..=n_steps)
        .map(|step| {
            let (mean_gap, std_gap) = mean_std(&gaps_by_step[step]);
            let (mean_cost, _) = mean_std(&costs_by_step[step]);
            let mean_pos = if step < n_steps {
                mean_std(&positions_by_step[step]).0
            } else {
                0.0
            };
            StepSummaryRow {
                step,
                time: trading[step],
                mean_tracking_gap: mean_gap,
                std_tracking_gap: std_gap,
                mean_position: mean_pos,
                mean_cum_cost: mean_cost,
            }
        })
        .collect();

    let (mean_te, std_te) = mean_std(&terminal_errors);
    let max_abs_te = terminal_errors
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    let (mean_cc, _) = mean_std(&cum_costs);
    let n_failed = engine_errors.len();

    let max_quad_error = (0..n_steps)
        .map(|i| {
            cache
                .step(
                    grid.trading_subgrid_index(i),
                    grid.trading_subgrid_index(i + 1),
                )
                .map(|k| k.quad_error)
                .unwrap_or(f64::NAN)
        })
        .fold(0.0f64, f64::max);

    Ok(Report {
        config_echo: cfg.clone(),
        results: CommandResults::Hedge(HedgeResults {
            per_path,
            per_step,
            step_summary,
            summary: EnsembleSummary {
                n_paths: n,
                n_failed_paths: n_failed,
                mean_terminal_error: mean_te,
                std_terminal_error: std_te,
                max_abs_terminal_error: max_abs_te,
                mean_cum_cost: mean_cc,
            },
        }),
        diagnostics: Diagnostics {
            schema_version: SCHEMA_VERSION,
            command: "hedge".into(),
            seed: cfg.run.seed,
            max_quadrature_error: max_quad_error,
            engine_errors,
        },
    })
}

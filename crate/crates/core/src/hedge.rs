//! Portfolio accounting under proportional costs and the recursive
//! conditional-mean hedging strategy.
//!
//! The discrete strategy holds pi_i over (t_i, t_{i+1}]; trading at t_i is
//! charged k S_{t_i} |pi_i - pi_{i-1}| against the step to t_{i+1}:
//!
//! ```text
//!   V_{i+1} = V_i + pi_i (S_{i+1} - S_i) - k S_i |pi_i - pi_{i-1}|.
//! ```
//!
//! The conditional-mean requirement (portfolio tracks the frictionless value
//! f(S) in conditional expectation at every trading time) pins each position
//! through the implicit piecewise-linear equation
//!
//! ```text
//!   pi * dShat = dVhat + (f(S_i) - V_i) + k S_i |pi - prev|,
//! ```
//!
//! which is solved exactly by two-branch case analysis rather than by
//! fixed-point iteration.

use crate::error::{Error, Result};
use crate::fbm::{AssetPath, FbmPath};
use crate::gains::{
    conditional_payoff_expectation, expected_asset_gain, expected_option_gain_fast, StepState,
};
use crate::params::ModelParams;
use crate::payoff::PayoffSpec;
use crate::prediction::KernelCache;

/// Which branch of the piecewise-linear position equation produced the
/// returned position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeBranch {
    /// pi >= prev (buying or holding).
    Buy,
    /// pi < prev (selling).
    Sell,
}

/// Diagnostics of one position solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveDiagnostics {
    pub branch: TradeBranch,
    pub buy_candidate: f64,
    pub buy_valid: bool,
    pub sell_candidate: f64,
    pub sell_valid: bool,
}

/// Solve pi * D = A + c |pi - p| for the position pi.
///
/// `gain_floor` is the degeneracy threshold on |D|: the expected asset gain
/// divides the target, so a near-zero gain makes the hedge ill-posed.
///
/// Branch "buy" (pi >= p): pi = (A - c p) / (D - c).
/// Branch "sell" (pi < p): pi = (A + c p) / (D + c).
/// If both branches validate, the solution with the smaller trade |pi - p|
/// is returned (minimal transaction cost). If neither does, the cost
/// dominates the expected gain and the step is infeasible.
pub fn solve_position(
    target_gain: f64,
    asset_gain: f64,
    unit_cost: f64,
    prev_position: f64,
    gain_floor: f64,
) -> Result<(f64, SolveDiagnostics)> {
    let (a, d, c, p) = (target_gain, asset_gain, unit_cost, prev_position);
    if !(c >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "unit_cost",
            value: c,
            constraint: "unit_cost >= 0",
        });
    }
    if d.abs() < gain_floor || d == 0.0 {
        return Err(Error::DegenerateGain {
            gain: d,
            floor: gain_floor,
        });
    }
    if c == 0.0 {
        let pi = a / d;
        let branch = if pi >= p {
            TradeBranch::Buy
        } else {
            TradeBranch::Sell
        };
        return Ok((
            pi,
            SolveDiagnostics {
                branch,
                buy_candidate: pi,
                buy_valid: pi >= p,
                sell_candidate: pi,
                sell_valid: pi < p,
            },
        ));
    }

    let buy_candidate = (a - c * p) / (d - c);
    let buy_valid = d != c && buy_candidate.is_finite() && buy_candidate >= p;
    let sell_candidate = (a + c * p) / (d + c);
    let sell_valid = d != -c && sell_candidate.is_finite() && sell_candidate < p;

    let diag = |branch| SolveDiagnostics {
        branch,
        buy_candidate,
        buy_valid,
        sell_candidate,
        sell_valid,
    };
    match (buy_valid, sell_valid) {
        (true, false) => Ok((buy_candidate, diag(TradeBranch::Buy))),
        (false, true) => Ok((sell_candidate, diag(TradeBranch::Sell))),
        (true, true) => {
            if (buy_candidate - p).abs() <= (sell_candidate - p).abs() {
                Ok((buy_candidate, diag(TradeBranch::Buy)))
            } else {
                Ok((sell_candidate, diag(TradeBranch::Sell)))
            }
        }
        (false, false) => Err(Error::NoSolution {
            asset_gain: d,
            unit_cost: c,
            buy_candidate,
            sell_candidate,
        }),
    }
}

/// How the initial (riskless, risky) pair is fixed; the conditional-mean
/// criterion alone does not pin it down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InceptionRule {
    /// Start from the frictionless price: pi_0 = dVhat / dShat and initial
    /// wealth f(S_0) plus the cost of establishing pi_0, so the tracking
    /// requirement holds exactly at the first step.
    Frictionless,
    /// The minimal-cost inception: everything in the riskless asset. Only
    /// bounded when the cost rate dominates the expected return.
    MinimalCost,
    /// Caller-specified riskless balance and position.
    Explicit { riskless: f64, position: f64 },
}

/// Behavior when no position satisfies the step equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoSolutionPolicy {
    /// Abort the run (default): a silent violation would corrupt
    /// conditional-mean statistics.
    FailFast,
    /// Hold the previous position, record the violation, continue.
    Hold,
}

/// Per-trading-time accounting of a hedge run.
#[derive(Debug, Clone)]
pub struct HedgeLedger {
    /// Position pi_i held over (t_i, t_{i+1}], for i = 0..N-1.
    pub positions: Vec<f64>,
    /// Trades dpi_i = pi_i - pi_{i-1} (pi_{-1} = 0).
    pub trades: Vec<f64>,
    /// Riskless balance after trading at t_i.
    pub riskless: Vec<f64>,
    /// Pre-trade portfolio value V_{t_i}, for i = 0..N.
    pub value: Vec<f64>,
    /// Cumulative transaction costs charged through t_i.
    pub cum_cost: Vec<f64>,
}

/// A complete hedge run along one realized path.
#[derive(Debug, Clone)]
pub struct HedgeRun {
    pub ledger: HedgeLedger,
    /// Frictionless value f(S_{t_i}) at each trading time.
    pub frictionless: Vec<f64>,
    /// Tracking gap f(S_{t_i}) - V_{t_i} at each trading time.
    pub tracking_gap: Vec<f64>,
    /// V_T - f(S_T).
    pub terminal_error: f64,
    /// Steps where the position equation had no solution and the previous
    /// position was held (only under `NoSolutionPolicy::Hold`).
    pub hold_violations: Vec<usize>,
}

/// Options of a hedge run.
#[derive(Debug, Clone, Copy)]
pub struct HedgeOptions {
    pub inception: InceptionRule,
    pub on_no_solution: NoSolutionPolicy,
    /// Relative degeneracy floor: |dShat| must exceed this times S_{t_i}.
    pub gain_floor_rel: f64,
}

impl Default for HedgeOptions {
    fn default() -> Self {
        Self {
            inception: InceptionRule::Frictionless,
            on_no_solution: NoSolutionPolicy::FailFast,
            gain_floor_rel: 1e-12,
        }
    }
}

/// Run the recursive conditional-mean hedge along one realized path.
///
/// Prediction inputs (dBhat, rhat) per step come from the fBm path prefix
/// through the kernel cache, whose grid must be the paths' grid.
pub fn run_hedge(
    fbm: &FbmPath,
    asset: &AssetPath,
    payoff: &PayoffSpec,
    params: &ModelParams,
    cache: &KernelCache,
    opts: &HedgeOptions,
) -> Result<HedgeRun> {
    let grid = cache.grid();
    if grid.subgrid().len() != fbm.values().len() || grid.subgrid().len() != asset.values().len() {
        return Err(Error::Grid("paths do not match the cache grid".into()));
    }
    let n = grid.n_intervals();
    let trading = grid.trading_times();
    let q = *cache.quadrature();

    let mut positions = Vec::with_capacity(n);
    let mut trades = Vec::with_capacity(n);
    let mut riskless = Vec::with_capacity(n);
    let mut value = Vec::with_capacity(n + 1);
    let mut cum_cost = Vec::with_capacity(n + 1);
    let mut hold_violations = Vec::new();

    let s_at = |i: usize| asset.value_at_index(grid.trading_subgrid_index(i));
    let k = params.cost;

    let mut prev_position = 0.0;
    for i in 0..n {
        let u_idx = grid.trading_subgrid_index(i);
        let t_idx = grid.trading_subgrid_index(i + 1);
        let kernel = cache.step(u_idx, t_idx)?;
        let s_i = s_at(i);
        let state = StepState::new(
            s_i,
            trading[i],
            trading[i + 1],
            kernel.delta_bhat(fbm),
            kernel.rhat,
            *params,
        )
        .map_err(|e| Error::HedgeStep {
            step: i,
            source: Box::new(e),
        })?;
        let dshat = expected_asset_gain(&state);
        let dvhat = expected_option_gain_fast(&state, payoff, &q).map_err(|e| Error::HedgeStep {
            step: i,
            source: Box::new(e),
        })?;
        let gain_floor = opts.gain_floor_rel * s_i;

        let position = if i == 0 {
            // establish V_0 and pi_0 per the inception rule
            match opts.inception {
                InceptionRule::Frictionless => {
                    // wealth f(S_0) plus the cost of the opening trade; the
                    // endowed cost cancels against the cost term of the
                    // position equation, leaving pi_0 = dVhat / dShat
                    if dshat.abs() < gain_floor || dshat == 0.0 {
                        return Err(Error::HedgeStep {
                            step: 0,
                            source: Box::new(Error::DegenerateGain {
                                gain: dshat,
                                floor: gain_floor,
                            }),
                        });
                    }
                    let pi0 = dvhat / dshat;
                    value.push(payoff.value(s_i) + k * s_i * pi0.abs());
                    pi0
                }
                InceptionRule::MinimalCost => {
                    let expected_return = dshat.abs() / s_i;
                    if k < expected_return {
                        return Err(Error::Unbounded {
                            cost: k,
                            expected_return,
                        });
                    }
                    let vhat =
                        conditional_payoff_expectation(&state, payoff, &q).map_err(|e| {
                            Error::HedgeStep {
                                step: 0,
                                source: Box::new(e),
                            }
                        })?;
                    value.push(vhat.value);
                    0.0
                }
                InceptionRule::Explicit { riskless, position } => {
                    value.push(riskless + position * s_i + k * s_i * position.abs());
                    position
                }
            }
        } else {
            let target = dvhat + (payoff.value(s_i) - value[i]);
            match solve_position(target, dshat, k * s_i, prev_position, gain_floor) {
                Ok((pi, _diag)) => pi,
                Err(err @ Error::NoSolution { .. }) => match opts.on_no_solution {
                    NoSolutionPolicy::FailFast => {
                        return Err(Error::HedgeStep {
                            step: i,
                            source: Box::new(err),
                        })
                    }
                    NoSolutionPolicy::Hold => {
                        hold_violations.push(i);
                        prev_position
                    }
                },
                Err(e) => {
                    return Err(Error::HedgeStep {
                        step: i,
                        source: Box::new(e),
                    })
                }
            }
        };

        let trade = position - prev_position;
        let step_cost = k * s_i * trade.abs();
        positions.push(position);
        trades.push(trade);
        riskless.push(value[i] - step_cost - position * s_i);
        cum_cost.push(if i == 0 {
            step_cost
        } else {
            cum_cost[i - 1] + step_cost
        });

        let s_next = s_at(i + 1);
        value.push(value[i] + position * (s_next - s_i) - step_cost);
        prev_position = position;
    }
    cum_cost.push(cum_cost[n - 1]);

    let frictionless: Vec<f64> = (0..=n).map(|i| payoff.value(s_at(i))).collect();
    let tracking_gap: Vec<f64> = frictionless
        .iter()
        .zip(value.iter())
        .map(|(f, v)| f - v)
        .collect();
    let terminal_error = value[n] - frictionless[n];

    Ok(HedgeRun {
        ledger: HedgeLedger {
            positions,
            trades,
            riskless,
            value,
            cum_cost,
        },
        frictionless,
        tracking_gap,
        terminal_error,
        hold_violations,
    })
}

/// The minimal-cost initial pair (riskless, position).
///
/// The initial-wealth function is piecewise linear in the position, so a
/// finite minimum exists iff the cost rate dominates the expected return
/// over the first interval, k >= |dShat_{t_1}(0)| / S_0; the minimum then
/// puts all wealth in the riskless asset. The riskless balance is the
/// conditional payoff expectation at t_1, which keeps the tracking
/// requirement satisfied at the first step.
pub fn minimal_initial_position(
    params: &ModelParams,
    grid: &crate::grid::TimeGrid,
    payoff: &PayoffSpec,
    q: &crate::quadrature::QuadratureConfig,
) -> Result<(f64, f64)> {
    let t1 = grid.trading_times()[1];
    let rhat = t1.powf(params.hurst.two_h());
    let state = StepState::new(params.spot, 0.0, t1, 0.0, rhat, *params)?;
    let dshat = expected_asset_gain(&state);
    let expected_return = dshat.abs() / params.spot;
    if params.cost < expected_return {
        return Err(Error::Unbounded {
            cost: params.cost,
            expected_return,
        });
    }
    let vhat = conditional_payoff_expectation(&state, payoff, q)?;
    Ok((vhat.value, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{asset_path, generate_paths, SamplerBackend};
    use crate::grid::TimeGrid;
    use crate::params::HurstIndex;
    use crate::quadrature::QuadratureConfig;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn solve_position_without_costs_is_explicit() {
        let (pi, d) = solve_position(3.0, 1.5, 0.0, 0.7, 0.0).unwrap();
        assert_relative_eq!(pi, 2.0);
        assert_eq!(d.branch, TradeBranch::Buy);
    }

    #[test]
    fn solve_position_zero_trade_consistency() {
        // A = D p: holding the previous position is the exact solution
        let (pi, _) = solve_position(1.5 * 0.7, 1.5, 0.2, 0.7, 0.0).unwrap();
        assert_relative_eq!(pi, 0.7, epsilon = 1e-14);
    }

    #[test]
    fn solve_position_worked_example() {
        // buy branch 2/0.9, sell branch 2/1.1 >= p invalid
        let (pi, d) = solve_position(2.0, 1.0, 0.1, 0.0, 0.0).unwrap();
        assert_relative_eq!(pi, 2.0 / 0.9, epsilon = 1e-14);
        assert_eq!(d.branch, TradeBranch::Buy);
        assert!(d.buy_valid && !d.sell_valid);
        // substitution check: pi D = A + c |pi - p|
        assert!((pi * 1.0 - 2.0 - 0.1 * pi.abs()).abs() < 1e-12);
    }

    #[test]
    fn solve_position_degenerate_gain() {
        let err = solve_position(1.0, 1e-15, 0.0, 0.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::DegenerateGain { .. }));
    }

    #[test]
    fn solve_position_infeasible_when_cost_dominates() {
        // |D| <= c and A > p D leaves no solution
        let err = solve_position(1.0, 0.05, 0.2, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::NoSolution { .. }));
    }

    #[test]
    fn solve_position_min_trade_tiebreak() {
        // |D| < c with A < p D: both branches validate; the smaller trade wins
        let (a, d_gain, c, p) = (-1.0, 0.05, 1.0, 0.0);
        let (pi, d) = solve_position(a, d_gain, c, p, 0.0).unwrap();
        assert!(d.buy_valid && d.sell_valid);
        assert_eq!(d.branch, TradeBranch::Sell);
        assert!((pi - d.sell_candidate).abs() < 1e-15);
        assert!((pi - p).abs() <= (d.buy_candidate - p).abs());
        assert!((pi * d_gain - a - c * (pi - p).abs()).abs() < 1e-12);
    }

    fn setup(
        hurst: HurstIndex,
        cost: f64,
        n_intervals: usize,
    ) -> (Arc<TimeGrid>, ModelParams, KernelCache, FbmPath, AssetPath) {
        // drift well above the cost band so every step stays feasible
        let grid = Arc::new(TimeGrid::uniform(1.0, n_intervals, 16).unwrap());
        let params = ModelParams::new(0.3, 0.2, 100.0, hurst, cost).unwrap();
        let paths = generate_paths(&grid, hurst, 1, 42, SamplerBackend::Cholesky).unwrap();
        let fbm = paths.into_iter().next().unwrap();
        let asset = asset_path(&fbm, &params);
        let cache = KernelCache::new(grid.clone(), hurst, QuadratureConfig::default());
        (grid, params, cache, fbm, asset)
    }

    #[test]
    fn identity_payoff_without_costs_replicates_exactly() {
        let (_, params, cache, fbm, asset) = setup(h(0.75), 0.0, 4);
        let run = run_hedge(
            &fbm,
            &asset,
            &PayoffSpec::Identity,
            &params,
            &cache,
            &HedgeOptions::default(),
        )
        .unwrap();
        for &pi in &run.ledger.positions {
            assert_relative_eq!(pi, 1.0, epsilon = 1e-10);
        }
        assert!(run.terminal_error.abs() < 1e-9);
        for g in &run.tracking_gap {
            assert!(g.abs() < 1e-9);
        }
        assert_eq!(*run.ledger.cum_cost.last().unwrap(), 0.0);
    }

    #[test]
    fn constant_payoff_without_costs_stays_riskless() {
        struct Constant(f64);
        impl crate::payoff::PayoffFn for Constant {
            fn value(&self, _s: f64) -> f64 {
                self.0
            }
            fn left_derivative(&self, _s: f64) -> f64 {
                0.0
            }
        }
        let (_, params, cache, fbm, asset) = setup(h(0.75), 0.0, 4);
        let payoff = PayoffSpec::Custom(Arc::new(Constant(7.0)));
        let run = run_hedge(&fbm, &asset, &payoff, &params, &cache, &HedgeOptions::default())
            .unwrap();
        for &pi in &run.ledger.positions {
            assert!(pi.abs() < 1e-9, "position {pi}");
        }
        assert!(run.terminal_error.abs() < 1e-9);
    }

    #[test]
    fn ledger_identity_holds_with_costs() {
        let (grid, params, cache, fbm, asset) = setup(h(0.75), 0.01, 6);
        let payoff = PayoffSpec::call(100.0).unwrap();
        let run = run_hedge(&fbm, &asset, &payoff, &params, &cache, &HedgeOptions::default())
            .unwrap();
        let s_at = |i: usize| asset.value_at_index(grid.trading_subgrid_index(i));
        for i in 0..grid.n_intervals() {
            let lhs = run.ledger.value[i + 1] - run.ledger.value[i];
            let rhs = run.ledger.positions[i] * (s_at(i + 1) - s_at(i))
                - params.cost * s_at(i) * run.ledger.trades[i].abs();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + run.ledger.value[i].abs()));
            // value decomposes into riskless + risky at the traded position
            let recon = run.ledger.riskless[i] + run.ledger.positions[i] * s_at(i)
                + params.cost * s_at(i) * run.ledger.trades[i].abs();
            assert!((recon - run.ledger.value[i]).abs() < 1e-10 * (1.0 + recon.abs()));
        }
        let last = *run.ledger.cum_cost.last().unwrap();
        assert!(last > 0.0);
        for w in run.ledger.cum_cost.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn brownian_branch_uses_exact_step_law() {
        let (grid, params, cache, fbm, asset) = setup(HurstIndex::brownian(), 0.0, 4);
        let payoff = PayoffSpec::call(100.0).unwrap();
        let run = run_hedge(&fbm, &asset, &payoff, &params, &cache, &HedgeOptions::default())
            .unwrap();
        assert_eq!(run.ledger.positions.len(), 4);
        // every step kernel must carry dBhat = 0 and rhat = dt exactly
        for i in 0..grid.n_intervals() {
            let k = cache
                .step(
                    grid.trading_subgrid_index(i),
                    grid.trading_subgrid_index(i + 1),
                )
                .unwrap();
            assert_eq!(k.delta_bhat(&fbm), 0.0);
            assert_eq!(k.rhat, grid.trading_times()[i + 1] - grid.trading_times()[i]);
        }
    }

    #[test]
    fn scale_consistency_in_spot_and_strike() {
        let (grid, params, cache, fbm, asset) = setup(h(0.75), 0.01, 4);
        let payoff = PayoffSpec::call(100.0).unwrap();
        let run1 = run_hedge(&fbm, &asset, &payoff, &params, &cache, &HedgeOptions::default())
            .unwrap();

        let params2 = ModelParams::new(params.mu, params.sigma, 200.0, params.hurst, 0.01).unwrap();
        let asset2 = asset_path(&fbm, &params2);
        let payoff2 = PayoffSpec::call(200.0).unwrap();
        let cache2 = KernelCache::new(grid.clone(), params.hurst, QuadratureConfig::default());
        let run2 = run_hedge(
            &fbm,
            &asset2,
            &payoff2,
            &params2,
            &cache2,
            &HedgeOptions::default(),
        )
        .unwrap();

        for (p1, p2) in run1.ledger.positions.iter().zip(run2.ledger.positions.iter()) {
            assert_relative_eq!(p1, p2, epsilon = 1e-9, max_relative = 1e-9);
        }
        for (v1, v2) in run1.ledger.value.iter().zip(run2.ledger.value.iter()) {
            assert_relative_eq!(2.0 * v1, *v2, epsilon = 1e-8, max_relative = 1e-9);
        }
        assert_relative_eq!(
            2.0 * run1.terminal_error,
            run2.terminal_error,
            epsilon = 1e-8
        );
    }

    #[test]
    fn minimal_cost_inception_boundary() {
        let grid = TimeGrid::uniform(1.0, 4, 4).unwrap();
        let q = QuadratureConfig::default();
        let payoff = PayoffSpec::call(100.0).unwrap();

        // high cost: bounded, all wealth riskless
        let p = ModelParams::new(0.0, 0.1, 100.0, h(0.75), 0.05).unwrap();
        let (riskless, position) = minimal_initial_position(&p, &grid, &payoff, &q).unwrap();
        assert_eq!(position, 0.0);
        assert!(riskless > 0.0);

        // low cost: unbounded
        let p = ModelParams::new(0.3, 0.4, 100.0, h(0.75), 0.001).unwrap();
        let err = minimal_initial_position(&p, &grid, &payoff, &q).unwrap_err();
        assert!(matches!(err, Error::Unbounded { .. }));

        // mu = 0, sigma -> 0+: expected return -> 0, any positive cost works
        let p = ModelParams::new(0.0, 1e-8, 100.0, h(0.75), 0.001).unwrap();
        let (_, position) = minimal_initial_position(&p, &grid, &payoff, &q).unwrap();
        assert_eq!(position, 0.0);
    }

    #[test]
    fn minimal_cost_run_tracks_from_riskless_start() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 4, 16).unwrap());
        let hurst = h(0.75);
        let params = ModelParams::new(0.0, 0.05, 100.0, hurst, 0.05).unwrap();
        let paths = generate_paths(&grid, hurst, 1, 5, SamplerBackend::Cholesky).unwrap();
        let fbm = paths.into_iter().next().unwrap();
        let asset = asset_path(&fbm, &params);
        let cache = KernelCache::new(grid.clone(), hurst, QuadratureConfig::default());
        let opts = HedgeOptions {
            inception: InceptionRule::MinimalCost,
            on_no_solution: NoSolutionPolicy::Hold,
            ..HedgeOptions::default()
        };
        let payoff = PayoffSpec::call(100.0).unwrap();
        let run = run_hedge(&fbm, &asset, &payoff, &params, &cache, &opts).unwrap();
        assert_eq!(run.ledger.positions[0], 0.0);
        assert_eq!(run.ledger.trades[0], 0.0);
        assert_eq!(run.ledger.cum_cost[0], 0.0);
    }
}

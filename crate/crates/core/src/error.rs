use thiserror::Error;

/// Errors produced by the hedging engine and its numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: must satisfy {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("time {0} is not a point of the simulation subgrid")]
    OffGrid(f64),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("quadrature did not converge: achieved error estimate {achieved:.3e} exceeds tolerance {requested:.3e}")]
    QuadratureNonConvergent { achieved: f64, requested: f64 },

    #[error("conditional variance {value:.6e} is negative beyond the round-off clamp {threshold:.3e}")]
    NegativeVariance { value: f64, threshold: f64 },

    #[error("expected asset gain {gain:.6e} is below the degeneracy floor {floor:.3e}")]
    DegenerateGain { gain: f64, floor: f64 },

    #[error("no position solves the hedge equation: asset gain {asset_gain:.6e}, unit cost {unit_cost:.6e} (buy candidate {buy_candidate:.6e}, sell candidate {sell_candidate:.6e})")]
    NoSolution {
        asset_gain: f64,
        unit_cost: f64,
        buy_candidate: f64,
        sell_candidate: f64,
    },

    #[error("minimal-cost initial position is unbounded: cost {cost:.6} < |expected return| {expected_return:.6}")]
    Unbounded { cost: f64, expected_return: f64 },

    #[error("hedge infeasible at trading step {step}: {source}")]
    HedgeStep { step: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

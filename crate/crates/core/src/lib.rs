//! Conditional-mean hedging in the fractional Black-Scholes model with
//! proportional transaction costs.
//!
//! The asset follows S_t = S_0 exp(mu t + sigma B_t) with B a fractional
//! Brownian motion of Hurst index H in (1/2, 1). Trading happens at finitely
//! many preset times and every trade of monetary volume x is charged k x.
//! A discrete strategy is a conditional-mean hedge when its portfolio value
//! matches the frictionless value f(S) in conditional expectation at every
//! trading time; the positions solving that requirement follow a recursion
//! driven by the explicit prediction law of the fBm.
//!
//! Module map:
//! - [`fbm`]: covariance, exact path sampling (Cholesky and circulant
//!   backends), asset paths.
//! - [`prediction`]: the conditional law of the fBm given its past
//!   (prediction weights, transfer kernel, conditional mean/variance) plus
//!   the per-step kernel cache.
//! - [`gains`]: one-step conditional expectations of asset and option value
//!   changes under the predicted law.
//! - [`hedge`]: cost-aware ledger accounting, the recursive position solve,
//!   and the minimal-cost initial position.
//! - [`oracle`]: the independent Gaussian linear-projection oracle used to
//!   verify the prediction kernels.

pub mod error;
pub mod fbm;
pub mod gains;
pub mod grid;
pub mod hedge;
pub mod oracle;
pub mod params;
pub mod payoff;
pub mod prediction;
pub mod quadrature;

pub use error::{Error, Result};
pub use fbm::{asset_path, covariance, frictionless_value, generate_paths, AssetPath, FbmPath,
    PathSampler, SamplerBackend};
pub use gains::{
    call_gain_closed_form, conditional_payoff_expectation, expected_asset_gain,
    expected_option_gain, put_gain_closed_form, StepState,
};
pub use grid::TimeGrid;
pub use hedge::{
    minimal_initial_position, run_hedge, solve_position, HedgeLedger, HedgeOptions, HedgeRun,
    InceptionRule, NoSolutionPolicy,
};
pub use params::{HurstIndex, ModelParams};
pub use payoff::{PayoffFn, PayoffSpec};
pub use prediction::{
    conditional_covariance, conditional_law, conditional_mean, conditional_variance, psi_weight,
    transfer_kernel, ConditionalLaw, KernelCache, PredictionQuery,
};
pub use quadrature::{QuadratureConfig, SingularRule};

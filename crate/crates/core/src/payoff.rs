use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A convex or concave scalar payoff with an available left-derivative.
pub trait PayoffFn: Send + Sync {
    fn value(&self, s: f64) -> f64;
    fn left_derivative(&self, s: f64) -> f64;
}

/// European vanilla payoff specification.
#[derive(Clone)]
pub enum PayoffSpec {
    Call { strike: f64 },
    Put { strike: f64 },
    Identity,
    Custom(Arc<dyn PayoffFn>),
}

impl fmt::Debug for PayoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Call { strike } => write!(f, "Call {{ strike: {strike} }}"),
            Self::Put { strike } => write!(f, "Put {{ strike: {strike} }}"),
            Self::Identity => write!(f, "Identity"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PayoffSpec {
    pub fn call(strike: f64) -> Result<Self> {
        if strike > 0.0 && strike.is_finite() {
            Ok(Self::Call { strike })
        } else {
            Err(Error::InvalidParameter {
                name: "strike",
                value: strike,
                constraint: "strike > 0",
            })
        }
    }

    pub fn put(strike: f64) -> Result<Self> {
        if strike > 0.0 && strike.is_finite() {
            Ok(Self::Put { strike })
        } else {
            Err(Error::InvalidParameter {
                name: "strike",
                value: strike,
                constraint: "strike > 0",
            })
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Self::Call { strike } => (s - strike).max(0.0),
            Self::Put { strike } => (strike - s).max(0.0),
            Self::Identity => s,
            Self::Custom(f) => f.value(s),
        }
    }

    /// Left-derivative f'(s-), the Markovian replicating position.
    pub fn left_derivative(&self, s: f64) -> f64 {
        match self {
            Self::Call { strike } => {
                if s > *strike {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Put { strike } => {
                if s > *strike {
                    0.0
                } else {
                    -1.0
                }
            }
            Self::Identity => 1.0,
            Self::Custom(f) => f.left_derivative(s),
        }
    }

    /// The spot level at which the payoff has a kink, if any. Used by the
    /// conditional-expectation quadrature to split the integration range.
    pub fn kink(&self) -> Option<f64> {
        match self {
            Self::Call { strike } | Self::Put { strike } => Some(*strike),
            _ => None,
        }
    }
}

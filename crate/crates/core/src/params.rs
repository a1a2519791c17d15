use crate::error::{Error, Result};

/// Hurst index of the driving fractional Brownian motion.
///
/// The long-range dependent regime H in (1/2, 1) is the general code path.
/// H = 1/2 (ordinary Brownian motion) is admitted only through the explicit
/// [`HurstIndex::brownian`] constructor and is handled by dedicated branches
/// everywhere, since several prediction formulas are 0/0 at H = 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstIndex(f64);

impl HurstIndex {
    /// A Hurst index in the open interval (1/2, 1).
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.5 && value < 1.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter {
                name: "hurst",
                value,
                constraint: "H in (1/2, 1); use HurstIndex::brownian() for H = 1/2",
            })
        }
    }

    /// The Brownian special case H = 1/2.
    pub fn brownian() -> Self {
        Self(0.5)
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_brownian(&self) -> bool {
        self.0 == 0.5
    }

    /// 2H, the self-similarity exponent of the variance function.
    #[inline]
    pub fn two_h(&self) -> f64 {
        2.0 * self.0
    }
}

/// Market model parameters: dS/S = mu dt + sigma dB, S_0 = spot, with
/// proportional transaction cost `cost` per unit of traded monetary volume.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub mu: f64,
    pub sigma: f64,
    pub spot: f64,
    pub hurst: HurstIndex,
    pub cost: f64,
}

impl ModelParams {
    pub fn new(mu: f64, sigma: f64, spot: f64, hurst: HurstIndex, cost: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                value: mu,
                constraint: "finite",
            });
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
                constraint: "sigma > 0",
            });
        }
        if !(spot > 0.0) || !spot.is_finite() {
            return Err(Error::InvalidParameter {
                name: "spot",
                value: spot,
                constraint: "spot > 0",
            });
        }
        if !(0.0..1.0).contains(&cost) {
            return Err(Error::InvalidParameter {
                name: "cost",
                value: cost,
                constraint: "0 <= cost < 1",
            });
        }
        Ok(Self {
            mu,
            sigma,
            spot,
            hurst,
            cost,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurst_range_enforced() {
        assert!(HurstIndex::new(0.75).is_ok());
        assert!(HurstIndex::new(0.5).is_err());
        assert!(HurstIndex::new(1.0).is_err());
        assert!(HurstIndex::new(f64::NAN).is_err());
        assert!(HurstIndex::brownian().is_brownian());
    }

    #[test]
    fn params_validation() {
        let h = HurstIndex::new(0.75).unwrap();
        assert!(ModelParams::new(0.1, 0.2, 100.0, h, 0.01).is_ok());
        assert!(ModelParams::new(0.1, 0.0, 100.0, h, 0.01).is_err());
        assert!(ModelParams::new(0.1, 0.2, -1.0, h, 0.01).is_err());
        assert!(ModelParams::new(0.1, 0.2, 100.0, h, 1.0).is_err());
        assert!(ModelParams::new(0.1, 0.2, 100.0, h, -0.1).is_err());
    }
}

//! Multivariate-Gaussian linear-projection oracle.
//!
//! Conditions B at a target time on finitely many observed path values using
//! nothing but the covariance function and a Cholesky solve:
//!
//! ```text
//!   E[B_t | B_{s_1}, ..., B_{s_m}] = Sigma_12 Sigma_22^{-1} b,
//!   Var[B_t | B_{s_1}, ..., B_{s_m}] = Sigma_11 - Sigma_12 Sigma_22^{-1} Sigma_21.
//! ```
//!
//! This route is independent of the prediction-weight and transfer kernels,
//! which makes it the reference the kernel formulas are checked against: as
//! the conditioning grid refines, the projection converges to the
//! conditional law given the whole past.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fbm::covariance;
use crate::params::HurstIndex;

/// Projection coefficients and residual variance for one target time.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Weight of each observation in the conditional mean.
    pub weights: Vec<f64>,
    /// Conditional variance of the target given the observations.
    pub variance: f64,
}

/// Build the projection of B_target onto observations at `cond_times`
/// (all strictly positive, strictly increasing).
pub fn project(cond_times: &[f64], target: f64, h: HurstIndex) -> Result<Projection> {
    if cond_times.is_empty() {
        return Ok(Projection {
            weights: vec![],
            variance: covariance(target, target, h)?,
        });
    }
    for w in cond_times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Grid(
                "conditioning times must be strictly increasing".into(),
            ));
        }
    }
    if cond_times[0] <= 0.0 {
        return Err(Error::Grid(
            "conditioning times must be strictly positive (B_0 = 0 carries no information)".into(),
        ));
    }
    let m = cond_times.len();
    let mut sigma22 = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let c = covariance(cond_times[i], cond_times[j], h)?;
            sigma22[(i, j)] = c;
            sigma22[(j, i)] = c;
        }
    }
    let sigma12 = DVector::<f64>::from_iterator(
        m,
        cond_times
            .iter()
            .map(|&s| covariance(target, s, h).unwrap()),
    );
    let chol = sigma22.cholesky().ok_or_else(|| {
        Error::Factorization("projection covariance is not positive definite".into())
    })?;
    let weights = chol.solve(&sigma12);
    let variance = covariance(target, target, h)? - sigma12.dot(&weights);
    Ok(Projection {
        weights: weights.iter().copied().collect(),
        variance: variance.max(0.0),
    })
}

/// Conditional mean and variance of B_target given observed values.
pub fn conditional_moments(
    cond_times: &[f64],
    cond_values: &[f64],
    target: f64,
    h: HurstIndex,
) -> Result<(f64, f64)> {
    if cond_times.len() != cond_values.len() {
        return Err(Error::Grid(
            "conditioning times and values have different lengths".into(),
        ));
    }
    let p = project(cond_times, target, h)?;
    let mean = p
        .weights
        .iter()
        .zip(cond_values.iter())
        .map(|(w, v)| w * v)
        .sum();
    Ok((mean, p.variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brownian_projection_is_last_value() {
        let h = HurstIndex::brownian();
        let times = [0.25, 0.5, 0.75, 1.0];
        let p = project(&times, 1.5, h).unwrap();
        // martingale: weight 1 on the last observation, 0 elsewhere
        assert_relative_eq!(p.weights[3], 1.0, epsilon = 1e-10);
        for w in &p.weights[..3] {
            assert_relative_eq!(*w, 0.0, epsilon = 1e-10);
        }
        assert_relative_eq!(p.variance, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn empty_conditioning_returns_prior() {
        let h = HurstIndex::new(0.75).unwrap();
        let p = project(&[], 2.0, h).unwrap();
        assert!(p.weights.is_empty());
        assert_relative_eq!(p.variance, 2f64.powf(1.5), epsilon = 1e-12);
    }

    #[test]
    fn conditioning_reduces_variance() {
        let h = HurstIndex::new(0.8).unwrap();
        let coarse = project(&[0.5, 1.0], 1.25, h).unwrap().variance;
        let fine = project(&[0.25, 0.5, 0.75, 1.0], 1.25, h).unwrap().variance;
        let prior = covariance(1.25, 1.25, h).unwrap();
        assert!(fine <= coarse + 1e-12);
        assert!(coarse <= prior);
    }

    #[test]
    fn target_inside_grid_is_interpolated_exactly() {
        let h = HurstIndex::new(0.7).unwrap();
        let (m, v) = conditional_moments(&[0.5, 1.0], &[0.3, -0.2], 1.0, h).unwrap();
        assert_relative_eq!(m, -0.2, epsilon = 1e-9);
        assert!(v.abs() < 1e-10);
    }
}

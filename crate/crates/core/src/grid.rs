use crate::error::{Error, Result};

/// Trading times 0 = t_0 < t_1 < ... < t_N = T together with a uniform
/// simulation subgrid of `refinement` cells per trading interval.
///
/// The subgrid contains every trading time exactly: trading time i sits at
/// subgrid index `i * refinement`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    trading: Vec<f64>,
    refinement: usize,
    subgrid: Vec<f64>,
}

impl TimeGrid {
    pub fn new(trading_times: Vec<f64>, refinement: usize) -> Result<Self> {
        if trading_times.len() < 2 {
            return Err(Error::Grid("need at least two trading times".into()));
        }
        if trading_times[0] != 0.0 {
            return Err(Error::Grid("first trading time must be 0".into()));
        }
        for w in trading_times.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Grid(format!(
                    "trading times must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if refinement == 0 {
            return Err(Error::Grid("refinement must be >= 1".into()));
        }

        let mut subgrid = Vec::with_capacity((trading_times.len() - 1) * refinement + 1);
        subgrid.push(0.0);
        for w in trading_times.windows(2) {
            let (a, b) = (w[0], w[1]);
            for j in 1..=refinement {
                // hit the right trading time exactly, no accumulated drift
                let t = if j == refinement {
                    b
                } else {
                    a + (b - a) * j as f64 / refinement as f64
                };
                subgrid.push(t);
            }
        }
        Ok(Self {
            trading: trading_times,
            refinement,
            subgrid,
        })
    }

    /// Uniform trading grid on [0, maturity] with `n_intervals` trading steps.
    pub fn uniform(maturity: f64, n_intervals: usize, refinement: usize) -> Result<Self> {
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(Error::Grid(format!("maturity must be > 0, got {maturity}")));
        }
        if n_intervals == 0 {
            return Err(Error::Grid("need at least one trading interval".into()));
        }
        let trading = (0..=n_intervals)
            .map(|i| {
                if i == n_intervals {
                    maturity
                } else {
                    maturity * i as f64 / n_intervals as f64
                }
            })
            .collect();
        Self::new(trading, refinement)
    }

    pub fn trading_times(&self) -> &[f64] {
        &self.trading
    }

    /// Number of trading intervals N.
    pub fn n_intervals(&self) -> usize {
        self.trading.len() - 1
    }

    pub fn maturity(&self) -> f64 {
        *self.trading.last().unwrap()
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    /// All subgrid times, including 0 and the maturity.
    pub fn subgrid(&self) -> &[f64] {
        &self.subgrid
    }

    /// Subgrid index of trading time i.
    pub fn trading_subgrid_index(&self, i: usize) -> usize {
        i * self.refinement
    }

    /// Locate `t` on the subgrid, tolerating round-off at 1e-12 * T relative.
    pub fn subgrid_index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * self.maturity().max(1.0);
        match self
            .subgrid
            .binary_search_by(|x| x.partial_cmp(&t).unwrap())
        {
            Ok(i) => Ok(i),
            Err(i) => {
                if i < self.subgrid.len() && (self.subgrid[i] - t).abs() <= tol {
                    Ok(i)
                } else if i > 0 && (self.subgrid[i - 1] - t).abs() <= tol {
                    Ok(i - 1)
                } else {
                    Err(Error::OffGrid(t))
                }
            }
        }
    }

    /// Whether the subgrid is uniform (required by the circulant sampler).
    pub fn is_uniform(&self) -> bool {
        let n = self.subgrid.len() - 1;
        let dt = self.maturity() / n as f64;
        self.subgrid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * self.maturity().max(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subgrid_contains_trading_times_exactly() {
        let g = TimeGrid::new(vec![0.0, 0.3, 1.0, 2.5], 8).unwrap();
        for (i, &t) in g.trading_times().iter().enumerate() {
            assert_eq!(g.subgrid()[g.trading_subgrid_index(i)], t);
        }
        assert_eq!(g.subgrid().len(), 3 * 8 + 1);
        assert_eq!(g.subgrid()[0], 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(vec![0.0], 4).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0], 4).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0], 4).is_err());
        assert!(TimeGrid::new(vec![0.0, 2.0, 1.0], 4).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], 0).is_err());
    }

    #[test]
    fn index_lookup_with_tolerance() {
        let g = TimeGrid::uniform(1.0, 4, 16).unwrap();
        let idx = g.subgrid_index_of(0.25).unwrap();
        assert_eq!(idx, 16);
        assert!(g.subgrid_index_of(0.25 + 1e-14).is_ok());
        assert!(g.subgrid_index_of(0.2501).is_err());
    }

    #[test]
    fn uniformity_check() {
        assert!(TimeGrid::uniform(2.0, 8, 32).unwrap().is_uniform());
        assert!(!TimeGrid::new(vec![0.0, 0.5, 2.0], 4).unwrap().is_uniform());
    }
}

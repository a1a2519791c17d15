//! Declarative experiment configuration: one TOML file plus flag overrides
//! describes a full reproducible run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use frachedge_core::fbm::SamplerBackend;
use frachedge_core::hedge::{HedgeOptions, InceptionRule, NoSolutionPolicy};
use frachedge_core::quadrature::SingularRule;
use frachedge_core::{HurstIndex, ModelParams, PayoffSpec, QuadratureConfig, TimeGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    pub sigma: f64,
    pub spot: f64,
    pub hurst: f64,
    pub cost: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            mu: 0.3,
            sigma: 0.2,
            spot: 100.0,
            hurst: 0.75,
            cost: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub maturity: f64,
    pub n_intervals: usize,
    pub refinement: usize,
    /// Explicit trading times; overrides maturity/n_intervals when present.
    pub trading_times: Option<Vec<f64>>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            maturity: 1.0,
            n_intervals: 8,
            refinement: 32,
            trading_times: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayoffSection {
    /// one of: call, put, identity
    pub kind: String,
    pub strike: f64,
}

impl Default for PayoffSection {
    fn default() -> Self {
        Self {
            kind: "call".into(),
            strike: 100.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n_paths: usize,
    pub seed: u64,
    /// one of: frictionless, minimal-cost
    pub inception: String,
    /// one of: circulant, cholesky
    pub backend: String,
    /// one of: fail, hold
    pub on_no_solution: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_paths: 1000,
            seed: 42,
            inception: "frictionless".into(),
            backend: "circulant".into(),
            // ensembles default to holding through infeasible steps, with
            // violations counted per path; single-run verification configs
            // should use "fail"
            on_no_solution: "hold".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub nodes_per_unit: usize,
    /// one of: jacobi-weighted, midpoint-avoiding
    pub singular_rule: String,
    pub tolerance: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        Self {
            nodes_per_unit: 64,
            singular_rule: "jacobi-weighted".into(),
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: String,
    /// one of: csv, json
    pub format: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: "out/report".into(),
            format: "csv".into(),
        }
    }
}

/// The full experiment description. Serialized back verbatim into every
/// report as `config_echo`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub payoff: PayoffSection,
    pub run: RunSection,
    pub quadrature: QuadratureSection,
    pub output: OutputSection,
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub hurst: Option<f64>,
    pub cost: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.run.seed = seed;
        }
        if let Some(paths) = overrides.paths {
            cfg.run.n_paths = paths;
        }
        if let Some(out) = &overrides.out {
            cfg.output.path = out.display().to_string();
        }
        if let Some(format) = &overrides.format {
            cfg.output.format = format.clone();
        }
        if let Some(h) = overrides.hurst {
            cfg.model.hurst = h;
        }
        if let Some(c) = overrides.cost {
            cfg.model.cost = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.n_paths == 0 {
            bail!("run.n_paths must be >= 1");
        }
        match self.output.format.as_str() {
            "csv" | "json" => {}
            other => bail!("output.format must be csv or json, got {other}"),
        }
        self.hurst()?;
        self.params()?;
        self.time_grid()?;
        self.payoff_spec()?;
        self.quadrature_config()?;
        self.backend()?;
        self.hedge_options()?;
        Ok(())
    }

    pub fn hurst(&self) -> Result<HurstIndex> {
        if self.model.hurst == 0.5 {
            Ok(HurstIndex::brownian())
        } else {
            Ok(HurstIndex::new(self.model.hurst)?)
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(
            self.model.mu,
            self.model.sigma,
            self.model.spot,
            self.hurst()?,
            self.model.cost,
        )?)
    }

    pub fn time_grid(&self) -> Result<Arc<TimeGrid>> {
        let grid = match &self.grid.trading_times {
            Some(times) => TimeGrid::new(times.clone(), self.grid.refinement)?,
            None => TimeGrid::uniform(
                self.grid.maturity,
                self.grid.n_intervals,
                self.grid.refinement,
            )?,
        };
        Ok(Arc::new(grid))
    }

    pub fn payoff_spec(&self) -> Result<PayoffSpec> {
        Ok(match self.payoff.kind.as_str() {
            "call" => PayoffSpec::call(self.payoff.strike)?,
            "put" => PayoffSpec::put(self.payoff.strike)?,
            "identity" => PayoffSpec::Identity,
            other => bail!("payoff.kind must be call, put or identity, got {other}"),
        })
    }

    pub fn quadrature_config(&self) -> Result<QuadratureConfig> {
        let rule = match self.quadrature.singular_rule.as_str() {
            "jacobi-weighted" => SingularRule::JacobiWeighted,
            "midpoint-avoiding" => SingularRule::MidpointAvoiding,
            other => bail!("quadrature.singular_rule must be jacobi-weighted or midpoint-avoiding, got {other}"),
        };
        Ok(QuadratureConfig::new(
            self.quadrature.nodes_per_unit,
            rule,
            self.quadrature.tolerance,
        )?)
    }

    pub fn backend(&self) -> Result<SamplerBackend> {
        Ok(match self.run.backend.as_str() {
            "circulant" => SamplerBackend::Circulant,
            "cholesky" => SamplerBackend::Cholesky,
            other => bail!("run.backend must be circulant or cholesky, got {other}"),
        })
    }

    pub fn hedge_options(&self) -> Result<HedgeOptions> {
        let inception = match self.run.inception.as_str() {
            "frictionless" => InceptionRule::Frictionless,
            "minimal-cost" => InceptionRule::MinimalCost,
            other => bail!("run.inception must be frictionless or minimal-cost, got {other}"),
        };
        let on_no_solution = match self.run.on_no_solution.as_str() {
            "fail" => NoSolutionPolicy::FailFast,
            "hold" => NoSolutionPolicy::Hold,
            other => bail!("run.on_no_solution must be fail or hold, got {other}"),
        };
        Ok(HedgeOptions {
            inception,
            on_no_solution,
            ..HedgeOptions::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
[model]
mu = 0.1
sigma = 0.3
hurst = 0.6
cost = 0.0

[run]
n_paths = 10
seed = 7

[output]
format = "json"
"#;
        let mut cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.model.sigma, 0.3);
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.model.spot, 100.0); // default fills in
        cfg.validate().unwrap();

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.toml");
        std::fs::write(&p, text).unwrap();
        let over = Overrides {
            seed: Some(99),
            hurst: Some(0.8),
            ..Overrides::default()
        };
        let loaded = ExperimentConfig::load(Some(&p), &over).unwrap();
        assert_eq!(loaded.run.seed, 99);
        assert_eq!(loaded.model.hurst, 0.8);
        assert_eq!(loaded.model.sigma, 0.3);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.output.format = "xml".into();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.model.hurst = 1.2;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.payoff.kind = "barrier".into();
        assert!(cfg.validate().is_err());

        assert!(toml::from_str::<ExperimentConfig>("[model]\nunknown_key = 1").is_err());
    }
}

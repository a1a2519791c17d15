//! Report types and deterministic CSV/JSON emission.
//!
//! Reports are byte-identical for identical (config, seed): rows are sorted
//! by their natural keys, floats use the shortest round-trip encoding, and
//! no timestamps or host details are written. CSV schemas are versioned in
//! the file name (`*_v1.csv`); JSON reports follow the envelope
//! `{config_echo, results, diagnostics}` described by
//! `schemas/report.schema.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Per-path outcome of an ensemble run.
#[derive(Debug, Clone, Serialize)]
pub struct PathRow {
    pub path: usize,
    pub terminal_value: f64,
    pub frictionless_terminal: f64,
    pub terminal_error: f64,
    pub cum_cost: f64,
    pub n_hold_violations: usize,
}

/// Per-path, per-step detail of an ensemble run.
#[derive(Debug, Clone, Serialize)]
pub struct StepRow {
    pub path: usize,
    pub step: usize,
    pub time: f64,
    pub position: f64,
    pub trade: f64,
    pub step_cost: f64,
    pub value: f64,
    pub frictionless: f64,
    pub tracking_gap: f64,
}

/// Ensemble statistics per trading time.
#[derive(Debug, Clone, Serialize)]
pub struct StepSummaryRow {
    pub step: usize,
    pub time: f64,
    pub mean_tracking_gap: f64,
    pub std_tracking_gap: f64,
    pub mean_position: f64,
    pub mean_cum_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub n_failed_paths: usize,
    pub mean_terminal_error: f64,
    pub std_terminal_error: f64,
    pub max_abs_terminal_error: f64,
    pub mean_cum_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HedgeResults {
    pub per_path: Vec<PathRow>,
    pub per_step: Vec<StepRow>,
    pub step_summary: Vec<StepSummaryRow>,
    pub summary: EnsembleSummary,
}

/// One conditional-resimulation check of the tracking requirement.
#[derive(Debug, Clone, Serialize)]
pub struct TrackingRow {
    pub step: usize,
    pub t_now: f64,
    pub t_next: f64,
    pub position: f64,
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    pub discrepancy: f64,
    pub std_err: f64,
    pub z_score: f64,
    pub n_draws: usize,
    pub kernel_quad_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackingResults {
    pub rows: Vec<TrackingRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub hurst: f64,
    pub t: f64,
    pub integral: f64,
    pub target: f64,
    pub rel_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscriminatorRow {
    pub form: String,
    pub hurst: f64,
    pub t: f64,
    pub integral: f64,
    pub target: f64,
    pub rel_residual: f64,
    pub adopted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionRow {
    pub refinement: usize,
    pub rms_prediction_gap: f64,
    pub kernel_variance: f64,
    pub oracle_variance: f64,
    pub variance_rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BrownianRow {
    pub check: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelResults {
    pub identity: Vec<IdentityRow>,
    pub discriminator: Vec<DiscriminatorRow>,
    pub projection: Vec<ProjectionRow>,
    pub brownian: Vec<BrownianRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialPositionResults {
    pub delta_shat: f64,
    pub expected_return: f64,
    pub cost: f64,
    pub bounded: bool,
    pub riskless: Option<f64>,
    pub position: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CommandResults {
    Hedge(HedgeResults),
    Tracking(TrackingResults),
    Kernels(KernelResults),
    Initial(InitialPositionResults),
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    /// Worst achieved quadrature error estimate observed in the run.
    pub max_quadrature_error: f64,
    /// Engine failures, one line per affected path: "path 17: ...".
    pub engine_errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config_echo: ExperimentConfig,
    pub results: CommandResults,
    pub diagnostics: Diagnostics,
}

impl Report {
    /// Write the report per the configured format; returns written files.
    pub fn write(&self, out_prefix: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = out_prefix.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating output dir {}", dir.display()))?;
            }
        }
        match self.config_echo.output.format.as_str() {
            "json" => self.write_json(out_prefix),
            _ => self.write_csv(out_prefix),
        }
    }

    fn write_json(&self, out_prefix: &Path) -> Result<Vec<PathBuf>> {
        let path = out_prefix.with_extension("json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(vec![path])
    }

    fn write_csv(&self, out_prefix: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut emit = |suffix: &str, body: String| -> Result<()> {
            let path = sibling(out_prefix, suffix);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
            Ok(())
        };

        match &self.results {
            CommandResults::Hedge(h) => {
                let mut body = String::from(
                    "path,terminal_value,frictionless_terminal,terminal_error,cum_cost,n_hold_violations\n",
                );
                for r in &h.per_path {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{}",
                        r.path,
                        r.terminal_value,
                        r.frictionless_terminal,
                        r.terminal_error,
                        r.cum_cost,
                        r.n_hold_violations
                    );
                }
                emit("_paths_v1.csv", body)?;

                let mut body = String::from(
                    "path,step,time,position,trade,step_cost,value,frictionless,tracking_gap\n",
                );
                for r in &h.per_step {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{},{},{},{}",
                        r.path,
                        r.step,
                        r.time,
                        r.position,
                        r.trade,
                        r.step_cost,
                        r.value,
                        r.frictionless,
                        r.tracking_gap
                    );
                }
                emit("_steps_v1.csv", body)?;

                let mut body = String::from(
                    "step,time,mean_tracking_gap,std_tracking_gap,mean_position,mean_cum_cost\n",
                );
                for r in &h.step_summary {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{}",
                        r.step,
                        r.time,
                        r.mean_tracking_gap,
                        r.std_tracking_gap,
                        r.mean_position,
                        r.mean_cum_cost
                    );
                }
                emit("_summary_v1.csv", body)?;

                let s = &h.summary;
                let mut body = String::from(
                    "n_paths,n_failed_paths,mean_terminal_error,std_terminal_error,max_abs_terminal_error,mean_cum_cost\n",
                );
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{}",
                    s.n_paths,
                    s.n_failed_paths,
                    s.mean_terminal_error,
                    s.std_terminal_error,
                    s.max_abs_terminal_error,
                    s.mean_cum_cost
                );
                emit("_ensemble_v1.csv", body)?;
            }
            CommandResults::Tracking(t) => {
                let mut body = String::from(
                    "step,t_now,t_next,position,lhs_mean,rhs_mean,discrepancy,std_err,z_score,n_draws,kernel_quad_error\n",
                );
                for r in &t.rows {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        r.step,
                        r.t_now,
                        r.t_next,
                        r.position,
                        r.lhs_mean,
                        r.rhs_mean,
                        r.discrepancy,
                        r.std_err,
                        r.z_score,
                        r.n_draws,
                        r.kernel_quad_error
                    );
                }
                emit("_tracking_v1.csv", body)?;
            }
            CommandResults::Kernels(k) => {
                let mut body = String::from("hurst,t,integral,target,rel_residual\n");
                for r in &k.identity {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{}",
                        r.hurst, r.t, r.integral, r.target, r.rel_residual
                    );
                }
                emit("_kernel_identity_v1.csv", body)?;

                let mut body =
                    String::from("form,hurst,t,integral,target,rel_residual,adopted\n");
                for r in &k.discriminator {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{},{},{}",
                        r.form, r.hurst, r.t, r.integral, r.target, r.rel_residual, r.adopted
                    );
                }
                emit("_kernel_discriminator_v1.csv", body)?;

                let mut body = String::from(
                    "refinement,rms_prediction_gap,kernel_variance,oracle_variance,variance_rel_err\n",
                );
                for r in &k.projection {
                    let _ = writeln!(
                        body,
                        "{},{},{},{},{}",
                        r.refinement,
                        r.rms_prediction_gap,
                        r.kernel_variance,
                        r.oracle_variance,
                        r.variance_rel_err
                    );
                }
                emit("_kernel_projection_v1.csv", body)?;

                let mut body = String::from("check,residual\n");
                for r in &k.brownian {
                    let _ = writeln!(body, "{},{}", r.check, r.residual);
                }
                emit("_kernel_brownian_v1.csv", body)?;
            }
            CommandResults::Initial(r) => {
                let mut body = String::from(
                    "delta_shat,expected_return,cost,bounded,riskless,position\n",
                );
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{}",
                    r.delta_shat,
                    r.expected_return,
                    r.cost,
                    r.bounded,
                    r.riskless.map_or(String::new(), |v| v.to_string()),
                    r.position.map_or(String::new(), |v| v.to_string())
                );
                emit("_initial_v1.csv", body)?;
            }
        }

        // diagnostics ride along in every CSV run
        let mut body = String::from("key,value\n");
        let _ = writeln!(body, "schema_version,{}", self.diagnostics.schema_version);
        let _ = writeln!(body, "command,{}", self.diagnostics.command);
        let _ = writeln!(body, "seed,{}", self.diagnostics.seed);
        let _ = writeln!(
            body,
            "max_quadrature_error,{}",
            self.diagnostics.max_quadrature_error
        );
        for e in &self.diagnostics.engine_errors {
            let _ = writeln!(body, "engine_error,{}", e.replace(',', ";"));
        }
        emit("_diagnostics_v1.csv", body)?;

        Ok(written)
    }
}

fn sibling(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    name.push_str(suffix);
    prefix.with_file_name(name)
}

/// Mean and (population - 1) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

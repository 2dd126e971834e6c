//! Declarative run configuration: one TOML file with the network,
//! quadrature, protocol, sweep, and optimizer blocks, plus command-line
//! overrides for the common knobs. The effective configuration (defaults
//! applied) is written next to the outputs so every run is reproducible
//! from its own artifacts.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use cellsearch::montecarlo::ProtocolConfig;
use cellsearch::{NetworkParams, QuadratureConfig};

use crate::commands::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed for all Monte Carlo commands.
    pub seed: u64,
    /// Trials per sweep point for `simulate`.
    pub trials: u64,
    /// Output directory; created if missing.
    pub out_dir: PathBuf,
    /// Worker threads for Monte Carlo trials; 0 uses all cores. Results do
    /// not depend on this value.
    pub workers: usize,
    /// Scan cycles assumed when the budget is tied to the sector count
    /// (`n_bs` sweeps, figure reproduction): the budget is `k * n_bs`.
    pub k: u32,
    /// Also write one CSV row per simulated trial.
    pub dump_trials: bool,
    pub network: NetworkParams,
    pub quadrature: QuadratureConfig,
    pub protocol: ProtocolConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub optimize: OptimizeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            trials: 100_000,
            out_dir: PathBuf::from("out"),
            workers: 0,
            k: 1,
            dump_trials: false,
            network: NetworkParams::default(),
            quadrature: QuadratureConfig::default(),
            protocol: ProtocolConfig::default(),
            sweep: None,
            optimize: OptimizeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Lambda,
    NC,
    NBs,
    K,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::Lambda => "lambda",
            SweepVariable::NC => "n_c",
            SweepVariable::NBs => "n_bs",
            SweepVariable::K => "k",
        }
    }

    fn is_integer(&self) -> bool {
        !matches!(self, SweepVariable::Lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub scale: Scale,
}

/// One swept variable with either an explicit value list or a generated
/// range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<SweepRange>,
}

impl SweepSpec {
    pub fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let values = match (&self.values, &self.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => {
                if r.count == 0 {
                    return Err(CliError::Config("sweep range count must be >= 1".into()));
                }
                if r.count == 1 {
                    vec![r.start]
                } else {
                    match r.scale {
                        Scale::Linear => (0..r.count)
                            .map(|i| {
                                r.start + (r.stop - r.start) * i as f64 / (r.count - 1) as f64
                            })
                            .collect(),
                        Scale::Log => {
                            if r.start <= 0.0 || r.stop <= 0.0 {
                                return Err(CliError::Config(
                                    "log sweep bounds must be positive".into(),
                                ));
                            }
                            let (a, b) = (r.start.ln(), r.stop.ln());
                            (0..r.count)
                                .map(|i| {
                                    (a + (b - a) * i as f64 / (r.count - 1) as f64).exp()
                                })
                                .collect()
                        }
                    }
                }
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "sweep takes either `values` or `range`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "sweep needs `values` or `range`".into(),
                ))
            }
        };
        if values.is_empty() {
            return Err(CliError::Config("sweep values must be non-empty".into()));
        }
        if self.variable.is_integer() {
            for &v in &values {
                if v.fract() != 0.0 || v < 1.0 {
                    return Err(CliError::Config(format!(
                        "sweep variable `{}` needs positive integer values, got {v}",
                        self.variable.name()
                    )));
                }
            }
        }
        Ok(values)
    }
}

/// Beamwidth-design inputs for the `optimize` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub p_f_max: f64,
    pub k: u32,
    pub n_bs_min: u32,
    pub n_bs_max: u32,
    /// Optional joint grid over the UE sector count as well.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ue_min: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_ue_max: Option<u32>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            p_f_max: 0.1,
            k: 1,
            n_bs_min: 1,
            n_bs_max: 64,
            n_ue_min: None,
            n_ue_max: None,
        }
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub n_bs: Option<u32>,
    pub n_ue: Option<u32>,
    pub sinr_threshold: Option<f64>,
    pub n_c: Option<u32>,
    pub k: Option<u32>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    pub quad_rel_tol: Option<f64>,
    pub workers: Option<usize>,
    pub scheme: Option<cellsearch::montecarlo::SearchMode>,
}

pub fn load_config(path: Option<&std::path::Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("in {}: {e}", p.display())))
        }
    }
}

pub fn apply_overrides(cfg: &mut RunConfig, ov: &Overrides) {
    if let Some(v) = ov.lambda {
        cfg.network.lambda = v;
    }
    if let Some(v) = ov.n_bs {
        cfg.network.n_bs = v;
    }
    if let Some(v) = ov.n_ue {
        cfg.network.n_ue = v;
    }
    if let Some(v) = ov.sinr_threshold {
        cfg.network.sinr_threshold = v;
    }
    if let Some(v) = ov.n_c {
        cfg.protocol.n_c = v;
    }
    if let Some(v) = ov.k {
        cfg.k = v;
        cfg.optimize.k = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = ov.trials {
        cfg.trials = v;
    }
    if let Some(v) = &ov.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = ov.quad_rel_tol {
        cfg.quadrature.rel_tol = v;
    }
    if let Some(v) = ov.workers {
        cfg.workers = v;
    }
    if let Some(v) = ov.scheme {
        cfg.protocol.scheme = v;
    }
}

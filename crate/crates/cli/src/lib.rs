//! Experiment harness for the `irsnoma` library.

pub mod config;
pub mod experiment;

use std::path::PathBuf;

use clap::Parser;
use irsnoma::ao::Scheme;

use config::{parse_config, ExperimentConfig, Sweep};

#[derive(Debug, Parser)]
#[command(name = "irsnoma", version, about = "Monte-Carlo sweeps of robust secure IRS-NOMA beamforming")]
pub struct Cli {
    /// TOML experiment file; without it the built-in defaults are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated list of ao, random_phase, epa.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Option<Vec<Scheme>>,
    #[arg(long, value_delimiter = ',')]
    pub nt: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub ne: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub rq: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub rm: Option<Vec<f64>>,
    /// Normalized channel-estimation error(s).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-trial iteration traces.
    #[arg(long)]
    pub trace: bool,
}

impl Cli {
    pub fn resolve(&self) -> Result<ExperimentConfig, String> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(p).map_err(|e| e.to_string())?,
            None => ExperimentConfig::with_dims(8, 10, 2),
        };
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.scheme {
            cfg.schemes = v.clone();
        }
        if let Some(v) = &self.nt {
            cfg.dims.nt = Sweep::Many(v.clone());
        }
        if let Some(v) = &self.m {
            cfg.dims.m = Sweep::Many(v.clone());
        }
        if let Some(v) = &self.ne {
            cfg.dims.ne = Sweep::Many(v.clone());
        }
        if let Some(v) = &self.rq {
            cfg.r_q = Sweep::Many(v.clone());
        }
        if let Some(v) = &self.rm {
            cfg.r_m = Sweep::Many(v.clone());
        }
        if let Some(v) = &self.xi {
            cfg.xi_n = Sweep::Many(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.output.dir = v.clone();
        }
        if self.trace {
            cfg.output.trace = true;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

//! Experiment configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use irsnoma::ao::{InitTheta, Scheme};
use irsnoma::channel::{FadingParams, Layout};
use irsnoma::passive::PassiveObjective;
use serde::{Deserialize, Serialize};

/// A scalar or a list of values to sweep over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Sweep<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Sweep::One(v) => vec![v.clone()],
            Sweep::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub nt: Sweep<usize>,
    pub m: Sweep<usize>,
    pub ne: Sweep<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutConfig {
    pub d_bi: f64,
    pub r_b: f64,
    pub r_i: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        let l = Layout::default();
        Self { d_bi: l.d_bi, r_b: l.r_b, r_i: l.r_i }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingConfig {
    pub alpha_irs: f64,
    pub alpha_bs: f64,
    pub min_distance: f64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        let f = FadingParams::default();
        Self { alpha_irs: f.alpha_irs, alpha_bs: f.alpha_bs, min_distance: f.min_distance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub n_plain: usize,
    pub n_ascent_starts: usize,
    pub n_ascent_steps: usize,
    /// Rate tolerance of the post-hoc check, bps/Hz.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { n_plain: 10_000, n_ascent_starts: 8, n_ascent_steps: 25, tol: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write one iteration trace per trial.
    pub trace: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), trace: false }
    }
}

fn default_trials() -> usize {
    100
}
fn default_delta() -> f64 {
    0.1
}
fn default_r_q() -> Sweep<f64> {
    Sweep::One(1.0)
}
fn default_r_m() -> Sweep<f64> {
    Sweep::One(0.5)
}
fn default_xi() -> Sweep<f64> {
    Sweep::Many(vec![0.01, 0.02, 0.05, 0.1])
}
fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Ao, Scheme::RandomPhase, Scheme::Epa]
}
fn default_max_outer() -> usize {
    30
}
fn default_passive_objective() -> PassiveObjective {
    PassiveObjective::SlackMargin
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: DimsConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_r_q")]
    pub r_q: Sweep<f64>,
    #[serde(default = "default_r_m")]
    pub r_m: Sweep<f64>,
    #[serde(default = "default_xi")]
    pub xi_n: Sweep<f64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_max_outer")]
    pub max_outer_iters: usize,
    #[serde(default)]
    pub init_theta: InitTheta,
    #[serde(default = "default_passive_objective")]
    pub passive_objective: PassiveObjective,
    /// Interior-point feasibility and gap tolerance.
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub layout: LayoutConfig,
    #[serde(default)]
    pub fading: FadingConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl ExperimentConfig {
    pub fn with_dims(nt: usize, m: usize, ne: usize) -> Self {
        let text = format!("[dims]\nnt = {nt}\nm = {m}\nne = {ne}\n");
        toml::from_str(&text).expect("built-in config parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(bad("trials: must be at least 1"));
        }
        if !(self.delta > 0.0) {
            return Err(bad("delta: must be positive"));
        }
        if !(self.solver_tol > 0.0) {
            return Err(bad("solver_tol: must be positive"));
        }
        if self.schemes.is_empty() {
            return Err(bad("schemes: must not be empty"));
        }
        for (key, v) in [("dims.nt", self.dims.nt.values()), ("dims.m", self.dims.m.values()), ("dims.ne", self.dims.ne.values())] {
            if v.is_empty() {
                return Err(bad(format!("{key}: sweep must not be empty")));
            }
            if v.contains(&0) {
                return Err(bad(format!("{key}: must be positive")));
            }
        }
        for (key, v) in [("r_q", self.r_q.values()), ("r_m", self.r_m.values()), ("xi_n", self.xi_n.values())] {
            if v.is_empty() {
                return Err(bad(format!("{key}: sweep must not be empty")));
            }
            if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(bad(format!("{key}: values must be finite and nonnegative")));
            }
        }
        if self.max_outer_iters == 0 {
            return Err(bad("max_outer_iters: must be at least 1"));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout { d_bi: self.layout.d_bi, r_b: self.layout.r_b, r_i: self.layout.r_i }
    }

    pub fn fading(&self) -> FadingParams {
        FadingParams {
            alpha_irs: self.fading.alpha_irs,
            alpha_bs: self.fading.alpha_bs,
            min_distance: self.fading.min_distance,
            ..FadingParams::default()
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ExperimentConfig::from_toml("[dims]\nnt = 8\nm = 10\nne = 2\n").unwrap();
        assert_eq!(c.trials, 100);
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.xi_n.values(), vec![0.01, 0.02, 0.05, 0.1]);
        assert_eq!(c.schemes.len(), 3);
        assert_eq!(c, ExperimentConfig::with_dims(8, 10, 2));
    }

    #[test]
    fn sweeps_accept_lists() {
        let c = ExperimentConfig::from_toml("r_m = [0.1, 1.0]\nschemes = [\"ao\"]\n[dims]\nnt = [6, 8]\nm = 5\nne = 2\n").unwrap();
        assert_eq!(c.dims.nt.values(), vec![6, 8]);
        assert_eq!(c.r_m.values(), vec![0.1, 1.0]);
    }

    #[test]
    fn rejections_name_the_key() {
        let e = ExperimentConfig::from_toml("r_q = -1.0\n[dims]\nnt = 8\nm = 10\nne = 2\n").unwrap_err();
        assert!(e.0.contains("r_q"), "{e}");
        let e = ExperimentConfig::from_toml("trials = 5\n").unwrap_err();
        assert!(e.0.contains("dims"), "{e}");
        let e = ExperimentConfig::from_toml("bogus = 1\n[dims]\nnt = 8\nm = 10\nne = 2\n").unwrap_err();
        assert!(e.0.contains("bogus"), "{e}");
        let e = ExperimentConfig::from_toml("[dims]\nnt = 8\nm = 10\nne = 2\nfoo = 3\n").unwrap_err();
        assert!(e.0.contains("foo"), "{e}");
        assert!(ExperimentConfig::from_toml("trials = 0\n[dims]\nnt = 8\nm = 10\nne = 2\n").is_err());
    }
}

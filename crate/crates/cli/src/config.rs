//! Flat `section.key = value` configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. Unknown keys are errors. Every key has a default taken from the
//! reference parameter set, so an empty file is a valid configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use cachesim_core::model::{db_to_linear, per_km2_to_per_m2, ContentLibrary, NetworkParams};
use cachesim_core::simulator::{CatererModel, SimulationConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analyze,
    Optimize,
    Simulate,
    Sweep,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Analyze => "analyze",
            Mode::Optimize => "optimize",
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "analyze" => Ok(Mode::Analyze),
            "optimize" => Ok(Mode::Optimize),
            "simulate" => Ok(Mode::Simulate),
            "sweep" => Ok(Mode::Sweep),
            _ => Err("expected analyze, optimize, simulate or sweep".into()),
        }
    }
}

/// Source of the rate coverage in `analyze` and `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMethod {
    Quadrature,
    /// Single active link per cluster; does not depend on `q`.
    ClosedForm,
}

impl CoverageMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CoverageMethod::Quadrature => "quadrature",
            CoverageMethod::ClosedForm => "closed_form",
        }
    }
}

impl FromStr for CoverageMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quadrature" => Ok(CoverageMethod::Quadrature),
            "closed_form" => Ok(CoverageMethod::ClosedForm),
            _ => Err("expected quadrature or closed_form".into()),
        }
    }
}

/// Access probability: fixed, or the maximizer of the rate coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Access {
    Optimal,
    Fixed(f64),
}

impl FromStr for Access {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Access::Optimal);
        }
        let q = parse_f64(s)?;
        if !(0.0..=1.0).contains(&q) {
            return Err(format!("must be `auto` or lie in [0, 1], got {q}"));
        }
        Ok(Access::Fixed(q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Pc,
    Zipf,
    Uniform,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Pc => "pc",
            Scheme::Zipf => "zipf",
            Scheme::Uniform => "uniform",
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pc" => Ok(Scheme::Pc),
            "zipf" => Ok(Scheme::Zipf),
            "uniform" => Ok(Scheme::Uniform),
            _ => Err("expected pc, zipf or uniform".into()),
        }
    }
}

/// Parameters a sweep can vary, named as their config keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Q,
    SigmaM,
    LambdaPPerKm2,
    ThetaDb,
    NBar,
    Alpha,
    Beta,
    M,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::Q => "q",
            SweepVariable::SigmaM => "sigma_m",
            SweepVariable::LambdaPPerKm2 => "lambda_p_per_km2",
            SweepVariable::ThetaDb => "theta_db",
            SweepVariable::NBar => "n_bar",
            SweepVariable::Alpha => "alpha",
            SweepVariable::Beta => "beta",
            SweepVariable::M => "m",
        }
    }

    /// True when the variable changes the geometry or the SIR model, so the
    /// coverage has to be recomputed.
    pub fn affects_coverage(self) -> bool {
        !matches!(
            self,
            SweepVariable::Q | SweepVariable::Beta | SweepVariable::M
        )
    }

    /// Writes `value` into the experiment.
    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<(), CliError> {
        match self {
            SweepVariable::Q => cfg.network.q = Access::Fixed(value),
            SweepVariable::SigmaM => cfg.network.sigma_m = value,
            SweepVariable::LambdaPPerKm2 => cfg.network.lambda_p_per_km2 = value,
            SweepVariable::ThetaDb => cfg.network.theta_db = value,
            SweepVariable::NBar => cfg.network.n_bar = value,
            SweepVariable::Alpha => cfg.network.alpha = value,
            SweepVariable::Beta => cfg.library.beta = value,
            SweepVariable::M => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(CliError::config(
                        "sweep.values",
                        format!("m must be a positive integer, got {value}"),
                    ));
                }
                cfg.library.m = value as usize;
            }
        }
        Ok(())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "q" => SweepVariable::Q,
            "sigma_m" => SweepVariable::SigmaM,
            "lambda_p_per_km2" => SweepVariable::LambdaPPerKm2,
            "theta_db" => SweepVariable::ThetaDb,
            "n_bar" => SweepVariable::NBar,
            "alpha" => SweepVariable::Alpha,
            "beta" => SweepVariable::Beta,
            "m" => SweepVariable::M,
            _ => {
                return Err(
                    "expected one of q, sigma_m, lambda_p_per_km2, theta_db, n_bar, alpha, beta, m"
                        .into(),
                )
            }
        })
    }
}

/// Either `a, b, c` or an inclusive range `start:step:stop`.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty value list".into());
    }
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, step, stop] = parts[..] else {
            return Err("range must be start:step:stop".into());
        };
        let (start, step, stop) = (parse_f64(start)?, parse_f64(step)?, parse_f64(stop)?);
        if !(step > 0.0) || stop < start {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err("range has more than 100000 points".into());
        }
        return Ok((0..count).map(|k| start + k as f64 * step).collect());
    }
    s.split(',').map(|v| parse_f64(v.trim())).collect()
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse()
        .map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSection {
    pub lambda_p_per_km2: f64,
    pub n_bar: f64,
    pub sigma_m: f64,
    pub alpha: f64,
    pub theta_db: f64,
    pub p_d_w: f64,
    pub q: Access,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            lambda_p_per_km2: 10.0,
            n_bar: 4.0,
            sigma_m: 10.0,
            alpha: 4.0,
            theta_db: 0.0,
            p_d_w: 1.0,
            q: Access::Optimal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibrarySection {
    pub n_f: usize,
    pub m: usize,
    pub beta: f64,
}

impl Default for LibrarySection {
    fn default() -> Self {
        Self {
            n_f: 100,
            m: 8,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSection {
    pub variable: Option<SweepVariable>,
    pub values: Vec<f64>,
    /// One output file per series value.
    pub series_variable: Option<SweepVariable>,
    pub series_values: Vec<f64>,
    pub simulate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSection {
    pub search_tol: f64,
    /// Sub-optimal access point is this fraction of `q*`.
    pub suboptimal_q_factor: f64,
    pub histogram_bins: usize,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            search_tol: 1e-4,
            suboptimal_q_factor: 0.6,
            histogram_bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub network: NetworkSection,
    pub library: LibrarySection,
    pub coverage: CoverageMethod,
    pub sweep: SweepSection,
    pub optimize: OptimizeSection,
    pub sim: SimulationConfig,
    /// Caching scheme simulated in `simulate` mode.
    pub sim_policy: Scheme,
    pub output_path: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Analyze,
            network: NetworkSection::default(),
            library: LibrarySection::default(),
            coverage: CoverageMethod::Quadrature,
            sweep: SweepSection::default(),
            optimize: OptimizeSection::default(),
            sim: SimulationConfig::default(),
            sim_policy: Scheme::Pc,
            output_path: PathBuf::from("cachesim.csv"),
        }
    }
}

impl ExperimentConfig {
    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(
                    "<syntax>",
                    format!("line {}: expected `key = value`, got `{line}`", n + 1),
                ));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.merge_text(text)?;
        Ok(cfg)
    }

    /// Rebuilds a configuration from the `# key=value` block of a CSV file.
    pub fn from_metadata(csv: &str) -> Result<Self, CliError> {
        let block: String = csv
            .lines()
            .filter_map(|l| l.strip_prefix("# "))
            .map(|l| format!("{l}\n"))
            .collect();
        Self::from_text(&block)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let err = |m: String| CliError::config(key.to_string(), m);
        match key {
            "mode" => self.mode = value.parse().map_err(err)?,
            "network.lambda_p_per_km2" => {
                self.network.lambda_p_per_km2 = parse_f64(value).map_err(err)?
            }
            "network.n_bar" => self.network.n_bar = parse_f64(value).map_err(err)?,
            "network.sigma_m" => self.network.sigma_m = parse_f64(value).map_err(err)?,
            "network.alpha" => self.network.alpha = parse_f64(value).map_err(err)?,
            "network.theta_db" => self.network.theta_db = parse_f64(value).map_err(err)?,
            "network.p_d_w" => self.network.p_d_w = parse_f64(value).map_err(err)?,
            "network.q" => self.network.q = value.parse().map_err(err)?,
            "library.n_f" => self.library.n_f = parse_usize(value).map_err(err)?,
            "library.m" => self.library.m = parse_usize(value).map_err(err)?,
            "library.beta" => self.library.beta = parse_f64(value).map_err(err)?,
            "analysis.coverage" => self.coverage = value.parse().map_err(err)?,
            "sweep.variable" => self.sweep.variable = Some(value.parse().map_err(err)?),
            "sweep.values" => self.sweep.values = parse_values(value).map_err(err)?,
            "sweep.series_variable" => {
                self.sweep.series_variable = if value == "none" {
                    None
                } else {
                    Some(value.parse().map_err(err)?)
                }
            }
            "sweep.series_values" => {
                self.sweep.series_values = if value.is_empty() {
                    Vec::new()
                } else {
                    parse_values(value).map_err(err)?
                }
            }
            "sweep.simulate" => self.sweep.simulate = parse_bool(value).map_err(err)?,
            "optimize.search_tol" => self.optimize.search_tol = parse_f64(value).map_err(err)?,
            "optimize.suboptimal_q_factor" => {
                self.optimize.suboptimal_q_factor = parse_f64(value).map_err(err)?
            }
            "optimize.histogram_bins" => {
                self.optimize.histogram_bins = parse_usize(value).map_err(err)?
            }
            "sim.trials" => {
                self.sim.trials = value
                    .parse()
                    .map_err(|_| err(format!("`{value}` is not an integer")))?
            }
            "sim.window_radius_m" => self.sim.window_radius = parse_f64(value).map_err(err)?,
            "sim.seed" => {
                self.sim.seed = value
                    .parse()
                    .map_err(|_| err(format!("`{value}` is not an integer")))?
            }
            "sim.fading_draws_per_trial" => {
                self.sim.fading_draws_per_trial = value
                    .parse()
                    .map_err(|_| err(format!("`{value}` is not an integer")))?
            }
            "sim.caterer" => {
                self.sim.caterer = value
                    .parse::<CatererModel>()
                    .map_err(|_| err("expected palm or member".into()))?
            }
            "sim.policy" => self.sim_policy = value.parse().map_err(err)?,
            "output.path" => self.output_path = PathBuf::from(value),
            _ => return Err(CliError::config(key.to_string(), "unknown key")),
        }
        Ok(())
    }

    /// The fully resolved configuration as `key=value` pairs, in a stable
    /// order; [`ExperimentConfig::set`] accepts every pair.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let n = &self.network;
        let mut out = vec![
            ("mode", self.mode.as_str().to_string()),
            (
                "network.lambda_p_per_km2",
                format!("{:?}", n.lambda_p_per_km2),
            ),
            ("network.n_bar", format!("{:?}", n.n_bar)),
            ("network.sigma_m", format!("{:?}", n.sigma_m)),
            ("network.alpha", format!("{:?}", n.alpha)),
            ("network.theta_db", format!("{:?}", n.theta_db)),
            ("network.p_d_w", format!("{:?}", n.p_d_w)),
            (
                "network.q",
                match n.q {
                    Access::Optimal => "auto".to_string(),
                    Access::Fixed(q) => format!("{q:?}"),
                },
            ),
            ("library.n_f", self.library.n_f.to_string()),
            ("library.m", self.library.m.to_string()),
            ("library.beta", format!("{:?}", self.library.beta)),
            ("analysis.coverage", self.coverage.as_str().to_string()),
        ];
        if let Some(v) = self.sweep.variable {
            out.push(("sweep.variable", v.as_str().to_string()));
            out.push(("sweep.values", join(&self.sweep.values)));
        }
        if let Some(v) = self.sweep.series_variable {
            out.push(("sweep.series_variable", v.as_str().to_string()));
            out.push(("sweep.series_values", join(&self.sweep.series_values)));
        }
        out.extend([
            ("sweep.simulate", self.sweep.simulate.to_string()),
            (
                "optimize.search_tol",
                format!("{:?}", self.optimize.search_tol),
            ),
            (
                "optimize.suboptimal_q_factor",
                format!("{:?}", self.optimize.suboptimal_q_factor),
            ),
            (
                "optimize.histogram_bins",
                self.optimize.histogram_bins.to_string(),
            ),
            ("sim.trials", self.sim.trials.to_string()),
            (
                "sim.window_radius_m",
                format!("{:?}", self.sim.window_radius),
            ),
            ("sim.seed", self.sim.seed.to_string()),
            (
                "sim.fading_draws_per_trial",
                self.sim.fading_draws_per_trial.to_string(),
            ),
            ("sim.caterer", self.sim.caterer.as_str().to_string()),
            ("sim.policy", self.sim_policy.as_str().to_string()),
            ("output.path", self.output_path.display().to_string()),
        ]);
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Internal SI parameters. `q` is left at zero when it is to be optimized.
    pub fn network_params(&self) -> Result<NetworkParams, CliError> {
        let n = &self.network;
        let params = NetworkParams {
            lambda_p: per_km2_to_per_m2(n.lambda_p_per_km2),
            n_bar: n.n_bar,
            sigma: n.sigma_m,
            alpha: n.alpha,
            theta: db_to_linear(n.theta_db),
            p_d: n.p_d_w,
            q: match n.q {
                Access::Fixed(q) => q,
                Access::Optimal => 0.0,
            },
        };
        params.validate().map_err(CliError::from_core)?;
        Ok(params)
    }

    pub fn content_library(&self) -> Result<ContentLibrary, CliError> {
        ContentLibrary::new(self.library.n_f, self.library.m, self.library.beta)
            .map_err(CliError::from_core)
    }

    /// Checks the cross-key requirements of the selected mode.
    pub fn validate(&self) -> Result<(), CliError> {
        self.network_params()?;
        self.content_library()?;
        if self.mode == Mode::Sweep {
            if self.sweep.variable.is_none() {
                return Err(CliError::config("sweep.variable", "required in sweep mode"));
            }
            if self.sweep.values.is_empty() {
                return Err(CliError::config("sweep.values", "required in sweep mode"));
            }
            if self.sweep.series_variable.is_some() && self.sweep.series_values.is_empty() {
                return Err(CliError::config(
                    "sweep.series_values",
                    "required with sweep.series_variable",
                ));
            }
            if self.sweep.series_variable.is_some()
                && self.sweep.series_variable == self.sweep.variable
            {
                return Err(CliError::config(
                    "sweep.series_variable",
                    "must differ from sweep.variable",
                ));
            }
        }
        if !(self.optimize.search_tol > 0.0) {
            return Err(CliError::config("optimize.search_tol", "must be > 0"));
        }
        if !(self.optimize.suboptimal_q_factor > 0.0 && self.optimize.suboptimal_q_factor < 1.0) {
            return Err(CliError::config(
                "optimize.suboptimal_q_factor",
                "must lie in (0, 1)",
            ));
        }
        if self.optimize.histogram_bins == 0 {
            return Err(CliError::config(
                "optimize.histogram_bins",
                "must be at least 1",
            ));
        }
        let needs_sim =
            self.mode == Mode::Simulate || (self.mode == Mode::Sweep && self.sweep.simulate);
        if needs_sim {
            let params = self.network_params()?;
            self.sim.validate(&params).map_err(|e| {
                let key = match &e {
                    cachesim_core::Error::InvalidParameter {
                        name: "window_radius",
                        ..
                    } => "sim.window_radius_m",
                    cachesim_core::Error::InvalidParameter { name: "trials", .. } => "sim.trials",
                    _ => "sim.fading_draws_per_trial",
                };
                CliError::config(key, e.to_string())
            })?;
        }
        Ok(())
    }
}

//! Experiment configuration: a flat `key = value` text format with section
//! headers, one experiment per file. The same serializer produces the
//! `params.echo` emitted next to every run, so an echo file is itself a
//! valid configuration that reproduces the run byte for byte.
//!
//! The parser is strict — unknown sections or keys, duplicates, non-finite
//! numbers and malformed lists are all rejected — and must never panic,
//! whatever the input.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::market::DemandCurve;
use crate::{Error, Result};

/// Execution mode of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Monte Carlo simulation of the full population.
    Simulate,
    /// Deterministic price ODE only.
    PriceOde,
    /// Scaled-limit moment ODEs and lognormal profiles only.
    FokkerPlanck,
    /// Everything above plus histograms, Lorenz curves and fit metrics.
    Compare,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "price-ode" => Ok(Mode::PriceOde),
            "fokker-planck" => Ok(Mode::FokkerPlanck),
            "compare" => Ok(Mode::Compare),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected simulate, price-ode, fokker-planck or compare)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::PriceOde => "price-ode",
            Mode::FokkerPlanck => "fokker-planck",
            Mode::Compare => "compare",
        }
    }
}

/// A fully resolved experiment description.
///
/// `sigma_rel` is the return-noise standard deviation relative to the
/// initial price; the engine multiplies by `s0` once at startup.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub r: f64,
    pub dividend: f64,
    pub zeta: f64,
    pub sigma_rel: f64,
    pub n_pc: f64,
    pub n_agents: usize,
    pub steps: usize,
    pub curve: DemandCurve,
    pub s0: f64,
    pub bonds0: f64,
    pub seeds: Vec<u64>,
    pub snapshot_times: Vec<usize>,
    pub mode: Mode,
    pub dt: f64,
    pub out: Option<String>,
}

impl ExperimentConfig {
    /// Domain validation beyond what parsing can check structurally.
    pub fn validate(&self) -> Result<()> {
        self.model_params(0).validate()?;
        if self.s0 <= 0.0 || !self.s0.is_finite() {
            return Err(Error::Config(format!("s0 = {} must be > 0", self.s0)));
        }
        if self.bonds0 < 0.0 || !self.bonds0.is_finite() {
            return Err(Error::Config(format!("bonds0 = {} must be >= 0", self.bonds0)));
        }
        if self.dt <= 0.0 || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt = {} must be > 0", self.dt)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(&t) = self.snapshot_times.iter().find(|&&t| t > self.steps) {
            return Err(Error::Config(format!(
                "snapshot time {t} exceeds steps = {}",
                self.steps
            )));
        }
        Ok(())
    }

    /// Engine parameters for one seed (return noise resolved to currency).
    pub fn model_params(&self, seed: u64) -> crate::market::ModelParams {
        crate::market::ModelParams {
            r: self.r,
            dividend: self.dividend,
            zeta: self.zeta,
            sigma: self.sigma_rel * self.s0,
            n_pc: self.n_pc,
            n_agents: self.n_agents,
            steps: self.steps,
            seed,
        }
    }

    /// Parse the flat `key = value` format. Inverse of [`to_config_string`].
    ///
    /// [`to_config_string`]: ExperimentConfig::to_config_string
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut section: Option<&str> = None;
        let mut seen: HashSet<(String, String)> = HashSet::new();

        let mut r = None;
        let mut dividend = None;
        let mut zeta = None;
        let mut sigma_rel = None;
        let mut n_pc = None;
        let mut n_agents = None;
        let mut steps = None;
        let mut kind: Option<String> = None;
        let mut c = None;
        let mut c1 = None;
        let mut c2 = None;
        let mut mode = None;
        let mut s0 = None;
        let mut bonds0 = None;
        let mut seeds = None;
        let mut snapshot_times = None;
        let mut dt = None;
        let mut out = None;

        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name.trim() {
                    "market" => "market",
                    "curve" => "curve",
                    "experiment" => "experiment",
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )))
                    }
                });
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value` or `[section]`",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let Some(section) = section else {
                return Err(Error::Config(format!(
                    "line {}: `{key}` appears before any [section] header",
                    lineno + 1
                )));
            };
            if !seen.insert((section.to_string(), key.to_string())) {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}` in [{section}]",
                    lineno + 1
                )));
            }
            match (section, key) {
                ("market", "r") => r = Some(parse_f64(key, value)?),
                ("market", "dividend") => dividend = Some(parse_f64(key, value)?),
                ("market", "zeta") => zeta = Some(parse_f64(key, value)?),
                ("market", "sigma_rel") => sigma_rel = Some(parse_f64(key, value)?),
                ("market", "shares_per_agent") => n_pc = Some(parse_f64(key, value)?),
                ("market", "agents") => n_agents = Some(parse_usize(key, value)?),
                ("market", "steps") => steps = Some(parse_usize(key, value)?),
                ("curve", "kind") => kind = Some(value.to_string()),
                ("curve", "c") => c = Some(parse_f64(key, value)?),
                ("curve", "c1") => c1 = Some(parse_f64(key, value)?),
                ("curve", "c2") => c2 = Some(parse_f64(key, value)?),
                ("experiment", "mode") => mode = Some(Mode::parse(value)?),
                ("experiment", "s0") => s0 = Some(parse_f64(key, value)?),
                ("experiment", "bonds0") => bonds0 = Some(parse_f64(key, value)?),
                ("experiment", "seeds") => seeds = Some(parse_list::<u64>(key, value)?),
                ("experiment", "snapshot_times") => {
                    snapshot_times = Some(parse_list::<usize>(key, value)?)
                }
                ("experiment", "dt") => dt = Some(parse_f64(key, value)?),
                ("experiment", "out") => out = Some(value.to_string()),
                (section, key) => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{key}` in [{section}]",
                        lineno + 1
                    )))
                }
            }
        }

        let curve = match kind.as_deref() {
            Some("constant") => {
                if c1.is_some() || c2.is_some() {
                    return Err(Error::Config(
                        "curve kind `constant` takes only `c`, not c1/c2".into(),
                    ));
                }
                DemandCurve::constant(require(c, "curve.c")?)
                    .map_err(|e| Error::Config(e.to_string()))?
            }
            Some("exponential-decay") => {
                if c.is_some() {
                    return Err(Error::Config(
                        "curve kind `exponential-decay` takes c1/c2, not `c`".into(),
                    ));
                }
                DemandCurve::exponential_decay(require(c1, "curve.c1")?, require(c2, "curve.c2")?)
                    .map_err(|e| Error::Config(e.to_string()))?
            }
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown curve kind `{other}` (expected constant or exponential-decay)"
                )))
            }
            None => return Err(Error::Config("missing key curve.kind".into())),
        };

        let steps = require(steps, "market.steps")?;
        Ok(ExperimentConfig {
            r: require(r, "market.r")?,
            dividend: require(dividend, "market.dividend")?,
            zeta: require(zeta, "market.zeta")?,
            sigma_rel: require(sigma_rel, "market.sigma_rel")?,
            n_pc: require(n_pc, "market.shares_per_agent")?,
            n_agents: require(n_agents, "market.agents")?,
            steps,
            curve,
            s0: require(s0, "experiment.s0")?,
            bonds0: require(bonds0, "experiment.bonds0")?,
            seeds: require(seeds, "experiment.seeds")?,
            snapshot_times: snapshot_times.unwrap_or_else(|| vec![steps]),
            mode: mode.unwrap_or(Mode::Simulate),
            dt: dt.unwrap_or(0.1),
            out,
        })
    }

    /// Serialize with 17 significant digits so parsing the result recovers
    /// every float bit-exactly.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[market]");
        let _ = writeln!(s, "r = {}", fmt_f64(self.r));
        let _ = writeln!(s, "dividend = {}", fmt_f64(self.dividend));
        let _ = writeln!(s, "zeta = {}", fmt_f64(self.zeta));
        let _ = writeln!(s, "sigma_rel = {}", fmt_f64(self.sigma_rel));
        let _ = writeln!(s, "shares_per_agent = {}", fmt_f64(self.n_pc));
        let _ = writeln!(s, "agents = {}", self.n_agents);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s);
        let _ = writeln!(s, "[curve]");
        match self.curve {
            DemandCurve::Constant { c } => {
                let _ = writeln!(s, "kind = constant");
                let _ = writeln!(s, "c = {}", fmt_f64(c));
            }
            DemandCurve::ExponentialDecay { c1, c2 } => {
                let _ = writeln!(s, "kind = exponential-decay");
                let _ = writeln!(s, "c1 = {}", fmt_f64(c1));
                let _ = writeln!(s, "c2 = {}", fmt_f64(c2));
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        let _ = writeln!(s, "s0 = {}", fmt_f64(self.s0));
        let _ = writeln!(s, "bonds0 = {}", fmt_f64(self.bonds0));
        let _ = writeln!(s, "seeds = {}", join(&self.seeds));
        let _ = writeln!(s, "snapshot_times = {}", join(&self.snapshot_times));
        let _ = writeln!(s, "dt = {}", fmt_f64(self.dt));
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {out}");
        }
        s
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly on re-parse.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn require<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing key {key}")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Config(format!("`{key}` must be a finite number, got `{value}`"))),
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("`{key}` must be a nonnegative integer, got `{value}`")))
}

/// Comma-separated list; the empty string is the empty list.
pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("`{key}`: bad list item `{item}`")))
        })
        .collect()
}

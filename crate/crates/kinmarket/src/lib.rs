//! Simulation and analysis toolkit for a kinetic single-stock market.
//!
//! A population of agents splits its wealth between a riskless bond paying a
//! rate `r` per step and a single stock paying a dividend `D` per share. The
//! invested fraction follows a demand curve `mu(S)` (non-increasing in the
//! price), the stock price clears so that total demand matches the fixed
//! share supply, and the per-agent wealth update is
//!
//! ```text
//! w' = w (1 + r) + gamma w (x(S', eta) - r),      x = (S' - S + D + eta) / S
//! ```
//!
//! with portfolio noise `xi` (so `gamma = mu(S) + xi`) and return noise
//! `eta`, both truncated so wealth stays nonnegative.
//!
//! The crate provides:
//!
//! * [`market`] — domain types, demand curves and truncated-noise sampling;
//! * [`price`] — the g-transform, implicit future-price equation, market
//!   clearance, the deterministic price ODE and growth envelopes;
//! * [`kinetic`] — the Monte Carlo engine stepping the full population with
//!   counter-based per-agent random streams (bit-reproducible in parallel);
//! * [`fokker_planck`] — the small-rate diffusion limit: drift/diffusion
//!   coefficients, moment ODEs and the closed-form lognormal profile;
//! * [`analysis`] — moments, histograms, Lorenz curves, Gini coefficients
//!   and a Kolmogorov-Smirnov distance against a lognormal;
//! * [`experiment`] — configuration-driven experiment runner behind the
//!   `kinmarket` binary, emitting reproducible CSV outputs.

pub mod analysis;
pub mod experiment;
pub mod fokker_planck;
pub mod kinetic;
pub mod market;
pub mod price;

use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A root-finding bracket could not be established; the demand curve
    /// most likely violates its invariants.
    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),
    /// Initial price and demand curve are inconsistent with market clearance.
    #[error("inconsistent initial state: {0}")]
    InitError(String),
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An operation that needs at least one sample got an empty ensemble.
    #[error("empty ensemble")]
    EmptyEnsemble,
    /// Lorenz/Gini statistics are undefined when total wealth is zero.
    #[error("all wealth values are zero")]
    AllZeroWealth,
    /// A log-scale operation received a sample that is not strictly positive.
    #[error("sample contains a non-positive value")]
    NonPositiveSample,
    /// Lognormal fit of a point mass (second moment equals squared mean).
    #[error("degenerate distribution: zero log-variance")]
    DegenerateDistribution,
    /// Unknown experiment preset name.
    #[error("unknown preset `{0}` (expected test1, test2 or test3)")]
    UnknownPreset(String),
    /// Malformed or inconsistent experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Filesystem failure while reading configuration or writing outputs.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

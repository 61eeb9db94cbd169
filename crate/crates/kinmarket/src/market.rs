//! Domain types, demand curves and truncated-noise sampling.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Model parameters shared by the Monte Carlo engine and the deterministic
/// solvers.
///
/// `n_pc` is the number of shares *per agent*; the clearance relation used
/// throughout is `S * n_pc = mu(S) * mean_wealth`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Bond interest rate per market iteration (>= 0).
    pub r: f64,
    /// Dividend per share per iteration, in currency (>= 0).
    pub dividend: f64,
    /// Standard deviation of the portfolio-fraction noise xi (>= 0).
    pub zeta: f64,
    /// Standard deviation of the return noise eta, in currency (>= 0).
    pub sigma: f64,
    /// Shares per agent (> 0).
    pub n_pc: f64,
    /// Number of agents (>= 1).
    pub n_agents: usize,
    /// Number of market iterations to simulate.
    pub steps: usize,
    /// Seed of the counter-based noise streams.
    pub seed: u64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.r < 0.0 || !self.r.is_finite() {
            return Err(Error::InvalidParameter(format!("r = {} must be >= 0", self.r)));
        }
        if self.dividend < 0.0 || !self.dividend.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dividend = {} must be >= 0",
                self.dividend
            )));
        }
        if self.zeta < 0.0 || !self.zeta.is_finite() {
            return Err(Error::InvalidParameter(format!("zeta = {} must be >= 0", self.zeta)));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma = {} must be >= 0",
                self.sigma
            )));
        }
        if self.n_pc <= 0.0 || !self.n_pc.is_finite() {
            return Err(Error::InvalidParameter(format!("n_pc = {} must be > 0", self.n_pc)));
        }
        if self.n_agents == 0 {
            return Err(Error::InvalidParameter("n_agents must be >= 1".into()));
        }
        Ok(())
    }
}

/// Optimal invested fraction mu(S) as a function of the stock price.
///
/// Both variants are non-increasing with values in (0, 1) for S > 0, which
/// is what the price equations rely on (`ExponentialDecay` touches 1 only
/// at S = 0 exactly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DemandCurve {
    /// Constant investment rule mu(S) = c, c in (0, 1).
    Constant { c: f64 },
    /// Monotone decreasing exponential law mu(S) = c1 + (1 - c1) e^{-c2 S},
    /// decaying from 1 at S = 0 towards the floor c1 in (0, 1).
    ExponentialDecay { c1: f64, c2: f64 },
}

impl DemandCurve {
    pub fn constant(c: f64) -> Result<Self> {
        if c <= 0.0 || c >= 1.0 || c.is_nan() {
            return Err(Error::InvalidParameter(format!("constant mu = {c} must lie in (0, 1)")));
        }
        Ok(DemandCurve::Constant { c })
    }

    pub fn exponential_decay(c1: f64, c2: f64) -> Result<Self> {
        if c1 <= 0.0 || c1 >= 1.0 || c1.is_nan() {
            return Err(Error::InvalidParameter(format!("c1 = {c1} must lie in (0, 1)")));
        }
        if c2 <= 0.0 || !c2.is_finite() {
            return Err(Error::InvalidParameter(format!("c2 = {c2} must be > 0")));
        }
        Ok(DemandCurve::ExponentialDecay { c1, c2 })
    }

    /// Evaluate mu(S).
    pub fn mu(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match *self {
            DemandCurve::Constant { c } => c,
            DemandCurve::ExponentialDecay { c1, c2 } => c1 + (1.0 - c1) * (-c2 * s).exp(),
        }
    }

    /// Exact analytic derivative d mu / d S, always <= 0.
    pub fn mu_deriv(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match *self {
            DemandCurve::Constant { .. } => 0.0,
            DemandCurve::ExponentialDecay { c1, c2 } => -c2 * (1.0 - c1) * (-c2 * s).exp(),
        }
    }
}

/// Wealth sample of the whole population: the particle representation of
/// the wealth distribution f(w, t). Negative wealth is not allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentEnsemble {
    wealth: Vec<f64>,
}

impl AgentEnsemble {
    /// Build an ensemble from per-agent wealth values.
    pub fn from_wealth(wealth: Vec<f64>) -> Result<Self> {
        if wealth.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if wealth.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "ensemble wealth must be finite and nonnegative".into(),
            ));
        }
        Ok(AgentEnsemble { wealth })
    }

    /// Uniform ensemble of `n` agents each holding `w0`.
    pub fn uniform(n: usize, w0: f64) -> Result<Self> {
        Self::from_wealth(vec![w0; n])
    }

    pub fn wealth(&self) -> &[f64] {
        &self.wealth
    }

    pub(crate) fn wealth_mut(&mut self) -> &mut [f64] {
        &mut self.wealth
    }

    pub fn len(&self) -> usize {
        self.wealth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wealth.is_empty()
    }
}

/// Market snapshot after a given number of iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    /// Step index (0 = initial state).
    pub t: usize,
    /// Clearing stock price.
    pub s: f64,
    /// First moment of the wealth sample.
    pub mean_w: f64,
    /// Second moment of the wealth sample.
    pub second_w: f64,
    /// Realized average invested fraction; mu(S0) in the initial state.
    pub mean_gamma: f64,
}

/// Zero-mean Gaussian with standard deviation `std`, rejection-sampled into
/// the symmetric interval [-bound, bound]. The symmetric support preserves
/// the zero mean; clipping instead would pile mass on the boundary and bias
/// the variance.
fn truncated_normal<R: Rng + ?Sized>(std: f64, bound: f64, rng: &mut R) -> f64 {
    if std == 0.0 || bound <= 0.0 {
        return 0.0;
    }
    loop {
        let x: f64 = rng.sample::<f64, _>(StandardNormal) * std;
        if x.abs() <= bound {
            return x;
        }
    }
}

/// Draw a realized invested fraction gamma = mu(S) + xi.
///
/// `xi` is a zero-mean Gaussian with standard deviation `zeta` truncated to
/// [-z, z] with z = min(mu(S), 1 - mu(S)), so the result always lies in
/// [0, 1]. With `zeta = 0` this returns mu(S) exactly.
pub fn sample_gamma<R: Rng + ?Sized>(curve: &DemandCurve, s: f64, zeta: f64, rng: &mut R) -> f64 {
    let mu = curve.mu(s);
    let z = mu.min(1.0 - mu);
    mu + truncated_normal(zeta, z, rng)
}

/// Draw a return perturbation eta: zero-mean Gaussian with standard
/// deviation `sigma` truncated to [-d, d], d = S' + D. The support is the
/// widest one keeping updated wealth nonnegative. With `sigma = 0` this
/// returns 0 exactly.
pub fn sample_eta<R: Rng + ?Sized>(s_next: f64, dividend: f64, sigma: f64, rng: &mut R) -> f64 {
    truncated_normal(sigma, s_next + dividend, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test2_curve() -> DemandCurve {
        let c2 = ((1.0 - 0.2f64) / (0.5 - 0.2)).ln() / 50.0;
        DemandCurve::exponential_decay(0.2, c2).unwrap()
    }

    #[test]
    fn mu_constant_ignores_price() {
        let c = DemandCurve::constant(0.5).unwrap();
        assert_eq!(c.mu(123.0), 0.5);
        assert_eq!(c.mu(0.0), 0.5);
    }

    #[test]
    fn mu_exponential_hits_half_at_50() {
        let c = test2_curve();
        assert!((c.mu(50.0) - 0.5).abs() < 1e-14);
        // Far limit: the exponential term vanishes and only the floor is left.
        assert!((c.mu(1e9) - 0.2).abs() < 1e-14);
    }

    #[test]
    fn mu_deriv_matches_analytic_values() {
        let c = test2_curve();
        let c2 = ((0.8f64) / 0.3).ln() / 50.0;
        assert_eq!(DemandCurve::constant(0.5).unwrap().mu_deriv(7.0), 0.0);
        // e^{-c2*50} = 0.375 by construction, so mu'(50) = -c2 * 0.8 * 0.375.
        assert!((c.mu_deriv(50.0) - (-c2 * 0.3)).abs() < 1e-15);
        assert!((c.mu_deriv(0.0) - (-c2 * 0.8)).abs() < 1e-15);
        assert!((c.mu_deriv(50.0) - (-0.005885)).abs() < 1e-6);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(DemandCurve::constant(0.0).is_err());
        assert!(DemandCurve::constant(1.0).is_err());
        assert!(DemandCurve::exponential_decay(0.2, 0.0).is_err());
        assert!(DemandCurve::exponential_decay(1.2, 0.1).is_err());
        let mut p = ModelParams {
            r: 0.01,
            dividend: 0.015,
            zeta: 0.2,
            sigma: 15.0,
            n_pc: 10.0,
            n_agents: 10,
            steps: 1,
            seed: 0,
        };
        assert!(p.validate().is_ok());
        p.n_pc = 0.0;
        assert!(p.validate().is_err());
        p.n_pc = 10.0;
        p.r = -0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn sample_gamma_zero_noise_is_exact() {
        let c = DemandCurve::constant(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_gamma(&c, 10.0, 0.0, &mut rng), 0.5);
    }

    #[test]
    fn sample_gamma_stays_in_unit_interval_and_is_centered() {
        let c = DemandCurve::constant(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 200_000;
        let mut sum = 0.0;
        for _ in 0..m {
            let g = sample_gamma(&c, 50.0, 0.2, &mut rng);
            assert!((0.0..=1.0).contains(&g));
            sum += g;
        }
        let mean = sum / m as f64;
        // Symmetric truncation preserves the mean; 4 sigma / sqrt(M) budget.
        assert!((mean - 0.5).abs() < 4.0 * 0.2 / (m as f64).sqrt());
    }

    #[test]
    fn sample_eta_respects_support_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (s_next, d, sigma) = (50.515, 0.015, 15.0);
        let m = 200_000;
        let mut sum = 0.0;
        for _ in 0..m {
            let e = sample_eta(s_next, d, sigma, &mut rng);
            assert!(e.abs() <= s_next + d);
            sum += e;
        }
        assert!((sum / m as f64).abs() < 4.0 * sigma / (m as f64).sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        assert_eq!(sample_eta(s_next, d, 0.0, &mut rng), 0.0);
    }

    #[test]
    fn ensemble_rejects_negative_wealth() {
        assert!(AgentEnsemble::from_wealth(vec![1.0, -0.5]).is_err());
        assert_eq!(AgentEnsemble::from_wealth(vec![]).unwrap_err(), Error::EmptyEnsemble);
        assert_eq!(AgentEnsemble::uniform(3, 2.0).unwrap().wealth(), &[2.0, 2.0, 2.0]);
    }
}

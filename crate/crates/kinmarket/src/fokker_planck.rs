//! Small-rate diffusion limit of the market dynamics.
//!
//! Rescaling time as tau = r t and sending r -> 0 with sigma^2 / r -> nu and
//! D / r -> lambda turns the jump dynamics into a convection-diffusion
//! equation for the wealth density,
//!
//! ```text
//! d f / d tau = d/dw [ -A(tau) w f + (B(tau) / 2) d/dw (w^2 f) ],
//! ```
//!
//! whose first two moments obey dw̄/dtau = A w̄ and dē/dtau = (2A + B) ē and
//! whose self-similar solution is a lognormal with a(tau) = log w̄ and
//! b(tau) = log(ē / w̄²). This module evaluates the coefficients, integrates
//! the coupled moment/price system and provides the lognormal profile plus
//! the mean-conserving rescaling used to compare against Monte Carlo samples.

use crate::market::DemandCurve;
use crate::{Error, Result};

/// Parameters of the scaled limit.
#[derive(Debug, Clone, PartialEq)]
pub struct FpParams {
    /// Dividend scale lambda = D / r (currency).
    pub lambda: f64,
    /// Variance scale nu = sigma^2 / r (currency^2).
    pub nu: f64,
    /// Portfolio-fraction noise standard deviation.
    pub zeta: f64,
    pub curve: DemandCurve,
    /// Shares per agent, closing the price through the clearance relation.
    pub n_pc: f64,
}

/// Drift and diffusion of the limit equation at a given price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpCoefficients {
    /// Drift rate A per unit scaled time.
    pub drift: f64,
    /// Diffusion rate B per unit scaled time (>= 0).
    pub diffusion: f64,
    /// Price-response factor kappa in (0, 1].
    pub kappa: f64,
}

/// kappa(S) = mu (1 - mu) / (mu (1 - mu) - S mu'); equals 1 exactly when the
/// demand curve is flat and stays in (0, 1] otherwise.
pub fn kappa(curve: &DemandCurve, s: f64) -> f64 {
    let mu = curve.mu(s);
    let slope = curve.mu_deriv(s);
    if slope == 0.0 {
        return 1.0;
    }
    let m = mu * (1.0 - mu);
    m / (m - s * slope)
}

/// Evaluate A and B:
///
/// ```text
/// A = 1 + mu ((kappa - 1) + (mu (kappa - 1) + 1) / (1 - mu) * lambda / S)
/// B = (mu^2 + zeta^2) nu / S^2
/// ```
pub fn fp_coeffs(fp: &FpParams, s: f64) -> FpCoefficients {
    let mu = fp.curve.mu(s);
    let k = kappa(&fp.curve, s);
    let drift = 1.0 + mu * ((k - 1.0) + (mu * (k - 1.0) + 1.0) / (1.0 - mu) * fp.lambda / s);
    let diffusion = (mu * mu + fp.zeta * fp.zeta) * fp.nu / (s * s);
    FpCoefficients { drift, diffusion, kappa: k }
}

/// One output point of the moment integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpMomentPoint {
    pub tau: f64,
    pub s: f64,
    pub mean_w: f64,
    pub second_w: f64,
    pub drift: f64,
    pub diffusion: f64,
}

/// RK4 trajectory of the coupled system
///
/// ```text
/// dw̄/dtau = A(tau) w̄,   dē/dtau = (2 A(tau) + B(tau)) ē,
/// dS/dtau = mu / (mu - mu' S) * A(tau) * S,
/// ```
///
/// where the price equation is the clearance relation S n_pc = mu(S) w̄
/// differentiated along the mean-wealth flow, so S and w̄ stay on that
/// relation for the whole trajectory. The initial price is the clearing
/// price of `w0`.
pub fn integrate_fp_moments(
    fp: &FpParams,
    w0: f64,
    e0: f64,
    tau_end: f64,
    dtau: f64,
) -> Result<Vec<FpMomentPoint>> {
    if !w0.is_finite() || w0 <= 0.0 || e0 < w0 * w0 || e0.is_nan() || dtau <= 0.0 || dtau.is_nan() || tau_end < 0.0 || tau_end.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "integrate_fp_moments needs w0 > 0, e0 >= w0^2, dtau > 0, tau_end >= 0 \
             (got {w0}, {e0}, {dtau}, {tau_end})"
        )));
    }
    let s0 = crate::price::equilibrium_price(
        &fp.curve,
        w0,
        fp.n_pc,
        &crate::price::RootFindConfig::exact(),
    )?;

    let deriv = |y: [f64; 3]| -> [f64; 3] {
        let [s, w, e] = y;
        let c = fp_coeffs(fp, s);
        let mu = fp.curve.mu(s);
        let prefactor = mu / (mu - fp.curve.mu_deriv(s) * s);
        [prefactor * c.drift * s, c.drift * w, (2.0 * c.drift + c.diffusion) * e]
    };

    let point = |tau: f64, y: [f64; 3]| {
        let c = fp_coeffs(fp, y[0]);
        FpMomentPoint {
            tau,
            s: y[0],
            mean_w: y[1],
            second_w: y[2],
            drift: c.drift,
            diffusion: c.diffusion,
        }
    };

    let n = {
        let n = (tau_end / dtau).round() as usize;
        if (n as f64 * dtau - tau_end).abs() > 1e-9 * tau_end.max(1.0) {
            (tau_end / dtau).ceil() as usize
        } else {
            n
        }
    };
    let mut y = [s0, w0, e0];
    let mut out = Vec::with_capacity(n + 1);
    out.push(point(0.0, y));
    for k in 0..n {
        let tau = k as f64 * dtau;
        let h = if k + 1 == n { tau_end - tau } else { dtau };
        let k1 = deriv(y);
        let k2 = deriv(std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
        let k3 = deriv(std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
        let k4 = deriv(std::array::from_fn(|i| y[i] + h * k3[i]));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(point(tau + h, y));
    }
    Ok(out)
}

/// Parameters of the lognormal profile: a = log w̄, b = log(ē / w̄²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalParams {
    pub a: f64,
    pub b: f64,
}

/// Density of the self-similar profile,
/// f(w) = exp(-(log w + b/2 - a)^2 / (2 b)) / (w sqrt(2 pi b)),
/// extended by 0 at w = 0.
pub fn lognormal_pdf(p: &LognormalParams, w: f64) -> f64 {
    debug_assert!(p.b > 0.0);
    if w <= 0.0 {
        return 0.0;
    }
    let z = w.ln() + 0.5 * p.b - p.a;
    (-z * z / (2.0 * p.b)).exp() / (w * (2.0 * std::f64::consts::PI * p.b).sqrt())
}

/// Cumulative distribution of the same profile: log w is Gaussian with mean
/// a - b/2 and variance b.
pub fn lognormal_cdf(p: &LognormalParams, w: f64) -> f64 {
    debug_assert!(p.b > 0.0);
    if w <= 0.0 {
        return 0.0;
    }
    let z = (w.ln() - (p.a - 0.5 * p.b)) / (2.0 * p.b).sqrt();
    0.5 * (1.0 + libm::erf(z))
}

/// Fit the lognormal profile from the first two moments.
pub fn lognormal_from_moments(mean_w: f64, second_w: f64) -> Result<LognormalParams> {
    if !mean_w.is_finite() || mean_w <= 0.0 || second_w < mean_w * mean_w || second_w.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "lognormal_from_moments needs mean > 0 and second >= mean^2 (got {mean_w}, {second_w})"
        )));
    }
    let b = (second_w / (mean_w * mean_w)).ln();
    if b <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    Ok(LognormalParams { a: mean_w.ln(), b })
}

/// Mean-conserving rescaling v = (w̄(0) / w̄(tau)) w applied to a sample.
/// When `mean_w_tau` is the sample mean, the rescaled sample has mean
/// `mean_w_0` exactly (up to rounding); shape statistics such as the Gini
/// coefficient are untouched.
pub fn self_similar_rescale(sample: &[f64], mean_w_0: f64, mean_w_tau: f64) -> Vec<f64> {
    let factor = mean_w_0 / mean_w_tau;
    sample.iter().map(|w| w * factor).collect()
}

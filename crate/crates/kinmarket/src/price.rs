//! Price mathematics: the g-transform, the implicit future-price equation,
//! market-clearance equilibrium, average return, the deterministic price ODE
//! and the exponential growth envelopes.

use crate::market::DemandCurve;
use crate::{Error, Result};

/// Tolerance and iteration budget for the bracketed bisection solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootFindConfig {
    /// Absolute tolerance on the price, in currency.
    pub abs_tol: f64,
    /// Iteration budget, shared by bracket doubling and bisection.
    pub max_iter: usize,
}

impl Default for RootFindConfig {
    fn default() -> Self {
        RootFindConfig { abs_tol: 1e-10, max_iter: 200 }
    }
}

impl RootFindConfig {
    /// Default tolerance scaled to a typical price.
    pub fn for_price_scale(scale: f64) -> Self {
        RootFindConfig { abs_tol: 1e-10 * scale.max(1.0), max_iter: 200 }
    }

    /// Bisect down to floating-point exhaustion. Used internally by the
    /// engine so that per-step root errors stay at the ulp level and do not
    /// accumulate over hundreds of iterations.
    pub fn exact() -> Self {
        RootFindConfig { abs_tol: f64::MIN_POSITIVE, max_iter: 200 }
    }
}

/// Bisection on a strictly increasing function with f(lo) <= 0 <= f(hi).
/// Stops at `abs_tol` interval width or when the midpoint can no longer be
/// distinguished from the endpoints.
fn bisect_increasing<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    cfg: &RootFindConfig,
) -> f64 {
    for _ in 0..cfg.max_iter {
        if hi - lo <= cfg.abs_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The strictly increasing transform g(S) = (1 - mu(S)) S / mu(S).
///
/// The future price solves g(S') = g(S)(1 + r) + D, so monotonicity of `g`
/// is what makes that equation uniquely solvable.
pub fn g_transform(curve: &DemandCurve, s: f64) -> f64 {
    let mu = curve.mu(s);
    (1.0 - mu) * s / mu
}

/// Solve g(S') = g(S)(1 + r) + D for the future price S'.
///
/// Bracketed bisection: the current price is a valid lower bracket and the
/// upper bracket is found by geometric doubling. S' >= S, with equality
/// exactly when r = 0 and D = 0.
pub fn future_price(
    curve: &DemandCurve,
    s: f64,
    r: f64,
    dividend: f64,
    cfg: &RootFindConfig,
) -> Result<f64> {
    if r == 0.0 && dividend == 0.0 {
        return Ok(s);
    }
    let target = g_transform(curve, s) * (1.0 + r) + dividend;
    let mut hi = s.max(1.0);
    let mut doublings = 0;
    while g_transform(curve, hi) < target {
        hi *= 2.0;
        doublings += 1;
        if doublings > cfg.max_iter || !hi.is_finite() {
            return Err(Error::BracketFailure(format!(
                "no upper bracket for future price from S = {s}"
            )));
        }
    }
    Ok(bisect_increasing(|x| g_transform(curve, x) - target, s, hi, cfg))
}

/// Clearing price: the unique S > 0 with S * n_pc = mu(S) * mean_w.
///
/// The left side is strictly increasing and the right side non-increasing,
/// so the fixed point is unique.
pub fn equilibrium_price(
    curve: &DemandCurve,
    mean_w: f64,
    n_pc: f64,
    cfg: &RootFindConfig,
) -> Result<f64> {
    if !mean_w.is_finite() || mean_w <= 0.0 || !n_pc.is_finite() || n_pc <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "equilibrium_price needs mean_w > 0 and n_pc > 0 (got {mean_w}, {n_pc})"
        )));
    }
    let excess = |x: f64| x * n_pc - curve.mu(x) * mean_w;
    // mu <= 1 makes mean_w / n_pc an upper bracket already; keep doubling
    // for robustness against future curve variants.
    let mut hi = (mean_w / n_pc).max(1.0);
    let mut doublings = 0;
    while excess(hi) < 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > cfg.max_iter || !hi.is_finite() {
            return Err(Error::BracketFailure(format!(
                "no upper bracket for clearance at mean_w = {mean_w}"
            )));
        }
    }
    Ok(bisect_increasing(excess, 0.0, hi, cfg))
}

/// Expected stock return over one step: x̄(S') = (S' - S + D) / S.
pub fn avg_return(s: f64, s_next: f64, dividend: f64) -> f64 {
    (s_next - s + dividend) / s
}

/// Right-hand side of the deterministic price equation
///
/// ```text
/// dS/dt = mu / (mu - mu' S) * ((1 - mu) r + mu x̄(S')) * S
/// ```
///
/// with S' the implicit future price for the current S.
pub fn price_ode_rhs(curve: &DemandCurve, s: f64, r: f64, dividend: f64) -> Result<f64> {
    let cfg = RootFindConfig::exact();
    let s_next = future_price(curve, s, r, dividend, &cfg)?;
    let mu = curve.mu(s);
    let prefactor = mu / (mu - curve.mu_deriv(s) * s);
    Ok(prefactor * ((1.0 - mu) * r + mu * avg_return(s, s_next, dividend)) * s)
}

/// Classical fixed-step RK4 trajectory of the price equation, sampled at
/// every step (the first entry is `(0, s0)`). One market iteration is one
/// unit of `t`, so the trajectory overlays Monte Carlo paths directly.
pub fn integrate_price_ode(
    curve: &DemandCurve,
    s0: f64,
    r: f64,
    dividend: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    if !s0.is_finite() || s0 <= 0.0 || !dt.is_finite() || dt <= 0.0 || t_end < 0.0 || t_end.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "integrate_price_ode needs s0 > 0, dt > 0, t_end >= 0 (got {s0}, {dt}, {t_end})"
        )));
    }
    let n = (t_end / dt).round() as usize;
    let n = if (n as f64 * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        (t_end / dt).ceil() as usize
    } else {
        n
    };
    let mut out = Vec::with_capacity(n + 1);
    let mut s = s0;
    out.push((0.0, s));
    for k in 0..n {
        let t = k as f64 * dt;
        let h = if (k + 1) == n { t_end - t } else { dt };
        let k1 = price_ode_rhs(curve, s, r, dividend)?;
        let k2 = price_ode_rhs(curve, s + 0.5 * h * k1, r, dividend)?;
        let k3 = price_ode_rhs(curve, s + 0.5 * h * k2, r, dividend)?;
        let k4 = price_ode_rhs(curve, s + h * k3, r, dividend)?;
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push((t + h, s));
    }
    Ok(out)
}

/// Exponential envelopes (w0 e^{M t}, S0 e^{M t}) with
/// M = r + D / (S0 (1 - mu(S0))). Mean wealth and price never exceed these.
pub fn growth_envelope(
    curve: &DemandCurve,
    s0: f64,
    w0: f64,
    r: f64,
    dividend: f64,
    t: f64,
) -> (f64, f64) {
    let m = r + dividend / (s0 * (1.0 - curve.mu(s0)));
    (w0 * (m * t).exp(), s0 * (m * t).exp())
}

/// Closed-form mean wealth under a constant investment rule:
/// w(t) = w0 e^{r t} + (e^{r t} - 1) n_pc D / (1 - C).
pub fn constant_mu_wealth(c: f64, w0: f64, n_pc: f64, dividend: f64, r: f64, t: f64) -> f64 {
    let growth = (r * t).exp();
    w0 * growth + (growth - 1.0) * n_pc * dividend / (1.0 - c)
}

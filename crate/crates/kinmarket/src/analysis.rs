//! Statistical diagnostics on wealth samples: moments, histograms, Lorenz
//! curves, Gini coefficients and a Kolmogorov-Smirnov distance against a
//! fitted lognormal.

use crate::fokker_planck::{lognormal_cdf, LognormalParams};
use crate::{Error, Result};

/// Cumulative wealth share held by the poorest fraction of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzCurve {
    /// (population fraction F, wealth fraction L) pairs, ascending in F,
    /// from exactly (0, 0) to exactly (1, 1), with L(F) <= F throughout.
    pub points: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Gini coefficient 1 - 2 * integral of L dF by the trapezoid rule on
    /// the stored grid.
    pub fn gini_trapezoid(&self) -> f64 {
        let mut area = 0.0;
        for pair in self.points.windows(2) {
            let (f0, l0) = pair[0];
            let (f1, l1) = pair[1];
            area += 0.5 * (l0 + l1) * (f1 - f0);
        }
        1.0 - 2.0 * area
    }
}

/// Arithmetic mean and mean of squares of the sample.
pub fn sample_moments(wealth: &[f64]) -> Result<(f64, f64)> {
    if wealth.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = wealth.len() as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &w in wealth {
        sum += w;
        sum_sq += w * w;
    }
    Ok((sum / n, sum_sq / n))
}

fn sorted_nonnegative(wealth: &[f64]) -> Result<Vec<f64>> {
    if wealth.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if wealth.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidParameter(
            "inequality statistics need finite nonnegative wealth".into(),
        ));
    }
    let mut sorted = wealth.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    if *sorted.last().unwrap() == 0.0 {
        return Err(Error::AllZeroWealth);
    }
    Ok(sorted)
}

/// Gini coefficient from the sorted-sample identity
/// G = 2 sum_i i w_(i) / (N sum w) - (N + 1) / N, with ranks i = 1..N.
pub fn gini(wealth: &[f64]) -> Result<f64> {
    let sorted = sorted_nonnegative(wealth)?;
    let n = sorted.len() as f64;
    let mut total = 0.0;
    let mut ranked = 0.0;
    for (i, &w) in sorted.iter().enumerate() {
        total += w;
        ranked += (i + 1) as f64 * w;
    }
    Ok(2.0 * ranked / (n * total) - (n + 1.0) / n)
}

/// Lorenz curve sampled on `grid_size` even population-fraction intervals
/// (`grid_size + 1` points). Between order statistics the cumulative wealth
/// is interpolated linearly, and the endpoints are exact.
pub fn lorenz_curve(wealth: &[f64], grid_size: usize) -> Result<LorenzCurve> {
    if grid_size == 0 {
        return Err(Error::InvalidParameter("lorenz_curve needs grid_size >= 1".into()));
    }
    let sorted = sorted_nonnegative(wealth)?;
    let n = sorted.len();
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    let mut run = 0.0;
    for &w in &sorted {
        run += w;
        cumulative.push(run);
    }
    let total = run;

    let mut points = Vec::with_capacity(grid_size + 1);
    points.push((0.0, 0.0));
    for j in 1..grid_size {
        let f = j as f64 / grid_size as f64;
        let pos = f * n as f64;
        let idx = pos.floor() as usize;
        let frac = pos - idx as f64;
        let cum = if idx >= n {
            total
        } else {
            cumulative[idx] + frac * sorted[idx]
        };
        points.push((f, cum / total));
    }
    points.push((1.0, 1.0));
    Ok(LorenzCurve { points })
}

/// Density histogram: `sum(density * bin_width) = 1`. With `log_axis` the
/// bins are uniform in log w (so every sample must be positive) and the
/// reported centers are geometric midpoints; widths stay linear so the
/// histogram overlays a density in w directly.
pub fn histogram(wealth: &[f64], bins: usize, log_axis: bool) -> Result<Vec<(f64, f64)>> {
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs bins >= 1".into()));
    }
    if wealth.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if log_axis && wealth.iter().any(|w| *w <= 0.0) {
        return Err(Error::NonPositiveSample);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &w in wealth {
        lo = lo.min(w);
        hi = hi.max(w);
    }
    // Degenerate sample: give the single spike a unit-width box.
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
        if log_axis {
            lo = lo.max(hi * 1e-12);
        }
    }

    let edge = |k: usize| -> f64 {
        let t = k as f64 / bins as f64;
        if log_axis {
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        } else {
            lo + t * (hi - lo)
        }
    };
    let mut counts = vec![0usize; bins];
    for &w in wealth {
        let t = if log_axis {
            (w.ln() - lo.ln()) / (hi.ln() - lo.ln())
        } else {
            (w - lo) / (hi - lo)
        };
        let k = ((t * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = wealth.len() as f64;
    let mut out = Vec::with_capacity(bins);
    for (k, &count) in counts.iter().enumerate() {
        let (a, b) = (edge(k), edge(k + 1));
        let center = if log_axis { (a * b).sqrt() } else { 0.5 * (a + b) };
        out.push((center, count as f64 / (n * (b - a))));
    }
    Ok(out)
}

/// Kolmogorov-Smirnov distance between the empirical distribution of a
/// positive sample and a lognormal profile.
pub fn ks_distance(wealth: &[f64], p: &LognormalParams) -> Result<f64> {
    if wealth.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if wealth.iter().any(|w| *w <= 0.0 || !w.is_finite()) {
        return Err(Error::NonPositiveSample);
    }
    if p.b <= 0.0 || p.b.is_nan() {
        return Err(Error::DegenerateDistribution);
    }
    let mut sorted = wealth.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &w) in sorted.iter().enumerate() {
        let cdf = lognormal_cdf(p, w);
        sup = sup.max((cdf - i as f64 / n).abs());
        sup = sup.max(((i + 1) as f64 / n - cdf).abs());
    }
    Ok(sup)
}

//! Goodness-of-fit and fitting helpers shared by the verification engine.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    // The alternating series converges slowly here, and the tail is 1 to
    // within 1e-10.
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' small-sample correction.
fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_survival((root + 0.12 + 0.11 / root) * statistic)
}

fn sorted(data: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidInput(
            "KS test needs a non-empty sample".into(),
        ));
    }
    if data.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("KS test sample contains NaN".into()));
    }
    let mut v = data.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS test of `data` against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<KsResult> {
    let xs = sorted(data)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let xa = sorted(a)?;
    let xb = sorted(b)?;
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    })
}

/// CDF of `N(0, variance)`.
pub fn normal_cdf(x: f64, variance: f64) -> f64 {
    let z = x / (2.0 * variance).sqrt();
    // erfc is accurate for positive arguments; reflect the upper half.
    if z <= 0.0 {
        0.5 * erfc(-z)
    } else {
        1.0 - 0.5 * erfc(z)
    }
}

/// Sample mean and unbiased variance.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

/// Straight-line fit `y ≈ intercept + slope·x` minimizing `Σ w_i r_i²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
}

pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::dims(x.len(), y.len().min(w.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(
            "a line fit needs at least two points".into(),
        ));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += w[i] * (x[i] - mx).powi(2);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if sxx.is_nan() || sxx <= 0.0 {
        return Err(Error::NumericalFailure(
            "degenerate abscissae in line fit".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        intercept: my - slope * mx,
        slope,
    })
}

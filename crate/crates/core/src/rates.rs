//! Rate functions of the form `-½ log det(Id - AA*)`.
//!
//! Infinite matrices only ever appear through finitely supported truncations
//! (a [`ColumnList`] or a finite square block). Partial rates of nested
//! truncations are non-decreasing, so every partial value is a certified lower
//! bound and the last one is exact once the support is exhausted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::configurations::{config_to_matrix, PointConfiguration};
use crate::error::{Error, Result};
use crate::linalg::{
    gram, log_det_complement, operator_norm, ColumnList, DenseMatrix, SymmetricPSD, BOUNDARY_LOWER,
};

/// Upper end of the band around `‖AA*‖ = 1` reported as "boundary".
pub const BOUNDARY_UPPER: f64 = 1e-10;

/// Slack allowed when certifying monotonicity of partial rates.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// A rate value in `[0, +∞]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct RateValue(f64);

impl RateValue {
    pub const ZERO: RateValue = RateValue(0.0);
    pub const INFINITE: RateValue = RateValue(f64::INFINITY);

    /// Clamps tiny negative roundoff to zero.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < -1e-12 {
            return Err(Error::DomainError(format!(
                "rate must be non-negative, got {value}"
            )));
        }
        Ok(RateValue(value.max(0.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for RateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "+inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

// JSON has no infinity; +∞ is written as the string "+inf".
impl Serialize for RateValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("+inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for RateValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => RateValue::new(v).map_err(serde::de::Error::custom),
            Raw::Str(s) if s == "+inf" || s == "inf" => Ok(RateValue::INFINITE),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad rate value {s:?}"))),
        }
    }
}

/// Partial rates of a nested family of truncations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub truncation_level: usize,
    pub partial_rates: Vec<RateValue>,
    /// Rate of the full object (exact for finite support).
    pub value: RateValue,
    pub converged: bool,
    /// Sum of squared entries beyond the truncation level. Diagnostic only.
    pub tail_bound: f64,
    /// `‖AA*‖` fell in `[1 - 1e-12, 1 + 1e-10]`.
    pub boundary: bool,
    /// Partial rates were non-decreasing up to [`MONOTONE_SLACK`].
    pub monotone: bool,
}

fn is_boundary(norm: f64) -> bool {
    (1.0 - BOUNDARY_LOWER..=1.0 + BOUNDARY_UPPER).contains(&norm)
}

fn rate_of_gram(s: &SymmetricPSD) -> RateValue {
    let ld = log_det_complement(s);
    if ld == f64::NEG_INFINITY {
        RateValue::INFINITE
    } else {
        RateValue((-0.5 * ld).max(0.0))
    }
}

fn certify_monotone(rates: &[RateValue]) -> bool {
    rates.windows(2).all(|w| {
        w[1].is_infinite() || (!w[0].is_infinite() && w[1].value() >= w[0].value() - MONOTONE_SLACK)
    })
}

/// `I_ℓ(A) = -½ log det(Id - AA*)` for a `k × ℓ` matrix, `+∞` once `‖AA*‖ ≥ 1`.
pub fn rate_finite(a: &DenseMatrix) -> RateValue {
    rate_of_gram(&gram(a))
}

/// Rate of a finitely supported `k × ∞` matrix with the partial rates
/// `I_ℓ(p_ℓ(A))` for `ℓ = 1..min(len, max_level)`.
///
/// `converged` is set when every column was used or the last increment is
/// at most `tol`.
pub fn rate_truncated(
    a: &ColumnList,
    max_level: usize,
    tol: f64,
) -> Result<(RateValue, TruncationReport)> {
    let level = a.len().min(max_level);
    let k = a.dim();
    let mut upper = vec![0.0; k * k];
    let mut partial_rates = Vec::with_capacity(level);
    let mut infinite = false;
    for c in a.columns().iter().take(level) {
        for i in 0..k {
            for j in i..k {
                upper[i * k + j] += c[i] * c[j];
            }
        }
        if infinite {
            partial_rates.push(RateValue::INFINITE);
            continue;
        }
        let s = SymmetricPSD::from_upper(k, upper.clone())?;
        let r = rate_of_gram(&s);
        infinite = r.is_infinite();
        partial_rates.push(r);
    }
    let full = a.gram()?;
    let full_norm = operator_norm(&full);
    let value = rate_of_gram(&full);
    let tail_bound: f64 = a
        .columns()
        .iter()
        .skip(level)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>())
        .sum();
    let last = partial_rates.last().copied().unwrap_or(RateValue::ZERO);
    let converged = level == a.len()
        || match (partial_rates.len(), partial_rates.iter().rev().nth(1)) {
            (n, Some(prev)) if n >= 2 => !last.is_infinite() && last.value() - prev.value() <= tol,
            _ => false,
        };
    let reported = if level == a.len() { value } else { last };
    let report = TruncationReport {
        truncation_level: level,
        monotone: certify_monotone(&partial_rates),
        partial_rates,
        value: reported,
        converged,
        tail_bound,
        boundary: is_boundary(full_norm),
    };
    Ok((reported, report))
}

/// Partial rates `-½ log det(Id - M_k M_k*)` over the leading `k`-row blocks
/// of a square block `M`, for `k = 1..k_max`. `value` is the rate of the full
/// block.
pub fn rate_orthogonal_truncated(m: &DenseMatrix, k_max: usize) -> Result<TruncationReport> {
    if m.rows() != m.cols() {
        return Err(Error::DomainError(format!(
            "expected a square block, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if k_max == 0 || k_max > m.rows() {
        return Err(Error::DomainError(format!(
            "k_max must lie in 1..={}",
            m.rows()
        )));
    }
    let full = gram(m);
    let mut partial_rates = Vec::with_capacity(k_max);
    let mut infinite = false;
    for k in 1..=k_max {
        if infinite {
            partial_rates.push(RateValue::INFINITE);
            continue;
        }
        // The leading k×k block of M M* is M_k M_k*.
        let mut upper = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                upper[i * k + j] = full.get(i, j);
            }
        }
        let r = rate_of_gram(&SymmetricPSD::from_upper(k, upper)?);
        infinite = r.is_infinite();
        partial_rates.push(r);
    }
    let tail_bound: f64 = (k_max..m.rows())
        .map(|i| m.row(i).iter().map(|x| x * x).sum::<f64>())
        .sum();
    Ok(TruncationReport {
        truncation_level: k_max,
        monotone: certify_monotone(&partial_rates),
        value: rate_of_gram(&full),
        converged: k_max == m.rows(),
        partial_rates,
        tail_bound,
        boundary: is_boundary(operator_norm(&full)),
    })
}

/// `𝕁(μ) = -½ log det(Id - V(μ)V(μ)*)`, `+∞` on the boundary `‖V(μ)V(μ)*‖ = 1`.
pub fn rate_configuration(mu: &PointConfiguration) -> Result<RateValue> {
    let cols = config_to_matrix(mu)?;
    Ok(rate_truncated(&cols, usize::MAX, 0.0)?.0)
}

/// Rate of the projected law represented by the column matrix `a`.
pub fn rate_projected_measure(a: &ColumnList) -> Result<RateValue> {
    Ok(rate_truncated(a, usize::MAX, 0.0)?.0)
}

//! Closed-form log-densities.
//!
//! Everything is returned on the log scale: the determinant exponents grow
//! linearly in `n`, so linear-scale values overflow or underflow long before
//! the interesting range of `n`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{gram, log_det_complement, DenseMatrix, SymmetricPSD};

/// A log-density value in nats; `-∞` marks a point outside the support.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogDensity(pub f64);

impl LogDensity {
    pub const OUTSIDE: LogDensity = LogDensity(f64::NEG_INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_outside_support(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn density(self) -> f64 {
        self.0.exp()
    }
}

/// `log Γ_k(x) = k(k-1)/4 · log π + Σ_{i=1}^k log Γ(x - (i-1)/2)`.
pub fn log_multivariate_gamma(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::DomainError("k must be positive".into()));
    }
    let kf = k as f64;
    if x.is_nan() || x <= (kf - 1.0) / 2.0 {
        return Err(Error::DomainError(format!(
            "multivariate gamma needs x > (k-1)/2 = {}, got {x}",
            (kf - 1.0) / 2.0
        )));
    }
    let mut s = kf * (kf - 1.0) / 4.0 * PI.ln();
    for i in 0..k {
        s += ln_gamma(x - i as f64 / 2.0);
    }
    Ok(s)
}

/// Inverted matrix-variate t density with `n_dof` degrees of freedom,
/// evaluated at the `k × m` matrix `a`:
///
/// `Γ_k((n+m+k-1)/2) / (π^{mk/2} Γ_k((n+k-1)/2)) · det(Id - AA*)^{(n-2)/2}`
/// on `‖AA*‖ < 1`.
pub fn log_inverted_t_density(a: &DenseMatrix, n_dof: usize) -> Result<LogDensity> {
    if n_dof == 0 {
        return Err(Error::DomainError(
            "degrees of freedom must be positive".into(),
        ));
    }
    let k = a.rows() as f64;
    let m = a.cols() as f64;
    let n = n_dof as f64;
    let log_det = log_det_complement(&gram(a));
    if log_det == f64::NEG_INFINITY {
        return Ok(LogDensity::OUTSIDE);
    }
    let log_norm = log_multivariate_gamma(a.rows(), (n + m + k - 1.0) / 2.0)?
        - m * k / 2.0 * PI.ln()
        - log_multivariate_gamma(a.rows(), (n + k - 1.0) / 2.0)?;
    let exponent = (n - 2.0) / 2.0;
    // 0 · (-∞) never happens here: log_det is finite on the support.
    Ok(LogDensity(log_norm + exponent * log_det))
}

/// Density of the leading `k × ell` block of a Haar `k × n` Stiefel matrix.
/// It is the inverted t law with `n - ell - k + 1` degrees of freedom, i.e.
/// `Γ_k(n/2) / (π^{kℓ/2} Γ_k((n-ℓ)/2)) · det(Id - AA*)^{(n-ℓ-k-1)/2}`.
pub fn log_corner_density(a: &DenseMatrix, k: usize, ell: usize, n: usize) -> Result<LogDensity> {
    if a.rows() != k || a.cols() != ell {
        return Err(Error::dims(
            format!("{k}x{ell}"),
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    if n < ell + k {
        return Err(Error::DomainError(format!(
            "corner density needs n ≥ ell + k, got n = {n}"
        )));
    }
    log_inverted_t_density(a, n - ell - k + 1)
}

/// `W_k(n, Id)` log-density at `s`; `-∞` unless `s` is positive definite.
pub fn log_wishart_density(s: &SymmetricPSD, k: usize, n: usize) -> Result<LogDensity> {
    if s.dim() != k {
        return Err(Error::dims(k, s.dim()));
    }
    if n < k || k == 0 {
        return Err(Error::DomainError("Wishart density needs n ≥ k ≥ 1".into()));
    }
    if s.eigenvalues().last().copied().unwrap_or(0.0) <= 0.0 {
        return Ok(LogDensity::OUTSIDE);
    }
    let (kf, nf) = (k as f64, n as f64);
    let log_det: f64 = s.eigenvalues().iter().map(|l| l.ln()).sum();
    let value = (nf - kf - 1.0) / 2.0 * log_det
        - s.trace() / 2.0
        - nf * kf / 2.0 * 2f64.ln()
        - log_multivariate_gamma(k, nf / 2.0)?;
    Ok(LogDensity(value))
}

fn check_finite_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::DomainError(format!("p must lie in [1, ∞), got {p}")));
    }
    Ok(())
}

/// `-|x|^p/p - log(2 p^{1/p} Γ(1+1/p))`.
pub fn log_p_gaussian_density(x: f64, p: f64) -> Result<f64> {
    check_finite_p(p)?;
    let log_norm = 2f64.ln() + p.ln() / p + ln_gamma(1.0 + 1.0 / p);
    Ok(-x.abs().powf(p) / p - log_norm)
}

/// Log-density of `|Z|^p` for a p-Gaussian `Z`:
/// `γ_p x^{1/p-1} e^{-x/p}` with `γ_p = (p^{1/p} Γ(1/p))^{-1}`.
pub fn log_pth_power_density(x: f64, p: f64) -> Result<f64> {
    check_finite_p(p)?;
    if x <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let log_gamma_p = -(p.ln() / p + ln_gamma(1.0 / p));
    Ok(log_gamma_p + (1.0 / p - 1.0) * x.ln() - x / p)
}

/// Variance of the p-Gaussian law: `p^{2/p} Γ(3/p) / Γ(1/p)`, and `1/3` for
/// `p = ∞` (uniform on `[-1, 1]`).
pub fn sigma_p_squared(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::DomainError(format!("p must lie in [1, ∞], got {p}")));
    }
    if p.is_infinite() {
        return Ok(1.0 / 3.0);
    }
    Ok((2.0 / p * p.ln() + ln_gamma(3.0 / p) - ln_gamma(1.0 / p)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn multivariate_gamma_examples() {
        assert!(close(
            log_multivariate_gamma(1, 3.0).unwrap(),
            2f64.ln(),
            1e-14
        ));
        assert!(close(
            log_multivariate_gamma(2, 1.5).unwrap(),
            (PI / 2.0).ln(),
            1e-14
        ));
        assert!(log_multivariate_gamma(3, 1.0).is_err());
    }

    #[test]
    fn multivariate_gamma_ratio_asymptotics() {
        // (1/n)[log Γ_k(n/2) - log Γ_k((n-ℓ)/2)] - (kℓ/2n) log(n/2) → 0
        let (k, l) = (3usize, 2usize);
        let mut prev = f64::INFINITY;
        for &n in &[1e3, 1e4, 1e5, 1e6] {
            let d = (log_multivariate_gamma(k, n / 2.0).unwrap()
                - log_multivariate_gamma(k, (n - l as f64) / 2.0).unwrap())
                / n
                - (k * l) as f64 / (2.0 * n) * (n / 2.0).ln();
            assert!(d.abs() < prev);
            prev = d.abs();
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn lanczos_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30u32 {
            fact *= n as f64;
            let rel = (ln_gamma(n as f64 + 1.0) - fact.ln()).abs() / fact.ln().max(1.0);
            assert!(rel < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn outside_support() {
        let a = DenseMatrix::from_rows(&[vec![0.8, 0.6]]).unwrap();
        assert!(log_inverted_t_density(&a, 3).unwrap().is_outside_support());
        let s = SymmetricPSD::from_matrix(&DenseMatrix::diagonal(&[1.0, 0.0])).unwrap();
        assert!(log_wishart_density(&s, 2, 4).unwrap().is_outside_support());
        assert_eq!(log_pth_power_density(0.0, 2.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn corner_density_constant() {
        let a = DenseMatrix::zeros(1, 1);
        let v = log_corner_density(&a, 1, 1, 4).unwrap().value();
        assert!(close(v, (2.0 / PI).ln(), 1e-14));
        assert!(matches!(
            log_corner_density(&a, 1, 1, 1),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn closed_form_reductions() {
        let s = SymmetricPSD::from_matrix(&DenseMatrix::diagonal(&[2.0])).unwrap();
        let v = log_wishart_density(&s, 1, 2).unwrap().value();
        assert!(close(v, ((-1f64).exp() / 2.0).ln(), 1e-14));
        assert!(close(
            log_p_gaussian_density(0.0, 2.0).unwrap(),
            -(2.0 * PI).sqrt().ln(),
            1e-14
        ));
        assert!(close(
            log_p_gaussian_density(1.0, 1.0).unwrap(),
            -1.0 - 2f64.ln(),
            1e-14
        ));
        let chi1 = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!(close(
            log_pth_power_density(1.0, 2.0).unwrap(),
            chi1.ln(),
            1e-14
        ));
    }

    #[test]
    fn sigma_p_values() {
        assert!(close(sigma_p_squared(2.0).unwrap(), 1.0, 1e-14));
        assert!(close(sigma_p_squared(1.0).unwrap(), 2.0, 1e-14));
        assert_eq!(sigma_p_squared(f64::INFINITY).unwrap(), 1.0 / 3.0);
    }
}

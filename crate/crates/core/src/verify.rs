//! Experiments that set simulated or integrated deviation probabilities
//! against the rate functions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::configurations::{Atom, PointConfiguration};
use crate::densities::{log_corner_density, sigma_p_squared};
use crate::error::{Error, Result};
use crate::linalg::{gram, norm2, operator_norm, DenseMatrix};
use crate::projections::{project_lp_ball, project_product};
use crate::quadrature::integrate;
use crate::rates::{rate_configuration, rate_finite, RateValue};
use crate::rng::{par_draws, SeededRng};
use crate::samplers::{dickey_corner, haar_stiefel, PGaussianParams};
use crate::stats::{ks_one_sample, ks_two_sample, normal_cdf, weighted_line_fit, KsResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    Quadrature,
}

/// Estimate `P[corner ∈ B_r(A)]` for the leading `k × ell` block of a Haar
/// `k × n` Stiefel matrix, over a range of `n`. The ball is in Frobenius
/// norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpExperiment {
    pub k: usize,
    pub ell: usize,
    pub target: Vec<Vec<f64>>,
    pub radius: f64,
    pub n_values: Vec<usize>,
    pub samples_per_n: usize,
    pub method: Method,
}

impl LdpExperiment {
    pub fn target_matrix(&self) -> Result<DenseMatrix> {
        let a = DenseMatrix::from_rows(&self.target)?;
        if a.rows() != self.k || a.cols() != self.ell {
            return Err(Error::dims(
                format!("{}x{}", self.k, self.ell),
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        Ok(a)
    }

    fn validate(&self) -> Result<DenseMatrix> {
        if self.k == 0 || self.ell == 0 {
            return Err(Error::InvalidInput("k and ell must be positive".into()));
        }
        let a = self.target_matrix()?;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidInput("radius must be positive".into()));
        }
        check_n_values(&self.n_values, self.k + self.ell)?;
        if self.method == Method::Quadrature && (self.k != 1 || self.ell != 1) {
            return Err(Error::InvalidInput("quadrature needs k = ell = 1".into()));
        }
        if self.method == Method::MonteCarlo && self.samples_per_n == 0 {
            return Err(Error::InvalidInput("samples_per_n must be positive".into()));
        }
        let top = operator_norm(&gram(&a)).sqrt();
        if top < 1.0 && top + self.radius > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "ball of radius {} around a target of norm {top} reaches the support boundary",
                self.radius
            )));
        }
        Ok(a)
    }
}

fn check_n_values(n_values: &[usize], min_n: usize) -> Result<()> {
    if n_values.len() < 2 {
        return Err(Error::InvalidInput(
            "n_values needs at least two entries".into(),
        ));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "n_values must be strictly increasing".into(),
        ));
    }
    if n_values[0] < min_n {
        return Err(Error::InvalidInput(format!(
            "n_values must start at n ≥ {min_n}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopePoint {
    pub n: usize,
    /// `log P̂`.
    pub log_prob: f64,
    /// Standard error of `log P̂` (zero for quadrature).
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    pub per_n: Vec<SlopePoint>,
    /// Slope of `-log P̂` against `n`.
    pub fitted_slope: f64,
    pub intercept: f64,
    pub rate_reference: RateValue,
    /// `|slope - rate| / rate`, or `|slope|` when the rate is zero.
    pub relative_gap: f64,
}

impl SlopeReport {
    fn from_points(per_n: Vec<SlopePoint>, rate_reference: RateValue) -> Result<Self> {
        let x: Vec<f64> = per_n.iter().map(|p| p.n as f64).collect();
        let y: Vec<f64> = per_n.iter().map(|p| -p.log_prob).collect();
        let weighted = per_n.iter().all(|p| p.stderr > 0.0);
        let w: Vec<f64> = per_n
            .iter()
            .map(|p| if weighted { p.stderr.powi(-2) } else { 1.0 })
            .collect();
        let fit = weighted_line_fit(&x, &y, &w)?;
        let rate = rate_reference.value();
        let relative_gap = if rate > 0.0 && rate.is_finite() {
            (fit.slope - rate).abs() / rate
        } else {
            fit.slope.abs()
        };
        Ok(Self {
            per_n,
            fitted_slope: fit.slope,
            intercept: fit.intercept,
            rate_reference,
            relative_gap,
        })
    }

    /// Plot-ready CSV with columns `n,log_prob,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,log_prob,stderr\n");
        for p in &self.per_n {
            let _ = writeln!(out, "{},{},{}", p.n, p.log_prob, p.stderr);
        }
        out
    }
}

/// `-½ log det(Id - XX*)` and its gradient `(Id - XX*)^{-1} X`.
fn rate_and_gradient(x: &DenseMatrix) -> Option<(f64, DenseMatrix)> {
    let value = rate_finite(x);
    if value.is_infinite() {
        return None;
    }
    let complement = gram(x).complement().ok()?;
    let inv = complement.inverse_sqrt().ok()?;
    let inv = inv.matmul(&inv).ok()?;
    Some((value.value(), inv.matmul(x).ok()?))
}

fn rate_or_inf(x: &DenseMatrix) -> f64 {
    rate_finite(x).value()
}

/// Projects `x` onto the closed Frobenius ball `B_r(center)`.
fn project_ball(x: &DenseMatrix, center: &DenseMatrix, r: f64) -> DenseMatrix {
    let d = x.sub(center).expect("same shape");
    let norm = d.frobenius_norm();
    if norm <= r {
        x.clone()
    } else {
        let mut y = center.clone();
        for i in 0..y.rows() {
            for j in 0..y.cols() {
                y.set(i, j, center.get(i, j) + d.get(i, j) * r / norm);
            }
        }
        y
    }
}

/// `inf { I(X) : ‖X - A‖_F ≤ r }`: a grid of step `r/50` along the segment
/// from `A` toward the origin, golden-section refinement on the best
/// bracket, then projected gradient steps.
pub fn rate_over_ball(a: &DenseMatrix, r: f64) -> RateValue {
    let norm = a.frobenius_norm();
    if norm <= r {
        return RateValue::ZERO;
    }
    let dir = a.scaled(-1.0 / norm);
    let along = |t: f64| {
        let mut x = a.clone();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                x.set(i, j, a.get(i, j) + t * dir.get(i, j));
            }
        }
        x
    };
    let steps = 50;
    let h = r / steps as f64;
    let values: Vec<f64> = (0..=steps)
        .map(|i| rate_or_inf(&along(i as f64 * h)))
        .collect();
    let best = (0..=steps)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap_or(steps);
    let (mut lo, mut hi) = (
        best.saturating_sub(1) as f64 * h,
        (best + 1).min(steps) as f64 * h,
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if rate_or_inf(&along(m1)) <= rate_or_inf(&along(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut x = along(0.5 * (lo + hi));
    let mut fx = rate_or_inf(&x);
    for _ in 0..200 {
        let Some((_, grad)) = rate_and_gradient(&x) else {
            break;
        };
        let mut step = r;
        let mut moved = false;
        while step > 1e-14 {
            let trial = project_ball(&x.sub(&grad.scaled(step)).expect("same shape"), a, r);
            let ft = rate_or_inf(&trial);
            if ft < fx - 1e-16 {
                x = trial;
                fx = ft;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let best = fx.min(values[best]);
    if best.is_finite() {
        RateValue::new(best.max(0.0)).unwrap_or(RateValue::ZERO)
    } else {
        RateValue::INFINITE
    }
}

fn feasibility_guard(rate: RateValue, n_max: usize, samples: usize) -> Result<()> {
    let budget = (samples as f64 / 10.0).ln();
    if rate.value() * n_max as f64 > budget {
        return Err(Error::InfeasibleExperiment(format!(
            "rate {} at n = {n_max} needs more than {samples} samples to see 10 hits",
            rate
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of `log P` from a hit count.
fn log_prob_from_hits(n: usize, hits: usize, samples: usize) -> Result<SlopePoint> {
    if hits == 0 {
        return Err(Error::InfeasibleExperiment(format!(
            "no hits among {samples} samples at n = {n}"
        )));
    }
    let p = hits as f64 / samples as f64;
    Ok(SlopePoint {
        n,
        log_prob: p.ln(),
        stderr: ((1.0 - p) / hits as f64).sqrt(),
    })
}

/// Counts the draws satisfying `event`.
fn count_hits<F>(rng: &mut SeededRng, samples: usize, event: F) -> Result<usize>
where
    F: Fn(&mut SeededRng) -> Result<bool> + Sync,
{
    Ok(par_draws(rng, samples, event)?
        .into_iter()
        .filter(|&h| h)
        .count())
}

/// `log ∫ c_n (1-x²)^{(n-3)/2}` over `(a-r, a+r) ∩ (-1, 1)`, shifted by the
/// peak of the integrand on the interval before integrating.
pub fn corner_log_probability(a: f64, r: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DomainError("the 1x1 corner needs n ≥ 2".into()));
    }
    let lo = (a - r).max(-1.0);
    let hi = (a + r).min(1.0);
    if lo >= hi {
        return Ok(f64::NEG_INFINITY);
    }
    if n == 2 {
        // Arcsine law; the kernel is not integrable numerically up to ±1.
        return Ok(((hi.asin() - lo.asin()) / std::f64::consts::PI).ln());
    }
    let log_c = log_corner_density(&DenseMatrix::zeros(1, 1), 1, 1, n)?.value();
    let exponent = (n as f64 - 3.0) / 2.0;
    let log_kernel = |x: f64| {
        let s = 1.0 - x * x;
        if exponent == 0.0 {
            0.0
        } else if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            exponent * s.ln()
        }
    };
    let peak_x = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else if lo > 0.0 {
        lo
    } else {
        hi
    };
    let shift = log_kernel(peak_x);
    let integral = integrate(|x| (log_kernel(x) - shift).exp(), lo, hi, 0.0, 1e-12)?;
    if integral.value.is_nan() || integral.value <= 0.0 {
        return Err(Error::NumericalFailure(
            "corner probability integral vanished".into(),
        ));
    }
    Ok(log_c + shift + integral.value.ln())
}

pub fn run_ldp_corner(rng: &mut SeededRng, exp: &LdpExperiment) -> Result<SlopeReport> {
    let a = exp.validate()?;
    let rate = rate_over_ball(&a, exp.radius);
    let per_n = match exp.method {
        Method::Quadrature => exp
            .n_values
            .iter()
            .map(|&n| {
                Ok(SlopePoint {
                    n,
                    log_prob: corner_log_probability(a.get(0, 0), exp.radius, n)?,
                    stderr: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        Method::MonteCarlo => {
            let n_max = *exp.n_values.last().expect("validated");
            feasibility_guard(rate, n_max, exp.samples_per_n)?;
            let mut points = Vec::with_capacity(exp.n_values.len());
            for &n in &exp.n_values {
                let hits = count_hits(rng, exp.samples_per_n, |r| {
                    let v = haar_stiefel(r, exp.k, n)?;
                    let corner = v.leading_cols(exp.ell)?;
                    Ok(corner.sub(&a)?.frobenius_norm() < exp.radius)
                })?;
                points.push(log_prob_from_hits(n, hits, exp.samples_per_n)?);
            }
            points
        }
    };
    SlopeReport::from_points(per_n, rate)
}

/// Whether the configuration of `v`'s columns lies in `W_{r,ρ}(target)`:
/// each `±` atom's `ρ`-ball pair holds exactly its multiplicity of columns,
/// and no column of norm above `r` lies outside those balls.
pub fn in_configuration_neighborhood(
    v: &DenseMatrix,
    target: &PointConfiguration,
    r: f64,
    rho: f64,
) -> bool {
    let mut counts = vec![0usize; target.atoms().len()];
    for j in 0..v.cols() {
        let c = v.column(j);
        let mut owner = None;
        for (i, atom) in target.atoms().iter().enumerate() {
            let minus: f64 = c
                .iter()
                .zip(&atom.point)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>();
            let plus: f64 = c
                .iter()
                .zip(&atom.point)
                .map(|(x, y)| (x + y).powi(2))
                .sum::<f64>();
            if minus.min(plus).sqrt() < rho {
                owner = Some(i);
                break;
            }
        }
        match owner {
            Some(i) => {
                counts[i] += 1;
                if counts[i] > target.atoms()[i].multiplicity {
                    return false;
                }
            }
            None => {
                if norm2(&c) > r {
                    return false;
                }
            }
        }
    }
    counts
        .iter()
        .zip(target.atoms())
        .all(|(&c, a)| c == a.multiplicity)
}

fn check_neighborhood(target: &PointConfiguration, r: f64, rho: f64) -> Result<()> {
    if !(r > 0.0 && rho > 0.0) {
        return Err(Error::InvalidInput("r and rho must be positive".into()));
    }
    let atoms: &[Atom] = target.atoms();
    for (i, a) in atoms.iter().enumerate() {
        if norm2(&a.point) <= r {
            return Err(Error::InvalidInput(format!("atom {i} has norm ≤ r")));
        }
        if norm2(&a.point) < rho {
            return Err(Error::InvalidInput(format!(
                "the ρ-balls around ±atom {i} overlap"
            )));
        }
        for b in &atoms[i + 1..] {
            let minus = a
                .point
                .iter()
                .zip(&b.point)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            let plus = a
                .point
                .iter()
                .zip(&b.point)
                .map(|(x, y)| (x + y).powi(2))
                .sum::<f64>()
                .sqrt();
            if minus.min(plus) < 2.0 * rho {
                return Err(Error::InvalidInput("atom balls are not disjoint".into()));
            }
        }
    }
    Ok(())
}

/// Monte Carlo estimate of `P[η_n ∈ W_{r,ρ}(target)]` for the column
/// configuration `η_n` of a Haar `k × n` Stiefel matrix, with the slope
/// compared against `𝕁(target)`.
pub fn run_ldp_configuration(
    rng: &mut SeededRng,
    k: usize,
    target: &PointConfiguration,
    r: f64,
    rho: f64,
    n_values: &[usize],
    samples_per_n: usize,
) -> Result<SlopeReport> {
    if target.dim() != k {
        return Err(Error::dims(k, target.dim()));
    }
    check_neighborhood(target, r, rho)?;
    check_n_values(n_values, k.max(target.pair_count()))?;
    if samples_per_n == 0 {
        return Err(Error::InvalidInput("samples_per_n must be positive".into()));
    }
    let rate = rate_configuration(target)?;
    feasibility_guard(rate, *n_values.last().expect("checked"), samples_per_n)?;
    let mut points = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let hits = count_hits(rng, samples_per_n, |g| {
            let v = haar_stiefel(g, k, n)?;
            Ok(in_configuration_neighborhood(&v, target, r, rho))
        })?;
        points.push(log_prob_from_hits(n, hits, samples_per_n)?);
    }
    SlopeReport::from_points(points, rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntryTest {
    pub row: usize,
    pub col: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DickeyReport {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    /// Degrees of freedom used for the Wishart construction.
    pub dof: usize,
    pub samples: usize,
    pub entries: Vec<EntryTest>,
}

impl DickeyReport {
    pub fn min_p_value(&self) -> f64 {
        self.entries.iter().map(|e| e.p_value).fold(1.0, f64::min)
    }
}

/// Two-sample KS comparison, entry by entry, of the leading `k × m` corner of
/// a Haar `k × n` Stiefel matrix with the Wishart construction at
/// `N = n - m - k + 1` degrees of freedom.
pub fn run_dickey_check(
    rng: &mut SeededRng,
    k: usize,
    m: usize,
    n: usize,
    samples: usize,
) -> Result<DickeyReport> {
    if k == 0 || m == 0 || n < m + k {
        return Err(Error::InvalidInput(
            "dickey check needs n ≥ m + k with k, m ≥ 1".into(),
        ));
    }
    run_dickey_check_with_dof(rng, k, m, n, n - m - k + 1, samples)
}

/// As [`run_dickey_check`] with an explicit degrees-of-freedom parameter,
/// which lets a mismatched `N` serve as a negative control.
pub fn run_dickey_check_with_dof(
    rng: &mut SeededRng,
    k: usize,
    m: usize,
    n: usize,
    dof: usize,
    samples: usize,
) -> Result<DickeyReport> {
    if k == 0 || m == 0 || n < m + k || dof == 0 || samples == 0 {
        return Err(Error::InvalidInput(
            "dickey check needs n ≥ m + k, N ≥ 1 and samples ≥ 1".into(),
        ));
    }
    let haar = par_draws(rng, samples, |r| haar_stiefel(r, k, n)?.leading_cols(m))?;
    let wishart = par_draws(rng, samples, |r| dickey_corner(r, k, m, dof))?;
    let mut entries = Vec::with_capacity(k * m);
    for i in 0..k {
        for j in 0..m {
            let a: Vec<f64> = haar.iter().map(|x| x.get(i, j)).collect();
            let b: Vec<f64> = wishart.iter().map(|x| x.get(i, j)).collect();
            let KsResult { statistic, p_value } = ks_two_sample(&a, &b)?;
            entries.push(EntryTest {
                row: i,
                col: j,
                statistic,
                p_value,
            });
        }
    }
    Ok(DickeyReport {
        k,
        m,
        n,
        dof,
        samples,
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltReport {
    pub k: usize,
    pub p: f64,
    pub n: usize,
    pub samples: usize,
    pub variance: f64,
    pub marginals: Vec<KsResult>,
}

impl CltReport {
    pub fn min_p_value(&self) -> f64 {
        self.marginals.iter().map(|e| e.p_value).fold(1.0, f64::min)
    }
}

/// KS test of each marginal of a projected `ℓ_p`-ball sample under one Haar
/// `V` against `N(0, σ_p²)`. For `p = ∞` the product law (uniform on
/// `[-1, 1]`) stands in for the cube.
pub fn run_clt_check(
    rng: &mut SeededRng,
    k: usize,
    p: f64,
    n: usize,
    samples: usize,
) -> Result<CltReport> {
    let variance = sigma_p_squared(p)?;
    let v = haar_stiefel(rng, k, n)?;
    let cloud = if p.is_infinite() {
        project_product(rng, &v, PGaussianParams::uniform(), samples)?
    } else {
        project_lp_ball(rng, &v, p, samples)?
    };
    let marginals = (0..k)
        .map(|i| ks_one_sample(&cloud.coordinate(i), |x| normal_cdf(x, variance)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CltReport {
        k,
        p,
        n,
        samples,
        variance,
        marginals,
    })
}

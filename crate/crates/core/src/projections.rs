//! Projected measures: sampling, characteristic functions and a
//! Lévy–Prokhorov estimate between point clouds.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{log_p_gaussian_density, sigma_p_squared};
use crate::error::{Error, Result};
use crate::linalg::{dot, operator_norm, psd_sqrt, ColumnList, DenseMatrix, PSD_TOLERANCE};
use crate::quadrature::integrate;
use crate::rng::{par_draws, SeededRng};
use crate::samplers::{haar_stiefel, lp_ball_sampler, PGaussianParams};

/// Equally weighted sample points in `R^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 || points.is_empty() {
            return Err(Error::InvalidInput(
                "an empirical measure needs at least one point".into(),
            ));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::dims(dim, p.len()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(
                    "sample coordinates must be finite".into(),
                ));
            }
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Values of coordinate `i` across the sample.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[i]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim];
        for p in &self.points {
            m.iter_mut().zip(p).for_each(|(a, x)| *a += x);
        }
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Unbiased sample covariance (zero for a single point).
    pub fn covariance(&self) -> DenseMatrix {
        let k = self.dim;
        let m = self.mean();
        let mut c = DenseMatrix::zeros(k, k);
        for p in &self.points {
            for i in 0..k {
                for j in 0..k {
                    c.set(i, j, c.get(i, j) + (p[i] - m[i]) * (p[j] - m[j]));
                }
            }
        }
        let denom = (self.len() as f64 - 1.0).max(1.0);
        c.scaled(1.0 / denom)
    }

    /// `(1/N) Σ exp(i⟨t, x⟩)`.
    pub fn empirical_cf(&self, t: &[f64]) -> Result<Complex64> {
        if t.len() != self.dim {
            return Err(Error::dims(self.dim, t.len()));
        }
        let n = self.len() as f64;
        let (re, im) = self.points.iter().fold((0.0, 0.0), |(re, im), p| {
            let s = dot(t, p);
            (re + s.cos(), im + s.sin())
        });
        Ok(Complex64::new(re / n, im / n))
    }
}

/// Symmetric law of the i.i.d. coefficients `Y_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductLaw {
    PGaussian(PGaussianParams),
    /// Fair `±1` signs.
    Rademacher,
}

impl ProductLaw {
    pub fn variance(&self) -> Result<f64> {
        match self {
            ProductLaw::PGaussian(params) => sigma_p_squared(params.p()),
            ProductLaw::Rademacher => Ok(1.0),
        }
    }

    fn draw_fn(&self) -> impl Fn(&mut SeededRng) -> f64 + Sync + '_ {
        let sampler = match self {
            ProductLaw::PGaussian(params) => Some(params.sampler()),
            ProductLaw::Rademacher => None,
        };
        move |rng: &mut SeededRng| match &sampler {
            Some(s) => s.draw(rng),
            None => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// `E[cos(sY)]`.
    pub fn scalar_cf(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(1.0);
        }
        match self {
            ProductLaw::Rademacher => Ok(s.cos()),
            ProductLaw::PGaussian(params) => {
                let p = params.p();
                if p.is_infinite() {
                    Ok(sinc(s))
                } else if p == 1.0 {
                    Ok(1.0 / (1.0 + s * s))
                } else if p == 2.0 {
                    Ok((-0.5 * s * s).exp())
                } else {
                    p_gaussian_cf_table(p)?.eval(s)
                }
            }
        }
    }
}

fn sinc(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        1.0 - s * s / 6.0
    } else {
        s.sin() / s
    }
}

/// Characteristic function of a p-Gaussian tabulated on `[0, CF_RANGE]`.
struct CfTable {
    p: f64,
    step: f64,
    values: Vec<f64>,
}

const CF_RANGE: f64 = 40.0;
const CF_STEP: f64 = 0.01;

/// `2 ∫_0^∞ cos(sx) f_p(x) dx`, truncated where `x^p/p > 45`.
fn p_gaussian_cf_direct(p: f64, s: f64) -> Result<f64> {
    let upper = (45.0 * p).powf(1.0 / p);
    let r = integrate(
        |x| (s * x).cos() * log_p_gaussian_density(x, p).map(f64::exp).unwrap_or(0.0),
        0.0,
        upper,
        1e-12,
        0.0,
    )?;
    Ok(2.0 * r.value)
}

impl CfTable {
    fn build(p: f64) -> Result<Self> {
        let count = (CF_RANGE / CF_STEP).round() as usize + 3;
        let values = (0..count)
            .into_par_iter()
            .map(|i| p_gaussian_cf_direct(p, i as f64 * CF_STEP))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            p,
            step: CF_STEP,
            values,
        })
    }

    /// Four-point cubic interpolation; the table is even in `s`.
    fn eval(&self, s: f64) -> Result<f64> {
        let s = s.abs();
        let x = s / self.step;
        let i = x.floor() as usize;
        if i + 2 >= self.values.len() {
            return p_gaussian_cf_direct(self.p, s);
        }
        let u = x - i as f64;
        let at = |j: isize| -> f64 {
            // Reflect across 0 using evenness.
            self.values[j.unsigned_abs()]
        };
        let i = i as isize;
        let (f0, f1, f2, f3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        Ok(
            -u * (u - 1.0) * (u - 2.0) / 6.0 * f0 + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * f1
                - (u + 1.0) * u * (u - 2.0) / 2.0 * f2
                + (u + 1.0) * u * (u - 1.0) / 6.0 * f3,
        )
    }
}

fn p_gaussian_cf_table(p: f64) -> Result<Arc<CfTable>> {
    static TABLES: OnceLock<Mutex<HashMap<u64, Arc<CfTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = tables
        .lock()
        .expect("table cache poisoned")
        .get(&p.to_bits())
    {
        return Ok(t.clone());
    }
    let table = Arc::new(CfTable::build(p)?);
    tables
        .lock()
        .expect("table cache poisoned")
        .insert(p.to_bits(), table.clone());
    Ok(table)
}

/// The law of `Σ_j C_j Y_j + σ (Id - AA*)^{1/2} N` for columns `C_j` of `A`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectedLaw {
    columns: ColumnList,
    noise_variance: f64,
    product_law: ProductLaw,
}

impl ProjectedLaw {
    /// `‖AA*‖ = 1` is allowed; the Gaussian part then degenerates along the
    /// top eigenspace.
    pub fn new(columns: ColumnList, noise_variance: f64, product_law: ProductLaw) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::DomainError("noise variance must be positive".into()));
        }
        let norm = operator_norm(&columns.gram()?);
        if norm > 1.0 + PSD_TOLERANCE {
            return Err(Error::DomainError(format!("‖AA*‖ = {norm} exceeds 1")));
        }
        Ok(Self {
            columns,
            noise_variance,
            product_law,
        })
    }

    pub fn columns(&self) -> &ColumnList {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.dim()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn product_law(&self) -> ProductLaw {
        self.product_law
    }

    /// `σ (Id - AA*)^{1/2}`.
    fn noise_factor(&self) -> Result<DenseMatrix> {
        let root = psd_sqrt(&self.columns.gram()?.complement()?)?;
        Ok(root.to_dense().scaled(self.noise_variance.sqrt()))
    }
}

pub fn sample_projected_law(
    rng: &mut SeededRng,
    law: &ProjectedLaw,
    count: usize,
) -> Result<EmpiricalMeasure> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    let k = law.dim();
    let noise = law.noise_factor()?;
    let draw_y = law.product_law.draw_fn();
    let points = par_draws(rng, count, |r| {
        let mut x = vec![0.0; k];
        for c in law.columns.columns() {
            let y = draw_y(r);
            x.iter_mut().zip(c).for_each(|(a, ci)| *a += ci * y);
        }
        let g = crate::samplers::gaussian_vector(r, k);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += dot(noise.row(i), &g);
        }
        Ok(x)
    })?;
    EmpiricalMeasure::new(k, points)
}

fn check_projection(v: &DenseMatrix) -> Result<()> {
    if v.rows() > v.cols() {
        return Err(Error::dims(
            format!("k ≤ n = {}", v.cols()),
            format!("k = {}", v.rows()),
        ));
    }
    Ok(())
}

/// Draws of `V Z` with `Z` an i.i.d. vector from `law`.
pub fn project_product(
    rng: &mut SeededRng,
    v: &DenseMatrix,
    law: PGaussianParams,
    count: usize,
) -> Result<EmpiricalMeasure> {
    check_projection(v)?;
    let sampler = law.sampler();
    let n = v.cols();
    let points = par_draws(rng, count, |r| {
        let z: Vec<f64> = (0..n).map(|_| sampler.draw(r)).collect();
        Ok(v.apply(&z))
    })?;
    EmpiricalMeasure::new(v.rows(), points)
}

/// Draws of `V X` with `X` uniform on `n^{1/p} B_p^n`.
pub fn project_lp_ball(
    rng: &mut SeededRng,
    v: &DenseMatrix,
    p: f64,
    count: usize,
) -> Result<EmpiricalMeasure> {
    check_projection(v)?;
    let n = v.cols();
    let ball = lp_ball_sampler(p, n, (n as f64).powf(1.0 / p))?;
    let points = par_draws(rng, count, |r| Ok(v.apply(&ball.draw(r))))?;
    EmpiricalMeasure::new(v.rows(), points)
}

/// `φ(t) = exp(-½σ²⟨t, (Id - AA*)t⟩) Π_j φ_Y(⟨t, C_j⟩)`.
pub fn characteristic_function(law: &ProjectedLaw, t: &[f64]) -> Result<Complex64> {
    if t.len() != law.dim() {
        return Err(Error::dims(law.dim(), t.len()));
    }
    let mut quad = dot(t, t);
    let mut product = 1.0;
    for c in law.columns.columns() {
        let s = dot(t, c);
        quad -= s * s;
        product *= law.product_law.scalar_cf(s)?;
    }
    let gaussian = (-0.5 * law.noise_variance * quad.max(0.0)).exp();
    Ok(Complex64::new(gaussian * product, 0.0))
}

/// A test set for the Lévy–Prokhorov estimate: the closed box
/// `[lo, hi]` (coordinates may be infinite).
struct TestBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TestBox {
    fn distance(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((&l, &h), &v) in self.lo.iter().zip(&self.hi).zip(x) {
            let d = if v < l {
                l - v
            } else if v > h {
                v - h
            } else {
                0.0
            };
            s += d * d;
        }
        s.sqrt()
    }
}

/// Smallest `ε` with `μ(B) ≤ ν(B^ε) + ε`: with `d_(j)` the sorted distances
/// of ν's points to `B`, it is `min_j max(d_(j), μ(B) - j/N)`.
fn box_epsilon(b: &TestBox, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    let inside = mu.points.iter().filter(|x| b.distance(x) == 0.0).count();
    let mass = inside as f64 / mu.len() as f64;
    if mass == 0.0 {
        return 0.0;
    }
    let mut dist: Vec<f64> = nu.points.iter().map(|x| b.distance(x)).collect();
    dist.sort_unstable_by(f64::total_cmp);
    let n = nu.len() as f64;
    let mut best = mass;
    for (j, &d) in dist.iter().enumerate() {
        if d >= best {
            break;
        }
        best = best.min(d.max(mass - (j + 1) as f64 / n));
    }
    best
}

/// Test boxes built from the pooled sample. In one dimension: all intervals
/// whose endpoints are among `grid` pooled order statistics and `±∞`. In
/// higher dimensions: boxes centred on `grid` pooled points with a ladder of
/// half-widths.
fn test_family(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, grid: usize) -> Vec<TestBox> {
    let k = mu.dim;
    let pooled: Vec<&Vec<f64>> = mu.points.iter().chain(&nu.points).collect();
    let grid = grid.max(2).min(pooled.len());
    let pick = |i: usize| i * (pooled.len() - 1) / (grid - 1).max(1);
    if k == 1 {
        let mut values: Vec<f64> = pooled.iter().map(|p| p[0]).collect();
        values.sort_unstable_by(f64::total_cmp);
        let mut ends: Vec<f64> = (0..grid).map(|i| values[pick(i)]).collect();
        ends.push(f64::NEG_INFINITY);
        ends.push(f64::INFINITY);
        ends.sort_unstable_by(f64::total_cmp);
        ends.dedup();
        let mut family = Vec::new();
        for a in 0..ends.len() {
            for b in a..ends.len() {
                family.push(TestBox {
                    lo: vec![ends[a]],
                    hi: vec![ends[b]],
                });
            }
        }
        return family;
    }
    let spread = (0..k)
        .map(|i| {
            let (lo, hi) = pooled
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
                    (l.min(p[i]), h.max(p[i]))
                });
            hi - lo
        })
        .fold(0.0, f64::max);
    let mut widths = vec![0.0];
    widths.extend((0..8).map(|i| spread * 0.5f64.powi(i + 1)));
    let mut family = Vec::new();
    for i in 0..grid {
        let c = pooled[pick(i)];
        for &w in &widths {
            family.push(TestBox {
                lo: c.iter().map(|x| x - w).collect(),
                hi: c.iter().map(|x| x + w).collect(),
            });
        }
    }
    family
}

/// Upper-bound style estimate of the Lévy–Prokhorov distance over a finite
/// family of test boxes, taking the worse of both directions. Exact for
/// point masses. Supports `k ≤ 3`.
pub fn levy_prokhorov(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, grid: usize) -> Result<f64> {
    if mu.dim != nu.dim {
        return Err(Error::dims(mu.dim, nu.dim));
    }
    if mu.dim > 3 {
        return Err(Error::InvalidInput(
            "Lévy–Prokhorov estimate supports k ≤ 3".into(),
        ));
    }
    let family = test_family(mu, nu, grid);
    let eps = family
        .par_iter()
        .map(|b| box_epsilon(b, mu, nu).max(box_epsilon(b, nu, mu)))
        .reduce(|| 0.0, f64::max);
    Ok(eps.min(1.0))
}

/// Grid size used by [`compare_ball_vs_product`].
pub const LP_GRID: usize = 64;

/// For each `n`, one Haar `V` and the estimated distance between the
/// projected `ℓ_p`-ball law and the projected product law under that `V`.
pub fn compare_ball_vs_product(
    rng: &mut SeededRng,
    k: usize,
    p: f64,
    n_list: &[usize],
    count: usize,
) -> Result<Vec<(usize, f64)>> {
    let law = PGaussianParams::new(p)?;
    n_list
        .iter()
        .map(|&n| {
            let v = haar_stiefel(rng, k, n)?;
            let ball = project_lp_ball(rng, &v, p, count)?;
            let product = project_product(rng, &v, law, count)?;
            Ok((n, levy_prokhorov(&ball, &product, LP_GRID)?))
        })
        .collect()
}

//! Random generation: Gaussian and Haar-distributed matrices, Wishart
//! matrices, p-generalized Gaussians and uniform points in `ℓ_p` balls.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram, DenseMatrix, SymmetricPSD};
use crate::rng::SeededRng;

/// Exponent `p ∈ [1, ∞]` of a p-generalized Gaussian. `p = ∞` stands for
/// the uniform law on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PGaussianParams {
    p: f64,
}

impl PGaussianParams {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::DomainError(format!("p must lie in [1, ∞], got {p}")));
        }
        Ok(Self { p })
    }

    pub fn uniform() -> Self {
        Self { p: f64::INFINITY }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_uniform(&self) -> bool {
        self.p.is_infinite()
    }

    pub fn sampler(&self) -> PGaussianSampler {
        let gamma = if self.is_uniform() {
            None
        } else {
            Some(Gamma::new(1.0 / self.p, 1.0).expect("shape 1/p is positive"))
        };
        PGaussianSampler { p: self.p, gamma }
    }
}

/// Draws from the density `e^{-|x|^p/p} / (2 p^{1/p} Γ(1+1/p))`.
///
/// `|Z|^p / p` is `Gamma(1/p, 1)`, so a draw is `±(p·G)^{1/p}` with an
/// independent fair sign.
#[derive(Clone, Debug)]
pub struct PGaussianSampler {
    p: f64,
    gamma: Option<Gamma<f64>>,
}

impl PGaussianSampler {
    #[inline]
    pub fn draw(&self, rng: &mut SeededRng) -> f64 {
        match &self.gamma {
            None => rng.random_range(-1.0..=1.0),
            Some(gamma) => {
                let g: f64 = gamma.sample(rng);
                let magnitude = if self.p == 1.0 {
                    g
                } else {
                    (self.p * g).powf(1.0 / self.p)
                };
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }
}

pub fn gaussian_vector(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `k × n` matrix of independent standard normal entries.
pub fn gaussian_matrix(rng: &mut SeededRng, k: usize, n: usize) -> Result<DenseMatrix> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidInput("k and n must be positive".into()));
    }
    DenseMatrix::new(k, n, gaussian_vector(rng, k * n))
}

fn check_stiefel_dims(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if k > n {
        return Err(Error::InvalidInput("k must be ≤ n".into()));
    }
    Ok(())
}

/// Polar factor `(G G*)^{-1/2} G` of a Gaussian matrix, which is Haar
/// distributed on the Stiefel manifold of orthonormal `k`-frames in `R^n`.
///
/// A second polar pass on the result removes the error amplified by an
/// ill-conditioned `G G*`; it leaves an exactly orthonormal matrix unchanged.
pub fn haar_stiefel(rng: &mut SeededRng, k: usize, n: usize) -> Result<DenseMatrix> {
    check_stiefel_dims(k, n)?;
    let mut last_err = None;
    for _ in 0..2 {
        let g = gaussian_matrix(rng, k, n)?;
        match polar_factor(&g) {
            Ok(v) => return Ok(v),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::NumericalFailure("singular Gaussian matrix".into())))
}

/// `(A A*)^{-1/2} A` for a full-row-rank matrix.
pub fn polar_factor(a: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() == 1 {
        let norm = a.frobenius_norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NumericalFailure("zero row".into()));
        }
        return DenseMatrix::new(1, a.cols(), a.as_slice().iter().map(|x| x / norm).collect());
    }
    let v = gram(a).inverse_sqrt()?.matmul(a)?;
    let residual = gram(&v)
        .to_dense()
        .sub(&DenseMatrix::identity(a.rows()))?
        .frobenius_norm();
    if residual > 1e-13 {
        return gram(&v).inverse_sqrt()?.matmul(&v);
    }
    Ok(v)
}

/// Haar-distributed `n × n` orthogonal matrix.
pub fn haar_orthogonal(rng: &mut SeededRng, n: usize) -> Result<DenseMatrix> {
    haar_stiefel(rng, n, n)
}

/// `H H*` for a `k × n` standard Gaussian `H`, i.e. a `W_k(n, Id)` draw.
pub fn wishart(rng: &mut SeededRng, k: usize, n: usize) -> Result<SymmetricPSD> {
    if k == 0 || n < k {
        return Err(Error::InvalidInput("Wishart needs n ≥ k ≥ 1".into()));
    }
    Ok(gram(&gaussian_matrix(rng, k, n)?))
}

/// `count` independent p-generalized Gaussian draws.
pub fn p_gaussian(rng: &mut SeededRng, params: PGaussianParams, count: usize) -> Vec<f64> {
    let sampler = params.sampler();
    (0..count).map(|_| sampler.draw(rng)).collect()
}

/// `ℓ_p` norm for finite `p ≥ 1`.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Uniform point in `radius_scale · B_p^n` via `U^{1/n} Z / ‖Z‖_p` with `Z`
/// an i.i.d. p-Gaussian vector and `U` uniform on `[0, 1]`.
pub fn uniform_lp_ball(
    rng: &mut SeededRng,
    p: f64,
    n: usize,
    radius_scale: f64,
) -> Result<Vec<f64>> {
    let sampler = lp_ball_sampler(p, n, radius_scale)?;
    Ok(sampler.draw(rng))
}

pub(crate) struct LpBallSampler {
    p: f64,
    n: usize,
    radius_scale: f64,
    z: PGaussianSampler,
}

impl LpBallSampler {
    pub(crate) fn draw(&self, rng: &mut SeededRng) -> Vec<f64> {
        let mut z: Vec<f64> = (0..self.n).map(|_| self.z.draw(rng)).collect();
        let norm = lp_norm(&z, self.p);
        let u: f64 = rng.random();
        let factor = self.radius_scale * u.powf(1.0 / self.n as f64) / norm;
        z.iter_mut().for_each(|v| *v *= factor);
        z
    }
}

pub(crate) fn lp_ball_sampler(p: f64, n: usize, radius_scale: f64) -> Result<LpBallSampler> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::DomainError(format!("p must lie in [1, ∞), got {p}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if !(radius_scale > 0.0 && radius_scale.is_finite()) {
        return Err(Error::DomainError("radius_scale must be positive".into()));
    }
    Ok(LpBallSampler {
        p,
        n,
        radius_scale,
        z: PGaussianParams::new(p)?.sampler(),
    })
}

/// `T = (S + G G*)^{-1/2} G` with `S ~ W_k(N+k-1, Id)` and an independent
/// `k × m` Gaussian `G`; `T` follows the inverted matrix-variate t law with
/// `N` degrees of freedom.
pub fn dickey_corner(rng: &mut SeededRng, k: usize, m: usize, dof: usize) -> Result<DenseMatrix> {
    if k == 0 || m == 0 || dof == 0 {
        return Err(Error::InvalidInput("k, m and N must be positive".into()));
    }
    let s = wishart(rng, k, dof + k - 1)?;
    let g = gaussian_matrix(rng, k, m)?;
    let total = s.add(&gram(&g))?;
    total.inverse_sqrt()?.matmul(&g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn gaussian_matrix_is_deterministic() {
        let a = gaussian_matrix(&mut SeededRng::new(1, 0), 2, 3).unwrap();
        let b = gaussian_matrix(&mut SeededRng::new(1, 0), 2, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_moments() {
        let xs = gaussian_vector(&mut SeededRng::new(2, 0), 1_000_000);
        let (m, v) = mean_var(&xs);
        assert!(m.abs() < 0.004, "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "var {v}");
    }

    #[test]
    fn stiefel_small_cases() {
        let mut rng = SeededRng::new(3, 0);
        for _ in 0..20 {
            let v = haar_stiefel(&mut rng, 1, 1).unwrap();
            assert_eq!(v.get(0, 0).abs(), 1.0);
            let v = haar_stiefel(&mut rng, 1, 3).unwrap();
            assert!((v.frobenius_norm() - 1.0).abs() < 1e-15);
        }
        assert!(matches!(
            haar_stiefel(&mut rng, 5, 3),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn orthogonal_matrix_properties() {
        let mut rng = SeededRng::new(4, 0);
        let o = haar_orthogonal(&mut rng, 3).unwrap();
        assert!((o.determinant().unwrap().abs() - 1.0).abs() < 1e-10);
        let oto = o.transpose().matmul(&o).unwrap();
        assert!(oto.sub(&DenseMatrix::identity(3)).unwrap().frobenius_norm() < 1e-10);
        for j in 0..3 {
            let c = o.column(j);
            assert!((c.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-10);
        }
        let mut plus = 0;
        for _ in 0..10_000 {
            if haar_orthogonal(&mut rng, 1).unwrap().get(0, 0) > 0.0 {
                plus += 1;
            }
        }
        assert!((plus as f64 / 1e4 - 0.5).abs() < 0.01);
    }

    #[test]
    fn wishart_moments() {
        let mut rng = SeededRng::new(5, 0);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| wishart(&mut rng, 1, 2).unwrap().get(0, 0))
            .collect();
        assert!((mean_var(&xs).0 - 2.0).abs() < 0.05);
        let tr: Vec<f64> = (0..10_000)
            .map(|_| wishart(&mut rng, 2, 5).unwrap().trace())
            .collect();
        assert!((mean_var(&tr).0 - 10.0).abs() < 0.3);
        assert!(wishart(&mut rng, 1, 1).unwrap().get(0, 0) >= 0.0);
        assert!(wishart(&mut rng, 3, 2).is_err());
    }

    #[test]
    fn p_gaussian_moments() {
        let mut rng = SeededRng::new(6, 0);
        let xs = p_gaussian(&mut rng, PGaussianParams::new(2.0).unwrap(), 1_000_000);
        assert!((mean_var(&xs).1 - 1.0).abs() < 0.01);
        let xs = p_gaussian(&mut rng, PGaussianParams::new(1.0).unwrap(), 1_000_000);
        let abs_mean = xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64;
        assert!((abs_mean - 1.0).abs() < 0.01);
        let xs = p_gaussian(&mut rng, PGaussianParams::uniform(), 1_000_000);
        assert!((mean_var(&xs).1 - 1.0 / 3.0).abs() < 0.005);
        assert!(xs.iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn p_below_one_rejected() {
        assert!(PGaussianParams::new(0.5).is_err());
        assert!(PGaussianParams::new(f64::NAN).is_err());
    }

    #[test]
    fn lp_ball_points_stay_inside() {
        let mut rng = SeededRng::new(7, 0);
        for &p in &[1.0, 1.5, 3.0] {
            for _ in 0..1000 {
                let x = uniform_lp_ball(&mut rng, p, 6, 2.5).unwrap();
                assert!(lp_norm(&x, p) <= 2.5 * (1.0 + 1e-12));
            }
        }
        let xs: Vec<f64> = (0..10_000)
            .map(|_| uniform_lp_ball(&mut rng, 1.0, 1, 1.0).unwrap()[0])
            .collect();
        assert!(mean_var(&xs).0.abs() < 0.02);
    }

    #[test]
    fn dickey_corner_is_contraction() {
        let mut rng = SeededRng::new(8, 0);
        for _ in 0..200 {
            let t = dickey_corner(&mut rng, 2, 3, 4).unwrap();
            assert!(crate::linalg::operator_norm(&gram(&t)) < 1.0);
        }
        let a = dickey_corner(&mut SeededRng::new(9, 1), 2, 2, 3).unwrap();
        let b = dickey_corner(&mut SeededRng::new(9, 1), 2, 2, 3).unwrap();
        assert_eq!(a, b);
    }
}

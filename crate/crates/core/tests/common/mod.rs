//! Reference oracles shared by the integration tests.
#![allow(dead_code)]

use ldplab_core::linalg::{gram, operator_norm, DenseMatrix};
use ldplab_core::SeededRng;
use rand::Rng;
use statrs::function::beta::beta_reg;

/// CDF of the 1×1 corner of a Haar `1 × n` Stiefel matrix: `x²` is
/// `Beta(1/2, (n-1)/2)`.
pub fn corner_cdf(x: f64, n: usize) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let half = 0.5 * beta_reg(0.5, (n as f64 - 1.0) / 2.0, x * x);
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Exhaustive search over signed permutations. Zero columns are padding of
/// an infinite matrix and are ignored.
pub fn brute_force_equivalent(p: &[Vec<f64>], q: &[Vec<f64>], tol: f64) -> bool {
    fn search(p: &[Vec<f64>], q: &[Vec<f64>], used: &mut Vec<bool>, j: usize, tol: f64) -> bool {
        if j == p.len() {
            return true;
        }
        for i in 0..q.len() {
            if used[i] {
                continue;
            }
            for sign in [1.0, -1.0] {
                let d = p[j]
                    .iter()
                    .zip(&q[i])
                    .map(|(a, b)| (a - sign * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d <= tol {
                    used[i] = true;
                    if search(p, q, used, j + 1, tol) {
                        return true;
                    }
                    used[i] = false;
                }
            }
        }
        false
    }
    let support = |c: &[Vec<f64>]| -> Vec<Vec<f64>> {
        c.iter()
            .filter(|v| v.iter().any(|x| *x != 0.0))
            .cloned()
            .collect()
    };
    let (p, q) = (support(p), support(q));
    p.len() == q.len() && search(&p, &q, &mut vec![false; q.len()], 0, tol)
}

fn random_columns(rng: &mut SeededRng, k: usize, m: usize) -> Vec<Vec<f64>> {
    const LEVELS: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];
    (0..m)
        .map(|_| {
            (0..k)
                .map(|_| LEVELS[rng.random_range(0..LEVELS.len())])
                .collect()
        })
        .collect()
}

/// A pair of column lists with at most four columns each. Entries come from
/// a coarse lattice so that ties and coincidences are common; half the pairs
/// are signed shuffles, a third of those nudged off by 1e-3.
pub fn identify_instance(rng: &mut SeededRng) -> (usize, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = rng.random_range(1..=3usize);
    let m = rng.random_range(1..=4usize);
    let p = random_columns(rng, k, m);
    let q = match rng.random_range(0..4) {
        0 | 1 => {
            let mut q: Vec<Vec<f64>> = p
                .iter()
                .map(|c| {
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    c.iter().map(|x| s * x).collect()
                })
                .collect();
            for i in (1..q.len()).rev() {
                q.swap(i, rng.random_range(0..=i));
            }
            if rng.random_range(0..3) == 0 {
                let (j, i) = (rng.random_range(0..q.len()), rng.random_range(0..k));
                q[j][i] += 1e-3;
            }
            q
        }
        2 => random_columns(rng, k, m),
        _ => {
            let m2 = rng.random_range(1..=4usize);
            random_columns(rng, k, m2)
        }
    };
    (k, p, q)
}

/// A non-increasing sequence of at most six entries in `[0.1, 1)` whose
/// distinct values are at least 0.05 apart.
pub fn separated_sequence(rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let distinct = rng.random_range(1..=6usize);
        let mut values: Vec<(f64, usize)> = (0..distinct)
            .map(|_| (rng.random_range(0.1..1.0), rng.random_range(1..=3usize)))
            .collect();
        values.sort_by(|a, b| b.0.total_cmp(&a.0));
        if values.windows(2).any(|w| w[0].0 - w[1].0 < 0.05) {
            continue;
        }
        return values
            .iter()
            .flat_map(|&(v, m)| std::iter::repeat_n(v, m))
            .take(6)
            .collect();
    }
}

/// A uniform random `k × m` matrix rescaled to operator norm `norm`.
pub fn random_contraction(rng: &mut SeededRng, k: usize, m: usize, norm: f64) -> DenseMatrix {
    let a = DenseMatrix::new(
        k,
        m,
        (0..k * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let s = operator_norm(&gram(&a)).sqrt();
    if s == 0.0 {
        a
    } else {
        a.scaled(norm / s)
    }
}

/// As [`random_contraction`] with the norm drawn uniformly from `[0, max)`.
pub fn random_contraction_below(rng: &mut SeededRng, k: usize, m: usize, max: f64) -> DenseMatrix {
    let norm = rng.random_range(0.0..max);
    random_contraction(rng, k, m, norm)
}

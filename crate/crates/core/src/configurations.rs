//! Symmetric point configurations, their column matrices, and identification
//! of a configuration from power sums.
//!
//! A configuration stores one representative per `±` pair. The measure it
//! encodes puts mass `multiplicity` at both `point` and `-point`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::densities::sigma_p_squared;
use crate::error::{Error, Result};
use crate::linalg::{norm2, operator_norm, signed_permutation_equal, ColumnList, DenseMatrix};
use crate::projections::{sample_projected_law, EmpiricalMeasure, ProductLaw, ProjectedLaw};
use crate::rng::SeededRng;
use crate::samplers::PGaussianParams;

/// Slack allowed on the row and operator-norm bounds.
const SUMMABILITY_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub multiplicity: usize,
}

impl Atom {
    pub fn new(point: Vec<f64>, multiplicity: usize) -> Self {
        Self {
            point,
            multiplicity,
        }
    }
}

/// Flips `v` so that its first nonzero coordinate is positive.
fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(&first) = v.iter().find(|x| **x != 0.0) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

/// Norm descending, then lexicographically descending.
fn canonical_order(a: &[f64], b: &[f64]) -> Ordering {
    norm2(b).total_cmp(&norm2(a)).then_with(|| {
        b.iter()
            .zip(a)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// An element of the configuration space: finitely many `±` atom pairs in
/// `[-1, 1]^k \ {0}` with square-summable rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfiguration")]
pub struct PointConfiguration {
    dim: usize,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfiguration {
    dim: usize,
    atoms: Vec<Atom>,
}

impl TryFrom<RawConfiguration> for PointConfiguration {
    type Error = Error;

    fn try_from(raw: RawConfiguration) -> Result<Self> {
        PointConfiguration::new(raw.dim, raw.atoms)
    }
}

impl PointConfiguration {
    /// Canonicalizes signs, merges repeated atoms and sorts. Fails on zero
    /// points, coordinates outside `[-1, 1]`, rows with squared sum above 1
    /// or `‖V V*‖ > 1`.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "configuration dimension must be positive".into(),
            ));
        }
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            if atom.point.len() != dim {
                return Err(Error::dims(dim, atom.point.len()));
            }
            if atom.multiplicity == 0 {
                return Err(Error::InvalidInput(
                    "atom multiplicity must be at least 1".into(),
                ));
            }
            if atom.point.iter().any(|x| !x.is_finite() || x.abs() > 1.0) {
                return Err(Error::DomainError(
                    "atom coordinates must lie in [-1, 1]".into(),
                ));
            }
            if atom.point.iter().all(|&x| x == 0.0) {
                return Err(Error::DomainError(
                    "configurations carry no atom at the origin".into(),
                ));
            }
            let point = canonical_sign(atom.point);
            match merged.iter_mut().find(|a| a.point == point) {
                Some(existing) => existing.multiplicity += atom.multiplicity,
                None => merged.push(Atom::new(point, atom.multiplicity)),
            }
        }
        merged.sort_by(|a, b| canonical_order(&a.point, &b.point));
        let mu = Self { dim, atoms: merged };
        for i in 0..dim {
            let row: f64 = mu
                .atoms
                .iter()
                .map(|a| a.multiplicity as f64 * a.point[i] * a.point[i])
                .sum();
            if row > 1.0 + SUMMABILITY_SLACK {
                return Err(Error::DomainError(format!(
                    "row {i} has squared sum {row} > 1"
                )));
            }
        }
        let norm = operator_norm(&config_to_matrix(&mu)?.gram()?);
        if norm > 1.0 + SUMMABILITY_SLACK {
            return Err(Error::DomainError(format!("‖V V*‖ = {norm} exceeds 1")));
        }
        Ok(mu)
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of `±` pairs counted with multiplicity.
    pub fn pair_count(&self) -> usize {
        self.atoms.iter().map(|a| a.multiplicity).sum()
    }
}

/// The configuration `Σ_j (δ_{C_j} + δ_{-C_j})` over the columns of `v`,
/// skipping columns of norm below `drop_tol` (zero columns always go).
pub fn config_from_stiefel(v: &DenseMatrix, drop_tol: f64) -> Result<PointConfiguration> {
    let atoms = (0..v.cols())
        .map(|j| v.column(j))
        .filter(|c| {
            let n = norm2(c);
            n > 0.0 && n >= drop_tol
        })
        .map(|c| Atom::new(c, 1))
        .collect();
    PointConfiguration::new(v.rows(), atoms)
}

/// The column matrix `V(μ)`: one column per atom and multiplicity, in
/// canonical sign and order.
pub fn config_to_matrix(mu: &PointConfiguration) -> Result<ColumnList> {
    let columns = mu
        .atoms
        .iter()
        .flat_map(|a| std::iter::repeat_n(a.point.clone(), a.multiplicity))
        .collect();
    ColumnList::new(mu.dim, columns)
}

/// Samples `count` points from `Ψ(μ)`, the projected law with columns
/// `V(μ)`, i.i.d. coefficients from `law` and Gaussian variance `sigma²`,
/// which must equal the variance of `law`.
pub fn psi(
    mu: &PointConfiguration,
    law: PGaussianParams,
    sigma: f64,
    rng: &mut SeededRng,
    count: usize,
) -> Result<EmpiricalMeasure> {
    let variance = sigma_p_squared(law.p())?;
    if (sigma * sigma - variance).abs() > 1e-9 * variance {
        return Err(Error::InvalidInput(format!(
            "sigma² = {} differs from the law variance {variance}",
            sigma * sigma
        )));
    }
    let projected = ProjectedLaw::new(
        config_to_matrix(mu)?,
        sigma * sigma,
        ProductLaw::PGaussian(law),
    )?;
    sample_projected_law(rng, &projected, count)
}

/// `(Σ_i α_i^k)` for `k = k_min..=k_max`.
pub fn power_sums(alpha: &[f64], k_min: usize, k_max: usize) -> Result<Vec<f64>> {
    if k_min < 3 {
        return Err(Error::InvalidInput(format!(
            "k_min must be at least 3, got {k_min}"
        )));
    }
    if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::DomainError(
            "power sums need finite non-negative entries".into(),
        ));
    }
    Ok((k_min..=k_max)
        .map(|k| alpha.iter().map(|a| a.powi(k as i32)).sum())
        .collect())
}

/// Outcome of [`recover_from_power_sums`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerSumRecovery {
    /// Recovered entries, non-increasing, repeated by multiplicity.
    pub atoms: Vec<f64>,
    /// Part of the first power sum `s_3` not explained by `atoms`.
    pub unresolved_tail_mass: f64,
}

const RANK_TOLERANCE: f64 = 1e-11;
const ROUNDING_SLACK: f64 = 0.2;
const RESIDUAL_TOLERANCE: f64 = 1e-6;

/// Recovers a non-increasing sequence `α` from its power sums
/// `sums[i] = Σ α^{i+3}`, assuming at most `count_bound` entries.
///
/// Distinct values are the nodes of an exponential sum `Σ m_j α_j^k`; they
/// are read off a Hankel matrix pencil and refined together with
/// least-squares weights by Gauss–Newton on relative residuals. Weights are
/// then rounded to multiplicities and the nodes polished once more. Nodes below `tol·α_1` are not rounded to integer
/// multiplicities and count towards the unresolved tail.
pub fn recover_from_power_sums(
    sums: &[f64],
    count_bound: usize,
    tol: f64,
) -> Result<PowerSumRecovery> {
    if sums.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::DomainError(
            "power sums must be finite and non-negative".into(),
        ));
    }
    if count_bound == 0 || sums.is_empty() || sums[0] == 0.0 {
        return Ok(PowerSumRecovery {
            atoms: Vec::new(),
            unresolved_tail_mass: sums.first().copied().unwrap_or(0.0),
        });
    }
    let len = sums.len();
    // Powers run from 3; entries beyond where the sums vanish carry nothing.
    let len = sums.iter().position(|&s| s == 0.0).unwrap_or(len);
    let powers: Vec<i32> = (0..len).map(|i| i as i32 + 3).collect();
    let sums = &sums[..len];

    // The smallest pencil rank whose rounded fit reproduces the sums wins;
    // higher ranks only add spurious nodes.
    let (basis, max_rank) = hankel_basis(sums, count_bound)?;
    let mut failure = None;
    for rank in 1..=max_rank {
        match fit_at_rank(sums, &powers, &basis, rank, count_bound, tol) {
            Ok(found) => return Ok(found),
            Err(e) => failure = Some(e),
        }
    }
    Err(failure.expect("max_rank is at least one"))
}

/// Nodes from the shift structure of a rank-`rank` subspace, refined with
/// free weights, rounded to multiplicities and polished again.
fn fit_at_rank(
    sums: &[f64],
    powers: &[i32],
    basis: &DMatrix<f64>,
    rank: usize,
    count_bound: usize,
    tol: f64,
) -> Result<PowerSumRecovery> {
    let nodes = shift_nodes(basis, rank)?;
    let estimate = refine_nodes(sums, powers, &nodes)?;
    let top = estimate.iter().map(|e| e.0).fold(0.0, f64::max);

    // Split into resolved atoms with integer multiplicity and a tail.
    let mut resolved: Vec<(f64, f64)> = Vec::new();
    let mut tail: Vec<(f64, f64)> = Vec::new();
    for &(z, w) in &estimate {
        if z < tol * top {
            tail.push((z, w));
            continue;
        }
        let m = w.round();
        if (m - w).abs() > ROUNDING_SLACK {
            return Err(Error::RecoveryFailure(format!(
                "multiplicity estimate {w} at {z} is not close to an integer"
            )));
        }
        if m >= 1.0 {
            resolved.push((z, m));
        }
    }
    let total: f64 = resolved.iter().map(|(_, m)| m).sum();
    if total > count_bound as f64 {
        return Err(Error::RecoveryFailure(format!(
            "recovered {total} entries, more than the bound {count_bound}"
        )));
    }

    let mut all: Vec<(f64, f64)> = resolved.iter().chain(&tail).copied().collect();
    polish(sums, powers, &mut all);
    let worst = relative_residual(sums, powers, &all);
    if worst > RESIDUAL_TOLERANCE {
        return Err(Error::RecoveryFailure(format!(
            "power sums not reproduced: worst relative residual {worst:e}"
        )));
    }
    let resolved = &all[..resolved.len()];
    let mut atoms: Vec<f64> = resolved
        .iter()
        .flat_map(|&(z, m)| std::iter::repeat_n(z, m as usize))
        .collect();
    atoms.sort_by(|a, b| b.total_cmp(a));
    let explained: f64 = resolved.iter().map(|&(z, m)| m * z.powi(3)).sum();
    Ok(PowerSumRecovery {
        atoms,
        unresolved_tail_mass: (sums[0] - explained).max(0.0),
    })
}

/// Right singular vectors of the Hankel matrix of `sums`, as columns in
/// decreasing order of singular value, and its numerical rank.
fn hankel_basis(sums: &[f64], count_bound: usize) -> Result<(DMatrix<f64>, usize)> {
    let n = sums.len();
    if n < 3 {
        return Err(Error::RecoveryFailure(
            "need at least three power sums".into(),
        ));
    }
    let width = (n / 2).min(2 * count_bound + 2);
    let hankel = DMatrix::from_fn(n - width, width + 1, |i, j| sums[i + j]);
    let svd = hankel
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("Hankel SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NumericalFailure("SVD returned no right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let largest = svd.singular_values[order[0]];
    let rank = order
        .iter()
        .take_while(|&&i| svd.singular_values[i] > RANK_TOLERANCE * largest)
        .count()
        .min(count_bound)
        .min(width);
    if rank == 0 {
        return Err(Error::RecoveryFailure(
            "power sums have numerical rank zero".into(),
        ));
    }
    let basis = DMatrix::from_fn(width + 1, rank, |i, j| v_t[(order[j], i)]);
    Ok((basis, rank))
}

/// Distinct nodes of `Σ m_j z_j^k`: eigenvalue moduli of the shift operator
/// restricted to the leading `rank` singular directions.
fn shift_nodes(basis: &DMatrix<f64>, rank: usize) -> Result<Vec<f64>> {
    let width = basis.nrows() - 1;
    let leading = basis.columns(0, rank);
    let upper = leading.rows(0, width).into_owned();
    let lower = leading.rows(1, width).into_owned();
    let shift = least_squares(upper, &lower)
        .ok_or_else(|| Error::NumericalFailure("singular shift system".into()))?;
    let mut nodes: Vec<f64> = shift
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    nodes.sort_by(|a, b| b.total_cmp(a));
    Ok(nodes)
}

/// Least-squares solution of a full-column-rank system through QR.
fn least_squares(a: DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = a.qr();
    let x = qr.r().solve_upper_triangular(&(qr.q().transpose() * b))?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least-squares weights of `Σ w_j z_j^k` against `sums`, in relative terms.
fn fit_weights(sums: &[f64], powers: &[i32], nodes: &[f64]) -> Result<Vec<f64>> {
    let design = DMatrix::from_fn(sums.len(), nodes.len(), |i, j| {
        nodes[j].powi(powers[i]) / sums[i]
    });
    let ones = DMatrix::from_element(sums.len(), 1, 1.0);
    let w = least_squares(design, &ones)
        .ok_or_else(|| Error::NumericalFailure("singular weight system".into()))?;
    Ok(w.iter().copied().collect())
}

fn relative_residuals(sums: &[f64], powers: &[i32], atoms: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_fn(sums.len(), |i, _| {
        let model: f64 = atoms.iter().map(|&(z, m)| m * z.powi(powers[i])).sum();
        model / sums[i] - 1.0
    })
}

fn relative_residual(sums: &[f64], powers: &[i32], atoms: &[(f64, f64)]) -> f64 {
    relative_residuals(sums, powers, atoms).amax()
}

/// Variable projection: Gauss–Newton on the nodes with a finite-difference
/// Jacobian, the weights re-solved by least squares at every step.
fn refine_nodes(sums: &[f64], powers: &[i32], nodes: &[f64]) -> Result<Vec<(f64, f64)>> {
    type Fit = (Vec<(f64, f64)>, DVector<f64>);
    let evaluate = |z: &[f64]| -> Result<Fit> {
        let w = fit_weights(sums, powers, z)?;
        let atoms: Vec<(f64, f64)> = z.iter().copied().zip(w).collect();
        let r = relative_residuals(sums, powers, &atoms);
        Ok((atoms, r))
    };
    let mut z = nodes.to_vec();
    let (mut atoms, mut r) = evaluate(&z)?;
    for _ in 0..100 {
        let mut jac = DMatrix::zeros(sums.len(), z.len());
        for j in 0..z.len() {
            let h = 1e-7 * z[j].max(1e-3);
            let mut moved = z.clone();
            moved[j] += h;
            let (_, rj) = evaluate(&moved)?;
            jac.set_column(j, &((rj - &r) / h));
        }
        let Some(step) = least_squares(
            jac,
            &DMatrix::from_column_slice(r.len(), 1, (-&r).as_slice()),
        ) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-8 {
            let trial: Vec<f64> = z
                .iter()
                .zip(step.iter())
                .map(|(&zj, &dz)| (zj + t * dz).max(0.0))
                .collect();
            if let Ok((ta, tr)) = evaluate(&trial) {
                if tr.norm_squared() < r.norm_squared() {
                    z = trial;
                    atoms = ta;
                    r = tr;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved || step.amax() * t < 1e-15 {
            break;
        }
    }
    Ok(atoms)
}

/// Gauss–Newton with backtracking on the node positions, weights held
/// fixed.
fn polish(sums: &[f64], powers: &[i32], atoms: &mut [(f64, f64)]) {
    let mut r = relative_residuals(sums, powers, atoms);
    for _ in 0..200 {
        let jac = DMatrix::from_fn(sums.len(), atoms.len(), |i, j| {
            let (z, m) = atoms[j];
            let k = powers[i];
            m * k as f64 * z.powi(k - 1) / sums[i]
        });
        let Some(step) = least_squares(
            jac,
            &DMatrix::from_column_slice(r.len(), 1, (-&r).as_slice()),
        ) else {
            return;
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-8 {
            let trial: Vec<(f64, f64)> = atoms
                .iter()
                .zip(step.iter())
                .map(|(&(z, m), &dz)| ((z + t * dz).max(0.0), m))
                .collect();
            let tr = relative_residuals(sums, powers, &trial);
            if tr.norm_squared() <= r.norm_squared() {
                atoms.copy_from_slice(&trial);
                r = tr;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || step.amax() * t < 1e-16 {
            return;
        }
    }
}

/// Whether `p` and `q` agree up to a signed column permutation.
///
/// The matching test decides; the per-row power sums of `|entries|` for
/// `k = 3..=k_max` must agree as well, which they always do when the
/// matching succeeds, so a disagreement signals a broken input.
pub fn identify_equivalent(p: &ColumnList, q: &ColumnList, k_max: usize, tol: f64) -> Result<bool> {
    if p.dim() != q.dim() {
        return Err(Error::dims(p.dim(), q.dim()));
    }
    if !signed_permutation_equal(p, q, tol)? {
        return Ok(false);
    }
    for i in 0..p.dim() {
        let row = |cl: &ColumnList| cl.columns().iter().map(|c| c[i].abs()).collect::<Vec<_>>();
        let (rp, rq) = (row(p), row(q));
        for k in 3..=k_max as i32 {
            let sp: f64 = rp.iter().map(|x| x.powi(k)).sum();
            let sq: f64 = rq.iter().map(|x| x.powi(k)).sum();
            let slack: f64 =
                rp.iter().chain(&rq).map(|x| x.powi(k - 1)).sum::<f64>() * k as f64 * tol;
            if (sp - sq).abs() > slack + 1e-12 * sp.max(sq) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

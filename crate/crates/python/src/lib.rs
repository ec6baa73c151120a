//! Python bindings. Matrices cross the boundary as lists of rows.

use ldplab_core::configurations::{
    config_from_stiefel, identify_equivalent, power_sums, recover_from_power_sums,
};
use ldplab_core::densities::{log_corner_density, log_inverted_t_density, sigma_p_squared};
use ldplab_core::projections::{levy_prokhorov, project_lp_ball, project_product};
use ldplab_core::rates::{rate_configuration, rate_finite, rate_truncated};
use ldplab_core::samplers::{haar_orthogonal, haar_stiefel, p_gaussian, uniform_lp_ball, wishart};
use ldplab_core::verify::{run_clt_check, run_dickey_check, run_ldp_corner};
use ldplab_core::{
    Atom, ColumnList, DenseMatrix, EmpiricalMeasure, Error, LdpExperiment, Method, PGaussianParams,
    PointConfiguration, SeededRng,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(ldplab, LdplabError, PyException);
create_exception!(ldplab, NumericalFailure, LdplabError);
create_exception!(ldplab, InfeasibleExperiment, LdplabError);

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    match err {
        Error::NumericalFailure(_) | Error::RecoveryFailure(_) => NumericalFailure::new_err(msg),
        Error::InfeasibleExperiment(_) => InfeasibleExperiment::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for ldplab_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(rows).py_err()
}

fn columns(rows: &[Vec<f64>]) -> PyResult<ColumnList> {
    matrix(rows)?.to_column_list().py_err()
}

fn law(p: f64) -> PyResult<PGaussianParams> {
    PGaussianParams::new(p).py_err()
}

fn cloud(dim: usize, points: Vec<Vec<f64>>) -> PyResult<EmpiricalMeasure> {
    EmpiricalMeasure::new(dim, points).py_err()
}

/// Seeded random stream. `(seed, stream)` fixes every draw.
#[pyclass(name = "Rng", module = "ldplab")]
struct PyRng(SeededRng);

#[pymethods]
impl PyRng {
    #[new]
    #[pyo3(signature = (seed, stream = 0))]
    fn new(seed: u64, stream: u64) -> Self {
        PyRng(SeededRng::new(seed, stream))
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }

    #[getter]
    fn stream(&self) -> u64 {
        self.0.stream_id()
    }

    fn substream(&self, index: u64) -> PyRng {
        PyRng(self.0.substream(index))
    }

    fn __repr__(&self) -> String {
        format!("Rng(seed={}, stream={})", self.0.seed(), self.0.stream_id())
    }
}

/// Symmetric point configuration: atoms `±point` with multiplicities.
#[pyclass(name = "Configuration", module = "ldplab", frozen)]
struct PyConfiguration(PointConfiguration);

#[pymethods]
impl PyConfiguration {
    #[new]
    fn new(dim: usize, atoms: Vec<(Vec<f64>, usize)>) -> PyResult<Self> {
        let atoms = atoms.into_iter().map(|(p, m)| Atom::new(p, m)).collect();
        Ok(Self(PointConfiguration::new(dim, atoms).py_err()?))
    }

    /// Column configuration of a Stiefel matrix.
    #[staticmethod]
    #[pyo3(signature = (v, drop_tol = 0.0))]
    fn from_stiefel(v: Vec<Vec<f64>>, drop_tol: f64) -> PyResult<Self> {
        Ok(Self(config_from_stiefel(&matrix(&v)?, drop_tol).py_err()?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn atoms(&self) -> Vec<(Vec<f64>, usize)> {
        self.0
            .atoms()
            .iter()
            .map(|a| (a.point.clone(), a.multiplicity))
            .collect()
    }

    fn rate(&self) -> PyResult<f64> {
        Ok(rate_configuration(&self.0).py_err()?.value())
    }

    fn __len__(&self) -> usize {
        self.0.atoms().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Configuration(dim={}, atoms={:?})",
            self.0.dim(),
            self.atoms()
        )
    }
}

#[pyclass(name = "TruncationReport", module = "ldplab", frozen, get_all)]
struct PyTruncationReport {
    truncation_level: usize,
    partial_rates: Vec<f64>,
    value: f64,
    converged: bool,
    tail_bound: f64,
    boundary: bool,
    monotone: bool,
}

#[pyclass(name = "SlopeReport", module = "ldplab", frozen, get_all)]
struct PySlopeReport {
    n_values: Vec<usize>,
    log_probs: Vec<f64>,
    stderrs: Vec<f64>,
    fitted_slope: f64,
    intercept: f64,
    rate_reference: f64,
    relative_gap: f64,
}

#[pymethods]
impl PySlopeReport {
    fn __repr__(&self) -> String {
        format!(
            "SlopeReport(fitted_slope={}, rate_reference={}, relative_gap={})",
            self.fitted_slope, self.rate_reference, self.relative_gap
        )
    }
}

/// Haar `k × n` matrix with orthonormal rows.
#[pyfunction]
fn stiefel(py: Python<'_>, rng: &mut PyRng, k: usize, n: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(py
        .detach(|| haar_stiefel(&mut rng.0, k, n))
        .py_err()?
        .to_rows())
}

#[pyfunction]
fn orthogonal(py: Python<'_>, rng: &mut PyRng, n: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(py
        .detach(|| haar_orthogonal(&mut rng.0, n))
        .py_err()?
        .to_rows())
}

/// `W_k(n, Id)` draw.
#[pyfunction(name = "wishart")]
fn wishart_draw(rng: &mut PyRng, k: usize, n: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(wishart(&mut rng.0, k, n).py_err()?.to_dense().to_rows())
}

/// `count` draws with density proportional to `exp(-|x|^p / p)`; `p = inf`
/// gives uniform draws on `[-1, 1]`.
#[pyfunction(name = "p_gaussian")]
fn p_gaussian_draws(rng: &mut PyRng, p: f64, count: usize) -> PyResult<Vec<f64>> {
    Ok(p_gaussian(&mut rng.0, law(p)?, count))
}

/// Uniform point in the unit `ℓ_p` ball of `R^n`.
#[pyfunction]
fn lp_ball(rng: &mut PyRng, p: f64, n: usize) -> PyResult<Vec<f64>> {
    uniform_lp_ball(&mut rng.0, p, n, 1.0).py_err()
}

/// Log-density of the leading `k × ell` block of a Haar `k × n` matrix,
/// `-inf` outside the support.
#[pyfunction]
fn corner_log_density(a: Vec<Vec<f64>>, n: usize) -> PyResult<f64> {
    let a = matrix(&a)?;
    Ok(log_corner_density(&a, a.rows(), a.cols(), n)
        .py_err()?
        .value())
}

#[pyfunction]
fn inverted_t_log_density(a: Vec<Vec<f64>>, dof: usize) -> PyResult<f64> {
    Ok(log_inverted_t_density(&matrix(&a)?, dof).py_err()?.value())
}

/// Variance of the p-generalized Gaussian.
#[pyfunction]
fn sigma_p2(p: f64) -> PyResult<f64> {
    sigma_p_squared(p).py_err()
}

/// `-½ log det(Id - AA*)`, `inf` once `‖AA*‖ ≥ 1`.
#[pyfunction]
fn rate(a: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(rate_finite(&matrix(&a)?).value())
}

/// Rate of the matrix with partial rates over its leading columns.
#[pyfunction]
#[pyo3(signature = (a, max_level = usize::MAX, tol = 0.0))]
fn rate_with_report(
    a: Vec<Vec<f64>>,
    max_level: usize,
    tol: f64,
) -> PyResult<(f64, PyTruncationReport)> {
    let (value, r) = rate_truncated(&columns(&a)?, max_level, tol).py_err()?;
    Ok((
        value.value(),
        PyTruncationReport {
            truncation_level: r.truncation_level,
            partial_rates: r.partial_rates.iter().map(|v| v.value()).collect(),
            value: r.value.value(),
            converged: r.converged,
            tail_bound: r.tail_bound,
            boundary: r.boundary,
            monotone: r.monotone,
        },
    ))
}

/// `count` draws of `V X`: `X` uniform on `n^{1/p} B_p^n` (`law="ball"`) or
/// i.i.d. p-Gaussian (`law="product"`).
#[pyfunction]
#[pyo3(signature = (rng, v, p, count, law = "ball"))]
fn project(
    py: Python<'_>,
    rng: &mut PyRng,
    v: Vec<Vec<f64>>,
    p: f64,
    count: usize,
    law: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let v = matrix(&v)?;
    let cloud = match law {
        "ball" => py.detach(|| project_lp_ball(&mut rng.0, &v, p, count)),
        "product" => {
            let params = self::law(p)?;
            py.detach(|| project_product(&mut rng.0, &v, params, count))
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "law must be \"ball\" or \"product\", got {other:?}"
            )))
        }
    };
    Ok(cloud.py_err()?.points().to_vec())
}

/// Lévy–Prokhorov estimate between two point clouds of dimension ≤ 3.
#[pyfunction]
#[pyo3(signature = (a, b, grid = 64))]
fn levy_prokhorov_distance(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, grid: usize) -> PyResult<f64> {
    let dim = a.first().map(Vec::len).unwrap_or(0);
    levy_prokhorov(&cloud(dim, a)?, &cloud(dim, b)?, grid).py_err()
}

/// `s_j = Σ α_i^j` for `j = k_min..=k_max`.
#[pyfunction(name = "power_sums")]
fn py_power_sums(alpha: Vec<f64>, k_min: usize, k_max: usize) -> PyResult<Vec<f64>> {
    power_sums(&alpha, k_min, k_max).py_err()
}

/// Entries recovered from power sums starting at `s_3`, with the unresolved
/// tail mass.
#[pyfunction]
#[pyo3(signature = (sums, count_bound, tol = 1e-3))]
fn recover(sums: Vec<f64>, count_bound: usize, tol: f64) -> PyResult<(Vec<f64>, f64)> {
    let r = recover_from_power_sums(&sums, count_bound, tol).py_err()?;
    Ok((r.atoms, r.unresolved_tail_mass))
}

/// Whether two column lists (given as lists of columns) agree up to column
/// signs and order.
#[pyfunction]
#[pyo3(signature = (p, q, k_max = 12, tol = 1e-9))]
fn equivalent(p: Vec<Vec<f64>>, q: Vec<Vec<f64>>, k_max: usize, tol: f64) -> PyResult<bool> {
    let dim = p.first().or(q.first()).map(Vec::len).unwrap_or(1);
    let p = ColumnList::new(dim, p).py_err()?;
    let q = ColumnList::new(dim, q).py_err()?;
    identify_equivalent(&p, &q, k_max, tol).py_err()
}

/// Corner deviation experiment; `method` is `"quadrature"` or
/// `"monte_carlo"`.
#[pyfunction]
#[pyo3(signature = (rng, target, radius, n_values, samples_per_n = 0, method = "quadrature"))]
fn ldp_corner(
    py: Python<'_>,
    rng: &mut PyRng,
    target: Vec<Vec<f64>>,
    radius: f64,
    n_values: Vec<usize>,
    samples_per_n: usize,
    method: &str,
) -> PyResult<PySlopeReport> {
    let method = match method {
        "quadrature" => Method::Quadrature,
        "monte_carlo" => Method::MonteCarlo,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let exp = LdpExperiment {
        k: target.len(),
        ell: target.first().map(Vec::len).unwrap_or(0),
        target,
        radius,
        n_values,
        samples_per_n,
        method,
    };
    let r = py.detach(|| run_ldp_corner(&mut rng.0, &exp)).py_err()?;
    Ok(PySlopeReport {
        n_values: r.per_n.iter().map(|p| p.n).collect(),
        log_probs: r.per_n.iter().map(|p| p.log_prob).collect(),
        stderrs: r.per_n.iter().map(|p| p.stderr).collect(),
        fitted_slope: r.fitted_slope,
        intercept: r.intercept,
        rate_reference: r.rate_reference.value(),
        relative_gap: r.relative_gap,
    })
}

/// Smallest KS p-value over the corner entries in the Wishart comparison.
#[pyfunction]
fn dickey_min_p_value(
    py: Python<'_>,
    rng: &mut PyRng,
    k: usize,
    m: usize,
    n: usize,
    samples: usize,
) -> PyResult<f64> {
    let r = py
        .detach(|| run_dickey_check(&mut rng.0, k, m, n, samples))
        .py_err()?;
    Ok(r.min_p_value())
}

/// Smallest KS p-value over the marginals of a projected `ℓ_p` ball.
#[pyfunction]
fn clt_min_p_value(
    py: Python<'_>,
    rng: &mut PyRng,
    k: usize,
    p: f64,
    n: usize,
    samples: usize,
) -> PyResult<f64> {
    let r = py
        .detach(|| run_clt_check(&mut rng.0, k, p, n, samples))
        .py_err()?;
    Ok(r.min_p_value())
}

#[pymodule]
fn ldplab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("LdplabError", py.get_type::<LdplabError>())?;
    m.add("NumericalFailure", py.get_type::<NumericalFailure>())?;
    m.add(
        "InfeasibleExperiment",
        py.get_type::<InfeasibleExperiment>(),
    )?;
    m.add_class::<PyRng>()?;
    m.add_class::<PyConfiguration>()?;
    m.add_class::<PyTruncationReport>()?;
    m.add_class::<PySlopeReport>()?;
    m.add_function(wrap_pyfunction!(stiefel, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonal, m)?)?;
    m.add_function(wrap_pyfunction!(wishart_draw, m)?)?;
    m.add_function(wrap_pyfunction!(p_gaussian_draws, m)?)?;
    m.add_function(wrap_pyfunction!(lp_ball, m)?)?;
    m.add_function(wrap_pyfunction!(corner_log_density, m)?)?;
    m.add_function(wrap_pyfunction!(inverted_t_log_density, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_p2, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(rate_with_report, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(levy_prokhorov_distance, m)?)?;
    m.add_function(wrap_pyfunction!(py_power_sums, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_corner, m)?)?;
    m.add_function(wrap_pyfunction!(dickey_min_p_value, m)?)?;
    m.add_function(wrap_pyfunction!(clt_min_p_value, m)?)?;
    Ok(())
}

//! Python bindings. Matrices cross the boundary as 2-D `float64` numpy
//! arrays; random draws take an integer seed and use the same generator as
//! the command-line tool, so equal seeds give equal problems.

use numpy::{PyArray1, PyArray2, PyArrayMethods, PyReadonlyArray2, PyUntypedArrayMethods};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcurc::io;
use rcurc::metrics::{self, Peak};
use rcurc::model;
use rcurc::sampling::{self, CcsObservation};
use rcurc::solver::{self, Setting, SolveReport, SolverConfig};
use rcurc::{DenseMatrix, RcurcError};

fn to_py_err(e: RcurcError) -> PyErr {
    match e {
        RcurcError::Io { .. } => PyOSError::new_err(e.to_string()),
        RcurcError::Numeric(_) | RcurcError::Solve { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn to_dense(a: &PyReadonlyArray2<'_, f64>) -> DenseMatrix {
    let view = a.as_array();
    let (rows, cols) = view.dim();
    DenseMatrix::from_fn(rows, cols, |i, j| view[[i, j]])
}

type Array<'py> = Bound<'py, PyArray2<f64>>;

fn to_numpy<'py>(py: Python<'py>, m: &DenseMatrix) -> PyResult<Array<'py>> {
    let (rows, cols) = m.shape();
    PyArray1::from_vec(py, m.data().to_vec()).reshape([rows, cols])
}

fn setting(v: Option<f64>) -> Setting {
    v.map_or(Setting::Auto, Setting::Value)
}

/// `W V^T` with standard-normal factors of inner dimension `rank`.
#[pyfunction]
fn gen_low_rank<'py>(py: Python<'py>, n1: usize, n2: usize, rank: usize, seed: u64) -> PyResult<Array<'py>> {
    let x = model::gen_low_rank(n1, n2, rank, &mut rng(seed)).map_err(to_py_err)?;
    to_numpy(py, &x)
}

/// `Y = X + S` with a rank-`rank` `X` and an `alpha`-sparse `S`.
#[pyclass(name = "SyntheticProblem", module = "pyrcurc", frozen)]
struct PySyntheticProblem {
    inner: model::SyntheticProblem,
}

#[pymethods]
impl PySyntheticProblem {
    #[new]
    #[pyo3(signature = (n1, n2, rank, alpha, amp = 10.0, seed = 0))]
    fn new(n1: usize, n2: usize, rank: usize, alpha: f64, amp: f64, seed: u64) -> PyResult<Self> {
        model::SyntheticProblem::generate(n1, n2, rank, alpha, amp, &mut rng(seed))
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    #[getter]
    fn x_true<'py>(&self, py: Python<'py>) -> PyResult<Array<'py>> {
        to_numpy(py, &self.inner.x_true)
    }

    #[getter]
    fn s_true<'py>(&self, py: Python<'py>) -> PyResult<Array<'py>> {
        to_numpy(py, &self.inner.s_true)
    }

    #[getter]
    fn y<'py>(&self, py: Python<'py>) -> PyResult<Array<'py>> {
        to_numpy(py, &self.inner.y)
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank
    }

    fn __repr__(&self) -> String {
        let (n1, n2) = self.inner.y.shape();
        format!(
            "SyntheticProblem({n1}x{n2}, rank={}, alpha={}, amp={})",
            self.inner.rank, self.inner.alpha, self.inner.amp
        )
    }
}

/// Entries of a matrix observed on a row panel and a column panel.
#[pyclass(name = "Observation", module = "pyrcurc", frozen)]
struct PyObservation {
    inner: CcsObservation,
}

#[pymethods]
impl PyObservation {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::observation_from_json(text)
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        io::read_observation(path)
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        io::observation_to_json(&self.inner).map_err(to_py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::write_observation(path, &self.inner).map_err(to_py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    #[getter]
    fn row_idx(&self) -> Vec<usize> {
        self.inner.row_idx().values().to_vec()
    }

    #[getter]
    fn col_idx(&self) -> Vec<usize> {
        self.inner.col_idx().values().to_vec()
    }

    /// Observed row-panel entries as `(i, j, value)`.
    fn row_entries(&self) -> Vec<(usize, usize, f64)> {
        let vals = self.inner.values_r();
        self.inner
            .omega_r()
            .entries()
            .iter()
            .zip(vals)
            .map(|(&(i, j), &v)| (i, j, v))
            .collect()
    }

    /// Observed column-panel entries as `(i, j, value)`.
    fn col_entries(&self) -> Vec<(usize, usize, f64)> {
        let vals = self.inner.values_c();
        self.inner
            .omega_c()
            .entries()
            .iter()
            .zip(vals)
            .map(|(&(i, j), &v)| (i, j, v))
            .collect()
    }

    /// Observed fractions `(p_R, p_C)` of the two panels.
    fn rates(&self) -> (f64, f64) {
        sampling::observation_rates(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.union_len()
    }

    fn __repr__(&self) -> String {
        let (n1, n2) = self.inner.shape();
        format!(
            "Observation({n1}x{n2}, |I|={}, |J|={}, entries={})",
            self.inner.row_idx().len(),
            self.inner.col_idx().len(),
            self.inner.union_len()
        )
    }
}

/// Draws row and column panels covering `row_frac` and `col_frac` of `y`,
/// then observes each panel entry with probability `p_row` / `p_col`.
#[pyfunction]
#[pyo3(signature = (y, row_frac, col_frac, p_row, p_col, seed = 0))]
fn ccs_sample(
    y: PyReadonlyArray2<'_, f64>,
    row_frac: f64,
    col_frac: f64,
    p_row: f64,
    p_col: f64,
    seed: u64,
) -> PyResult<PyObservation> {
    let y = to_dense(&y);
    sampling::ccs_sample(&y, row_frac, col_frac, p_row, p_col, &mut rng(seed))
        .map(|inner| PyObservation { inner })
        .map_err(to_py_err)
}

/// Outcome of a solve: the trace, the termination reason and the estimate.
#[pyclass(name = "SolveReport", module = "pyrcurc", frozen)]
struct PySolveReport {
    inner: SolveReport,
}

#[pymethods]
impl PySolveReport {
    #[getter]
    fn termination(&self) -> String {
        self.inner.termination.to_string()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.termination == solver::Termination::Converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn final_error(&self) -> f64 {
        self.inner.final_error()
    }

    #[getter]
    fn rank_deficient_steps(&self) -> usize {
        self.inner.rank_deficient_steps
    }

    /// `(iter, e_k, zeta_k, wall_ms)` per completed iteration.
    #[getter]
    fn trace(&self) -> Vec<(usize, f64, f64, f64)> {
        self.inner
            .trace
            .iter()
            .map(|t| (t.iter, t.e_k, t.zeta_k, t.wall_ms))
            .collect()
    }

    fn trace_csv(&self) -> String {
        io::trace_to_csv(&self.inner)
    }

    /// Dense low-rank estimate.
    fn estimate<'py>(&self, py: Python<'py>) -> PyResult<Array<'py>> {
        to_numpy(py, &self.inner.factors.to_dense())
    }

    /// `(L, M)` with `estimate = L @ M.T`.
    fn low_rank_factors<'py>(&self, py: Python<'py>) -> PyResult<(Array<'py>, Array<'py>)> {
        let (l, m) = self.inner.factors.low_rank_factors();
        Ok((to_numpy(py, &l)?, to_numpy(py, &m)?))
    }

    /// Dense outlier estimate, zero outside the panels.
    fn sparse<'py>(&self, py: Python<'py>) -> PyResult<Array<'py>> {
        to_numpy(py, &self.inner.sparse.to_dense())
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveReport(termination={}, iterations={}, final_error={:.3e})",
            self.inner.termination,
            self.inner.iterations(),
            self.inner.final_error()
        )
    }
}

/// Runs the solver. Unset step sizes and threshold take their automatic
/// values.
#[pyfunction]
#[pyo3(signature = (
    obs, rank, *, gamma = None, eps = None, max_iters = None,
    eta_r = None, eta_c = None, zeta0 = None, record_time = true
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    obs: &PyObservation,
    rank: usize,
    gamma: Option<f64>,
    eps: Option<f64>,
    max_iters: Option<usize>,
    eta_r: Option<f64>,
    eta_c: Option<f64>,
    zeta0: Option<f64>,
    record_time: bool,
) -> PyResult<PySolveReport> {
    let mut cfg = SolverConfig::new(rank);
    if let Some(g) = gamma {
        cfg.gamma = g;
    }
    if let Some(e) = eps {
        cfg.eps = e;
    }
    if let Some(m) = max_iters {
        cfg.max_iters = m;
    }
    cfg.eta_r = setting(eta_r);
    cfg.eta_c = setting(eta_c);
    cfg.zeta0 = setting(zeta0);
    cfg.record_time = record_time;
    let obs = &obs.inner;
    py.detach(|| solver::solve(obs, &cfg))
        .map(|inner| PySolveReport { inner })
        .map_err(to_py_err)
}

/// Keeps entries with `|v| >= zeta`, zeroes the rest.
#[pyfunction]
fn hard_threshold<'py>(py: Python<'py>, m: PyReadonlyArray2<'py, f64>, zeta: f64) -> PyResult<Array<'py>> {
    to_numpy(py, &solver::hard_threshold(&to_dense(&m), zeta))
}

/// `||x_hat - x_true||_F / ||x_true||_F`.
#[pyfunction]
fn recovery_error(x_hat: PyReadonlyArray2<'_, f64>, x_true: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
    metrics::recovery_error(&to_dense(&x_hat), &to_dense(&x_true)).map_err(to_py_err)
}

/// Peak signal-to-noise ratio in dB. `peak=None` uses the largest absolute
/// entry of `reference`.
#[pyfunction]
#[pyo3(signature = (reference, estimate, peak = None))]
fn psnr(
    reference: PyReadonlyArray2<'_, f64>,
    estimate: PyReadonlyArray2<'_, f64>,
    peak: Option<f64>,
) -> PyResult<f64> {
    let peak = peak.map_or(Peak::Auto, Peak::Value);
    metrics::psnr(&to_dense(&reference), &to_dense(&estimate), peak).map_err(to_py_err)
}

/// Least-squares fit of `ln e_k` against `k`; returns
/// `(slope, r2, iters_used)`.
#[pyfunction]
fn fit_linear_rate(errors: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let trace: Vec<(usize, f64)> = errors.into_iter().enumerate().map(|(k, e)| (k + 1, e)).collect();
    metrics::fit_linear_rate(&trace)
        .map(|f| (f.slope, f.r2, f.iters_used))
        .map_err(to_py_err)
}

/// Smallest `mu` for which the rank-`rank` singular subspaces of `x` are
/// `mu`-incoherent.
#[pyfunction]
fn incoherence_mu(x: PyReadonlyArray2<'_, f64>, rank: usize) -> PyResult<f64> {
    model::incoherence_mu(&to_dense(&x), rank).map_err(to_py_err)
}

/// Fraction of nonzeros in the densest row or column.
#[pyfunction]
fn sparsity_alpha(s: PyReadonlyArray2<'_, f64>) -> f64 {
    model::sparsity_alpha(&to_dense(&s))
}

#[pyfunction]
fn read_matrix<'py>(py: Python<'py>, path: &str) -> PyResult<Array<'py>> {
    to_numpy(py, &io::read_matrix(path).map_err(to_py_err)?)
}

#[pyfunction]
fn write_matrix(path: &str, m: PyReadonlyArray2<'_, f64>) -> PyResult<()> {
    if m.ndim() != 2 {
        return Err(PyValueError::new_err("expected a 2-D array"));
    }
    io::write_matrix(path, &to_dense(&m)).map_err(to_py_err)
}

#[pymodule]
fn pyrcurc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySyntheticProblem>()?;
    m.add_class::<PyObservation>()?;
    m.add_class::<PySolveReport>()?;
    m.add_function(wrap_pyfunction!(gen_low_rank, m)?)?;
    m.add_function(wrap_pyfunction!(ccs_sample, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(hard_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(recovery_error, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear_rate, m)?)?;
    m.add_function(wrap_pyfunction!(incoherence_mu, m)?)?;
    m.add_function(wrap_pyfunction!(sparsity_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(read_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(write_matrix, m)?)?;
    Ok(())
}

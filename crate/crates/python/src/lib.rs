//! Python bindings: moments, Haar sampling, cubature construction, single recoveries and
//! sweeps. Matrices cross the boundary as nested lists of rows.

use nalgebra::DVector;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use retrieval_core::cli::{sweep_rows, write_csv, SweepConfig, SUCCESS_TOL};
use retrieval_core::cubature::{self, random_unit_vector, AtomSource, HaarSource};
use retrieval_core::moments;
use retrieval_core::recover::{isometry_constants, measure, solve_feasibility};
use retrieval_core::rng::{derive_seed, stream};
use retrieval_core::{MomentCoefficients, Spectrum, SymMatrix};

create_exception!(retrieval_py, RetrievalError, PyValueError);

fn py_err<E: std::fmt::Display>(e: E) -> PyErr {
    RetrievalError::new_err(e.to_string())
}

fn sym(rows: Vec<Vec<f64>>) -> PyResult<SymMatrix> {
    SymMatrix::from_rows(&rows).map_err(py_err)
}

fn rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    let d = m.dim();
    (0..d)
        .map(|i| (0..d).map(|j| m.get(i, j)).collect())
        .collect()
}

fn spectrum(values: Vec<f64>) -> PyResult<Spectrum> {
    Spectrum::new(values).map_err(py_err)
}

/// E <P, X>^t over the orbit of diag(spectrum), t <= 3.
#[pyfunction]
fn trace_moment(spectrum_values: Vec<f64>, t: usize, x: Vec<Vec<f64>>) -> PyResult<f64> {
    moments::trace_moment(&spectrum(spectrum_values)?, t, &sym(x)?).map_err(py_err)
}

/// E <P, X_1> ... <P, X_t>.
#[pyfunction]
fn cross_moment(spectrum_values: Vec<f64>, xs: Vec<Vec<Vec<f64>>>) -> PyResult<f64> {
    let xs = xs.into_iter().map(sym).collect::<PyResult<Vec<_>>>()?;
    moments::cross_moment(&spectrum(spectrum_values)?, &xs).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (k, d, t, norm_sq = 1.0))]
fn rank1_projector_moment(k: usize, d: usize, t: usize, norm_sq: f64) -> PyResult<f64> {
    moments::rank1_projector_moment(k, d, t, norm_sq).map_err(py_err)
}

/// `(a1, a2)` with a1 E<P, X>P = X + a2 tr(X) I.
#[pyfunction]
fn moment_coefficients(spectrum_values: Vec<f64>) -> PyResult<(f64, f64)> {
    let c = MomentCoefficients::new(&spectrum(spectrum_values)?).map_err(py_err)?;
    Ok((c.a1(), c.a2()))
}

#[pyfunction]
#[pyo3(signature = (spectrum_values, seed = 0))]
fn haar_sample(spectrum_values: Vec<f64>, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let p = cubature::haar_sample(&spectrum(spectrum_values)?, &mut stream(seed));
    Ok(rows(&p))
}

#[pyfunction]
#[pyo3(signature = (spectrum_values, t, pool, residual = 1e-8, seed = 0))]
fn construct_cubature<'py>(
    py: Python<'py>,
    spectrum_values: Vec<f64>,
    t: usize,
    pool: usize,
    residual: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let l = spectrum(spectrum_values)?;
    let c =
        cubature::construct_cubature(&l, t, pool, residual, &mut stream(seed)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("weights", c.ensemble.weights().to_vec())?;
    out.set_item(
        "atoms",
        c.ensemble.atoms().iter().map(rows).collect::<Vec<_>>(),
    )?;
    out.set_item("max_residual", c.verification.max_residual)?;
    out.set_item("mode", c.verification.mode.to_string())?;
    out.set_item("fit_residual", c.fit_residual)?;
    Ok(out)
}

/// Recovers a random unit signal from `n` Haar measurements on the rank-`k` projector orbit.
#[pyfunction]
#[pyo3(signature = (d, k, n, seed = 0, tol = 1e-9, max_iter = 20_000))]
fn recover<'py>(
    py: Python<'py>,
    d: usize,
    k: usize,
    n: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let l = Spectrum::projector(d, k).map_err(py_err)?;
    let mut rng = stream(derive_seed(seed, &[d as u64, k as u64, 0]));
    let x: DVector<f64> = random_unit_vector(d, &mut rng);
    let ps = HaarSource::new(l).draw_many(n, &mut rng);
    let m = measure(&x, &ps).map_err(py_err)?;
    let r = solve_feasibility(&m, tol, max_iter).map_err(py_err)?;
    let c = isometry_constants(&ps, &x).map_err(py_err)?;
    let err = r.relative_error(&x);
    let out = PyDict::new(py);
    out.set_item("x", x.as_slice().to_vec())?;
    out.set_item("x_hat", rows(&r.x_hat))?;
    out.set_item("converged", r.converged)?;
    out.set_item("iterations", r.iterations)?;
    out.set_item("feasibility_residual", r.feasibility_residual)?;
    out.set_item("spectral_gap", r.spectral_gap)?;
    out.set_item("relative_error", err)?;
    out.set_item("success", err <= SUCCESS_TOL)?;
    out.set_item("alpha", c.alpha)?;
    out.set_item("beta_exact", c.beta_exact)?;
    Ok(out)
}

/// Runs a sweep from `key = value` config text and returns the CSV.
#[pyfunction]
fn sweep_csv(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = SweepConfig::parse(config).map_err(py_err)?;
    let rows = py.detach(|| sweep_rows(&cfg)).map_err(py_err)?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(py_err)?;
    String::from_utf8(buf).map_err(py_err)
}

#[pymodule]
fn retrieval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RetrievalError", m.py().get_type::<RetrievalError>())?;
    m.add_function(wrap_pyfunction!(trace_moment, m)?)?;
    m.add_function(wrap_pyfunction!(cross_moment, m)?)?;
    m.add_function(wrap_pyfunction!(rank1_projector_moment, m)?)?;
    m.add_function(wrap_pyfunction!(moment_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(haar_sample, m)?)?;
    m.add_function(wrap_pyfunction!(construct_cubature, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    Ok(())
}

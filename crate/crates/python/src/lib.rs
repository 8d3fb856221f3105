//! Python bindings. Joints are passed as nested lists with rows indexed by X;
//! symbols are the row and column indices.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use modalfeat::ace::{ace_discrete, AceOptions};
use modalfeat::apps::{recommend as recommend_items, softmax_divergence_gap as gap, Variant};
use modalfeat::common::eps_common_information as eps_ci;
use modalfeat::experiments::{chernoff_local as chernoff, run_tail_experiment, Metric};
use modalfeat::gaussian::{cca as gaussian_cca, gaussian_mi as gmi, GaussianJoint};
use modalfeat::geom::random_weak_joint;
use modalfeat::modal::{maximal_correlation as max_corr, ModalDecomposition};
use modalfeat::prob::mutual_information as mi;
use modalfeat::{Alphabet, JointPmf, Matrix, Method, Pmf};

create_exception!(modalfeat_py, ModalError, PyException);

fn err(e: modalfeat::Error) -> PyErr {
    ModalError::new_err(format!("{}: {}", e.code(), e))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

fn joint(rows: Vec<Vec<f64>>) -> PyResult<JointPmf> {
    JointPmf::from_matrix(matrix(rows)?).map_err(err)
}

fn modes<'py>(py: Python<'py>, md: &ModalDecomposition) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("sigmas", md.sigmas.clone())?;
    d.set_item("f", md.f.to_rows())?;
    d.set_item("g", md.g.to_rows())?;
    d.set_item("px", md.px.probs.clone())?;
    d.set_item("py", md.py.probs.clone())?;
    Ok(d)
}

fn ace_options(tol: f64, max_iters: usize, seed: u64) -> AceOptions {
    AceOptions {
        tol,
        max_iters,
        seed,
        ..AceOptions::default()
    }
}

/// Top-k modes from the SVD of the canonical dependence matrix.
#[pyfunction]
fn decompose<'py>(py: Python<'py>, probs: Vec<Vec<f64>>, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let md = modalfeat::decompose(&joint(probs)?, k, Method::Oracle).map_err(err)?;
    modes(py, &md)
}

/// Top-k modes by alternating conditional expectations.
#[pyfunction]
#[pyo3(signature = (probs, k, tol=1e-10, max_iters=10_000, seed=0))]
fn ace<'py>(
    py: Python<'py>,
    probs: Vec<Vec<f64>>,
    k: usize,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (md, trace) = ace_discrete(&joint(probs)?, k, &ace_options(tol, max_iters, seed)).map_err(err)?;
    let d = modes(py, &md)?;
    d.set_item("trace", trace.values)?;
    d.set_item("converged", trace.converged)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (probs, k=1))]
fn maximal_correlation(probs: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    max_corr(&joint(probs)?, k).map_err(err)
}

/// I(X;Y) in nats.
#[pyfunction]
fn mutual_information(probs: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(mi(&joint(probs)?))
}

#[pyfunction]
fn eps_common_information(probs: Vec<Vec<f64>>) -> PyResult<f64> {
    eps_ci(&joint(probs)?).map_err(err)
}

#[pyfunction]
fn softmax_divergence_gap(probs: Vec<Vec<f64>>, k: usize) -> PyResult<f64> {
    gap(&joint(probs)?, k).map_err(err)
}

/// Top-`top` Y indices and scores for user row `user`.
#[pyfunction]
#[pyo3(signature = (probs, k, user, top, variant="match"))]
fn recommend(probs: Vec<Vec<f64>>, k: usize, user: usize, top: usize, variant: &str) -> PyResult<Vec<(usize, f64)>> {
    let variant = match variant {
        "match" => Variant::Match,
        "y-weighted" => Variant::YWeighted,
        other => return Err(ModalError::new_err(format!("unknown variant {other}"))),
    };
    let r = recommend_items(&joint(probs)?, k, top, &user.to_string(), variant, Method::Oracle).map_err(err)?;
    Ok(r.items
        .into_iter()
        .map(|i| (i.item.parse().expect("numbered alphabet"), i.score))
        .collect())
}

/// Canonical correlations and directions of a Gaussian pair.
#[pyfunction]
fn cca<'py>(
    py: Python<'py>,
    cov_x: Vec<Vec<f64>>,
    cov_y: Vec<Vec<f64>>,
    cov_xy: Vec<Vec<f64>>,
    k: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let model = GaussianJoint::new(matrix(cov_x)?, matrix(cov_y)?, matrix(cov_xy)?).map_err(err)?;
    let c = gaussian_cca(&model, k).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sigmas", c.sigmas)?;
    d.set_item("f", c.f.to_rows())?;
    d.set_item("g", c.g.to_rows())?;
    d.set_item("mutual_information", gmi(&model).map_err(err)?.exact)?;
    Ok(d)
}

/// Random weakly dependent joint with `k` planted modes.
#[pyfunction]
#[pyo3(signature = (nx, ny, k, strength=0.3, seed=0))]
fn synth<'py>(py: Python<'py>, nx: usize, ny: usize, k: usize, strength: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let w = random_weak_joint(nx, ny, k, strength, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("probs", w.joint.probs.to_rows())?;
    d.set_item("sigmas", w.sigmas)?;
    Ok(d)
}

/// Monte Carlo tail frequencies against the sample-complexity bound.
#[pyfunction]
#[pyo3(signature = (probs, ns, deltas, k, trials, seed=0, metric="sigma"))]
fn tail_experiment(
    probs: Vec<Vec<f64>>,
    ns: Vec<usize>,
    deltas: Vec<f64>,
    k: usize,
    trials: usize,
    seed: u64,
    metric: &str,
) -> PyResult<Vec<(usize, f64, f64, f64, f64)>> {
    let metric = match metric {
        "sigma" => Metric::Sigma,
        "mu2" => Metric::Mu2,
        "mu2-prime" => Metric::Mu2Prime,
        "mi-error" => Metric::MiError,
        other => return Err(ModalError::new_err(format!("unknown metric {other}"))),
    };
    let r = run_tail_experiment(&joint(probs)?, metric, &ns, &deltas, k, trials, seed).map_err(err)?;
    Ok(r.cells
        .into_iter()
        .map(|c| (c.n, c.delta, c.frequency, c.bound, c.stderr))
        .collect())
}

/// (limit, normalized log-probabilities per (γ, n) cell).
#[pyfunction]
#[pyo3(signature = (h, p, gammas, ns, trials, seed=0))]
fn chernoff_local(
    h: Vec<f64>,
    p: Vec<f64>,
    gammas: Vec<f64>,
    ns: Vec<usize>,
    trials: usize,
    seed: u64,
) -> PyResult<(f64, Vec<(f64, usize, f64)>)> {
    let p = Pmf::new(Alphabet::numbered(p.len()), p).map_err(err)?;
    let r = chernoff(&h, &p, &gammas, &ns, trials, seed).map_err(err)?;
    Ok((r.limit, r.cells.into_iter().map(|c| (c.gamma, c.n, c.normalized)).collect()))
}

#[pymodule]
fn modalfeat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ModalError", m.py().get_type::<ModalError>())?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(ace, m)?)?;
    m.add_function(wrap_pyfunction!(maximal_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(eps_common_information, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_divergence_gap, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(cca, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(tail_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(chernoff_local, m)?)?;
    Ok(())
}

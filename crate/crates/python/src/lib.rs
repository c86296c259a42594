use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ris_drm::analysis;
use ris_drm::group_codes::{self, CodeKind, GroupCodeSpec, InitializerStyle};
use ris_drm::harness::{self, Link, SimConfig, SnrAxis};
use ris_drm::mapping::{PermutationCodebook, PskConstellation};
use ris_drm::ris_channel::{self, PatternSource};
use ris_drm::transceiver::{self, Scheme};
use ris_drm::CMatrix;

type Matrix = Vec<Vec<Complex64>>;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(m: &CMatrix) -> Matrix {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_py(rows: &Matrix) -> PyResult<CMatrix> {
    CMatrix::from_rows(rows).map_err(err)
}

fn code_spec(kind: &str, m: usize, k: usize, u: Option<Vec<usize>>) -> PyResult<GroupCodeSpec> {
    let kind: CodeKind = kind.parse().map_err(err)?;
    match u {
        Some(u) => GroupCodeSpec::new(kind, m, k, u).map_err(err),
        None => group_codes::builtin_spec(kind, m, k)
            .ok_or_else(|| err(format!("no built-in {kind} code for M={m} K={k}; pass u"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn link_config(
    scheme: &str,
    k: usize,
    m: usize,
    code: Option<&str>,
    u: Option<Vec<usize>>,
    n: usize,
    nr: usize,
    patterns: &str,
) -> PyResult<SimConfig> {
    let scheme: Scheme = scheme.parse().map_err(err)?;
    let code = match (scheme, code) {
        (Scheme::DrmDstm, kind) => Some(code_spec(kind.unwrap_or("cyclic"), m, k, u)?),
        _ => None,
    };
    let cfg = SimConfig {
        scheme,
        k,
        m,
        code,
        n,
        nr,
        patterns: patterns.parse::<PatternSource>().map_err(err)?,
        ..SimConfig::default()
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Permutation matrices of the K-slot codebook, in bit-label order.
#[pyfunction]
fn permutation_codebook(k: usize) -> PyResult<Vec<Matrix>> {
    let cb = PermutationCodebook::build(k).map_err(err)?;
    Ok(cb.matrices().iter().map(to_py).collect())
}

#[pyfunction]
fn psk_symbols(m: usize) -> PyResult<Vec<Complex64>> {
    Ok(PskConstellation::new(m).map_err(err)?.symbols().to_vec())
}

/// Elements of a cyclic or dicyclic group code. Without `u` the built-in
/// table entry is used.
#[pyfunction]
#[pyo3(signature = (kind, m, k, u=None))]
fn group_code(kind: &str, m: usize, k: usize, u: Option<Vec<usize>>) -> PyResult<Vec<Matrix>> {
    let code = code_spec(kind, m, k, u)?.build().map_err(err)?;
    Ok(code.elements().iter().map(to_py).collect())
}

#[pyfunction]
#[pyo3(signature = (kind, m, k, u=None))]
fn verify_group_code<'py>(
    py: Python<'py>,
    kind: &str,
    m: usize,
    k: usize,
    u: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = code_spec(kind, m, k, u)?;
    let code = spec.build().map_err(err)?;
    let rep = group_codes::verify_group(&code);
    let d = PyDict::new(py);
    d.set_item("spec", spec.to_string())?;
    d.set_item("size", code.len())?;
    d.set_item("unitary", rep.unitary)?;
    d.set_item("closed", rep.closed)?;
    d.set_item("distinct", rep.distinct)?;
    d.set_item("max_order", rep.max_order)?;
    d.set_item("expected_order", group_codes::GroupReport::expected_order(&spec))?;
    d.set_item("min_distance_sq", group_codes::min_pairwise_distance_sq(&code))?;
    Ok(d)
}

#[pyfunction]
fn builtin_code_tables<'py>(py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    group_codes::builtin_code_tables()
        .into_iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("kind", s.kind().to_string())?;
            d.set_item("M", s.m())?;
            d.set_item("K", s.k())?;
            d.set_item("u", s.u().to_vec())?;
            Ok(d)
        })
        .collect()
}

/// Initializer matrix `D` and its normalised form `D / sqrt(K)`.
#[pyfunction]
#[pyo3(signature = (k, style=None))]
fn initializer(k: usize, style: Option<&str>) -> PyResult<(Matrix, Matrix)> {
    let style = match style {
        Some(s) => s.parse::<InitializerStyle>().map_err(err)?,
        None => InitializerStyle::default_for(k),
    };
    let init = group_codes::build_initializer(k, style).map_err(err)?;
    Ok((to_py(&init.d), to_py(&init.normalized)))
}

#[pyfunction]
fn select_patterns<'py>(py: Python<'py>, n: usize, m: usize, k: usize) -> PyResult<Bound<'py, PyDict>> {
    let o = ris_channel::select_patterns_stepwise_depletion(n, m, k).map_err(err)?;
    let d = PyDict::new(py);
    let pats: Vec<Vec<Complex64>> = o.set.selected().iter().map(|p| p.entries().to_vec()).collect();
    d.set_item("patterns", pats)?;
    d.set_item("indices", o.indices)?;
    d.set_item("min_distance", o.min_distance)?;
    Ok(d)
}

/// Candidate transmit matrices; position in the list is the bit label.
#[pyfunction]
#[pyo3(signature = (scheme, k, m, code=None, u=None))]
fn candidates(scheme: &str, k: usize, m: usize, code: Option<&str>, u: Option<Vec<usize>>) -> PyResult<Vec<Matrix>> {
    let cfg = link_config(scheme, k, m, code, u, 4, 1, "random")?;
    let link = Link::new(&cfg).map_err(err)?;
    Ok(link.candidates.matrices().iter().map(to_py).collect())
}

/// Differential detection of one block. Returns the candidate index and its
/// bit label.
#[pyfunction]
#[pyo3(signature = (y_prev, y_curr, scheme, k, m, code=None, u=None))]
fn detect(
    y_prev: Matrix,
    y_curr: Matrix,
    scheme: &str,
    k: usize,
    m: usize,
    code: Option<&str>,
    u: Option<Vec<usize>>,
) -> PyResult<(usize, Vec<u32>)> {
    let cfg = link_config(scheme, k, m, code, u, 4, 1, "random")?;
    let link = Link::new(&cfg).map_err(err)?;
    let idx = transceiver::cdd_detect(&from_py(&y_prev)?, &from_py(&y_curr)?, &link.candidates).map_err(err)?;
    Ok((idx, link.candidates.bits(idx).into_iter().map(u32::from).collect()))
}

#[pyfunction]
fn transmission_rate(k: usize, m: usize, t: usize) -> f64 {
    analysis::transmission_rate(k, m, t)
}

#[pyfunction]
#[pyo3(signature = (scheme, k, m, nr=3, kind=None))]
fn complexity<'py>(
    py: Python<'py>,
    scheme: &str,
    k: usize,
    m: usize,
    nr: usize,
    kind: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme: Scheme = scheme.parse().map_err(err)?;
    let r = match scheme {
        Scheme::DrmDstm => {
            let kind: CodeKind = kind.unwrap_or("cyclic").parse().map_err(err)?;
            analysis::complexity_coded(k, m, nr, kind)
        }
        _ => analysis::complexity_uncoded(k, m, nr),
    };
    let d = PyDict::new(py);
    d.set_item("scheme", r.scheme)?;
    d.set_item("formula", r.formula_name)?;
    d.set_item("multiplications", r.multiplications)?;
    d.set_item("multiplications_group_size", r.group_size_count)?;
    Ok(d)
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    analysis::q_function(x)
}

#[pyfunction]
fn pairwise_error_probability(d_ed: f64, sigma2: f64) -> PyResult<f64> {
    analysis::pairwise_error_probability(d_ed, sigma2).map_err(err)
}

#[pyfunction]
fn ebn0_to_sigma2(ebn0_db: f64, k: usize, r: usize) -> f64 {
    harness::ebn0_to_sigma2(ebn0_db, k, r)
}

/// Monte-Carlo BER sweep. One dict per SNR point.
#[pyfunction]
#[pyo3(signature = (
    scheme="drm", k=2, m=2, code=None, u=None, ebn0=vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
    snr_axis="ebn0", n=4, nr=3, blocks=100, patterns="optimized", min_bit_errors=200,
    max_info_bits=10_000_000, seed=1, workers=None
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    scheme: &str,
    k: usize,
    m: usize,
    code: Option<&str>,
    u: Option<Vec<usize>>,
    ebn0: Vec<f64>,
    snr_axis: &str,
    n: usize,
    nr: usize,
    blocks: usize,
    patterns: &str,
    min_bit_errors: u64,
    max_info_bits: u64,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = link_config(scheme, k, m, code, u, n, nr, patterns)?;
    cfg.ebn0_db = ebn0;
    cfg.snr_axis = snr_axis.parse::<SnrAxis>().map_err(err)?;
    cfg.blocks = blocks;
    cfg.min_bit_errors = min_bit_errors;
    cfg.max_info_bits = max_info_bits;
    cfg.seed = seed;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let result = py.detach(|| harness::run_sweep(&cfg)).map_err(err)?;
    result
        .points
        .iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("ebn0_db", p.ebn0_db)?;
            d.set_item("rho", p.rho)?;
            d.set_item("sigma2", p.sigma2)?;
            d.set_item("info_bits", p.info_bits)?;
            d.set_item("bit_errors", p.bit_errors)?;
            d.set_item("ber", p.ber)?;
            d.set_item("frames", p.frames)?;
            d.set_item("config_hash", &result.config_hash)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn risdrm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(permutation_codebook, m)?)?;
    m.add_function(wrap_pyfunction!(psk_symbols, m)?)?;
    m.add_function(wrap_pyfunction!(group_code, m)?)?;
    m.add_function(wrap_pyfunction!(verify_group_code, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_code_tables, m)?)?;
    m.add_function(wrap_pyfunction!(initializer, m)?)?;
    m.add_function(wrap_pyfunction!(select_patterns, m)?)?;
    m.add_function(wrap_pyfunction!(candidates, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(transmission_rate, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_error_probability, m)?)?;
    m.add_function(wrap_pyfunction!(ebn0_to_sigma2, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}

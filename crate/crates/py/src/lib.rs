//! Python bindings.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use owqc_core::analysis::{self, ScanGrid};
use owqc_core::compiler::{self, CompiledCircuit};
use owqc_core::formats::{self, PlanDocument};
use owqc_core::montecarlo::{self, SampleConfig};
use owqc_core::schemes::{self, ErrorMap, SchemeId, SchemePhases};
use owqc_core::symplectic::{euler_decompose, PhaseAngle, SqueezeVariance, SymplecticMatrix2};
use owqc_core::Error;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn sigma2(value: Option<f64>) -> PyResult<SqueezeVariance> {
    match value {
        None => Ok(SqueezeVariance::UNIT),
        Some(v) => SqueezeVariance::new(v).map_err(err),
    }
}

fn matrix2(m: [[f64; 2]; 2]) -> PyResult<SymplecticMatrix2> {
    SymplecticMatrix2::from_rows(m).map_err(err)
}

fn phase(v: f64) -> PyResult<PhaseAngle> {
    PhaseAngle::new(v).map_err(err)
}

/// A scheme's transformation and error map.
#[pyclass(name = "Realization", module = "owqc", frozen)]
struct PyRealization {
    inner: schemes::SchemeRealization,
}

#[pymethods]
impl PyRealization {
    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.name()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.matrix.to_dmatrix())
    }

    #[getter]
    fn error_map(&self) -> Vec<Vec<f64>> {
        rows(self.inner.error_map.matrix())
    }

    /// Output error variances; units of sigma2 when `sigma2` is omitted.
    #[pyo3(signature = (sigma2=None))]
    fn variance(&self, sigma2: Option<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.variance(self::sigma2(sigma2)?).0)
    }

    fn __repr__(&self) -> String {
        format!("Realization({})", self.inner.scheme)
    }
}

/// Build a scheme from its name and library-layout phases.
#[pyfunction]
#[pyo3(signature = (scheme, phases=Vec::new()))]
fn realize(scheme: &str, phases: Vec<f64>) -> PyResult<PyRealization> {
    let id: SchemeId = scheme.parse().map_err(err)?;
    let phases = SchemePhases::new(&phases).map_err(err)?;
    Ok(PyRealization {
        inner: schemes::realize(id, &phases).map_err(err)?,
    })
}

/// Names of all schemes.
#[pyfunction]
fn scheme_names() -> Vec<&'static str> {
    SchemeId::ALL.iter().map(|s| s.name()).collect()
}

/// `(alpha, s, beta)` with `m = R(alpha) diag(s, 1/s) R(beta)`.
#[pyfunction]
fn euler(m: [[f64; 2]; 2]) -> PyResult<(f64, f64, f64)> {
    let f = euler_decompose(&matrix2(m)?);
    Ok((f.alpha.value(), f.s, f.beta.value()))
}

/// Rotator phases `(phi, theta_plus, theta_minus)` realising `m`.
#[pyfunction]
fn decompose_gate(m: [[f64; 2]; 2]) -> PyResult<(f64, f64, f64)> {
    let p = compiler::decompose_single_mode_gate(&matrix2(m)?);
    Ok((p.phi, p.theta_plus, p.theta_minus))
}

/// `(theta3, theta4, theta_plus)` for configurations 1..5.
#[pyfunction]
fn match_phases(theta3: f64, theta4: f64, theta_plus: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let m =
        analysis::match_phases(phase(theta3)?, phase(theta4)?, phase(theta_plus)?).map_err(err)?;
    Ok(m.configs
        .iter()
        .map(|c| (c.theta3, c.theta4, c.theta_plus))
        .collect())
}

/// Four-node error variances in units of sigma2.
#[pyfunction]
fn four_node_closed_form(theta3: f64, theta4: f64) -> PyResult<Vec<f64>> {
    Ok(
        schemes::four_node_variance_closed_form(phase(theta3)?, phase(theta4)?)
            .map_err(err)?
            .0,
    )
}

/// Rows `(theta3, theta4, norm_four_node, norm_pair)`.
#[pyfunction]
#[pyo3(signature = (grid, margin=1e-6))]
fn scan(py: Python<'_>, grid: usize, margin: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let g = ScanGrid::new(grid, margin).map_err(err)?;
    let s = py.detach(|| analysis::scan_surface(&g));
    Ok(s.rows
        .iter()
        .map(|r| (r.theta3, r.theta4, r.norm_four_node, r.norm_pair))
        .collect())
}

/// `(ratio, pair_better_cells, four_node_better_cells)`.
#[pyfunction]
#[pyo3(signature = (grid, margin=1e-6, reverse=false))]
fn area_ratio(
    py: Python<'_>,
    grid: usize,
    margin: f64,
    reverse: bool,
) -> PyResult<(f64, u64, u64)> {
    let g = ScanGrid::new(grid, margin).map_err(err)?;
    let c = py.detach(|| analysis::area_counts(&g));
    let r = if reverse { c.reversed() } else { c.ratio() }.map_err(err)?;
    Ok((r, c.pair_better, c.four_node_better))
}

/// Empirical variances of `error_map @ y` with `y ~ N(0, sigma2)`.
#[pyfunction]
#[pyo3(signature = (error_map, trials=1_000_000, seed=0, sigma2=0.05))]
fn estimate_variance(
    py: Python<'_>,
    error_map: Vec<Vec<f64>>,
    trials: usize,
    seed: u64,
    sigma2: f64,
) -> PyResult<Vec<f64>> {
    let n = error_map.len();
    let k = error_map.first().map_or(0, Vec::len);
    if error_map.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("error map rows differ in length"));
    }
    let m = DMatrix::from_fn(n, k, |i, j| error_map[i][j]);
    let cfg =
        SampleConfig::new(trials, seed, SqueezeVariance::new(sigma2).map_err(err)?).map_err(err)?;
    Ok(py
        .detach(|| montecarlo::estimate_variance(&ErrorMap::new(m), &cfg))
        .0)
}

/// Compile circuit JSON; returns `(plan_json, budget_in_sigma2_units, linf)`.
#[pyfunction]
#[pyo3(signature = (circuit_json, sigma2=0.05))]
fn compile(circuit_json: &str, sigma2: f64) -> PyResult<(String, Vec<f64>, f64)> {
    let c = formats::parse_circuit(circuit_json).map_err(err)?;
    let compiled: CompiledCircuit =
        compiler::compile_circuit(&c, SqueezeVariance::new(sigma2).map_err(err)?).map_err(err)?;
    let json = formats::plan_to_json(&PlanDocument::from(&compiled));
    Ok((
        json,
        compiled.budget.variance_vector().0,
        compiler::budget_norm(&compiled.budget),
    ))
}

/// Scan CSV text.
#[pyfunction]
#[pyo3(signature = (grid, margin=1e-6))]
fn scan_csv(py: Python<'_>, grid: usize, margin: f64) -> PyResult<String> {
    let g = ScanGrid::new(grid, margin).map_err(err)?;
    let s = py.detach(|| analysis::scan_surface(&g));
    let mut buf = Vec::new();
    formats::write_scan_csv(&s, &mut buf).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("ascii"))
}

#[pymodule]
#[pyo3(name = "owqc")]
pub fn owqc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRealization>()?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    m.add_function(wrap_pyfunction!(scheme_names, m)?)?;
    m.add_function(wrap_pyfunction!(euler, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_gate, m)?)?;
    m.add_function(wrap_pyfunction!(match_phases, m)?)?;
    m.add_function(wrap_pyfunction!(four_node_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(scan_csv, m)?)?;
    m.add_function(wrap_pyfunction!(area_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_variance, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    Ok(())
}

//! Python bindings: point clouds and clique complexes, the three classical
//! engines, the quantum-estimator emulator, gap probes, threshold polynomials
//! and the cost model. Structured results come back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyModule;

use qtda_core::classical::{
    betti_rank_formula, persistence_column_reduction, persistent_betti_rank_formula, persistent_betti_via_laplacian,
};
use qtda_core::complex::{self as cplx, CliqueComplex, FixedPoint, Mapping};
use qtda_core::emulator::{self, ProjectorMode, QuantumConfig};
use qtda_core::fixtures::{self, Fixture};
use qtda_core::{gaps, poly, resources, QtdaError};

create_exception!(qtda, QtdaCoreError, PyException, "Error raised by the qtda core library.");

fn err(e: QtdaError) -> PyErr {
    QtdaCoreError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

/// A fixed-point point cloud with its distance matrix and filtration scales.
#[pyclass(name = "PointCloud", module = "qtda", frozen)]
struct PyPointCloud {
    inner: Fixture,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (points, labels=None, bits=32, frac_bits=16))]
    fn new(points: Vec<Vec<f64>>, labels: Option<Vec<String>>, bits: u32, frac_bits: u32) -> PyResult<Self> {
        let format = FixedPoint::new(bits, frac_bits).map_err(err)?;
        let cloud = cplx::PointCloud::from_f64(&points, labels, format).map_err(err)?;
        Ok(PyPointCloud {
            inner: Fixture::from_cloud(cloud).map_err(err)?,
        })
    }

    /// Built-in fixture (`house`, `square`, `apex`) and its canonical (μ_i, μ_j).
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<(Self, f64, f64)> {
        let (fx, mu_i, mu_j) = fixtures::named(name).map_err(err)?;
        Ok((PyPointCloud { inner: fx }, mu_i, mu_j))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.dm.n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.cloud.dim()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.cloud.labels().to_vec()
    }

    /// Coordinates after fixed-point quantization.
    fn coords(&self) -> Vec<Vec<f64>> {
        (0..self.inner.cloud.n()).map(|i| self.inner.cloud.coords(i)).collect()
    }

    /// Filtration scales μ_0 = 0 < μ_1 < … (distinct pairwise distances).
    fn scales(&self) -> Vec<f64> {
        self.inner.schedule.mus()
    }

    fn distance(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.inner.dm.n();
        if i >= n || j >= n {
            return Err(err(QtdaError::InvalidArgument(format!("index out of range for {n} points"))));
        }
        Ok(self.inner.dm.dist(i, j))
    }

    /// Clique complex at filtration index `scale_index`, through dimension k_max + 1.
    #[pyo3(signature = (scale_index, k_max=1))]
    fn complex(&self, scale_index: usize, k_max: usize) -> PyResult<PyComplex> {
        Ok(PyComplex {
            inner: self.inner.complex(scale_index, k_max).map_err(err)?,
        })
    }

    /// Clique complex at the largest filtration scale not above `mu`.
    #[pyo3(signature = (mu, k_max=1))]
    fn complex_at(&self, mu: f64, k_max: usize) -> PyResult<PyComplex> {
        let idx = self
            .inner
            .schedule
            .mus()
            .iter()
            .rposition(|&m| m <= mu * (1.0 + 1e-12))
            .ok_or_else(|| err(QtdaError::InvalidArgument(format!("scale {mu} is negative"))))?;
        self.complex(idx, k_max)
    }

    /// Persistence pairs as `k,birth_scale,death_scale` CSV.
    #[pyo3(signature = (k_max=1))]
    fn persistence_csv(&self, k_max: usize) -> PyResult<String> {
        Ok(persistence_column_reduction(&self.inner.schedule, &self.inner.dm, k_max)
            .map_err(err)?
            .to_csv())
    }

    /// β_k^{i,j} from the column-reduction pairing.
    #[pyo3(signature = (i, j, k, k_max=None))]
    fn persistent_betti_pairing(&self, i: usize, j: usize, k: usize, k_max: Option<usize>) -> PyResult<usize> {
        let pairing = persistence_column_reduction(&self.inner.schedule, &self.inner.dm, k_max.unwrap_or(k)).map_err(err)?;
        Ok(pairing.betti(i, j, k))
    }

    /// Random projection to ceil(8 ln N / ε²) dimensions with a distortion certificate.
    #[pyo3(signature = (eps, seed=0))]
    fn jl_project<'py>(&self, py: Python<'py>, eps: f64, seed: u64) -> PyResult<(Self, Bound<'py, PyAny>)> {
        let (cloud, cert) = cplx::jl_project(&self.inner.cloud, eps, seed).map_err(err)?;
        Ok((
            PyPointCloud {
                inner: Fixture::from_cloud(cloud).map_err(err)?,
            },
            to_py(py, &cert)?,
        ))
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(n={}, dim={})", self.inner.dm.n(), self.inner.cloud.dim())
    }
}

/// A Vietoris–Rips (clique) complex at one scale.
#[pyclass(name = "Complex", module = "qtda", frozen)]
struct PyComplex {
    inner: CliqueComplex,
}

#[pymethods]
impl PyComplex {
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn scale_index(&self) -> usize {
        self.inner.scale_index()
    }

    #[getter]
    fn top_dim(&self) -> usize {
        self.inner.top_dim()
    }

    fn count(&self, k: usize) -> usize {
        self.inner.count(k)
    }

    fn simplices(&self, k: usize) -> Vec<Vec<usize>> {
        self.inner.simplices(k).to_vec()
    }

    fn contains(&self, simplex: Vec<usize>) -> PyResult<bool> {
        cplx::membership(&simplex, &self.inner).map_err(err)
    }

    fn label(&self, simplex: Vec<usize>) -> String {
        self.inner.label(&simplex)
    }

    /// β_k by the rank formula over the rationals.
    fn betti(&self, k: usize) -> PyResult<usize> {
        betti_rank_formula(&self.inner, k).map_err(err)
    }

    /// Orthonormal basis of ker Δ_k (harmonic representatives).
    fn harmonic_representatives(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
        let basis = gaps::harmonic_representative(&self.inner, k).map_err(err)?;
        Ok(basis.iter().map(|v| v.iter().copied().collect()).collect())
    }

    /// JSON dump with 1-based vertex tuples.
    fn dump_json(&self) -> String {
        self.inner.dump_json(true)
    }

    fn __repr__(&self) -> String {
        format!(
            "Complex(mu={}, counts={:?})",
            self.inner.mu(),
            (0..=self.inner.top_dim()).map(|k| self.inner.count(k)).collect::<Vec<_>>()
        )
    }
}

/// Persistent Betti number β_k^{i,j} by the rank formula and the persistent Laplacian.
#[pyfunction]
fn persistent_betti<'py>(py: Python<'py>, cx_i: &PyComplex, cx_j: &PyComplex, k: usize) -> PyResult<Bound<'py, PyAny>> {
    let rank = persistent_betti_rank_formula(&cx_i.inner, &cx_j.inner, k).map_err(err)?;
    let lap = persistent_betti_via_laplacian(&cx_i.inner, &cx_j.inner, k).map_err(err)?;
    to_py(py, &serde_json::json!({"rank_formula": rank, "laplacian": lap}))
}

/// Spectral gaps Λ_∂k, Λ_∂k+1, Λ_ΠΠ and the persistent-Laplacian gap.
#[pyfunction]
fn gap_report<'py>(py: Python<'py>, cx_i: &PyComplex, cx_j: &PyComplex, k: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &gaps::gap_report(&cx_i.inner, &cx_j.inner, k).map_err(err)?)
}

/// Run the emulated quantum estimator for one seed; returns the emulation report.
#[pyfunction]
#[pyo3(signature = (cx_i, cx_j, k, delta=0.4, eta=0.05, mode="poly", mapping="direct", seed=0))]
#[allow(clippy::too_many_arguments)]
fn estimate_persistent_betti<'py>(
    py: Python<'py>,
    cx_i: &PyComplex,
    cx_j: &PyComplex,
    k: usize,
    delta: f64,
    eta: f64,
    mode: &str,
    mapping: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let config = QuantumConfig {
        delta,
        eta,
        mode: mode.parse::<ProjectorMode>().map_err(err)?,
        mapping: mapping.parse::<Mapping>().map_err(err)?,
        ..QuantumConfig::default()
    };
    let prep = emulator::prepare_quantum_instance(&cx_i.inner, &cx_j.inner, k, config).map_err(err)?;
    let run = emulator::run_seed(&prep, seed).map_err(err)?;
    to_py(py, &emulator::emulation_report(&prep, &run))
}

/// Even Chebyshev threshold polynomial.
#[pyclass(name = "ThresholdPolynomial", module = "qtda", frozen)]
struct PyThresholdPolynomial {
    inner: poly::ThresholdPolynomial,
}

#[pymethods]
impl PyThresholdPolynomial {
    #[new]
    #[pyo3(signature = (center, half_width, eps, orientation="high"))]
    fn new(center: f64, half_width: f64, eps: f64, orientation: &str) -> PyResult<Self> {
        let orientation = match orientation {
            "high" => poly::Orientation::HighPass,
            "low" => poly::Orientation::LowPass,
            other => {
                return Err(err(QtdaError::InvalidArgument(format!(
                    "orientation must be \"high\" or \"low\" (got {other:?})"
                ))))
            }
        };
        Ok(PyThresholdPolynomial {
            inner: poly::threshold_polynomial(center, half_width, eps, orientation).map_err(err)?,
        })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs.clone()
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    #[pyo3(signature = (grid_points=10_000))]
    fn band_error(&self, grid_points: usize) -> f64 {
        self.inner.band_error(grid_points)
    }
}

fn cost_input(
    n: usize,
    k: usize,
    mapping: &str,
    memory: &str,
    delta: f64,
    eta: f64,
    gaps: (f64, f64, f64),
    s_k: Option<f64>,
) -> PyResult<resources::CostModelInput> {
    let mut input = resources::CostModelInput::new(n, k, mapping.parse::<Mapping>().map_err(err)?);
    input.memory = memory.parse::<resources::Memory>().map_err(err)?;
    input.delta = delta;
    input.eta = eta;
    input.gaps = resources::CostGaps {
        dk: gaps.0,
        dk1: gaps.1,
        pipi: gaps.2,
    };
    input.s_k = s_k;
    Ok(input)
}

/// Cost-model report (depth, repetitions, qubits, breakdown, budget).
#[pyfunction]
#[pyo3(signature = (n, k, mapping="direct", memory="qrom", delta=0.4, eta=0.05, gaps=(1.0, 1.0, 1.0), s_k=None))]
#[allow(clippy::too_many_arguments)]
fn total_runtime<'py>(
    py: Python<'py>,
    n: usize,
    k: usize,
    mapping: &str,
    memory: &str,
    delta: f64,
    eta: f64,
    gaps: (f64, f64, f64),
    s_k: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let input = cost_input(n, k, mapping, memory, delta, eta, gaps, s_k)?;
    to_py(py, &resources::total_runtime(&input).map_err(err)?)
}

/// One comparison row (ours, theirs, ratio) against a named reference.
#[pyfunction]
#[pyo3(signature = (n, k, reference, delta=0.4, eta=0.05, gaps=(1.0, 1.0, 1.0), s_k=None))]
#[allow(clippy::too_many_arguments)]
fn compare<'py>(
    py: Python<'py>,
    n: usize,
    k: usize,
    reference: &str,
    delta: f64,
    eta: f64,
    gaps: (f64, f64, f64),
    s_k: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let input = cost_input(n, k, "direct", "qrom", delta, eta, gaps, s_k)?;
    let reference = reference.parse::<resources::Reference>().map_err(err)?;
    to_py(py, &resources::compare(&input, reference).map_err(err)?)
}

/// Eigenvector overlaps of the Zeno counterexample.
#[pyfunction]
fn zeno(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &gaps::zeno_counterexample().map_err(err)?)
}

#[pymodule]
pub fn qtda(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QtdaCoreError", m.py().get_type::<QtdaCoreError>())?;
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyComplex>()?;
    m.add_class::<PyThresholdPolynomial>()?;
    m.add_function(wrap_pyfunction!(persistent_betti, m)?)?;
    m.add_function(wrap_pyfunction!(gap_report, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_persistent_betti, m)?)?;
    m.add_function(wrap_pyfunction!(total_runtime, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(zeno, m)?)?;
    Ok(())
}

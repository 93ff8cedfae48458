//! Python module `fpma`.

use fpma_core::device::{self, Direction, VtShift};
use fpma_core::mcam::{self, TernaryQuery};
use fpma_core::metrics::{bench_report, SwitchingCharge, TimingParams, Workload};
use fpma_core::{self as core, BitPair, MCAMBit, Parasitics, StLevel};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(fpma, FpmaError, PyValueError, "Validation, mode or domain error.");
create_exception!(fpma, ConvergenceError, PyRuntimeError, "The network solver did not converge.");

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Convergence { .. } => ConvergenceError::new_err(e.to_string()),
        core::Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => FpmaError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(eq, eq_int, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
#[allow(clippy::upper_case_acronyms)]
enum CellState {
    UWL,
    UWH,
    SW,
    DW,
}

impl From<CellState> for core::CellState {
    fn from(s: CellState) -> Self {
        match s {
            CellState::UWL => core::CellState::Uwl,
            CellState::UWH => core::CellState::Uwh,
            CellState::SW => core::CellState::Sw,
            CellState::DW => core::CellState::Dw,
        }
    }
}

impl From<core::CellState> for CellState {
    fn from(s: core::CellState) -> Self {
        match s {
            core::CellState::Uwl => CellState::UWL,
            core::CellState::Uwh => CellState::UWH,
            core::CellState::Sw => CellState::SW,
            core::CellState::Dw => CellState::DW,
        }
    }
}

#[pymethods]
impl CellState {
    fn mirror(&self) -> CellState {
        core::CellState::from(*self).mirror().into()
    }

    fn __str__(&self) -> &'static str {
        core::CellState::from(*self).name()
    }
}

fn direction(s: &str) -> PyResult<Direction> {
    s.parse().py_err()
}

#[pyclass(name = "DeviceParams", from_py_object)]
#[derive(Clone)]
struct PyDeviceParams {
    inner: core::DeviceParams,
}

#[pymethods]
impl PyDeviceParams {
    #[new]
    fn new() -> Self {
        Self { inner: core::DeviceParams::default() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: core::DeviceParams::from_json(text).py_err()? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py_err()
    }

    #[getter]
    fn i_off(&self) -> f64 {
        self.inner.i_off
    }

    #[getter]
    fn on_off_ratio(&self) -> f64 {
        self.inner.on_off_ratio
    }

    #[getter]
    fn v_read(&self) -> f64 {
        self.inner.v_read
    }

    #[getter]
    fn v_prog(&self) -> f64 {
        self.inner.v_prog
    }

    #[getter]
    fn vt_sigma(&self) -> f64 {
        self.inner.vt_sigma
    }

    #[setter]
    fn set_vt_sigma(&mut self, sigma: f64) -> PyResult<()> {
        let mut p = self.inner;
        p.vt_sigma = sigma;
        p.validate().py_err()?;
        self.inner = p;
        Ok(())
    }

    #[getter]
    fn i_crit(&self) -> f64 {
        self.inner.i_crit
    }

    fn i_on(&self) -> f64 {
        self.inner.i_on()
    }

    fn i_diff(&self) -> f64 {
        self.inner.i_diff()
    }
}

fn params_or_default(params: Option<PyRef<'_, PyDeviceParams>>) -> core::DeviceParams {
    params.map(|p| p.inner).unwrap_or_default()
}

#[pyclass(get_all, frozen)]
struct SearchResult {
    ml_index: usize,
    i_step1: f64,
    i_step0: f64,
    matched: bool,
    hamming_estimate: usize,
}

#[pymethods]
impl SearchResult {
    fn __repr__(&self) -> String {
        format!(
            "SearchResult(ml_index={}, i_step1={:e}, i_step0={:e}, matched={}, hamming_estimate={})",
            self.ml_index,
            self.i_step1,
            self.i_step0,
            if self.matched { "True" } else { "False" },
            self.hamming_estimate
        )
    }
}

impl From<&mcam::SearchResult> for SearchResult {
    fn from(r: &mcam::SearchResult) -> Self {
        Self {
            ml_index: r.ml_index,
            i_step1: r.i_step1,
            i_step0: r.i_step0,
            matched: r.matched,
            hamming_estimate: r.hamming_estimate,
        }
    }
}

#[pyclass(name = "Array")]
struct PyArray {
    inner: core::Array,
}

#[pymethods]
impl PyArray {
    #[new]
    #[pyo3(signature = (rows, cols, params=None, r_wire=0.0, r_sense=0.0))]
    fn new(
        rows: usize,
        cols: usize,
        params: Option<PyRef<'_, PyDeviceParams>>,
        r_wire: f64,
        r_sense: f64,
    ) -> PyResult<Self> {
        let parasitics = Parasitics { r_wire_per_cell: r_wire, r_sense };
        let inner = core::Array::new(rows, cols, params_or_default(params), parasitics).py_err()?;
        Ok(Self { inner })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    /// "AND" or "NOR".
    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode() {
            core::ArrayMode::And => "AND",
            core::ArrayMode::Nor => "NOR",
        }
    }

    /// Accepts "low" or "high".
    fn reconfig(&mut self, st: &str) -> PyResult<()> {
        self.inner.set_mode(st.parse::<StLevel>().py_err()?);
        Ok(())
    }

    fn state(&self, row: usize, col: usize) -> PyResult<CellState> {
        Ok(self.inner.state(row, col).py_err()?.into())
    }

    /// Returns the number of pulses issued.
    fn program_cell(&mut self, row: usize, col: usize, target: CellState) -> PyResult<usize> {
        Ok(self.inner.program_cell(row, col, target.into()).py_err()?.len())
    }

    /// `bits` are two-character strings such as "10".
    fn program_word(&mut self, row: usize, bits: Vec<String>) -> PyResult<usize> {
        let pairs = bits
            .iter()
            .map(|b| b.parse::<BitPair>())
            .collect::<core::Result<Vec<_>>>()
            .py_err()?;
        Ok(self.inner.program_word(row, &pairs).py_err()?.len())
    }

    fn read_word(&self, row: usize) -> PyResult<Vec<String>> {
        Ok(self.inner.read_word(row).py_err()?.iter().map(|b| b.to_string()).collect())
    }

    /// Stores a 0/1/X word down match line `col`.
    fn mcam_write_column(&mut self, col: usize, word: &str) -> PyResult<usize> {
        let bits = MCAMBit::parse_word(word).py_err()?;
        Ok(self.inner.mcam_write_column(col, &bits).py_err()?.len())
    }

    fn search(&self, py: Python<'_>, query: &str) -> PyResult<Vec<SearchResult>> {
        let query: TernaryQuery = query.parse().py_err()?;
        let array = &self.inner;
        let results = py.detach(|| mcam::search(array, &query)).py_err()?;
        Ok(results.iter().map(SearchResult::from).collect())
    }

    /// Energy report as a dict.
    #[pyo3(signature = (searches, writes, seed=0))]
    fn bench<'py>(&self, py: Python<'py>, searches: usize, writes: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let array = &self.inner;
        let report = py
            .detach(|| {
                bench_report(
                    array,
                    &Workload::new(searches, writes, seed),
                    &TimingParams::default(),
                    &SwitchingCharge::default(),
                )
            })
            .py_err()?;
        let dict = PyDict::new(py);
        dict.set_item("rows", report.rows)?;
        dict.set_item("cols", report.cols)?;
        dict.set_item("num_searches", report.num_searches)?;
        dict.set_item("num_writes", report.num_writes)?;
        dict.set_item("search_energy_total", report.search_energy_total)?;
        dict.set_item("search_energy_per_bit", report.search_energy_per_bit)?;
        dict.set_item("write_energy_total", report.write_energy_total)?;
        dict.set_item("write_energy_per_cell", report.write_energy_per_cell)?;
        dict.set_item("cycle_time", report.cycle_time)?;
        dict.set_item("search_voltage", report.search_voltage)?;
        dict.set_item("cell_area_um2", report.cell_area_um2)?;
        Ok(dict)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py_err()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: core::Array::from_json(text).py_err()? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).py_err()
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: core::Array::load(path).py_err()? })
    }
}

/// Drain-to-source current of a cell in diode mode (A).
#[pyfunction]
#[pyo3(signature = (state, v_drain, v_source, v_gate=None, params=None))]
fn diode_current(
    state: CellState,
    v_drain: f64,
    v_source: f64,
    v_gate: Option<f64>,
    params: Option<PyRef<'_, PyDeviceParams>>,
) -> PyResult<f64> {
    let p = params_or_default(params);
    device::diode_current(&p, state.into(), v_drain, v_source, v_gate.unwrap_or(p.v_gate_diode)).py_err()
}

#[pyfunction]
#[pyo3(signature = (state, v_gate, direction, params=None))]
fn transfer_current(
    state: CellState,
    v_gate: f64,
    direction: &str,
    params: Option<PyRef<'_, PyDeviceParams>>,
) -> PyResult<f64> {
    let p = params_or_default(params);
    device::transfer_current(&p, state.into(), v_gate, self::direction(direction)?).py_err()
}

/// `(v_gate, current)` samples over the read window.
#[pyfunction]
#[pyo3(signature = (state, direction, params=None))]
fn sweep_gate(
    state: CellState,
    direction: &str,
    params: Option<PyRef<'_, PyDeviceParams>>,
) -> PyResult<Vec<(f64, f64)>> {
    let p = params_or_default(params);
    Ok(device::sweep_gate(&p, state.into(), self::direction(direction)?, VtShift::ZERO))
}

#[pyfunction]
fn extract_vt(curve: Vec<(f64, f64)>, i_crit: f64) -> PyResult<f64> {
    device::extract_vt(&curve, i_crit).py_err()
}

#[pymodule]
fn fpma(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CellState>()?;
    m.add_class::<PyDeviceParams>()?;
    m.add_class::<PyArray>()?;
    m.add_class::<SearchResult>()?;
    m.add_function(wrap_pyfunction!(diode_current, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_current, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_gate, m)?)?;
    m.add_function(wrap_pyfunction!(extract_vt, m)?)?;
    m.add("FpmaError", m.py().get_type::<FpmaError>())?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    Ok(())
}

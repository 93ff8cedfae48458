//! Energy and latency accounting for searches and programming pulses.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::{Array, ArrayMode, MCAMBit, StLevel};
use crate::device::{diode_current, Pulse};
use crate::error::{Error, Result};
use crate::mcam::{self, TernaryQuery};

/// Cell area carried into reports as a constant (μm²).
pub const CELL_AREA_UM2: f64 = 0.156;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingParams {
    /// Duration of one search step (s).
    pub t_step: f64,
    /// Programming pulse width (s).
    pub t_prog: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            t_step: 240e-12,
            t_prog: 100e-6,
        }
    }
}

impl TimingParams {
    /// Both search steps back to back.
    pub fn cycle_time(&self) -> f64 {
        2.0 * self.t_step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingCharge {
    /// Polarization switching charge per write pulse (C).
    pub q_pol: f64,
}

impl Default for SwitchingCharge {
    fn default() -> Self {
        Self { q_pol: 86.4e-15 }
    }
}

/// Voltage across and current through each active cell in one search step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepTrace {
    pub branches: Vec<(f64, f64)>,
}

impl StepTrace {
    pub fn active_cells(&self) -> usize {
        self.branches.len()
    }
}

/// Per-branch trace of one search step: ideal clamps when the array has no
/// parasitics, otherwise the solved network.
pub fn step_trace(array: &Array, query: &TernaryQuery, en: bool) -> Result<StepTrace> {
    if !array.parasitics.is_ideal() {
        let (_, solution) = mcam::search_step_solution(array, query, en)?;
        return Ok(StepTrace {
            branches: solution
                .branch_currents
                .iter()
                .map(|b| (b.bias, b.current))
                .collect(),
        });
    }
    array.require_mode(ArrayMode::Nor)?;
    if query.len() != array.rows() {
        return Err(Error::Length {
            expected: array.rows(),
            actual: query.len(),
        });
    }
    let params = &array.params;
    let preset = mcam::step_preset(params, en);
    let mut branches = Vec::new();
    for (row, drive) in mcam::step_drives(params, query, en).into_iter().enumerate() {
        let Some(v_row) = drive.voltage() else {
            continue;
        };
        for col in 0..array.cols() {
            let i = diode_current(params, array.cell(row, col), preset, v_row, params.v_gate_diode)?;
            branches.push((preset - v_row, i));
        }
    }
    Ok(StepTrace { branches })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchEnergy {
    pub energy: f64,
    pub active_cells: usize,
}

impl SearchEnergy {
    pub fn per_bit(&self) -> f64 {
        if self.active_cells == 0 {
            0.0
        } else {
            self.energy / self.active_cells as f64
        }
    }
}

/// Dissipation `Σ |V·I|·t_step` over every branch of every step.
pub fn search_energy(steps: &[StepTrace], timing: &TimingParams) -> SearchEnergy {
    let mut out = SearchEnergy::default();
    for step in steps {
        for &(v, i) in &step.branches {
            out.energy += (v * i).abs() * timing.t_step;
        }
        out.active_cells += step.active_cells();
    }
    out
}

/// Switching-charge write energy `Σ |amplitude|·q_pol`.
pub fn write_energy(pulses: &[Pulse], charge: &SwitchingCharge) -> f64 {
    pulses.iter().map(|p| p.amplitude.abs() * charge.q_pol).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub num_searches: usize,
    pub num_writes: usize,
    pub seed: u64,
    /// Size of the seeded query pool; searches cycle through it in order.
    pub distinct_queries: usize,
}

impl Workload {
    pub fn new(num_searches: usize, num_writes: usize, seed: u64) -> Self {
        Self {
            num_searches,
            num_writes,
            seed,
            distinct_queries: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub rows: usize,
    pub cols: usize,
    pub cells: usize,
    pub num_searches: usize,
    pub num_writes: usize,
    /// J
    pub search_energy_total: f64,
    /// J per active cell per search.
    pub search_energy_per_bit: f64,
    /// J
    pub write_energy_total: f64,
    /// J per cell write.
    pub write_energy_per_cell: f64,
    /// s
    pub cycle_time: f64,
    /// V
    pub search_voltage: f64,
    pub cell_area_um2: f64,
}

impl EnergyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned two-column table using benchmark-style row labels.
    pub fn to_table(&self) -> String {
        let rows = [
            ("Cell structure", "1FeFET-2T".to_string()),
            ("Array", format!("{} x {}", self.rows, self.cols)),
            ("Cell area (μm^2)", format!("{}", self.cell_area_um2)),
            ("Speed (ps)", format!("{:.1}", self.cycle_time * 1e12)),
            (
                "Search energy (fJ/bit/search)",
                format!("{:.6}", self.search_energy_per_bit * 1e15),
            ),
            ("Write energy (fJ)", format!("{:.3}", self.write_energy_per_cell * 1e15)),
            ("Search voltage", format!("{}", self.search_voltage)),
            ("Storage type", "T NVM".to_string()),
            ("Searches", self.num_searches.to_string()),
            ("Writes", self.num_writes.to_string()),
        ];
        let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let pad = width - k.chars().count();
            let _ = writeln!(out, "{k}{}  {v}", " ".repeat(pad));
        }
        out
    }
}

fn random_query<R: Rng>(rows: usize, rng: &mut R) -> TernaryQuery {
    TernaryQuery::new((0..rows).map(|_| MCAMBit::ALL[rng.random_range(0..3)]).collect())
}

/// Runs random CAM writes followed by searches over a seeded query pool.
///
/// The caller's array is not modified. Mode switches between writing and
/// searching add no latency.
pub fn bench_report(
    array: &Array,
    workload: &Workload,
    timing: &TimingParams,
    charge: &SwitchingCharge,
) -> Result<EnergyReport> {
    if workload.num_searches > 0 && workload.distinct_queries == 0 {
        return Err(Error::InvalidParams("distinct_queries must be positive".into()));
    }
    let mut array = array.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(workload.seed);
    let (rows, cols) = (array.rows(), array.cols());

    let mut write_total = 0.0;
    if workload.num_writes > 0 {
        array.set_mode(StLevel::Low);
        for _ in 0..workload.num_writes {
            let row = rng.random_range(0..rows);
            let col = rng.random_range(0..cols);
            let bit = MCAMBit::ALL[rng.random_range(0..3)];
            write_total += write_energy(&array.mcam_write(row, col, bit)?, charge);
        }
    }

    let pool: Vec<TernaryQuery> = (0..workload.distinct_queries.min(workload.num_searches.max(1)))
        .map(|_| random_query(rows, &mut rng))
        .collect();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for k in 0..workload.num_searches {
        *counts.entry(k % pool.len()).or_default() += 1;
    }

    array.set_mode(StLevel::High);
    let mut search_total = 0.0;
    let mut active = 0usize;
    for (&k, &count) in &counts {
        let traces = [
            step_trace(&array, &pool[k], true)?,
            step_trace(&array, &pool[k], false)?,
        ];
        let e = search_energy(&traces, timing);
        search_total += count as f64 * e.energy;
        active += count * e.active_cells;
    }

    Ok(EnergyReport {
        rows,
        cols,
        cells: rows * cols,
        num_searches: workload.num_searches,
        num_writes: workload.num_writes,
        search_energy_total: search_total,
        search_energy_per_bit: if active == 0 { 0.0 } else { search_total / active as f64 },
        write_energy_total: write_total,
        write_energy_per_cell: if workload.num_writes == 0 {
            0.0
        } else {
            write_total / workload.num_writes as f64
        },
        cycle_time: timing.cycle_time(),
        search_voltage: array.params.v_read,
        cell_area_um2: CELL_AREA_UM2,
    })
}

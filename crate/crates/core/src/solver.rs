//! Match-line currents of the NOR (crossbar) array.
//!
//! Two routes are provided. [`ml_currents_ideal`] sums the diode currents of
//! the driven rows with every match line clamped to its preset voltage.
//! [`solve_network`] performs nodal analysis with finite sense and wire
//! resistances, treating every cell as a two-slope piecewise-linear diode,
//! which exposes sneak currents between rows.
//!
//! Cells sit with their source on the row (search line) and their drain on
//! the match line. Match-line currents are reported as the current the
//! array delivers into the match line, i.e. flowing source to drain.
//!
//! Node ordering in an assembled [`Network`]: match-line nodes left to
//! right, then wire nodes row-major. With `r_wire_per_cell > 0` each column
//! is a resistor chain of `rows` taps; the tap of the last row is the
//! match-line node at the sense end. A match-line node with `r_sense == 0`
//! is held at the preset voltage and is not an unknown.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::array::{Array, ArrayMode};
use crate::device::CellState;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
pub const VOLTAGE_TOLERANCE: f64 = 1e-6;
/// Biases this close to zero take the zero-bias (OFF) slope; keeps rounding noise from flipping branches.
pub const ZERO_BIAS_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowDrive {
    Open,
    Driven(f64),
}

impl RowDrive {
    pub fn voltage(self) -> Option<f64> {
        match self {
            RowDrive::Open => None,
            RowDrive::Driven(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlTermination {
    /// Sense-amplifier preset voltage (V).
    pub preset: f64,
    /// Sense resistance between the match line and the preset (Ω).
    pub r_sense: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    MatchLine { col: usize },
    Wire { row: usize, col: usize },
}

/// A node the cell drain attaches to: either an unknown or a fixed voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeRef {
    Unknown(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub row: usize,
    pub col: usize,
    pub state: CellState,
    /// Row (source) voltage.
    pub v_row: f64,
    /// Match-line tap (drain).
    pub tap: NodeRef,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resistor {
    pub a: NodeRef,
    pub b: NodeRef,
    pub conductance: f64,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<NodeKind>,
    pub branches: Vec<Branch>,
    pub resistors: Vec<Resistor>,
    /// Match-line node of each column.
    pub ml_nodes: Vec<NodeRef>,
    /// Unknowns grouped into independent blocks (one per column).
    pub blocks: Vec<Vec<usize>>,
    g_on: f64,
    g_off: f64,
}

fn validate_drives(array: &Array, drives: &[RowDrive]) -> Result<()> {
    if drives.len() != array.rows() {
        return Err(Error::Length {
            expected: array.rows(),
            actual: drives.len(),
        });
    }
    let limit = 2.0 * array.params.v_read;
    for (row, d) in drives.iter().enumerate() {
        if let RowDrive::Driven(v) = d {
            if !(*v >= 0.0 && *v <= limit) {
                return Err(Error::Domain(format!("row {row} drive {v} V outside [0, {limit}] V")));
            }
        }
    }
    Ok(())
}

/// Match-line currents with ideal clamps: open rows contribute nothing.
pub fn ml_currents_ideal(array: &Array, drives: &[RowDrive], v_ml: f64) -> Result<Vec<f64>> {
    array.require_mode(ArrayMode::Nor)?;
    validate_drives(array, drives)?;
    let params = &array.params;
    let mut currents = vec![0.0; array.cols()];
    for (row, drive) in drives.iter().enumerate() {
        let Some(v_row) = drive.voltage() else {
            continue;
        };
        for (col, total) in currents.iter_mut().enumerate() {
            let state = array.cell(row, col);
            let i_ds = crate::device::diode_current(params, state, v_ml, v_row, params.v_gate_diode)?;
            *total -= i_ds;
        }
    }
    Ok(currents)
}

pub fn assemble_network(array: &Array, drives: &[RowDrive], term: MlTermination) -> Result<Network> {
    array.require_mode(ArrayMode::Nor)?;
    validate_drives(array, drives)?;
    let r_wire = array.parasitics.r_wire_per_cell;
    if !(term.r_sense.is_finite() && term.r_sense >= 0.0) || !(r_wire >= 0.0) {
        return Err(Error::InvalidParams("resistances must be nonnegative".into()));
    }
    let (rows, cols) = (array.rows(), array.cols());

    let mut nodes = Vec::new();
    let ml_nodes: Vec<NodeRef> = (0..cols)
        .map(|col| {
            if term.r_sense > 0.0 {
                nodes.push(NodeKind::MatchLine { col });
                NodeRef::Unknown(nodes.len() - 1)
            } else {
                NodeRef::Fixed(term.preset)
            }
        })
        .collect();

    // taps[row][col]
    let mut taps = vec![ml_nodes.clone(); rows];
    if r_wire > 0.0 {
        for (row, tap_row) in taps.iter_mut().enumerate().take(rows - 1) {
            for (col, tap) in tap_row.iter_mut().enumerate() {
                nodes.push(NodeKind::Wire { row, col });
                *tap = NodeRef::Unknown(nodes.len() - 1);
            }
        }
    }

    let mut resistors = Vec::new();
    if term.r_sense > 0.0 {
        for &ml in &ml_nodes {
            resistors.push(Resistor {
                a: ml,
                b: NodeRef::Fixed(term.preset),
                conductance: 1.0 / term.r_sense,
            });
        }
    }
    if r_wire > 0.0 {
        for row in 0..rows - 1 {
            for col in 0..cols {
                resistors.push(Resistor {
                    a: taps[row][col],
                    b: taps[row + 1][col],
                    conductance: 1.0 / r_wire,
                });
            }
        }
    }

    let mut branches = Vec::new();
    for (row, drive) in drives.iter().enumerate() {
        let Some(v_row) = drive.voltage() else {
            continue;
        };
        for col in 0..cols {
            branches.push(Branch {
                row,
                col,
                state: array.cell(row, col),
                v_row,
                tap: taps[row][col],
            });
        }
    }

    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); cols];
    for (idx, kind) in nodes.iter().enumerate() {
        let col = match *kind {
            NodeKind::MatchLine { col } | NodeKind::Wire { col, .. } => col,
        };
        blocks[col].push(idx);
    }
    blocks.retain(|b| !b.is_empty());

    Ok(Network {
        nodes,
        branches,
        resistors,
        ml_nodes,
        blocks,
        g_on: array.params.g_on(),
        g_off: array.params.g_off(),
    })
}

impl Network {
    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    pub fn voltage(&self, node: NodeRef, x: &[f64]) -> f64 {
        match node {
            NodeRef::Unknown(i) => x[i],
            NodeRef::Fixed(v) => v,
        }
    }

    /// Branch forward/reverse assignment implied by node voltages `x`.
    pub fn assignment(&self, x: &[f64]) -> Vec<bool> {
        self.branches
            .iter()
            .map(|b| {
                let v = self.voltage(b.tap, x) - b.v_row;
                crate::device::diode_forward(b.state, if v.abs() <= ZERO_BIAS_BAND { 0.0 } else { v })
            })
            .collect()
    }

    fn conductance(&self, forward: bool) -> f64 {
        if forward {
            self.g_on
        } else {
            self.g_off
        }
    }

    /// Nodal system `G x = rhs` for a fixed branch assignment.
    pub fn system(&self, assignment: &[bool]) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.unknowns();
        let mut g = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        let mut stamp = |a: NodeRef, b: NodeRef, cond: f64| match (a, b) {
            (NodeRef::Unknown(i), NodeRef::Unknown(j)) => {
                g[(i, i)] += cond;
                g[(j, j)] += cond;
                g[(i, j)] -= cond;
                g[(j, i)] -= cond;
            }
            (NodeRef::Unknown(i), NodeRef::Fixed(v)) | (NodeRef::Fixed(v), NodeRef::Unknown(i)) => {
                g[(i, i)] += cond;
                rhs[i] += cond * v;
            }
            (NodeRef::Fixed(_), NodeRef::Fixed(_)) => {}
        };
        for r in &self.resistors {
            stamp(r.a, r.b, r.conductance);
        }
        for (b, &fwd) in self.branches.iter().zip(assignment) {
            stamp(b.tap, NodeRef::Fixed(b.v_row), self.conductance(fwd));
        }
        (g, rhs)
    }

    fn solve_linear(&self, assignment: &[bool]) -> Result<Vec<f64>> {
        let (g, rhs) = self.system(assignment);
        let mut x = vec![0.0; self.unknowns()];
        for block in &self.blocks {
            let m = block.len();
            let sub = DMatrix::from_fn(m, m, |i, j| g[(block[i], block[j])]);
            let sub_rhs = DVector::from_fn(m, |i, _| rhs[block[i]]);
            let chol = sub.cholesky().ok_or_else(|| {
                Error::Topology(format!("block of {m} nodes is not positive definite"))
            })?;
            let sol = chol.solve(&sub_rhs);
            for (i, &node) in block.iter().enumerate() {
                x[node] = sol[i];
            }
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCurrent {
    pub row: usize,
    pub col: usize,
    pub state: CellState,
    /// Drain minus source voltage.
    pub bias: f64,
    /// Positive drain to source.
    pub current: f64,
    pub forward: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Unknown node voltages in network order.
    pub node_voltages: Vec<f64>,
    /// Sense-end match-line voltage per column.
    pub ml_voltages: Vec<f64>,
    /// Current delivered into each match line by the array.
    pub ml_currents: Vec<f64>,
    pub branch_currents: Vec<BranchCurrent>,
    pub iterations: usize,
    /// Largest net current at any unknown node.
    pub max_residual: f64,
}

impl Solution {
    pub fn write_nodes_csv(&self, network: &Network, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "node,kind,row,col,voltage_V")?;
        for (idx, (kind, v)) in network.nodes.iter().zip(&self.node_voltages).enumerate() {
            match *kind {
                NodeKind::MatchLine { col } => writeln!(w, "{idx},ml,,{col},{v:.12e}")?,
                NodeKind::Wire { row, col } => writeln!(w, "{idx},wire,{row},{col},{v:.12e}")?,
            }
        }
        Ok(())
    }

    pub fn write_branches_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "row,col,state,bias_V,current_A,forward")?;
        for b in &self.branch_currents {
            writeln!(
                w,
                "{},{},{},{:.12e},{:.12e},{}",
                b.row, b.col, b.state, b.bias, b.current, b.forward
            )?;
        }
        Ok(())
    }
}

/// Piecewise-linear nodal solve by fixed point over branch assignments.
pub fn solve_network(array: &Array, drives: &[RowDrive], term: MlTermination) -> Result<Solution> {
    let network = assemble_network(array, drives, term)?;
    solve_assembled(&network, array.cols(), term)
}

pub fn solve_assembled(network: &Network, cols: usize, term: MlTermination) -> Result<Solution> {
    let n = network.unknowns();
    let mut x = vec![term.preset; n];
    let mut assignment = network.assignment(&x);
    let mut iterations = 0;
    if n > 0 {
        let mut last_delta = f64::INFINITY;
        loop {
            if iterations == MAX_ITERATIONS {
                return Err(Error::Convergence {
                    iterations,
                    last_delta,
                });
            }
            iterations += 1;
            let next = network.solve_linear(&assignment)?;
            last_delta = x
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            x = next;
            let next_assignment = network.assignment(&x);
            if next_assignment == assignment && last_delta < VOLTAGE_TOLERANCE {
                break;
            }
            assignment = next_assignment;
        }
    } else {
        iterations = 1;
    }

    let branch_currents: Vec<BranchCurrent> = network
        .branches
        .iter()
        .zip(&assignment)
        .map(|(b, &forward)| {
            let bias = network.voltage(b.tap, &x) - b.v_row;
            BranchCurrent {
                row: b.row,
                col: b.col,
                state: b.state,
                bias,
                current: network.conductance(forward) * bias,
                forward,
            }
        })
        .collect();

    let mut ml_currents = vec![0.0; cols];
    for b in &branch_currents {
        ml_currents[b.col] -= b.current;
    }
    let ml_voltages = network.ml_nodes.iter().map(|&m| network.voltage(m, &x)).collect();

    let mut net = vec![0.0; n];
    for (b, bc) in network.branches.iter().zip(&branch_currents) {
        if let NodeRef::Unknown(i) = b.tap {
            net[i] -= bc.current;
        }
    }
    for r in &network.resistors {
        let i_ab = r.conductance * (network.voltage(r.a, &x) - network.voltage(r.b, &x));
        if let NodeRef::Unknown(i) = r.a {
            net[i] -= i_ab;
        }
        if let NodeRef::Unknown(j) = r.b {
            net[j] += i_ab;
        }
    }
    let max_residual = net.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    Ok(Solution {
        node_voltages: x,
        ml_voltages,
        ml_currents,
        branch_currents,
        iterations,
        max_residual,
    })
}

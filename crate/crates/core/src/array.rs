//! Field-programmable memory array.
//!
//! The select-transistor (ST) line switches the whole array between the
//! AND configuration, used for programming and directional reads, and the
//! NOR configuration, where every cell sits between a search line (row,
//! source side) and a match line (column, drain side) like a crossbar.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{self, apply_pulse, BitPair, CellState, DeviceParams, Pulse, VtShift};
use crate::error::{Error, Result};

pub const ARRAY_SCHEMA: &str = "fpma-array-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrayMode {
    #[serde(rename = "AND")]
    And,
    #[serde(rename = "NOR")]
    Nor,
}

impl fmt::Display for ArrayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArrayMode::And => "AND",
            ArrayMode::Nor => "NOR",
        })
    }
}

/// Logic level on the select-transistor line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StLevel {
    Low,
    High,
}

impl StLevel {
    pub fn mode(self) -> ArrayMode {
        match self {
            StLevel::Low => ArrayMode::And,
            StLevel::High => ArrayMode::Nor,
        }
    }
}

impl FromStr for StLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" | "0" => Ok(StLevel::Low),
            "high" | "1" => Ok(StLevel::High),
            other => Err(Error::Parse(format!("ST level must be low or high, got {other:?}"))),
        }
    }
}

/// Wire and sense resistances along the match lines (Ω). Zero means ideal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Parasitics {
    pub r_wire_per_cell: f64,
    pub r_sense: f64,
}

impl Parasitics {
    pub const IDEAL: Parasitics = Parasitics {
        r_wire_per_cell: 0.0,
        r_sense: 0.0,
    };

    pub fn is_ideal(&self) -> bool {
        self.r_wire_per_cell == 0.0 && self.r_sense == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r_wire_per_cell", self.r_wire_per_cell), ("r_sense", self.r_sense)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Ternary CAM symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MCAMBit {
    Zero,
    One,
    X,
}

impl MCAMBit {
    pub const ALL: [MCAMBit; 3] = [MCAMBit::Zero, MCAMBit::One, MCAMBit::X];

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            '0' => Ok(MCAMBit::Zero),
            '1' => Ok(MCAMBit::One),
            'x' | 'X' => Ok(MCAMBit::X),
            other => Err(Error::Parse(format!("ternary symbol must be 0, 1 or X, got {other:?}"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            MCAMBit::Zero => '0',
            MCAMBit::One => '1',
            MCAMBit::X => 'X',
        }
    }

    /// Parses a string over {0, 1, X}, case-insensitive.
    pub fn parse_word(s: &str) -> Result<Vec<MCAMBit>> {
        s.trim().chars().map(MCAMBit::from_char).collect()
    }

    pub fn format_word(bits: &[MCAMBit]) -> String {
        bits.iter().map(|b| b.as_char()).collect()
    }
}

/// Which diode orientation stores which binary CAM value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CamPolarity {
    /// ZERO → DW, ONE → SW.
    #[default]
    #[serde(rename = "standard")]
    Standard,
    /// ZERO → SW, ONE → DW.
    #[serde(rename = "inverted")]
    Inverted,
}

impl CamPolarity {
    pub fn state_for(self, bit: MCAMBit) -> CellState {
        match (self, bit) {
            (_, MCAMBit::X) => CellState::Uwh,
            (CamPolarity::Standard, MCAMBit::Zero) | (CamPolarity::Inverted, MCAMBit::One) => CellState::Dw,
            (CamPolarity::Standard, MCAMBit::One) | (CamPolarity::Inverted, MCAMBit::Zero) => CellState::Sw,
        }
    }

    /// Inverse of [`CamPolarity::state_for`]; `None` for UWL, which no CAM symbol uses.
    pub fn bit_for(self, state: CellState) -> Option<MCAMBit> {
        MCAMBit::ALL.into_iter().find(|&b| self.state_for(b) == state)
    }
}

/// Pulse sequence that takes a cell from `start` to `target`.
///
/// At most two pulses: an erase to UWL when the target needs a partial write
/// from a different state, followed by the partial write itself.
pub fn program_pulses(start: CellState, target: CellState, params: &DeviceParams) -> Vec<Pulse> {
    if start == target {
        return Vec::new();
    }
    match target {
        CellState::Uwl => vec![Pulse::erase_low(params)],
        CellState::Uwh => vec![Pulse::write_high(params)],
        CellState::Sw | CellState::Dw => {
            let mut seq = Vec::with_capacity(2);
            if start != CellState::Uwl {
                seq.push(Pulse::erase_low(params));
            }
            seq.push(if target == CellState::Sw {
                Pulse::source_write(params)
            } else {
                Pulse::drain_write(params)
            });
            seq
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    rows: usize,
    cols: usize,
    cells: Vec<CellState>,
    mode: ArrayMode,
    pub params: DeviceParams,
    pub parasitics: Parasitics,
    pub cam_polarity: CamPolarity,
}

impl Array {
    /// An erased (all UWL) array in AND mode.
    pub fn new(rows: usize, cols: usize, params: DeviceParams, parasitics: Parasitics) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Construction(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        params.validate()?;
        parasitics.validate()?;
        Ok(Self {
            rows,
            cols,
            cells: vec![CellState::Uwl; rows * cols],
            mode: ArrayMode::And,
            params,
            parasitics,
            cam_polarity: CamPolarity::default(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mode(&self) -> ArrayMode {
        self.mode
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    fn index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::Bounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(row * self.cols + col)
    }

    pub fn state(&self, row: usize, col: usize) -> Result<CellState> {
        Ok(self.cells[self.index(row, col)?])
    }

    /// Unchecked accessor for hot loops; panics on a bad index.
    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> CellState {
        assert!(row < self.rows && col < self.cols);
        self.cells[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Result<Vec<CellState>> {
        self.index(0, col)?;
        Ok((0..self.rows).map(|r| self.cell(r, col)).collect())
    }

    pub fn set_mode(&mut self, st: StLevel) {
        self.mode = st.mode();
    }

    pub fn require_mode(&self, required: ArrayMode) -> Result<()> {
        if self.mode != required {
            return Err(Error::Mode {
                required,
                actual: self.mode,
            });
        }
        Ok(())
    }

    /// Programs one cell and returns the pulses issued.
    pub fn program_cell(&mut self, row: usize, col: usize, target: CellState) -> Result<Vec<Pulse>> {
        self.require_mode(ArrayMode::And)?;
        let idx = self.index(row, col)?;
        let pulses = program_pulses(self.cells[idx], target, &self.params);
        let mut state = self.cells[idx];
        for pulse in &pulses {
            state = apply_pulse(state, pulse, &self.params)?;
        }
        debug_assert_eq!(state, target);
        self.cells[idx] = state;
        Ok(pulses)
    }

    /// Programs a full row with MirrorBit pairs. Other rows are untouched.
    pub fn program_word(&mut self, row: usize, bits: &[BitPair]) -> Result<Vec<Pulse>> {
        self.require_mode(ArrayMode::And)?;
        if bits.len() != self.cols {
            return Err(Error::Length {
                expected: self.cols,
                actual: bits.len(),
            });
        }
        self.index(row, 0)?;
        let mut pulses = Vec::new();
        for (col, &b) in bits.iter().enumerate() {
            pulses.extend(self.program_cell(row, col, device::encode_bits(b))?);
        }
        Ok(pulses)
    }

    /// Reads a row by sweeping each cell in both directions and decoding.
    pub fn read_word(&self, row: usize) -> Result<Vec<BitPair>> {
        self.read_word_with(row, |_| VtShift::ZERO)
    }

    /// As [`Array::read_word`], with a fresh V_T perturbation per cell drawn from `rng`.
    pub fn read_word_noisy<R: Rng + ?Sized>(&self, row: usize, rng: &mut R) -> Result<Vec<BitPair>> {
        let params = self.params;
        self.read_word_with(row, |_| VtShift::sample(&params, rng))
    }

    fn read_word_with(&self, row: usize, mut shift: impl FnMut(usize) -> VtShift) -> Result<Vec<BitPair>> {
        self.require_mode(ArrayMode::And)?;
        self.index(row, 0)?;
        (0..self.cols)
            .map(|col| {
                let state = device::read_state(&self.params, self.cell(row, col), shift(col))?;
                Ok(device::decode_bits(state))
            })
            .collect()
    }

    pub fn mcam_write(&mut self, row: usize, col: usize, bit: MCAMBit) -> Result<Vec<Pulse>> {
        let target = self.cam_polarity.state_for(bit);
        self.program_cell(row, col, target)
    }

    /// Stores a ternary word along match line `col`, one symbol per row.
    pub fn mcam_write_column(&mut self, col: usize, word: &[MCAMBit]) -> Result<Vec<Pulse>> {
        if word.len() != self.rows {
            return Err(Error::Length {
                expected: self.rows,
                actual: word.len(),
            });
        }
        let mut pulses = Vec::new();
        for (row, &bit) in word.iter().enumerate() {
            pulses.extend(self.mcam_write(row, col, bit)?);
        }
        Ok(pulses)
    }

    /// The ternary word stored on match line `col`, if every cell holds a CAM state.
    pub fn mcam_column(&self, col: usize) -> Result<Vec<Option<MCAMBit>>> {
        Ok(self
            .column(col)?
            .into_iter()
            .map(|s| self.cam_polarity.bit_for(s))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ArrayDoc {
            schema: ARRAY_SCHEMA.into(),
            rows: self.rows,
            cols: self.cols,
            mode: self.mode,
            cells: self.cells.clone(),
            params: self.params.to_json_value(),
            parasitics: self.parasitics,
            cam_polarity: self.cam_polarity,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema")
            .and_then(|s| s.as_str())
            .unwrap_or("")
            .to_string();
        if found != ARRAY_SCHEMA {
            return Err(Error::Schema {
                expected: ARRAY_SCHEMA.into(),
                found,
            });
        }
        let doc: ArrayDoc = serde_json::from_value(value)?;
        let params = DeviceParams::from_json_value(doc.params)?;
        let mut array = Array::new(doc.rows, doc.cols, params, doc.parasitics)?;
        if doc.cells.len() != doc.rows * doc.cols {
            return Err(Error::Length {
                expected: doc.rows * doc.cols,
                actual: doc.cells.len(),
            });
        }
        array.cells = doc.cells;
        array.mode = doc.mode;
        array.cam_polarity = doc.cam_polarity;
        Ok(array)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ArrayDoc {
    schema: String,
    rows: usize,
    cols: usize,
    mode: ArrayMode,
    /// Row-major.
    cells: Vec<CellState>,
    params: serde_json::Value,
    parasitics: Parasitics,
    #[serde(default)]
    cam_polarity: CamPolarity,
}

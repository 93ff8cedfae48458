//! Compact behavioral model of a single MirrorBit FeFET cell.
//!
//! A cell holds one of four polarization states. The two uniform states
//! (`UWL`, `UWH`) read identically in both directions; the two partially
//! written states (`SW`, `DW`) have direction-dependent thresholds and
//! conduct like a diode when operated as a two-terminal device.
//!
//! Three views of the cell are modeled:
//!
//! * gate transfer curves `I_D(V_G)` for drain-read and source-read,
//! * the piecewise-linear two-terminal diode used in the NOR (crossbar) array,
//! * the pulse-driven state machine used for programming.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema tag written into serialized [`DeviceParams`] documents.
pub const DEVICE_SCHEMA: &str = "fpma-device-v1";

/// Gate voltages accepted by [`transfer_current`].
pub const GATE_RANGE: (f64, f64) = (-2.0, 3.0);

/// Gate sweep window used for directional reads.
pub const SWEEP_START: f64 = -0.5;
pub const SWEEP_STOP: f64 = 1.5;
/// 5 mV spacing over the sweep window.
pub const SWEEP_POINTS: usize = 401;

/// Largest pulse amplitude accepted before the pulse is rejected outright.
pub const PULSE_AMPLITUDE_LIMIT: f64 = 10.0;

/// Two decode distances closer than this are treated as a tie.
pub const DECODE_TIE_TOLERANCE: f64 = 1e-6;

/// Polarization state of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellState {
    /// Uniform write, low V_T.
    #[serde(rename = "UWL")]
    Uwl,
    /// Uniform write, high V_T.
    #[serde(rename = "UWH")]
    Uwh,
    /// Source-side partial write.
    #[serde(rename = "SW")]
    Sw,
    /// Drain-side partial write.
    #[serde(rename = "DW")]
    Dw,
}

impl CellState {
    pub const ALL: [CellState; 4] = [CellState::Uwl, CellState::Uwh, CellState::Sw, CellState::Dw];

    pub fn name(self) -> &'static str {
        match self {
            CellState::Uwl => "UWL",
            CellState::Uwh => "UWH",
            CellState::Sw => "SW",
            CellState::Dw => "DW",
        }
    }

    /// The state obtained by exchanging drain and source.
    pub fn mirror(self) -> CellState {
        match self {
            CellState::Sw => CellState::Dw,
            CellState::Dw => CellState::Sw,
            s => s,
        }
    }
}

impl fmt::Display for CellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "UWL" => Ok(CellState::Uwl),
            "UWH" => Ok(CellState::Uwh),
            "SW" => Ok(CellState::Sw),
            "DW" => Ok(CellState::Dw),
            other => Err(Error::Parse(format!("unknown cell state {other:?}"))),
        }
    }
}

/// Read orientation: drain read or source read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "DR")]
    Dr,
    #[serde(rename = "SR")]
    Sr,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Dr, Direction::Sr];
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dr" => Ok(Direction::Dr),
            "sr" => Ok(Direction::Sr),
            other => Err(Error::Parse(format!("unknown read direction {other:?}"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Dr => "DR",
            Direction::Sr => "SR",
        })
    }
}

/// Threshold voltages of one state in both read directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VtPair {
    pub dr: f64,
    pub sr: f64,
}

impl VtPair {
    pub fn get(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Dr => self.dr,
            Direction::Sr => self.sr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VtTable {
    #[serde(rename = "UWL")]
    pub uwl: VtPair,
    #[serde(rename = "UWH")]
    pub uwh: VtPair,
    #[serde(rename = "SW")]
    pub sw: VtPair,
    #[serde(rename = "DW")]
    pub dw: VtPair,
}

impl VtTable {
    pub fn pair(&self, state: CellState) -> VtPair {
        match state {
            CellState::Uwl => self.uwl,
            CellState::Uwh => self.uwh,
            CellState::Sw => self.sw,
            CellState::Dw => self.dw,
        }
    }

    pub fn get(&self, state: CellState, direction: Direction) -> f64 {
        self.pair(state).get(direction)
    }

    /// Checks the ordering of the four states and the SW/DW mirror symmetry.
    pub fn validate(&self) -> Result<()> {
        let all = [self.uwl, self.uwh, self.sw, self.dw];
        let bad = |msg: &str| Err(Error::InvalidParams(format!("vt_table: {msg}")));
        if all.iter().any(|p| !p.dr.is_finite() || !p.sr.is_finite()) {
            return bad("entries must be finite");
        }
        if self.uwl.dr != self.uwl.sr || self.uwh.dr != self.uwh.sr {
            return bad("uniform states must read identically in both directions");
        }
        let lo = self.uwl.dr;
        let hi = self.uwh.dr;
        if all.iter().any(|p| p.dr < lo || p.sr < lo) {
            return bad("UWL must be the lowest entry");
        }
        if all.iter().any(|p| p.dr > hi || p.sr > hi) {
            return bad("UWH must be the highest entry");
        }
        if !(self.sw.sr > self.sw.dr) {
            return bad("SW must read higher in SR than in DR");
        }
        if !(self.dw.dr > self.dw.sr) {
            return bad("DW must read higher in DR than in SR");
        }
        if self.sw.dr != self.dw.sr || self.sw.sr != self.dw.dr {
            return bad("SW and DW must be mirror images");
        }
        Ok(())
    }
}

impl Default for VtTable {
    fn default() -> Self {
        Self {
            uwl: VtPair { dr: 0.2, sr: 0.2 },
            uwh: VtPair { dr: 1.0, sr: 1.0 },
            sw: VtPair { dr: 0.4, sr: 0.8 },
            dw: VtPair { dr: 0.8, sr: 0.4 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Channel length (m).
    pub length: f64,
    /// Channel width (m).
    pub width: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            length: 240e-9,
            width: 240e-9,
        }
    }
}

/// Calibration constants of the cell model. All values are SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Reverse (OFF) diode current at `v_read` (A).
    pub i_off: f64,
    /// I_ON / I_OFF at `v_read`.
    pub on_off_ratio: f64,
    /// Search / read voltage (V).
    pub v_read: f64,
    /// Programming pulse amplitude (V).
    pub v_prog: f64,
    /// Programming pulse width (s).
    pub t_prog: f64,
    /// Gate bias at which the diode characteristic is calibrated (V).
    pub v_gate_diode: f64,
    pub vt_table: VtTable,
    /// Logistic turn-on sharpness of the transfer curve (V).
    pub slope_s: f64,
    /// Deep-subthreshold floor of the transfer curve (A).
    pub i_floor: f64,
    /// Saturated ON current of the transfer curve (A).
    pub i_max: f64,
    /// Constant-current criterion for V_T extraction (A).
    pub i_crit: f64,
    /// Standard deviation of the per-direction V_T perturbation (V).
    pub vt_sigma: f64,
    pub geometry: Geometry,
    /// Pulses with |amplitude| below `disturb_fraction * v_prog` leave the state unchanged.
    pub disturb_fraction: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        let geometry = Geometry::default();
        Self {
            i_off: 24e-9,
            on_off_ratio: 30.0,
            v_read: 1.5,
            v_prog: 4.0,
            t_prog: 100e-6,
            v_gate_diode: 0.2,
            vt_table: VtTable::default(),
            slope_s: 0.05,
            i_floor: 1e-10,
            i_max: 1e-4,
            i_crit: 100e-9 * geometry.width / geometry.length,
            vt_sigma: 0.0,
            geometry,
            disturb_fraction: 0.5,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DeviceParamsDoc {
    schema: String,
    #[serde(flatten)]
    params: DeviceParams,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("i_off", self.i_off),
            ("v_read", self.v_read),
            ("v_prog", self.v_prog),
            ("t_prog", self.t_prog),
            ("slope_s", self.slope_s),
            ("i_floor", self.i_floor),
            ("i_crit", self.i_crit),
            ("geometry.length", self.geometry.length),
            ("geometry.width", self.geometry.width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.on_off_ratio.is_finite() && self.on_off_ratio > 1.0) {
            return Err(Error::InvalidParams(format!(
                "on_off_ratio must exceed 1, got {}",
                self.on_off_ratio
            )));
        }
        if !(self.i_max.is_finite() && self.i_max > self.i_floor) {
            return Err(Error::InvalidParams("i_max must exceed i_floor".into()));
        }
        if !(self.vt_sigma.is_finite() && self.vt_sigma >= 0.0) {
            return Err(Error::InvalidParams("vt_sigma must be nonnegative".into()));
        }
        if !(self.disturb_fraction > 0.0 && self.disturb_fraction <= 1.0) {
            return Err(Error::InvalidParams("disturb_fraction must lie in (0, 1]".into()));
        }
        if !self.v_gate_diode.is_finite() {
            return Err(Error::InvalidParams("v_gate_diode must be finite".into()));
        }
        self.vt_table.validate()
    }

    /// Forward diode current at `v_read` (A).
    pub fn i_on(&self) -> f64 {
        self.i_off * self.on_off_ratio
    }

    /// Single-mismatch current resolution, `i_on - i_off` (A).
    pub fn i_diff(&self) -> f64 {
        self.i_on() - self.i_off
    }

    /// Forward (ON) diode conductance (S).
    pub fn g_on(&self) -> f64 {
        self.i_on() / self.v_read
    }

    /// Reverse (OFF) diode conductance (S).
    pub fn g_off(&self) -> f64 {
        self.i_off / self.v_read
    }

    /// Minimum pulse amplitude that changes a cell's state (V).
    pub fn write_threshold(&self) -> f64 {
        self.disturb_fraction * self.v_prog
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DeviceParamsDoc {
            schema: DEVICE_SCHEMA.to_string(),
            params: *self,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_json_value(value)
    }

    pub(crate) fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(DeviceParamsDoc {
            schema: DEVICE_SCHEMA.to_string(),
            params: *self,
        })
        .expect("device params serialize to JSON")
    }

    pub(crate) fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let found = value
            .get("schema")
            .and_then(|s| s.as_str())
            .unwrap_or("")
            .to_string();
        if found != DEVICE_SCHEMA {
            return Err(Error::Schema {
                expected: DEVICE_SCHEMA.into(),
                found,
            });
        }
        let doc: DeviceParamsDoc = serde_json::from_value(value)?;
        doc.params.validate()?;
        Ok(doc.params)
    }
}

/// Per-cell V_T offsets applied on top of the table values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VtShift {
    pub dr: f64,
    pub sr: f64,
}

impl VtShift {
    pub const ZERO: VtShift = VtShift { dr: 0.0, sr: 0.0 };

    /// Draws independent Gaussian offsets for both directions; zero when `vt_sigma == 0`.
    pub fn sample<R: Rng + ?Sized>(params: &DeviceParams, rng: &mut R) -> VtShift {
        if params.vt_sigma == 0.0 {
            return VtShift::ZERO;
        }
        let normal = Normal::new(0.0, params.vt_sigma).expect("vt_sigma validated nonnegative");
        VtShift {
            dr: normal.sample(rng),
            sr: normal.sample(rng),
        }
    }

    fn get(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Dr => self.dr,
            Direction::Sr => self.sr,
        }
    }
}

/// Drain current under the fixed small read bias.
///
/// The curve is a logistic in log-current between `i_floor` and `i_max`,
/// centred on the state's threshold for the given direction, so the current
/// at `V_G = V_T` is `sqrt(i_floor * i_max)`.
pub fn transfer_current(
    params: &DeviceParams,
    state: CellState,
    v_gate: f64,
    direction: Direction,
) -> Result<f64> {
    transfer_current_shifted(params, state, VtShift::ZERO, v_gate, direction)
}

pub fn transfer_current_shifted(
    params: &DeviceParams,
    state: CellState,
    shift: VtShift,
    v_gate: f64,
    direction: Direction,
) -> Result<f64> {
    if !(v_gate >= GATE_RANGE.0 && v_gate <= GATE_RANGE.1) {
        return Err(Error::Domain(format!(
            "gate voltage {v_gate} V outside [{}, {}] V",
            GATE_RANGE.0, GATE_RANGE.1
        )));
    }
    let vt = params.vt_table.get(state, direction) + shift.get(direction);
    Ok(logistic_current(params, vt, v_gate))
}

fn logistic_current(params: &DeviceParams, vt: f64, v_gate: f64) -> f64 {
    let lo = params.i_floor.ln();
    let hi = params.i_max.ln();
    let sigma = 1.0 / (1.0 + (-(v_gate - vt) / params.slope_s).exp());
    (lo + (hi - lo) * sigma).exp()
}

/// Gate sweep over the read window, returning `(v_gate, current)` samples.
pub fn sweep_gate(
    params: &DeviceParams,
    state: CellState,
    direction: Direction,
    shift: VtShift,
) -> Vec<(f64, f64)> {
    let step = (SWEEP_STOP - SWEEP_START) / (SWEEP_POINTS - 1) as f64;
    (0..SWEEP_POINTS)
        .map(|k| {
            let vg = SWEEP_START + step * k as f64;
            let vt = params.vt_table.get(state, direction) + shift.get(direction);
            (vg, logistic_current(params, vt, vg))
        })
        .collect()
}

/// Constant-current threshold extraction.
///
/// Returns the gate voltage where the sampled curve crosses `i_crit`, using
/// linear interpolation between the two bracketing samples.
pub fn extract_vt(curve: &[(f64, f64)], i_crit: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Extraction("empty curve".into()));
    }
    for w in curve.windows(2) {
        if !(w[1].1 > w[0].1) {
            return Err(Error::Domain(format!(
                "curve is not strictly increasing in current at V_G = {} V",
                w[1].0
            )));
        }
    }
    let first = curve[0];
    let last = curve[curve.len() - 1];
    if !(i_crit >= first.1 && i_crit <= last.1) {
        return Err(Error::Extraction(format!(
            "criterion {i_crit:e} A outside curve range [{:e}, {:e}] A",
            first.1, last.1
        )));
    }
    if i_crit == first.1 {
        return Ok(first.0);
    }
    let k = curve
        .iter()
        .position(|&(_, i)| i >= i_crit)
        .expect("criterion within range");
    let (v0, i0) = curve[k - 1];
    let (v1, i1) = curve[k];
    Ok(v0 + (v1 - v0) * (i_crit - i0) / (i1 - i0))
}

/// Two-terminal current of a cell in diode mode, positive drain to source.
///
/// Piecewise linear with slope `g_on` in the forward direction and `g_off`
/// in reverse. SW conducts forward when the drain is higher, DW when the
/// source is higher. UWL is forward in both directions, UWH reverse in both.
/// The calibration holds at `v_gate_diode`; `v_gate` is range-checked only.
pub fn diode_current(
    params: &DeviceParams,
    state: CellState,
    v_drain: f64,
    v_source: f64,
    v_gate: f64,
) -> Result<f64> {
    if !(v_gate >= GATE_RANGE.0 && v_gate <= GATE_RANGE.1) {
        return Err(Error::Domain(format!("gate voltage {v_gate} V out of range")));
    }
    let v = v_drain - v_source;
    let limit = 2.0 * params.v_read;
    if !(v.abs() <= limit * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "|V_D - V_S| = {} V exceeds {limit} V",
            v.abs()
        )));
    }
    Ok(diode_conductance(params, state, v) * v)
}

/// Branch conductance for a drain-minus-source bias `v`. Zero bias takes the OFF slope.
pub fn diode_conductance(params: &DeviceParams, state: CellState, v: f64) -> f64 {
    if diode_forward(state, v) {
        params.g_on()
    } else {
        params.g_off()
    }
}

/// Whether a cell conducts on its forward slope at drain-minus-source bias `v`.
pub fn diode_forward(state: CellState, v: f64) -> bool {
    match state {
        CellState::Uwl => true,
        CellState::Uwh => false,
        CellState::Sw => v > 0.0,
        CellState::Dw => v < 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    #[serde(rename = "GATE")]
    Gate,
    /// Drain, via the bit line.
    #[serde(rename = "DRAIN")]
    Drain,
    #[serde(rename = "SOURCE_AND")]
    SourceAnd,
    #[serde(rename = "SOURCE_NOR")]
    SourceNor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub terminal: Terminal,
    /// Signed amplitude (V).
    pub amplitude: f64,
    /// Width (s).
    pub width: f64,
}

impl Pulse {
    pub fn new(terminal: Terminal, amplitude: f64, width: f64) -> Result<Self> {
        let pulse = Pulse {
            terminal,
            amplitude,
            width,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidPulse(format!("width must be positive, got {}", self.width)));
        }
        if !(self.amplitude.abs() <= PULSE_AMPLITUDE_LIMIT) {
            return Err(Error::InvalidPulse(format!(
                "amplitude {} V beyond ±{PULSE_AMPLITUDE_LIMIT} V",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Gate erase to the low-V_T uniform state.
    pub fn erase_low(params: &DeviceParams) -> Pulse {
        Pulse {
            terminal: Terminal::Gate,
            amplitude: params.v_prog,
            width: params.t_prog,
        }
    }

    /// Gate write to the high-V_T uniform state.
    pub fn write_high(params: &DeviceParams) -> Pulse {
        Pulse {
            terminal: Terminal::Gate,
            amplitude: -params.v_prog,
            width: params.t_prog,
        }
    }

    pub fn source_write(params: &DeviceParams) -> Pulse {
        Pulse {
            terminal: Terminal::SourceAnd,
            amplitude: params.v_prog,
            width: params.t_prog,
        }
    }

    pub fn drain_write(params: &DeviceParams) -> Pulse {
        Pulse {
            terminal: Terminal::Drain,
            amplitude: params.v_prog,
            width: params.t_prog,
        }
    }
}

/// Next state of a cell after one programming pulse.
///
/// Positive gate pulses erase to UWL and negative ones write UWH. A positive
/// source (drain) pulse turns UWL into SW (DW). Partial writes are only
/// accepted from UWL.
pub fn apply_pulse(state: CellState, pulse: &Pulse, params: &DeviceParams) -> Result<CellState> {
    pulse.validate()?;
    let threshold = params.write_threshold();
    if pulse.amplitude.abs() < threshold {
        return Ok(state);
    }
    match pulse.terminal {
        Terminal::Gate => Ok(gate_polarity_target(pulse.amplitude)),
        Terminal::SourceAnd | Terminal::SourceNor | Terminal::Drain => {
            if pulse.amplitude < 0.0 {
                return Err(Error::ProgramSequence(format!(
                    "negative {:?} pulse of {} V has no defined effect",
                    pulse.terminal, pulse.amplitude
                )));
            }
            if state != CellState::Uwl {
                return Err(Error::ProgramSequence(format!(
                    "partial write from {state} requires erase to UWL first"
                )));
            }
            Ok(match pulse.terminal {
                Terminal::Drain => CellState::Dw,
                _ => CellState::Sw,
            })
        }
    }
}

/// Gate polarity convention: positive erases to low V_T, negative writes high V_T.
fn gate_polarity_target(amplitude: f64) -> CellState {
    if amplitude > 0.0 {
        CellState::Uwl
    } else {
        CellState::Uwh
    }
}

/// Nearest-neighbour state classification in the (DR, SR) threshold plane.
pub fn decode_state(dr_vt: f64, sr_vt: f64, params: &DeviceParams) -> Result<CellState> {
    let table = &params.vt_table;
    let lo = table.uwl.dr - 0.5;
    let hi = table.uwh.dr + 0.5;
    for (name, v) in [("DR", dr_vt), ("SR", sr_vt)] {
        if !(v >= lo && v <= hi) {
            return Err(Error::Domain(format!("{name} V_T {v} V outside [{lo}, {hi}] V")));
        }
    }
    let mut ranked: Vec<(f64, CellState)> = CellState::ALL
        .iter()
        .map(|&s| {
            let p = table.pair(s);
            ((dr_vt - p.dr).hypot(sr_vt - p.sr), s)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    if ranked[1].0 - ranked[0].0 < DECODE_TIE_TOLERANCE {
        return Err(Error::AmbiguousDecode(ranked[0].1, ranked[1].1));
    }
    Ok(ranked[0].1)
}

/// Two stored bits of a MirrorBit cell: one per polarization region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitPair {
    pub source: bool,
    pub drain: bool,
}

impl BitPair {
    pub const ALL: [BitPair; 4] = [
        BitPair::new(false, false),
        BitPair::new(true, false),
        BitPair::new(false, true),
        BitPair::new(true, true),
    ];

    pub const fn new(source: bool, drain: bool) -> Self {
        Self { source, drain }
    }
}

impl fmt::Display for BitPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.source as u8, self.drain as u8)
    }
}

impl FromStr for BitPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bit = |c: char| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Parse(format!("bit pair {s:?} must be two of 0/1"))),
        };
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => Ok(BitPair::new(bit(a)?, bit(b)?)),
            _ => Err(Error::Parse(format!("bit pair {s:?} must be two characters"))),
        }
    }
}

pub fn encode_bits(bits: BitPair) -> CellState {
    match (bits.source, bits.drain) {
        (false, false) => CellState::Uwl,
        (true, false) => CellState::Sw,
        (false, true) => CellState::Dw,
        (true, true) => CellState::Uwh,
    }
}

pub fn decode_bits(state: CellState) -> BitPair {
    match state {
        CellState::Uwl => BitPair::new(false, false),
        CellState::Sw => BitPair::new(true, false),
        CellState::Dw => BitPair::new(false, true),
        CellState::Uwh => BitPair::new(true, true),
    }
}

/// Sweeps both directions, extracts both thresholds and decodes the state.
pub fn read_state(params: &DeviceParams, state: CellState, shift: VtShift) -> Result<CellState> {
    let dr = extract_vt(&sweep_gate(params, state, Direction::Dr, shift), params.i_crit)?;
    let sr = extract_vt(&sweep_gate(params, state, Direction::Sr, shift), params.i_crit)?;
    decode_state(dr, sr, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn defaults_are_valid() {
        p().validate().unwrap();
    }

    #[test]
    fn transfer_midpoint_is_geometric_mean() {
        let params = p();
        let vt = params.vt_table.get(CellState::Uwl, Direction::Dr);
        let i = transfer_current(&params, CellState::Uwl, vt, Direction::Dr).unwrap();
        let expected = (params.i_floor * params.i_max).sqrt();
        assert!((i - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn transfer_deep_subthreshold_reaches_floor() {
        let params = p();
        let i = transfer_current(&params, CellState::Uwh, -2.0, Direction::Dr).unwrap();
        assert!((i - params.i_floor).abs() / params.i_floor < 1e-9);
    }

    #[test]
    fn transfer_rejects_out_of_range_gate() {
        assert!(matches!(
            transfer_current(&p(), CellState::Uwl, 3.5, Direction::Dr),
            Err(Error::Domain(_))
        ));
        assert!(transfer_current(&p(), CellState::Uwl, -2.01, Direction::Sr).is_err());
    }

    #[test]
    fn transfer_uniform_states_identical_in_both_directions() {
        let params = p();
        for state in [CellState::Uwl, CellState::Uwh] {
            for (vg, _) in sweep_gate(&params, state, Direction::Dr, VtShift::ZERO) {
                let dr = transfer_current(&params, state, vg, Direction::Dr).unwrap();
                let sr = transfer_current(&params, state, vg, Direction::Sr).unwrap();
                assert_eq!(dr, sr);
            }
        }
    }

    #[test]
    fn transfer_strictly_increasing_over_sweep() {
        let params = p();
        for state in CellState::ALL {
            for dir in Direction::BOTH {
                let curve = sweep_gate(&params, state, dir, VtShift::ZERO);
                assert!(curve.windows(2).all(|w| w[1].1 > w[0].1), "{state} {dir}");
            }
        }
    }

    #[test]
    fn sw_reads_higher_in_source_direction() {
        let params = p();
        let dr = extract_vt(&sweep_gate(&params, CellState::Sw, Direction::Dr, VtShift::ZERO), params.i_crit).unwrap();
        let sr = extract_vt(&sweep_gate(&params, CellState::Sw, Direction::Sr, VtShift::ZERO), params.i_crit).unwrap();
        assert!(sr > dr);
    }

    /// Closed-form inverse of the log-logistic, independent of the sampled-curve path.
    fn analytic_vt(params: &DeviceParams, vt_center: f64, i: f64) -> f64 {
        let f = (i.ln() - params.i_floor.ln()) / (params.i_max.ln() - params.i_floor.ln());
        vt_center + params.slope_s * (f / (1.0 - f)).ln()
    }

    #[test]
    fn extract_vt_matches_analytic_inverse() {
        let params = p();
        for state in CellState::ALL {
            for dir in Direction::BOTH {
                let center = params.vt_table.get(state, dir);
                let oracle = analytic_vt(&params, center, params.i_crit);
                let curve = sweep_gate(&params, state, dir, VtShift::ZERO);
                let vt = extract_vt(&curve, params.i_crit).unwrap();
                assert!((vt - oracle).abs() <= params.slope_s / 10.0);
                assert!((vt - center).abs() <= params.slope_s / 10.0);
            }
        }
    }

    #[test]
    fn extract_vt_endpoint_crossing() {
        let curve = [(0.0, 1e-9), (1.0, 100e-9)];
        assert_eq!(extract_vt(&curve, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn extract_vt_errors() {
        let curve = [(0.0, 1e-9), (1.0, 100e-9)];
        assert!(matches!(extract_vt(&curve, 1e-6), Err(Error::Extraction(_))));
        assert!(matches!(extract_vt(&curve, 1e-12), Err(Error::Extraction(_))));
        let bumpy = [(0.0, 1e-9), (0.5, 5e-8), (1.0, 4e-8)];
        assert!(matches!(extract_vt(&bumpy, 2e-8), Err(Error::Domain(_))));
    }

    #[test]
    fn extract_vt_deterministic_under_seed() {
        let params = DeviceParams {
            vt_sigma: 0.05,
            ..p()
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let shift = VtShift::sample(&params, &mut rng);
            extract_vt(&sweep_gate(&params, CellState::Sw, Direction::Dr, shift), params.i_crit).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert_ne!(a, params.vt_table.sw.dr);
    }

    #[test]
    fn diode_operating_point() {
        let params = p();
        let fwd = diode_current(&params, CellState::Sw, 1.5, 0.0, 0.2).unwrap();
        let rev = diode_current(&params, CellState::Sw, 0.0, 1.5, 0.2).unwrap();
        assert!((fwd - 720e-9).abs() < 1e-18);
        assert!((rev + 24e-9).abs() < 1e-18);
        for s in CellState::ALL {
            assert_eq!(diode_current(&params, s, 0.7, 0.7, 0.2).unwrap(), 0.0);
        }
    }

    #[test]
    fn diode_uniform_states() {
        let params = p();
        let on = params.i_on();
        let off = params.i_off;
        let uwl_f = diode_current(&params, CellState::Uwl, 1.5, 0.0, 0.2).unwrap();
        let uwl_r = diode_current(&params, CellState::Uwl, 0.0, 1.5, 0.2).unwrap();
        let uwh_f = diode_current(&params, CellState::Uwh, 1.5, 0.0, 0.2).unwrap();
        let uwh_r = diode_current(&params, CellState::Uwh, 0.0, 1.5, 0.2).unwrap();
        assert!((uwl_f - on).abs() < 1e-18 && (uwl_r + on).abs() < 1e-18);
        assert!((uwh_f - off).abs() < 1e-18 && (uwh_r + off).abs() < 1e-18);
    }

    #[test]
    fn diode_rejects_excess_bias() {
        assert!(matches!(
            diode_current(&p(), CellState::Sw, 3.2, 0.0, 0.2),
            Err(Error::Domain(_))
        ));
        assert!(diode_current(&p(), CellState::Sw, 3.0, 0.0, 0.2).is_ok());
    }

    #[test]
    fn pulse_programming_paths() {
        let params = p();
        let src = Pulse::new(Terminal::SourceAnd, 4.0, 100e-6).unwrap();
        let drn = Pulse::new(Terminal::Drain, 4.0, 100e-6).unwrap();
        let erase = Pulse::new(Terminal::Gate, 4.0, 100e-6).unwrap();
        assert_eq!(apply_pulse(CellState::Uwl, &src, &params).unwrap(), CellState::Sw);
        assert_eq!(apply_pulse(CellState::Uwl, &drn, &params).unwrap(), CellState::Dw);
        let once = apply_pulse(CellState::Sw, &erase, &params).unwrap();
        assert_eq!(once, CellState::Uwl);
        assert_eq!(apply_pulse(once, &erase, &params).unwrap(), CellState::Uwl);
        let high = Pulse::new(Terminal::Gate, -4.0, 100e-6).unwrap();
        for s in CellState::ALL {
            assert_eq!(apply_pulse(s, &high, &params).unwrap(), CellState::Uwh);
        }
    }

    #[test]
    fn partial_write_requires_erase() {
        let params = p();
        for s in [CellState::Uwh, CellState::Sw, CellState::Dw] {
            assert!(matches!(
                apply_pulse(s, &Pulse::source_write(&params), &params),
                Err(Error::ProgramSequence(_))
            ));
            assert!(apply_pulse(s, &Pulse::drain_write(&params), &params).is_err());
        }
    }

    #[test]
    fn sub_threshold_pulses_are_no_ops() {
        let params = p();
        for s in CellState::ALL {
            for t in [Terminal::Gate, Terminal::Drain, Terminal::SourceAnd, Terminal::SourceNor] {
                for amp in [1.5, -1.5, 1.999] {
                    let pulse = Pulse::new(t, amp, 1e-6).unwrap();
                    assert_eq!(apply_pulse(s, &pulse, &params).unwrap(), s);
                }
            }
        }
    }

    #[test]
    fn pulse_validation() {
        assert!(matches!(Pulse::new(Terminal::Gate, 11.0, 1e-6), Err(Error::InvalidPulse(_))));
        assert!(Pulse::new(Terminal::Gate, 4.0, 0.0).is_err());
        assert!(Pulse::new(Terminal::Gate, -10.0, 1e-6).is_ok());
    }

    #[test]
    fn decode_exact_entries() {
        let params = p();
        for s in CellState::ALL {
            let pair = params.vt_table.pair(s);
            assert_eq!(decode_state(pair.dr, pair.sr, &params).unwrap(), s);
        }
    }

    #[test]
    fn decode_errors() {
        let params = p();
        // Midpoint between SW (0.4, 0.8) and DW (0.8, 0.4).
        assert!(matches!(
            decode_state(0.6, 0.6, &params),
            Err(Error::AmbiguousDecode(_, _))
        ));
        assert!(matches!(decode_state(-0.4, 0.2, &params), Err(Error::Domain(_))));
        assert!(decode_state(0.2, 1.6, &params).is_err());
    }

    #[test]
    fn read_round_trip_all_states() {
        let params = p();
        for s in CellState::ALL {
            assert_eq!(read_state(&params, s, VtShift::ZERO).unwrap(), s);
        }
    }

    #[test]
    fn bit_encoding() {
        assert_eq!(encode_bits(BitPair::new(false, false)), CellState::Uwl);
        assert_eq!(encode_bits(BitPair::new(true, false)), CellState::Sw);
        assert_eq!(encode_bits(BitPair::new(false, true)), CellState::Dw);
        assert_eq!(encode_bits(BitPair::new(true, true)), CellState::Uwh);
        for b in BitPair::ALL {
            assert_eq!(decode_bits(encode_bits(b)), b);
            assert_eq!(b.to_string().parse::<BitPair>().unwrap(), b);
        }
        assert!("2".parse::<BitPair>().is_err());
    }

    #[test]
    fn vt_table_validation() {
        let mut t = VtTable::default();
        t.sw.sr = 0.3;
        assert!(t.validate().is_err());
        let mut t = VtTable::default();
        t.dw.dr = 0.9;
        assert!(t.validate().is_err());
        let mut t = VtTable::default();
        t.uwh.sr = 0.95;
        assert!(t.validate().is_err());
    }

    #[test]
    fn params_json_round_trip_and_schema() {
        let params = DeviceParams {
            vt_sigma: 0.0123456789012345,
            ..p()
        };
        let text = params.to_json().unwrap();
        assert!(text.contains(DEVICE_SCHEMA));
        assert_eq!(DeviceParams::from_json(&text).unwrap(), params);
        let wrong = text.replace(DEVICE_SCHEMA, "fpma-device-v0");
        assert!(matches!(DeviceParams::from_json(&wrong), Err(Error::Schema { .. })));
    }

    proptest! {
        #[test]
        fn diode_mirror_symmetry(vd in -1.5f64..1.5, vs in -1.5f64..1.5, vg in -2.0f64..3.0) {
            let params = p();
            let sw = diode_current(&params, CellState::Sw, vd, vs, vg).unwrap();
            let dw = diode_current(&params, CellState::Dw, vs, vd, vg).unwrap();
            prop_assert_eq!(sw, -dw);
        }

        #[test]
        fn diode_continuous_at_zero(state in 0usize..4, v in 0.0f64..1.5, eps in 1e-15f64..1e-9) {
            let params = p();
            let s = CellState::ALL[state];
            let up = diode_current(&params, s, v + eps, v, 0.2).unwrap();
            let dn = diode_current(&params, s, v - eps, v, 0.2).unwrap();
            prop_assert!(up.abs() <= params.g_on() * eps * 1.01);
            prop_assert!(dn.abs() <= params.g_on() * eps * 1.01);
        }

        #[test]
        fn state_machine_closed(state in 0usize..4, t in 0usize..4, amp in -10.0f64..10.0, w in 1e-9f64..1e-3) {
            let params = p();
            let terminal = [Terminal::Gate, Terminal::Drain, Terminal::SourceAnd, Terminal::SourceNor][t];
            let pulse = Pulse::new(terminal, amp, w).unwrap();
            match apply_pulse(CellState::ALL[state], &pulse, &params) {
                Ok(next) => prop_assert!(CellState::ALL.contains(&next)),
                Err(e) => prop_assert!(matches!(e, Error::ProgramSequence(_))),
            }
        }
    }
}

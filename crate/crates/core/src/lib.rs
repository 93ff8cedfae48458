//! Behavioral simulator of a reconfigurable ferroelectric MirrorBit memory
//! array: 1-bit FeFET storage, 2-bit MirrorBit storage and diode-based
//! ternary CAM search on the same cells.

pub mod array;
pub mod device;
pub mod error;
pub mod mcam;
pub mod metrics;
pub mod solver;

pub use array::{Array, ArrayMode, CamPolarity, MCAMBit, Parasitics, StLevel};
pub use device::{BitPair, CellState, DeviceParams, Direction, Pulse, Terminal};
pub use error::{Error, Result};
pub use mcam::{SearchResult, TernaryQuery};
pub use metrics::{EnergyReport, SwitchingCharge, TimingParams, Workload};
pub use solver::{MlTermination, RowDrive};

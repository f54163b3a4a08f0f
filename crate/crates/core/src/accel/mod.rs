//! Datapath and cycle model of the accelerator.
//!
//! The model holds a filter bank of binary weights per (SoP unit, input
//! channel), a striped image memory of stored SCM columns plus one streamed
//! column, a `native x native` image bank per input channel, the SoP units,
//! channel summers and the scale-bias stage. See [`sim`] for the schedule.

mod config;
mod memory;
mod report;
pub mod sim;
mod sop;

pub use config::{AccelConfig, ModeEntry, SopMode};
pub use memory::{ImageBank, ImageMemory};
pub use report::CycleReport;
pub use sim::{
    simulate_layer_block, simulate_timing, tile_rows, BlockResult, BlockShape, SimOptions, WindowScheme,
};
pub use sop::{sop_compute, FilterBank};

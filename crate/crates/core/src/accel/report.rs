use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Cycle and activity counts of one or more passes.
///
/// `preload_cycles` counts exposed preload only; preload hidden behind the
/// previous pass is in `hidden_preload_cycles` and not part of the total.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleReport {
    pub preload_cycles: u64,
    pub compute_cycles: u64,
    pub idle_cycles: u64,
    pub tile_overlap_cycles: u64,
    pub total_cycles: u64,
    pub hidden_preload_cycles: u64,
    pub scm_reads: u64,
    pub scm_writes: u64,
    pub stream_pixels: u64,
    /// Cycles by number of distinct SCM banks active in that cycle.
    pub active_bank_histogram: Vec<u64>,
    pub max_active_banks: usize,
    pub pixels_in: u64,
    pub pixels_out: u64,
    pub passes: u64,
    /// Useful operations (2 per binary MAC of the logical kernel).
    pub ops: u64,
}

impl CycleReport {
    pub fn check_total(&self) -> bool {
        self.total_cycles
            == self.preload_cycles + self.compute_cycles + self.idle_cycles + self.tile_overlap_cycles
    }

    pub(crate) fn note_banks(&mut self, active: usize, cycles: u64) {
        if cycles == 0 {
            return;
        }
        if self.active_bank_histogram.len() <= active {
            self.active_bank_histogram.resize(active + 1, 0);
        }
        self.active_bank_histogram[active] += cycles;
        self.max_active_banks = self.max_active_banks.max(active);
    }

    pub fn merge(&mut self, o: &CycleReport) {
        self.preload_cycles += o.preload_cycles;
        self.compute_cycles += o.compute_cycles;
        self.idle_cycles += o.idle_cycles;
        self.tile_overlap_cycles += o.tile_overlap_cycles;
        self.total_cycles += o.total_cycles;
        self.hidden_preload_cycles += o.hidden_preload_cycles;
        self.scm_reads += o.scm_reads;
        self.scm_writes += o.scm_writes;
        self.stream_pixels += o.stream_pixels;
        for (i, &c) in o.active_bank_histogram.iter().enumerate() {
            self.note_banks(i, c);
        }
        self.max_active_banks = self.max_active_banks.max(o.max_active_banks);
        self.pixels_in += o.pixels_in;
        self.pixels_out += o.pixels_out;
        self.passes += o.passes;
        self.ops += o.ops;
    }

    /// Ops per second at clock `f` (Hz).
    pub fn throughput<T: Float>(&self, f: T) -> T {
        if self.total_cycles == 0 {
            return T::zero();
        }
        T::from(self.ops).unwrap() / T::from(self.total_cycles).unwrap() * f
    }

    /// Histogram as `banks: cycles` pairs, one per line.
    pub fn histogram_lines(&self) -> String {
        self.active_bank_histogram
            .iter()
            .enumerate()
            .map(|(b, c)| format!("{b}: {c}\n"))
            .collect()
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the kernel mode table: logical kernel `k` runs on a
/// `native x native` multiplier layout packing `filters_per_sop` filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    pub k: usize,
    pub native: usize,
    pub filters_per_sop: usize,
}

/// Hardware parameters.
///
/// Loaded from TOML with these keys (all optional, defaults shown):
///
/// ```toml
/// n_ch = 32
/// image_mem_rows = 1024
/// image_mem_cols = 7        # 6 stored SCM columns + 1 streamed column
/// word_bits = 12
/// scm_bank_rows = 128
/// scm_banks_per_col = 8
/// output_streams = 2
/// sop_slots = 50
///
/// [[modes]]
/// k = 3
/// native = 3
/// filters_per_sop = 2
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccelConfig {
    pub n_ch: usize,
    pub image_mem_rows: usize,
    pub image_mem_cols: usize,
    pub word_bits: u32,
    pub scm_bank_rows: usize,
    pub scm_banks_per_col: usize,
    pub output_streams: usize,
    pub sop_slots: usize,
    pub modes: Vec<ModeEntry>,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig::with_channels(32)
    }
}

fn default_modes() -> Vec<ModeEntry> {
    [(1, 3, 2), (2, 3, 2), (3, 3, 2), (4, 5, 2), (5, 5, 2), (6, 7, 1), (7, 7, 1)]
        .into_iter()
        .map(|(k, native, filters_per_sop)| ModeEntry {
            k,
            native,
            filters_per_sop,
        })
        .collect()
}

impl AccelConfig {
    pub fn with_channels(n_ch: usize) -> Self {
        AccelConfig {
            n_ch,
            image_mem_rows: 1024,
            image_mem_cols: 7,
            word_bits: 12,
            scm_bank_rows: 128,
            scm_banks_per_col: 8,
            output_streams: 2,
            sop_slots: 50,
            modes: default_modes(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: AccelConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("accelerator config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        AccelConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ch == 0 || self.output_streams == 0 {
            return Err(Error::config("n_ch and output_streams must be positive"));
        }
        if self.image_mem_cols < 2 {
            return Err(Error::config("image memory needs at least two columns"));
        }
        if self.scm_bank_rows * self.scm_banks_per_col != self.image_mem_rows {
            return Err(Error::config(format!(
                "{} banks of {} rows do not cover {} memory rows",
                self.scm_banks_per_col, self.scm_bank_rows, self.image_mem_rows
            )));
        }
        for m in &self.modes {
            if m.k == 0 || m.k > m.native || m.native % 2 == 0 || m.native > self.image_mem_cols {
                return Err(Error::config(format!(
                    "mode k={} on native {} does not fit the {}-column stripe",
                    m.k, m.native, self.image_mem_cols
                )));
            }
            if m.filters_per_sop == 0 || m.filters_per_sop * m.native * m.native > self.sop_slots {
                return Err(Error::config(format!(
                    "{} filters of {}x{} exceed {} SoP slots",
                    m.filters_per_sop, m.native, m.native, self.sop_slots
                )));
            }
        }
        Ok(())
    }

    /// Stored SCM columns; the remaining column comes from the input stream.
    pub fn stored_cols(&self) -> usize {
        self.image_mem_cols - 1
    }

    pub fn mode(&self, k: usize) -> Result<SopMode> {
        let e = self
            .modes
            .iter()
            .find(|m| m.k == k)
            .ok_or_else(|| Error::UnsupportedKernel {
                size: k,
                reason: "no accelerator mode; split the kernel".into(),
            })?;
        Ok(SopMode {
            k,
            native: e.native,
            filters_per_sop: e.filters_per_sop,
            slots: self.sop_slots,
        })
    }

    /// Rows cached per input channel.
    pub fn h_max(&self, n_in_block: usize) -> usize {
        self.image_mem_rows / n_in_block.max(1)
    }

    /// Output channels one block can produce in `mode`.
    pub fn out_capacity(&self, mode: &SopMode) -> usize {
        mode.filters_per_sop * self.n_ch
    }

    /// Output samples streamed per cycle.
    pub fn output_rate(&self, mode: &SopMode) -> usize {
        self.output_streams.min(mode.filters_per_sop)
    }

    /// Filter bank storage in bits (largest native kernel, full block).
    pub fn filter_bank_bits(&self) -> usize {
        let native = self.modes.iter().map(|m| m.native).max().unwrap_or(0);
        self.n_ch * self.n_ch * native * native
    }
}

/// Multiplier layout of one SoP unit for a kernel size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SopMode {
    pub k: usize,
    pub native: usize,
    pub filters_per_sop: usize,
    pub slots: usize,
}

impl SopMode {
    /// Multipliers doing useful work.
    pub fn active_multipliers(&self) -> usize {
        self.filters_per_sop * self.k * self.k
    }

    /// First slot of filter `f` inside the unit.
    pub fn slot_base(&self, f: usize) -> usize {
        f * (self.slots / self.filters_per_sop)
    }

    pub fn is_dual(&self) -> bool {
        self.filters_per_sop > 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = AccelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.h_max(32), 32);
        assert_eq!(c.h_max(3), 341);
        assert_eq!(c.filter_bank_bits(), 50_176);
        let m7 = c.mode(7).unwrap();
        assert_eq!((m7.native, m7.filters_per_sop, m7.active_multipliers()), (7, 1, 49));
        let m3 = c.mode(3).unwrap();
        assert_eq!((m3.slot_base(0), m3.slot_base(1)), (0, 25));
        assert_eq!(c.out_capacity(&m3), 64);
        assert_eq!(c.output_rate(&m7), 1);
        assert_eq!(c.output_rate(&m3), 2);
        assert!(matches!(c.mode(9), Err(Error::UnsupportedKernel { size: 9, .. })));
    }

    #[test]
    fn toml_roundtrip() {
        let c = AccelConfig::from_toml("n_ch = 8\n").unwrap();
        assert_eq!(c.n_ch, 8);
        assert_eq!(c.modes.len(), 7);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(AccelConfig::from_toml(&text).unwrap(), c);
        assert!(AccelConfig::from_toml("n_ch = 0\n").is_err());
        assert!(AccelConfig::from_toml("bogus = 1\n").is_err());
        let bad = "[[modes]]\nk = 7\nnative = 7\nfilters_per_sop = 2\n";
        assert!(AccelConfig::from_toml(bad).is_err());
    }
}

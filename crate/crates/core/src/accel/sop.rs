//! Filter bank and sum-of-product units.

use super::config::{AccelConfig, SopMode};
use crate::error::{Error, Result};
use crate::golden::FilterSet;

/// Binary weights of one block, one word per (SoP unit, input channel).
/// Bit `s` of a word drives multiplier slot `s`; bit set means +1.
///
/// Filter `f` of unit `u` is output channel `u + f * n_ch`. Its `k x k`
/// weights sit at the top-left of a `native x native` layout starting at
/// [`SopMode::slot_base`]; slot `base + r * native + p` is row `r`,
/// physical column `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterBank {
    mode: SopMode,
    n_ch: usize,
    n_in: usize,
    n_out: usize,
    words: Vec<u64>,
    shift: usize,
}

impl FilterBank {
    pub fn load(cfg: &AccelConfig, filters: &FilterSet) -> Result<Self> {
        let mode = cfg.mode(filters.kernel_size())?;
        let (n_in, n_out) = (filters.n_in(), filters.n_out());
        if n_in > cfg.n_ch {
            return Err(Error::config(format!(
                "block has {n_in} input channels, accelerator has {}",
                cfg.n_ch
            )));
        }
        if n_out > cfg.out_capacity(&mode) {
            return Err(Error::config(format!(
                "block has {n_out} output channels, k={} holds {}",
                mode.k,
                cfg.out_capacity(&mode)
            )));
        }
        let (k, nat) = (mode.k, mode.native);
        let n_sop = n_out.min(cfg.n_ch);
        let mut words = vec![0u64; n_sop * n_in];
        for u in 0..n_sop {
            for n in 0..n_in {
                let mut w = 0u64;
                for f in 0..mode.filters_per_sop {
                    let o = u + f * cfg.n_ch;
                    if o >= n_out {
                        continue;
                    }
                    let filt = filters.get(o, n);
                    let base = mode.slot_base(f);
                    for a in 0..k {
                        for b in 0..k {
                            if filt.bit(a, b) {
                                w |= 1 << (base + a * nat + b);
                            }
                        }
                    }
                }
                words[u * n_in + n] = w;
            }
        }
        Ok(FilterBank {
            mode,
            n_ch: cfg.n_ch,
            n_in,
            n_out,
            words,
            shift: 0,
        })
    }

    pub fn mode(&self) -> &SopMode {
        &self.mode
    }

    pub fn n_sop(&self) -> usize {
        self.n_out.min(self.n_ch)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Weight bits of the loaded filters.
    pub fn bits_stored(&self) -> usize {
        self.n_out * self.n_in * self.mode.k * self.mode.k
    }

    /// Number of column shifts applied since loading, modulo `native`.
    pub fn shift_offset(&self) -> usize {
        self.shift
    }

    #[inline]
    pub fn word(&self, u: usize, n: usize) -> u64 {
        self.words[u * self.n_in + n]
    }

    /// Weight at row `r`, physical column `p` of filter `f` in unit `u`.
    pub fn weight(&self, u: usize, n: usize, f: usize, r: usize, p: usize) -> i8 {
        let s = self.mode.slot_base(f) + r * self.mode.native + p;
        if self.word(u, n) >> s & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Right circular shift of every kernel's columns by one position.
    pub fn shift_weights(&mut self) {
        let nat = self.mode.native;
        let row_mask = (1u64 << nat) - 1;
        for w in &mut self.words {
            let mut out = 0u64;
            for f in 0..self.mode.filters_per_sop {
                let base = self.mode.slot_base(f);
                for r in 0..nat {
                    let at = base + r * nat;
                    let row = (*w >> at) & row_mask;
                    let rot = ((row << 1) | (row >> (nat - 1))) & row_mask;
                    out |= rot << at;
                }
            }
            *w = out;
        }
        self.shift = (self.shift + 1) % nat;
    }
}

/// One SoP evaluation. `window` holds `native * native` samples (row-major,
/// physical columns) already masked; it is fed to every filter region of the
/// unit. Slots outside the filter regions are silenced. Returns one partial
/// sum per filter; unused entries are zero.
#[inline]
pub fn sop_compute(window: &[i64], word: u64, mode: &SopMode) -> [i64; 2] {
    let taps = mode.native * mode.native;
    debug_assert_eq!(window.len(), taps);
    let mut out = [0i64; 2];
    for (f, acc) in out.iter_mut().enumerate().take(mode.filters_per_sop) {
        let bits = word >> mode.slot_base(f);
        let mut s = 0i64;
        for (i, &v) in window.iter().enumerate() {
            if bits >> i & 1 == 1 {
                s += v;
            } else {
                s -= v;
            }
        }
        *acc = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden::BinaryFilter;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> AccelConfig {
        AccelConfig::default()
    }

    #[test]
    fn storage_counts() {
        let one = FilterBank::load(&cfg(), &FilterSet::filled(1, 1, 7, 1)).unwrap();
        assert_eq!(one.bits_stored(), 49);
        let full = FilterBank::load(&cfg(), &FilterSet::filled(32, 32, 7, 1)).unwrap();
        assert_eq!(full.bits_stored(), 50_176);
        let dual = FilterBank::load(&cfg(), &FilterSet::filled(64, 32, 3, 1)).unwrap();
        assert_eq!(dual.n_sop(), 32);
        assert!(dual.mode().is_dual());
        assert!(FilterBank::load(&cfg(), &FilterSet::filled(33, 1, 7, 1)).is_err());
        assert!(FilterBank::load(&cfg(), &FilterSet::filled(1, 33, 3, 1)).is_err());
        assert!(FilterBank::load(&cfg(), &FilterSet::filled(65, 1, 3, 1)).is_err());
    }

    #[test]
    fn dual_packing() {
        let fs = vec![BinaryFilter::filled(3, 1), BinaryFilter::filled(3, -1)];
        let c = AccelConfig::with_channels(1);
        let set = FilterSet::new(2, 1, fs).unwrap();
        let bank = FilterBank::load(&c, &set).unwrap();
        assert_eq!(bank.word(0, 0), 0b111_111_111);
        assert_eq!(bank.weight(0, 0, 1, 0, 0), -1);
    }

    #[test]
    fn shift_is_right_circular() {
        let c = AccelConfig::with_channels(1);
        // columns (c1, c2, c3) = (+, -, -) in every row
        let f = BinaryFilter::new(3, &[1, -1, -1, 1, -1, -1, 1, -1, -1]).unwrap();
        let mut bank = FilterBank::load(&c, &FilterSet::new(1, 1, vec![f]).unwrap()).unwrap();
        bank.shift_weights();
        let row: Vec<i8> = (0..3).map(|p| bank.weight(0, 0, 0, 1, p)).collect();
        assert_eq!(row, vec![-1, 1, -1]);
        bank.shift_weights();
        bank.shift_weights();
        assert_eq!(bank.shift_offset(), 0);
        assert_eq!(bank.word(0, 0), 0b001_001_001);
    }

    #[test]
    fn shift_period_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=7 {
            let c = cfg();
            let set = FilterSet::random(40.min(c.out_capacity(&c.mode(k).unwrap())), 4, k, &mut rng);
            let orig = FilterBank::load(&c, &set).unwrap();
            let mut b = orig.clone();
            for _ in 0..orig.mode().native {
                b.shift_weights();
            }
            assert_eq!(b, orig, "k={k}");
        }
    }

    #[test]
    fn symmetric_columns_unchanged_by_shift() {
        let c = AccelConfig::with_channels(1);
        let f = BinaryFilter::new(3, &[1, 1, 1, -1, -1, -1, 1, 1, 1]).unwrap();
        let mut bank = FilterBank::load(&c, &FilterSet::new(1, 1, vec![f]).unwrap()).unwrap();
        let w = bank.word(0, 0);
        bank.shift_weights();
        assert_eq!(bank.word(0, 0), w);
    }

    #[test]
    fn sop_examples() {
        let c = AccelConfig::with_channels(1);
        let m7 = c.mode(7).unwrap();
        let window = vec![512i64; 49];
        let plus = FilterBank::load(&c, &FilterSet::filled(1, 1, 7, 1)).unwrap();
        assert_eq!(sop_compute(&window, plus.word(0, 0), &m7), [49 * 512, 0]);
        let minus = FilterBank::load(&c, &FilterSet::filled(1, 1, 7, -1)).unwrap();
        assert_eq!(sop_compute(&window, minus.word(0, 0), &m7), [-49 * 512, 0]);

        let m3 = c.mode(3).unwrap();
        let win: Vec<i64> = (1..=9).collect();
        // filter A all +1 in slots 0..9, filter B all -1 in slots 25..34
        let word = 0b1_1111_1111u64;
        assert_eq!(sop_compute(&win, word, &m3), [45, -45]);
        assert_eq!(sop_compute(&win, word << 25, &m3), [-45, 45]);
    }
}

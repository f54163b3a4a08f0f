//! Striped image memory built from latch-based SCM banks, and the per-channel
//! image bank window.

/// Stored columns of the image stripe. Image column `c` lives in slot
/// `c mod slots`; within a slot, channel `n` and held row `r` map to address
/// `n * held_rows + r`. Each slot is split into `banks_per_col` banks of
/// `bank_rows` rows.
#[derive(Clone, Debug)]
pub struct ImageMemory {
    slots: usize,
    bank_rows: usize,
    banks_per_col: usize,
    data: Vec<Vec<i64>>,
}

impl ImageMemory {
    pub fn new(slots: usize, bank_rows: usize, banks_per_col: usize, depth: usize) -> Self {
        ImageMemory {
            slots,
            bank_rows,
            banks_per_col,
            data: vec![vec![0; depth]; slots],
        }
    }

    /// Bank id only; usable without allocating storage.
    #[inline]
    pub fn bank_of(slots: usize, bank_rows: usize, banks_per_col: usize, col: usize, addr: usize) -> u16 {
        ((col % slots) * banks_per_col + (addr / bank_rows) % banks_per_col) as u16
    }

    #[inline]
    pub fn bank(&self, col: usize, addr: usize) -> u16 {
        Self::bank_of(self.slots, self.bank_rows, self.banks_per_col, col, addr)
    }

    #[inline]
    pub fn read(&self, col: usize, addr: usize) -> i64 {
        self.data[col % self.slots][addr]
    }

    #[inline]
    pub fn write(&mut self, col: usize, addr: usize, v: i64) {
        self.data[col % self.slots][addr] = v;
    }
}

/// `native x native` register window of one input channel. Rows shift up by
/// one as a new bottom row enters.
#[derive(Clone, Debug)]
pub struct ImageBank {
    native: usize,
    rows: [[i64; 7]; 7],
}

impl ImageBank {
    pub fn new(native: usize) -> Self {
        assert!(native <= 7);
        ImageBank {
            native,
            rows: [[0; 7]; 7],
        }
    }

    pub fn clear(&mut self) {
        self.rows = [[0; 7]; 7];
    }

    #[inline]
    pub fn shift_in(&mut self, row: [i64; 7]) {
        self.rows.copy_within(1..self.native, 0);
        self.rows[self.native - 1] = row;
    }

    #[inline]
    pub fn get(&self, r: usize, p: usize) -> i64 {
        self.rows[r][p]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_layout() {
        let mut m = ImageMemory::new(6, 128, 8, 1024);
        m.write(13, 200, 7);
        assert_eq!(m.read(1, 200), 7);
        assert_eq!(m.bank(13, 200), 8 + 1);
        assert_eq!(m.bank(0, 1023), 7);
        assert_eq!(m.bank(5, 0), 40);
    }

    #[test]
    fn bank_shift() {
        let mut b = ImageBank::new(3);
        for i in 0..4 {
            b.shift_in([i; 7]);
        }
        assert_eq!((b.get(0, 0), b.get(1, 0), b.get(2, 0)), (1, 2, 3));
    }
}

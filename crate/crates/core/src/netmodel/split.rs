//! Kernels larger than the accelerator supports are cut into four corner
//! sub-kernels.
//!
//! An odd `k = 2a + 1` kernel becomes two `(a+1)`-kernels (top-left,
//! bottom-right) overlapping at the centre tap and two `a`-kernels
//! (bottom-left, top-right). The centre weight `c` is copied as `(+1, +1)`
//! when `c = +1` and `(+1, -1)` otherwise, so the two copies contribute
//! `c + 1` times the centre pixel and subtracting the centre pixel once,
//! summed over input channels, restores the original. An even `k = 2a`
//! kernel is cut into four `a x a` quadrants without overlap.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::golden::BinaryFilter;

/// Largest kernel whose sub-kernels fit the 7x7 array.
pub const MAX_SPLIT_KERNEL: usize = 14;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubKernel {
    pub row: usize,
    pub col: usize,
    #[serde(skip)]
    pub filter: BinaryFilter,
}

impl SubKernel {
    pub fn size(&self) -> usize {
        self.filter.size()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelSplit {
    pub k: usize,
    pub subs: Vec<SubKernel>,
    /// Centre tap `(row, col)` whose input must be subtracted once.
    pub identity: Option<(usize, usize)>,
}

fn corner(f: &BinaryFilter, row: usize, col: usize, size: usize) -> SubKernel {
    let mut bits = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            bits.push(f.bit(row + r, col + c));
        }
    }
    SubKernel {
        row,
        col,
        filter: BinaryFilter::from_bits(size, bits).expect("square corner"),
    }
}

/// Sub-kernel sizes used for a `k x k` kernel, largest first.
pub fn split_sizes(k: usize) -> Result<Vec<usize>> {
    match k {
        0 => Err(Error::config("kernel size 0")),
        1..=7 => Ok(vec![k]),
        8..=MAX_SPLIT_KERNEL if k.is_multiple_of(2) => Ok(vec![k / 2; 4]),
        8..=MAX_SPLIT_KERNEL => Ok(vec![k / 2 + 1, k / 2 + 1, k / 2, k / 2]),
        _ => Err(Error::UnsupportedKernel {
            size: k,
            reason: format!("splitting supports kernels up to {MAX_SPLIT_KERNEL}"),
        }),
    }
}

/// Splits one kernel; kernels up to 7x7 come back whole.
pub fn split_kernel(f: &BinaryFilter) -> Result<KernelSplit> {
    let k = f.size();
    split_sizes(k)?;
    if k <= 7 {
        return Ok(KernelSplit {
            k,
            subs: vec![SubKernel {
                row: 0,
                col: 0,
                filter: f.clone(),
            }],
            identity: None,
        });
    }
    let a = k / 2;
    if k.is_multiple_of(2) {
        return Ok(KernelSplit {
            k,
            subs: vec![corner(f, 0, 0, a), corner(f, a, a, a), corner(f, a, 0, a), corner(f, 0, a, a)],
            identity: None,
        });
    }
    let mut tl = corner(f, 0, 0, a + 1);
    let br = corner(f, a, a, a + 1);
    if !f.bit(a, a) {
        // centre -1: top-left copy +1, bottom-right copy -1
        let mut bits = tl.filter.bits().to_vec();
        bits[a * (a + 1) + a] = true;
        tl.filter = BinaryFilter::from_bits(a + 1, bits)?;
    }
    Ok(KernelSplit {
        k,
        subs: vec![tl, br, corner(f, a + 1, 0, a), corner(f, 0, a + 1, a)],
        identity: Some((a, a)),
    })
}

impl KernelSplit {
    /// Effective weight at `(r, c)` after summing sub-kernels and the
    /// identity correction. Equals the original weight by construction.
    pub fn effective_weight(&self, r: usize, c: usize) -> i32 {
        let mut w = 0;
        for s in &self.subs {
            let n = s.size();
            if r >= s.row && r < s.row + n && c >= s.col && c < s.col + n {
                w += s.filter.weight(r - s.row, c - s.col) as i32;
            }
        }
        if self.identity == Some((r, c)) {
            w -= 1;
        }
        w
    }
}

//! Cycle-stepped execution of one channel block.
//!
//! A block is processed as one pass per row tile. Each pass:
//!
//! 1. preloads the in-image columns of the first window that come from the
//!    stored SCM columns (one write per cycle);
//! 2. for every output column, fills the image banks with the top
//!    `native - 1` rows, then runs one cycle per (output row, input channel).
//!    Each cycle shifts a new bottom row into the channel's image bank:
//!    `native - 1` samples are read from the SCM, one is streamed in and
//!    written back for the following columns.
//!
//! Cycles whose entering row lies outside the held rows need no SCM access.
//! At the end of a column they carry the next column's fill; at the end of a
//! pass they carry the next pass's preload. Fill that does not fit is exposed:
//! as tile overlap for later columns of zero-padded layers, as preload
//! otherwise.

use std::collections::VecDeque;
use std::ops::Range;

use super::config::{AccelConfig, SopMode};
use super::memory::{ImageBank, ImageMemory};
use super::report::CycleReport;
use super::sop::{sop_compute, FilterBank};
use crate::error::{Error, Result};
use crate::fxp::QFormat;
use crate::golden::{Accumulation, ChannelAffine, ChannelSums, FeatureMap, FilterSet, Padding, SatCounters};

/// How the sliding window maps image columns onto image bank columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WindowScheme {
    /// Columns stay in place; weights rotate right once per output column.
    #[default]
    CircularShift,
    /// Columns are re-ordered every output column; weights stay put.
    Realign,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    pub scheme: WindowScheme,
    pub accumulation: Accumulation,
    pub trace: bool,
}

/// Shape of one channel block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockShape {
    pub n_in: usize,
    pub n_out: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub padding: Padding,
}

#[derive(Clone, Debug)]
pub struct BlockResult {
    /// Channel-summer values before narrowing and affine.
    pub sums: ChannelSums,
    pub output: FeatureMap,
    pub saturations: SatCounters,
    pub report: CycleReport,
    pub trace: Vec<String>,
}

/// Output row tiles of at most `h_max` rows.
pub fn tile_rows(ho: usize, h_max: usize) -> Vec<Range<usize>> {
    (0..ho)
        .step_by(h_max.max(1))
        .map(|y| y..(y + h_max).min(ho))
        .collect()
}

struct Geometry {
    mode: SopMode,
    k: usize,
    nat: usize,
    m: isize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    n_in: usize,
    n_out: usize,
    n_ch: usize,
    stream_per_px: u64,
    padding: Padding,
    tiles: Vec<Range<usize>>,
    slots: usize,
    bank_rows: usize,
    banks_per_col: usize,
}

impl Geometry {
    fn new(cfg: &AccelConfig, s: &BlockShape) -> Result<Self> {
        cfg.validate()?;
        let mode = cfg.mode(s.k)?;
        if s.n_in == 0 || s.n_out == 0 {
            return Err(Error::config("block needs input and output channels"));
        }
        if s.n_in > cfg.n_ch {
            return Err(Error::config(format!(
                "block has {} input channels, accelerator has {}",
                s.n_in, cfg.n_ch
            )));
        }
        if s.n_out > cfg.out_capacity(&mode) {
            return Err(Error::config(format!(
                "block has {} output channels, k={} holds {}",
                s.n_out,
                s.k,
                cfg.out_capacity(&mode)
            )));
        }
        let (ho, wo) = s.padding.output_size(s.h, s.w, s.k)?;
        let h_max = cfg.h_max(s.n_in);
        if h_max < s.k {
            return Err(Error::config(format!("h_max {h_max} below kernel size {}", s.k)));
        }
        let rate = cfg.output_rate(&mode);
        Ok(Geometry {
            mode,
            k: s.k,
            nat: mode.native,
            m: s.padding.halo(s.k) as isize,
            h: s.h,
            w: s.w,
            ho,
            wo,
            n_in: s.n_in,
            n_out: s.n_out,
            n_ch: cfg.n_ch,
            stream_per_px: s.n_out.div_ceil(rate) as u64,
            padding: s.padding,
            tiles: tile_rows(ho, h_max),
            slots: cfg.stored_cols(),
            bank_rows: cfg.scm_bank_rows,
            banks_per_col: cfg.scm_banks_per_col,
        })
    }

    fn held(&self, t: &Range<usize>) -> (isize, isize) {
        let h0 = (t.start as isize - self.m).max(0);
        let h1 = (t.end as isize - self.m + self.k as isize - 1).min(self.h as isize);
        (h0, h1)
    }

    #[inline]
    fn col_in_image(&self, c: isize) -> bool {
        c >= 0 && (c as usize) < self.w
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    /// Stream column `c`, row `r`, channel `n` into the SCM.
    Preload { c: usize, r: isize, n: usize },
    /// Fill row `i` of column `x`'s window for channel `n`.
    Fill { x: usize, i: usize, r: isize, n: usize },
}

#[derive(Default)]
struct Activity {
    banks: [u16; 8],
    count: usize,
}

impl Activity {
    #[inline]
    fn touch(&mut self, b: u16) {
        if !self.banks[..self.count].contains(&b) {
            self.banks[self.count] = b;
            self.count += 1;
        }
    }
}

struct Data<'a> {
    input: &'a FeatureMap,
    bank: FilterBank,
    mem: ImageMemory,
    ibanks: Vec<ImageBank>,
    staged: Vec<[[i64; 7]; 7]>,
    acc: Vec<i64>,
    window: Vec<i64>,
    sums: ChannelSums,
    strict: bool,
    strict_sat: u64,
}

struct Engine<'a> {
    g: Geometry,
    scheme: WindowScheme,
    rep: CycleReport,
    cycle: u64,
    trace: Option<Vec<String>>,
    data: Option<Data<'a>>,
    // pass-local
    h0: isize,
    held: usize,
    // free slots at the end of the previous pass, by cycle number
    tail_free: Vec<u64>,
}

impl<'a> Engine<'a> {
    fn log(&mut self, cycle: u64, unit: &str, action: impl FnOnce() -> String) {
        if let Some(t) = &mut self.trace {
            t.push(format!("{cycle} {unit} {}", action()));
        }
    }

    #[inline]
    fn addr(&self, n: usize, r: isize) -> usize {
        n * self.held + (r - self.h0) as usize
    }

    #[inline]
    fn bank_id(&self, c: usize, addr: usize) -> u16 {
        ImageMemory::bank_of(self.g.slots, self.g.bank_rows, self.g.banks_per_col, c, addr)
    }

    /// Physical image-bank column of logical window column `j` at output column `x`.
    #[inline]
    fn phys(&self, x: usize, j: usize) -> usize {
        match self.scheme {
            WindowScheme::CircularShift => (x + j) % self.g.nat,
            WindowScheme::Realign => j,
        }
    }

    /// Loads window row `r` for output column `x`, channel `n`: SCM reads of
    /// the stored columns, one streamed sample written back.
    fn load_row(&mut self, x: usize, r: isize, n: usize, act: &mut Activity) -> [i64; 7] {
        let nat = self.g.nat;
        let addr = self.addr(n, r);
        let mut row = [0i64; 7];
        for j in 0..nat {
            let c = x as isize - self.g.m + j as isize;
            if !self.g.col_in_image(c) {
                continue;
            }
            let c = c as usize;
            act.touch(self.bank_id(c, addr));
            let p = self.phys(x, j);
            if j + 1 < nat {
                self.rep.scm_reads += 1;
                if let Some(d) = &self.data {
                    row[p] = d.mem.read(c, addr);
                }
            } else {
                self.rep.scm_writes += 1;
                self.rep.stream_pixels += 1;
                if let Some(d) = &mut self.data {
                    let v = d.input.at(n, r as usize, c);
                    d.mem.write(c, addr, v);
                    row[p] = v;
                }
            }
        }
        row
    }

    fn run_op(&mut self, op: Op, cycle: u64) -> Activity {
        let mut act = Activity::default();
        match op {
            Op::Preload { c, r, n } => {
                let addr = self.addr(n, r);
                act.touch(self.bank_id(c, addr));
                self.rep.scm_writes += 1;
                self.rep.stream_pixels += 1;
                if let Some(d) = &mut self.data {
                    let v = d.input.at(n, r as usize, c);
                    d.mem.write(c, addr, v);
                }
                self.log(cycle, "scm", || format!("preload c={c} r={r} n={n}"));
            }
            Op::Fill { x, i, r, n } => {
                let row = self.load_row(x, r, n, &mut act);
                if let Some(d) = &mut self.data {
                    d.staged[n][i] = row;
                }
                self.log(cycle, "scm", || format!("fill x={x} r={r} n={n} banks={}", act.count));
            }
        }
        act
    }

    fn fill_ops(&self, t: &Range<usize>, x: usize) -> VecDeque<Op> {
        let mut ops = VecDeque::new();
        let (h0, h1) = (self.h0, self.h0 + self.held as isize);
        for i in 0..self.g.nat - 1 {
            let r = t.start as isize - self.g.m + i as isize;
            if r < h0 || r >= h1 {
                continue;
            }
            for n in 0..self.g.n_in {
                ops.push_back(Op::Fill { x, i, r, n });
            }
        }
        ops
    }

    fn preload_ops(&self) -> VecDeque<Op> {
        let mut ops = VecDeque::new();
        for j in 0..self.g.nat - 1 {
            let c = j as isize - self.g.m;
            if !self.g.col_in_image(c) {
                continue;
            }
            for n in 0..self.g.n_in {
                for r in self.h0..self.h0 + self.held as isize {
                    ops.push_back(Op::Preload { c: c as usize, r, n });
                }
            }
        }
        ops
    }

    /// Runs `ops` as exposed cycles; returns how many.
    fn exposed(&mut self, ops: &mut VecDeque<Op>) -> u64 {
        let mut count = 0;
        while let Some(op) = ops.pop_front() {
            let c = self.cycle;
            let act = self.run_op(op, c);
            self.rep.note_banks(act.count, 1);
            self.cycle += 1;
            count += 1;
        }
        count
    }

    fn flush_tail(&mut self) {
        let n = self.tail_free.len() as u64;
        self.rep.note_banks(0, n);
        self.tail_free.clear();
    }

    fn start_column(&mut self, t: &Range<usize>, x: usize) {
        let nat = self.g.nat;
        let (h0, h1) = (self.h0, self.h0 + self.held as isize);
        let m = self.g.m;
        let scheme = self.scheme;
        if let Some(d) = &mut self.data {
            for n in 0..self.g.n_in {
                let b = &mut d.ibanks[n];
                b.clear();
                for i in 0..nat - 1 {
                    let r = t.start as isize - m + i as isize;
                    let row = if r >= h0 && r < h1 { d.staged[n][i] } else { [0; 7] };
                    b.shift_in(row);
                }
            }
            if scheme == WindowScheme::CircularShift {
                while d.bank.shift_offset() != x % nat {
                    d.bank.shift_weights();
                }
            }
        }
    }

    fn compute(&mut self, x: usize, n: usize, row: [i64; 7]) {
        let g = &self.g;
        let (nat, k) = (g.nat, g.k);
        let scheme = self.scheme;
        let Some(d) = &mut self.data else { return };
        let ib = &mut d.ibanks[n];
        ib.shift_in(row);
        for r in 0..nat {
            for p in 0..nat {
                let j = match scheme {
                    WindowScheme::CircularShift => (p + nat - x % nat) % nat,
                    WindowScheme::Realign => p,
                };
                d.window[r * nat + p] = if r < k && j < k { ib.get(r, p) } else { 0 };
            }
        }
        let n_sop = d.bank.n_sop();
        for u in 0..n_sop {
            let [a, b] = sop_compute(&d.window, d.bank.word(u, n), &g.mode);
            d.acc[u] += a;
            if g.mode.is_dual() && u + g.n_ch < g.n_out {
                d.acc[u + g.n_ch] += b;
            }
        }
        if d.strict {
            for v in d.acc.iter_mut() {
                let (c, sat) = QFormat::Q7_9.clamp_raw(*v);
                *v = c;
                d.strict_sat += sat as u64;
            }
        }
    }

    fn finish_pixel(&mut self, y: usize, x: usize) {
        if let Some(d) = &mut self.data {
            for o in 0..self.g.n_out {
                let i = d.sums.index(o, y, x);
                d.sums.data[i] = d.acc[o];
                d.acc[o] = 0;
            }
        }
        let idle = self.g.stream_per_px.saturating_sub(self.g.n_in as u64);
        if idle > 0 {
            let c = self.cycle;
            self.log(c, "out", || format!("stall {idle} y={y} x={x}"));
        }
        self.rep.idle_cycles += idle;
        self.rep.note_banks(0, idle);
        self.cycle += idle;
    }

    fn run_pass(&mut self, t: Range<usize>, last_pass: bool) {
        let (h0, h1) = self.g.held(&t);
        self.h0 = h0;
        self.held = (h1 - h0) as usize;
        let nat = self.g.nat;
        let m = self.g.m;

        // preload, partly hidden in the previous pass's tail
        let mut pre = self.preload_ops();
        pre.extend(self.fill_ops(&t, 0));
        let free = std::mem::take(&mut self.tail_free);
        let hidden = free.len().min(pre.len());
        for &c in free.iter().take(hidden) {
            let op = pre.pop_front().unwrap();
            let act = self.run_op(op, c);
            self.rep.note_banks(act.count, 1);
        }
        self.rep.note_banks(0, (free.len() - hidden) as u64);
        self.rep.hidden_preload_cycles += hidden as u64;
        self.rep.preload_cycles += self.exposed(&mut pre);

        let mut carry: VecDeque<Op> = VecDeque::new();
        for x in 0..self.g.wo {
            let n = self.exposed(&mut carry);
            if self.g.padding == Padding::ZeroPad {
                self.rep.tile_overlap_cycles += n;
            } else {
                self.rep.preload_cycles += n;
            }
            self.start_column(&t, x);
            let last_col = x + 1 == self.g.wo;
            let mut next = if last_col { VecDeque::new() } else { self.fill_ops(&t, x + 1) };
            for y in t.clone() {
                let r = y as isize - m + nat as isize - 1;
                let real = r >= self.h0 && r < self.h0 + self.held as isize;
                for ch in 0..self.g.n_in {
                    let c = self.cycle;
                    let row = if real {
                        let mut act = Activity::default();
                        let row = self.load_row(x, r, ch, &mut act);
                        self.rep.note_banks(act.count, 1);
                        row
                    } else if let Some(op) = next.pop_front() {
                        let act = self.run_op(op, c);
                        self.rep.note_banks(act.count, 1);
                        [0; 7]
                    } else {
                        if last_col && !last_pass {
                            self.tail_free.push(c);
                        } else {
                            self.rep.note_banks(0, 1);
                        }
                        [0; 7]
                    };
                    self.log(c, "sop", || format!("x={x} y={y} n={ch}"));
                    self.compute(x, ch, row);
                    self.rep.compute_cycles += 1;
                    self.cycle += 1;
                }
                self.finish_pixel(y, x);
            }
            carry = next;
        }
        self.rep.passes += 1;
    }
}

fn run<'a>(
    cfg: &AccelConfig,
    shape: &BlockShape,
    data: Option<(&'a FeatureMap, &FilterSet)>,
    opts: &SimOptions,
) -> Result<(CycleReport, Option<Data<'a>>, Vec<String>)> {
    let g = Geometry::new(cfg, shape)?;
    let max_held = g
        .tiles
        .iter()
        .map(|t| {
            let (a, b) = g.held(t);
            (b - a) as usize
        })
        .max()
        .unwrap_or(0);
    let data = match data {
        Some((input, filters)) => Some(Data {
            input,
            bank: FilterBank::load(cfg, filters)?,
            mem: ImageMemory::new(g.slots, g.bank_rows, g.banks_per_col, g.n_in * max_held),
            ibanks: vec![ImageBank::new(g.nat); g.n_in],
            staged: vec![[[0; 7]; 7]; g.n_in],
            acc: vec![0; g.n_out],
            window: vec![0; g.nat * g.nat],
            sums: ChannelSums::zeros(g.n_out, g.ho, g.wo),
            strict: opts.accumulation == Accumulation::Strict,
            strict_sat: 0,
        }),
        None => None,
    };
    let mut e = Engine {
        rep: CycleReport::default(),
        cycle: 0,
        trace: opts.trace.then(Vec::new),
        data,
        scheme: opts.scheme,
        h0: 0,
        held: 0,
        tail_free: Vec::new(),
        g,
    };
    let tiles = e.g.tiles.clone();
    let last = tiles.len() - 1;
    for (i, t) in tiles.into_iter().enumerate() {
        e.run_pass(t, i == last);
    }
    e.flush_tail();
    let g = &e.g;
    e.rep.total_cycles = e.cycle;
    e.rep.pixels_in = (g.n_in * g.h * g.w) as u64;
    e.rep.pixels_out = (g.n_out * g.ho * g.wo) as u64;
    e.rep.ops = 2 * (g.k * g.k * g.n_in * g.n_out * g.ho * g.wo) as u64;
    debug_assert!(e.rep.check_total());
    Ok((e.rep, e.data, e.trace.unwrap_or_default()))
}

/// Cycle model only, without arithmetic.
pub fn simulate_timing(cfg: &AccelConfig, shape: &BlockShape, opts: &SimOptions) -> Result<(CycleReport, Vec<String>)> {
    let (rep, _, trace) = run(cfg, shape, None, opts)?;
    Ok((rep, trace))
}

/// Bit-true execution of one channel block (any image height; the block is
/// tiled internally).
pub fn simulate_layer_block(
    cfg: &AccelConfig,
    input: &FeatureMap,
    filters: &FilterSet,
    affine: &[ChannelAffine],
    padding: Padding,
    opts: &SimOptions,
) -> Result<BlockResult> {
    if filters.n_in() != input.channels() {
        return Err(Error::dim(format!(
            "filters expect {} input channels, image has {}",
            filters.n_in(),
            input.channels()
        )));
    }
    if affine.len() != filters.n_out() {
        return Err(Error::dim(format!(
            "{} affine pairs for {} output channels",
            affine.len(),
            filters.n_out()
        )));
    }
    let shape = BlockShape {
        n_in: filters.n_in(),
        n_out: filters.n_out(),
        h: input.height(),
        w: input.width(),
        k: filters.kernel_size(),
        padding,
    };
    let (report, data, trace) = run(cfg, &shape, Some((input, filters)), opts)?;
    let data = data.expect("data path present");
    let (output, mut saturations) = data.sums.finish(affine)?;
    saturations.q7_9 += data.strict_sat;
    Ok(BlockResult {
        sums: data.sums,
        output,
        saturations,
        report,
        trace,
    })
}

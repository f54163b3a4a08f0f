//! Bit-true software reference of a binary-weight convolution layer with
//! per-output-channel scale and bias.
//!
//! Every accelerator result is compared against [`conv_layer_golden`]. The
//! reference accumulates `±i_n(y + a - m, x + b - m)` over input channels and
//! kernel taps in exact integer arithmetic, views the sum as Q7.9 at the
//! channel-summer boundary and then runs the fixed-point scale-bias stage.

mod binarize;
pub mod io;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxp::{self, FxSample, QFormat, RoundMode, SatFlags};

pub use binarize::{binarize_det, binarize_sto, binarize_sto_rng, hard_sigmoid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// All-zero halo, output has the input size (odd kernels only).
    #[default]
    #[serde(alias = "same", alias = "zero")]
    ZeroPad,
    /// No halo, output shrinks by `k - 1` in each dimension.
    Valid,
}

impl Padding {
    /// Output spatial size for an `h x w` input and a `k x k` kernel.
    pub fn output_size(self, h: usize, w: usize, k: usize) -> Result<(usize, usize)> {
        match self {
            Padding::ZeroPad => {
                if k.is_multiple_of(2) {
                    return Err(Error::UnsupportedKernel {
                        size: k,
                        reason: "zero padding needs an odd kernel".into(),
                    });
                }
                Ok((h, w))
            }
            Padding::Valid => {
                if k > h || k > w {
                    return Err(Error::dim(format!(
                        "kernel {k}x{k} larger than {h}x{w} image in valid mode"
                    )));
                }
                Ok((h - k + 1, w - k + 1))
            }
        }
    }

    /// Offset from an output coordinate to the top-left input tap.
    pub fn halo(self, k: usize) -> usize {
        match self {
            Padding::ZeroPad => (k - 1) / 2,
            Padding::Valid => 0,
        }
    }
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Padding::ZeroPad => "zero_pad",
            Padding::Valid => "valid",
        })
    }
}

impl FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_pad" | "zero" | "same" => Ok(Padding::ZeroPad),
            "valid" => Ok(Padding::Valid),
            _ => Err(Error::config(format!("unknown padding {s:?}"))),
        }
    }
}

/// A `k x k` kernel of ±1 weights. Stored as bits with `f(-1) = 0`,
/// `f(+1) = 1`, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryFilter {
    k: usize,
    bits: Vec<bool>,
}

impl BinaryFilter {
    pub fn new(k: usize, weights: &[i8]) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("kernel size must be positive"));
        }
        if weights.len() != k * k {
            return Err(Error::dim(format!(
                "{} weights given for a {k}x{k} kernel",
                weights.len()
            )));
        }
        let bits = weights
            .iter()
            .map(|&w| match w {
                1 => Ok(true),
                -1 => Ok(false),
                _ => Err(Error::config(format!("weight {w} is not ±1"))),
            })
            .collect::<Result<_>>()?;
        Ok(BinaryFilter { k, bits })
    }

    /// Decodes the {0,1} storage encoding.
    pub fn from_bits(k: usize, bits: Vec<bool>) -> Result<Self> {
        if k == 0 || bits.len() != k * k {
            return Err(Error::dim(format!("{} bits for a {k}x{k} kernel", bits.len())));
        }
        Ok(BinaryFilter { k, bits })
    }

    pub fn filled(k: usize, w: i8) -> Self {
        assert!(w == 1 || w == -1);
        BinaryFilter {
            k,
            bits: vec![w == 1; k * k],
        }
    }

    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        BinaryFilter {
            k,
            bits: (0..k * k).map(|_| rng.gen()).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn weight(&self, row: usize, col: usize) -> i8 {
        if self.bit(row, col) {
            1
        } else {
            -1
        }
    }

    pub fn bit(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.k + col]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Storage encoding, row-major.
    pub fn encode(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| b as u8).collect()
    }

    pub fn weights(&self) -> Vec<i8> {
        self.bits.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }

    pub fn negated(&self) -> Self {
        BinaryFilter {
            k: self.k,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Binarizes a real-valued kernel with [`binarize_det`].
    pub fn from_real(k: usize, values: &[f64]) -> Result<Self> {
        let w: Vec<i8> = values.iter().map(|&v| binarize_det(v)).collect();
        BinaryFilter::new(k, &w)
    }
}

/// `n_out x n_in` filters sharing one kernel size; index `(o, i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterSet {
    n_out: usize,
    n_in: usize,
    k: usize,
    filters: Vec<BinaryFilter>,
}

impl FilterSet {
    pub fn new(n_out: usize, n_in: usize, filters: Vec<BinaryFilter>) -> Result<Self> {
        if n_out == 0 || n_in == 0 {
            return Err(Error::config("filter set needs at least one channel each way"));
        }
        if filters.len() != n_out * n_in {
            return Err(Error::dim(format!(
                "{} filters for {n_out} x {n_in} channels",
                filters.len()
            )));
        }
        let k = filters[0].size();
        if filters.iter().any(|f| f.size() != k) {
            return Err(Error::dim("filters of mixed kernel sizes"));
        }
        Ok(FilterSet {
            n_out,
            n_in,
            k,
            filters,
        })
    }

    pub fn random<R: Rng + ?Sized>(n_out: usize, n_in: usize, k: usize, rng: &mut R) -> Self {
        let filters = (0..n_out * n_in)
            .map(|_| BinaryFilter::random(k, rng))
            .collect();
        FilterSet {
            n_out,
            n_in,
            k,
            filters,
        }
    }

    pub fn filled(n_out: usize, n_in: usize, k: usize, w: i8) -> Self {
        FilterSet {
            n_out,
            n_in,
            k,
            filters: vec![BinaryFilter::filled(k, w); n_out * n_in],
        }
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn kernel_size(&self) -> usize {
        self.k
    }

    pub fn get(&self, o: usize, i: usize) -> &BinaryFilter {
        &self.filters[o * self.n_in + i]
    }

    pub fn filters(&self) -> &[BinaryFilter] {
        &self.filters
    }

    /// Sub-set of output channels `outs` and input channels `ins`.
    pub fn block(&self, outs: std::ops::Range<usize>, ins: std::ops::Range<usize>) -> FilterSet {
        let mut filters = Vec::with_capacity(outs.len() * ins.len());
        for o in outs.clone() {
            for i in ins.clone() {
                filters.push(self.get(o, i).clone());
            }
        }
        FilterSet {
            n_out: outs.len(),
            n_in: ins.len(),
            k: self.k,
            filters,
        }
    }

    pub fn negated(&self) -> FilterSet {
        FilterSet {
            filters: self.filters.iter().map(BinaryFilter::negated).collect(),
            ..self.clone()
        }
    }
}

/// Q2.9 activations, channel-major then row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    raw: Vec<i64>,
}

impl FeatureMap {
    pub const FORMAT: QFormat = QFormat::Q2_9;

    pub fn new(channels: usize, height: usize, width: usize, raw: Vec<i64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::dim(format!(
                "feature map {channels}x{height}x{width} has an empty dimension"
            )));
        }
        if raw.len() != channels * height * width {
            return Err(Error::dim(format!(
                "{} samples for a {channels}x{height}x{width} map",
                raw.len()
            )));
        }
        if let Some(bad) = raw.iter().find(|&&r| !Self::FORMAT.contains_raw(r)) {
            return Err(Error::config(format!("sample {bad} outside Q2.9")));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            raw,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            raw: vec![0; channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, raw: i64) -> Self {
        assert!(Self::FORMAT.contains_raw(raw));
        FeatureMap {
            channels,
            height,
            width,
            raw: vec![raw; channels * height * width],
        }
    }

    /// Uniform random samples over the full Q2.9 range.
    pub fn random<R: Rng + ?Sized>(channels: usize, height: usize, width: usize, rng: &mut R) -> Self {
        let (lo, hi) = (Self::FORMAT.min_raw(), Self::FORMAT.max_raw());
        FeatureMap {
            channels,
            height,
            width,
            raw: (0..channels * height * width)
                .map(|_| rng.gen_range(lo..=hi))
                .collect(),
        }
    }

    /// Quantizes real values into Q2.9.
    pub fn from_real(
        channels: usize,
        height: usize,
        width: usize,
        values: &[f64],
        mode: RoundMode,
    ) -> Result<Self> {
        let raw = values
            .iter()
            .map(|&v| FxSample::quantize(v, Self::FORMAT, mode).0.raw())
            .collect();
        FeatureMap::new(channels, height, width, raw)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn raw(&self) -> &[i64] {
        &self.raw
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> i64 {
        self.raw[(c * self.height + y) * self.width + x]
    }

    /// Sample with implicit zero halo for out-of-range coordinates.
    #[inline]
    pub fn at_padded(&self, c: usize, y: isize, x: isize) -> i64 {
        if y < 0 || x < 0 || y as usize >= self.height || x as usize >= self.width {
            0
        } else {
            self.at(c, y as usize, x as usize)
        }
    }

    pub fn sample(&self, c: usize, y: usize, x: usize) -> FxSample {
        FxSample::new(self.at(c, y, x), Self::FORMAT).expect("stored samples are in range")
    }

    pub fn channel_range(&self, range: std::ops::Range<usize>) -> FeatureMap {
        let plane = self.height * self.width;
        FeatureMap {
            channels: range.len(),
            height: self.height,
            width: self.width,
            raw: self.raw[range.start * plane..range.end * plane].to_vec(),
        }
    }

    /// Rows `rows` of every channel.
    pub fn row_range(&self, rows: std::ops::Range<usize>) -> FeatureMap {
        let mut raw = Vec::with_capacity(self.channels * rows.len() * self.width);
        for c in 0..self.channels {
            for y in rows.clone() {
                let start = (c * self.height + y) * self.width;
                raw.extend_from_slice(&self.raw[start..start + self.width]);
            }
        }
        FeatureMap {
            channels: self.channels,
            height: rows.len(),
            width: self.width,
            raw,
        }
    }

    /// Window `rows x cols` of every channel.
    pub fn crop(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> FeatureMap {
        let mut raw = Vec::with_capacity(self.channels * rows.len() * cols.len());
        for c in 0..self.channels {
            for y in rows.clone() {
                let start = (c * self.height + y) * self.width;
                raw.extend_from_slice(&self.raw[start + cols.start..start + cols.end]);
            }
        }
        FeatureMap {
            channels: self.channels,
            height: rows.len(),
            width: cols.len(),
            raw,
        }
    }

    /// Copy with an all-zero halo of `m` samples on every side.
    pub fn zero_padded(&self, m: usize) -> FeatureMap {
        let (h, w) = (self.height + 2 * m, self.width + 2 * m);
        let mut raw = vec![0; self.channels * h * w];
        for c in 0..self.channels {
            for y in 0..self.height {
                let src = (c * self.height + y) * self.width;
                let dst = (c * h + y + m) * w + m;
                raw[dst..dst + self.width].copy_from_slice(&self.raw[src..src + self.width]);
            }
        }
        FeatureMap {
            channels: self.channels,
            height: h,
            width: w,
            raw,
        }
    }
}

/// Scale `alpha` and bias `beta` of one output channel, both Q2.9.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelAffine {
    pub alpha: FxSample,
    pub beta: FxSample,
}

impl ChannelAffine {
    pub fn new(alpha: FxSample, beta: FxSample) -> Result<Self> {
        if alpha.fmt() != QFormat::Q2_9 || beta.fmt() != QFormat::Q2_9 {
            return Err(Error::config("scale and bias must be Q2.9"));
        }
        Ok(ChannelAffine { alpha, beta })
    }

    pub fn from_raw(alpha: i64, beta: i64) -> Result<Self> {
        ChannelAffine::new(
            FxSample::new(alpha, QFormat::Q2_9)?,
            FxSample::new(beta, QFormat::Q2_9)?,
        )
    }

    /// Quantizes real scale and bias (truncating, saturating).
    pub fn from_real(alpha: f64, beta: f64) -> Self {
        ChannelAffine {
            alpha: FxSample::quantize(alpha, QFormat::Q2_9, RoundMode::Truncate).0,
            beta: FxSample::quantize(beta, QFormat::Q2_9, RoundMode::Truncate).0,
        }
    }

    /// `alpha = 1`, `beta = 0`.
    pub fn identity() -> Self {
        ChannelAffine::from_raw(1 << 9, 0).unwrap()
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let f = QFormat::Q2_9;
        ChannelAffine::from_raw(
            rng.gen_range(f.min_raw()..=f.max_raw()),
            rng.gen_range(f.min_raw()..=f.max_raw()),
        )
        .unwrap()
    }

    /// Runs the channel-summer narrowing and scale-bias stage on one sum.
    pub fn apply(&self, sum_raw: i64) -> (FxSample, SatFlags) {
        fxp::channel_output(sum_raw, self.alpha, self.beta)
    }
}

/// Where the channel sum is narrowed to Q7.9.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// Exact accumulation, narrowed once at readout.
    #[default]
    Readout,
    /// Saturate to Q7.9 after every input channel.
    Strict,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatCounters {
    pub q7_9: u64,
    pub q2_9: u64,
}

impl SatCounters {
    pub fn record(&mut self, flags: SatFlags) {
        self.q7_9 += flags.q7_9 as u64;
        self.q2_9 += flags.q2_9 as u64;
    }

    pub fn total(&self) -> u64 {
        self.q7_9 + self.q2_9
    }
}

impl std::ops::AddAssign for SatCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.q7_9 += rhs.q7_9;
        self.q2_9 += rhs.q2_9;
    }
}

/// Pre-affine channel sums in raw units of 2^-9, one plane per output channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelSums {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<i64>,
}

impl ChannelSums {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        ChannelSums {
            channels,
            height,
            width,
            data: vec![0; channels * height * width],
        }
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> i64 {
        self.data[self.index(c, y, x)]
    }

    /// Element-wise exact addition.
    pub fn accumulate(&mut self, other: &ChannelSums) -> Result<()> {
        if (self.channels, self.height, self.width) != (other.channels, other.height, other.width)
        {
            return Err(Error::dim("partial sums of different shapes"));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Narrows every sum and applies the per-channel affine stage.
    pub fn finish(&self, affine: &[ChannelAffine]) -> Result<(FeatureMap, SatCounters)> {
        if affine.len() != self.channels {
            return Err(Error::dim(format!(
                "{} affine pairs for {} output channels",
                affine.len(),
                self.channels
            )));
        }
        let plane = self.height * self.width;
        let mut sat = SatCounters::default();
        let mut raw = Vec::with_capacity(self.data.len());
        for (i, &s) in self.data.iter().enumerate() {
            let (out, flags) = affine[i / plane].apply(s);
            sat.record(flags);
            raw.push(out.raw());
        }
        Ok((
            FeatureMap {
                channels: self.channels,
                height: self.height,
                width: self.width,
                raw,
            },
            sat,
        ))
    }
}

fn check_layer(input: &FeatureMap, filters: &FilterSet, padding: Padding) -> Result<(usize, usize)> {
    if filters.n_in() != input.channels() {
        return Err(Error::dim(format!(
            "filters expect {} input channels, image has {}",
            filters.n_in(),
            input.channels()
        )));
    }
    padding.output_size(input.height(), input.width(), filters.kernel_size())
}

/// Pre-affine channel sums. In strict mode the running sum saturates to
/// Q7.9 after each input channel and the number of such events is returned.
pub fn channel_sums(
    input: &FeatureMap,
    filters: &FilterSet,
    padding: Padding,
    acc: Accumulation,
) -> Result<(ChannelSums, u64)> {
    let (ho, wo) = check_layer(input, filters, padding)?;
    let k = filters.kernel_size();
    let m = padding.halo(k) as isize;
    let mut sums = ChannelSums::zeros(filters.n_out(), ho, wo);
    let mut strict_sat = 0u64;
    for o in 0..filters.n_out() {
        for y in 0..ho {
            for x in 0..wo {
                let mut total = 0i64;
                for n in 0..filters.n_in() {
                    let f = filters.get(o, n);
                    let mut part = 0i64;
                    for a in 0..k {
                        for b in 0..k {
                            let v = input.at_padded(
                                n,
                                y as isize + a as isize - m,
                                x as isize + b as isize - m,
                            );
                            if f.bit(a, b) {
                                part += v;
                            } else {
                                part -= v;
                            }
                        }
                    }
                    total += part;
                    if acc == Accumulation::Strict {
                        let (clamped, sat) = QFormat::Q7_9.clamp_raw(total);
                        total = clamped;
                        strict_sat += sat as u64;
                    }
                }
                let idx = sums.index(o, y, x);
                sums.data[idx] = total;
            }
        }
    }
    Ok((sums, strict_sat))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldenOutput {
    pub output: FeatureMap,
    pub saturations: SatCounters,
}

/// Reference convolution layer with readout narrowing.
pub fn conv_layer_golden(
    input: &FeatureMap,
    filters: &FilterSet,
    affine: &[ChannelAffine],
    padding: Padding,
) -> Result<GoldenOutput> {
    conv_layer_golden_with(input, filters, affine, padding, Accumulation::Readout)
}

pub fn conv_layer_golden_with(
    input: &FeatureMap,
    filters: &FilterSet,
    affine: &[ChannelAffine],
    padding: Padding,
    acc: Accumulation,
) -> Result<GoldenOutput> {
    if affine.len() != filters.n_out() {
        return Err(Error::dim(format!(
            "{} affine pairs for {} output channels",
            affine.len(),
            filters.n_out()
        )));
    }
    let (sums, strict_sat) = channel_sums(input, filters, padding, acc)?;
    let (output, mut saturations) = sums.finish(affine)?;
    saturations.q7_9 += strict_sat;
    Ok(GoldenOutput {
        output,
        saturations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn id_affine(n: usize) -> Vec<ChannelAffine> {
        vec![ChannelAffine::identity(); n]
    }

    #[test]
    fn filter_encoding() {
        let f = BinaryFilter::new(2, &[1, -1, -1, 1]).unwrap();
        assert_eq!(f.encode(), vec![1, 0, 0, 1]);
        assert_eq!(f.weight(0, 1), -1);
        assert_eq!(BinaryFilter::from_bits(2, vec![true, false, false, true]).unwrap(), f);
        assert!(BinaryFilter::new(2, &[1, 0, 1, 1]).is_err());
        assert!(BinaryFilter::new(3, &[1; 4]).is_err());
        assert_eq!(BinaryFilter::from_real(1, &[-0.2]).unwrap().weight(0, 0), -1);
    }

    #[test]
    fn identity_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = FeatureMap::random(1, 5, 6, &mut rng);
        let filters = FilterSet::filled(1, 1, 1, 1);
        let out = conv_layer_golden(&input, &filters, &id_affine(1), Padding::Valid).unwrap();
        assert_eq!(out.output, input);
        assert_eq!(out.saturations.total(), 0);
    }

    #[test]
    fn negation_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = FeatureMap::random(1, 4, 4, &mut rng);
        let filters = FilterSet::filled(1, 1, 1, -1);
        let out = conv_layer_golden(&input, &filters, &id_affine(1), Padding::Valid).unwrap();
        for (o, i) in out.output.raw().iter().zip(input.raw()) {
            assert_eq!(*o, (-i).min(QFormat::Q2_9.max_raw()));
        }
    }

    #[test]
    fn constant_image_closed_form() {
        for c in [-600i64, -3, 0, 100, 227, 228, 2047] {
            let input = FeatureMap::filled(1, 5, 5, c);
            let filters = FilterSet::filled(1, 1, 3, 1);
            let out = conv_layer_golden(&input, &filters, &id_affine(1), Padding::Valid).unwrap();
            let (expect, _) = QFormat::Q2_9.clamp_raw(9 * c);
            assert!(out.output.raw().iter().all(|&v| v == expect), "c = {c}");
            assert_eq!(out.output.height(), 3);
        }
    }

    #[test]
    fn saturation_counters() {
        let input = FeatureMap::filled(32, 7, 7, QFormat::Q2_9.max_raw());
        let filters = FilterSet::filled(1, 32, 7, 1);
        let out = conv_layer_golden(&input, &filters, &id_affine(1), Padding::ZeroPad).unwrap();
        assert!(out.saturations.q7_9 > 0);

        let zero = FeatureMap::zeros(2, 4, 4);
        let out = conv_layer_golden(&zero, &FilterSet::filled(1, 2, 3, 1), &id_affine(1), Padding::ZeroPad)
            .unwrap();
        assert_eq!(out.saturations.total(), 0);
    }

    #[test]
    fn strict_mode_saturates_early() {
        // Two all-plus channels then one all-minus channel over a max image.
        // 49 * 2047 already exceeds Q7.9, so strict clamps twice.
        let input = FeatureMap::filled(3, 7, 7, QFormat::Q2_9.max_raw());
        let mut fs = vec![BinaryFilter::filled(7, 1); 2];
        fs.push(BinaryFilter::filled(7, -1));
        let filters = FilterSet::new(1, 3, fs).unwrap();
        let (exact, _) = channel_sums(&input, &filters, Padding::Valid, Accumulation::Readout).unwrap();
        let (strict, n) = channel_sums(&input, &filters, Padding::Valid, Accumulation::Strict).unwrap();
        assert_eq!(exact.data[0], 49 * 2047);
        assert_eq!(n, 2);
        assert_eq!(strict.data[0], QFormat::Q7_9.max_raw() - 49 * 2047);
    }

    #[test]
    fn even_kernel_zero_pad_rejected() {
        let input = FeatureMap::zeros(1, 8, 8);
        let filters = FilterSet::filled(1, 1, 4, 1);
        assert!(matches!(
            conv_layer_golden(&input, &filters, &id_affine(1), Padding::ZeroPad),
            Err(Error::UnsupportedKernel { size: 4, .. })
        ));
        assert!(conv_layer_golden(&input, &filters, &id_affine(1), Padding::Valid).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let input = FeatureMap::zeros(2, 4, 4);
        let filters = FilterSet::filled(1, 3, 3, 1);
        assert!(conv_layer_golden(&input, &filters, &id_affine(1), Padding::ZeroPad).is_err());
        let filters = FilterSet::filled(1, 2, 5, 1);
        assert!(conv_layer_golden(&input, &filters, &id_affine(1), Padding::Valid).is_err());
        assert!(conv_layer_golden(&input, &FilterSet::filled(2, 2, 3, 1), &id_affine(1), Padding::Valid)
            .is_err());
    }

    #[test]
    fn zero_pad_interior_matches_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = FeatureMap::random(2, 9, 8, &mut rng);
        let filters = FilterSet::random(3, 2, 5, &mut rng);
        let (zp, _) = channel_sums(&input, &filters, Padding::ZeroPad, Accumulation::Readout).unwrap();
        let (va, _) = channel_sums(&input, &filters, Padding::Valid, Accumulation::Readout).unwrap();
        for o in 0..3 {
            for y in 0..va.height {
                for x in 0..va.width {
                    assert_eq!(va.at(o, y, x), zp.at(o, y + 2, x + 2));
                }
            }
        }
    }

    #[test]
    fn affine_example() {
        let a = ChannelAffine::from_real(0.5, 1.0);
        let (out, _) = a.apply(1024);
        assert_eq!(out.to_real::<f64>(), 2.0);
    }

    #[test]
    fn padding_parse() {
        assert_eq!("same".parse::<Padding>().unwrap(), Padding::ZeroPad);
        assert_eq!("valid".parse::<Padding>().unwrap(), Padding::Valid);
        assert!("full".parse::<Padding>().is_err());
    }
}

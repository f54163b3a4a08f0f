//! Exact signed fixed-point arithmetic.
//!
//! A [`QFormat`] `Qi.f` has one sign bit, `i` integer bits and `f` fractional
//! bits. Samples carry their raw two's-complement integer and format; the
//! real value is `raw * 2^-f` exactly. Narrowing truncates by arithmetic
//! right shift (toward negative infinity) and then clamps to the target range.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::Float;

use crate::error::{Error, Result};

/// Widest format accepted, so that any product of two formats fits in `i64`.
pub const MAX_WIDTH: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QFormat {
    int_bits: u8,
    frac_bits: u8,
}

impl QFormat {
    /// Activations, scale and bias.
    pub const Q2_9: QFormat = QFormat::new_unchecked(2, 9);
    /// Channel-summer output.
    pub const Q7_9: QFormat = QFormat::new_unchecked(7, 9);
    /// Scale-bias intermediate (Q7.9 x Q2.9).
    pub const Q10_18: QFormat = QFormat::new_unchecked(10, 18);

    const fn new_unchecked(int_bits: u8, frac_bits: u8) -> Self {
        QFormat {
            int_bits,
            frac_bits,
        }
    }

    pub fn new(int_bits: u8, frac_bits: u8) -> Result<Self> {
        let width = 1 + int_bits as u32 + frac_bits as u32;
        if width > MAX_WIDTH {
            return Err(Error::config(format!(
                "Q{int_bits}.{frac_bits} is {width} bits wide, limit is {MAX_WIDTH}"
            )));
        }
        Ok(QFormat::new_unchecked(int_bits, frac_bits))
    }

    pub fn int_bits(self) -> u32 {
        self.int_bits as u32
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits as u32
    }

    /// Total width including the sign bit.
    pub fn width(self) -> u32 {
        1 + self.int_bits() + self.frac_bits()
    }

    pub fn max_raw(self) -> i64 {
        (1i64 << (self.width() - 1)) - 1
    }

    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.width() - 1))
    }

    pub fn contains_raw(self, raw: i64) -> bool {
        (self.min_raw()..=self.max_raw()).contains(&raw)
    }

    /// Clamp `raw` into range; the flag is set when clamping happened.
    pub fn clamp_raw(self, raw: i64) -> (i64, bool) {
        if raw > self.max_raw() {
            (self.max_raw(), true)
        } else if raw < self.min_raw() {
            (self.min_raw(), true)
        } else {
            (raw, false)
        }
    }

    /// Format of an exact product: integer bits add plus one, fractional bits add.
    pub fn product(self, other: QFormat) -> QFormat {
        QFormat::new_unchecked(
            self.int_bits + other.int_bits + 1,
            self.frac_bits + other.frac_bits,
        )
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.int_bits, self.frac_bits)
    }
}

impl FromStr for QFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s
            .strip_prefix('Q')
            .ok_or_else(|| Error::config(format!("format tag {s:?} must start with 'Q'")))?;
        let (i, f) = body
            .split_once('.')
            .ok_or_else(|| Error::config(format!("format tag {s:?} must look like Qi.f")))?;
        let int_bits = i
            .parse()
            .map_err(|_| Error::config(format!("bad integer bits in {s:?}")))?;
        let frac_bits = f
            .parse()
            .map_err(|_| Error::config(format!("bad fractional bits in {s:?}")))?;
        QFormat::new(int_bits, frac_bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RoundMode {
    /// Toward negative infinity.
    #[default]
    Truncate,
    /// Nearest, ties away from zero.
    Nearest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FxSample {
    raw: i64,
    fmt: QFormat,
}

impl FxSample {
    pub fn new(raw: i64, fmt: QFormat) -> Result<Self> {
        if !fmt.contains_raw(raw) {
            return Err(Error::config(format!("raw value {raw} does not fit {fmt}")));
        }
        Ok(FxSample { raw, fmt })
    }

    /// Builds a sample, clamping `raw` into the format range.
    pub fn saturating(raw: i64, fmt: QFormat) -> (Self, bool) {
        let (raw, sat) = fmt.clamp_raw(raw);
        (FxSample { raw, fmt }, sat)
    }

    pub fn zero(fmt: QFormat) -> Self {
        FxSample { raw: 0, fmt }
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn fmt(self) -> QFormat {
        self.fmt
    }

    pub fn to_real<T: Float>(self) -> T {
        let scale = T::from(1u64 << self.fmt.frac_bits()).expect("power of two fits any float");
        T::from(self.raw).expect("raw fits any float") / scale
    }

    /// Exact rational value.
    pub fn to_rational(self) -> Ratio<i64> {
        Ratio::new(self.raw, 1i64 << self.fmt.frac_bits())
    }

    /// Quantizes a real value; out-of-range values saturate and set the flag.
    /// NaN maps to zero with the flag set.
    pub fn quantize<T: Float>(value: T, fmt: QFormat, mode: RoundMode) -> (Self, bool) {
        if value.is_nan() {
            return (FxSample::zero(fmt), true);
        }
        let scale = T::from(1u64 << fmt.frac_bits()).expect("power of two fits any float");
        let scaled = value * scale;
        let scaled = match mode {
            RoundMode::Truncate => scaled.floor(),
            RoundMode::Nearest => scaled.round(),
        };
        let max = T::from(fmt.max_raw()).unwrap();
        let min = T::from(fmt.min_raw()).unwrap();
        if scaled > max {
            return (FxSample::saturating(fmt.max_raw(), fmt).0, true);
        }
        if scaled < min {
            return (FxSample::saturating(fmt.min_raw(), fmt).0, true);
        }
        let raw = scaled.to_i64().expect("in-range value converts");
        (FxSample { raw, fmt }, false)
    }

    /// Exact product, see [`mul_qq`].
    pub fn mul(self, other: FxSample) -> FxSample {
        mul_qq(self, other)
    }

    /// Re-expresses the sample with `frac_bits` fractional bits without loss
    /// (left shift). The integer field widens so the value always fits.
    pub fn align(self, frac_bits: u32) -> FxSample {
        assert!(frac_bits >= self.fmt.frac_bits(), "align only widens");
        let shift = frac_bits - self.fmt.frac_bits();
        let fmt = QFormat::new_unchecked(self.fmt.int_bits, frac_bits as u8);
        FxSample {
            raw: self.raw << shift,
            fmt,
        }
    }

    /// Saturating addition in a given result format; both operands must
    /// share its fractional bits.
    pub fn add_in(self, other: FxSample, fmt: QFormat) -> (FxSample, bool) {
        assert_eq!(self.fmt.frac_bits(), fmt.frac_bits());
        assert_eq!(other.fmt.frac_bits(), fmt.frac_bits());
        FxSample::saturating(self.raw + other.raw, fmt)
    }
}

impl fmt::Display for FxSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.fmt, self.to_real::<f64>())
    }
}

/// Exact product of two samples. The result format has
/// `a.int + b.int + 1` integer and `a.frac + b.frac` fractional bits, which
/// always holds the product.
pub fn mul_qq(a: FxSample, b: FxSample) -> FxSample {
    FxSample {
        raw: a.raw * b.raw,
        fmt: a.fmt.product(b.fmt),
    }
}

/// Drops surplus fractional bits by arithmetic right shift, then clamps into
/// `target`. When the target has more fractional bits the value is shifted
/// left instead, which is exact.
pub fn saturate_truncate(a: FxSample, target: QFormat) -> (FxSample, bool) {
    let from = a.fmt.frac_bits();
    let to = target.frac_bits();
    let raw = if from >= to {
        a.raw >> (from - to)
    } else {
        a.raw << (to - from)
    };
    FxSample::saturating(raw, target)
}

/// Saturation events of one scale-bias evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SatFlags {
    pub q7_9: bool,
    pub q2_9: bool,
}

/// Views an exact channel sum (raw units of 2^-9) as the Q7.9 channel-summer
/// output, saturating.
pub fn narrow_channel_sum(sum_raw: i64) -> (FxSample, bool) {
    FxSample::saturating(sum_raw, QFormat::Q7_9)
}

/// The scale-bias stage: Q7.9 sum times Q2.9 scale gives Q10.18, the Q2.9
/// bias is aligned to 18 fractional bits and added, and the result is
/// truncated and saturated to Q2.9.
pub fn scale_bias(sum: FxSample, alpha: FxSample, beta: FxSample) -> (FxSample, bool) {
    debug_assert_eq!(sum.fmt(), QFormat::Q7_9);
    let scaled = mul_qq(sum, alpha);
    debug_assert_eq!(scaled.fmt(), QFormat::Q10_18);
    let bias = beta.align(QFormat::Q10_18.frac_bits());
    // |Q7.9 * Q2.9| < 2^9 and |bias| < 2^2, so Q10.18 never overflows here.
    let (acc, _) = scaled.add_in(bias, QFormat::Q10_18);
    saturate_truncate(acc, QFormat::Q2_9)
}

/// Full channel-summer plus scale-bias pipeline for one output sample.
pub fn channel_output(sum_raw: i64, alpha: FxSample, beta: FxSample) -> (FxSample, SatFlags) {
    let (sum, q7_9) = narrow_channel_sum(sum_raw);
    let (out, q2_9) = scale_bias(sum, alpha, beta);
    (out, SatFlags { q7_9, q2_9 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q29(v: f64) -> FxSample {
        FxSample::quantize(v, QFormat::Q2_9, RoundMode::Truncate).0
    }

    #[test]
    fn format_widths() {
        assert_eq!(QFormat::Q2_9.width(), 12);
        assert_eq!(QFormat::Q7_9.width(), 17);
        assert_eq!(QFormat::Q10_18.width(), 29);
        assert_eq!(QFormat::Q7_9.product(QFormat::Q2_9), QFormat::Q10_18);
        assert!(QFormat::new(20, 20).is_err());
    }

    #[test]
    fn format_tag_roundtrip() {
        let f: QFormat = "Q2.9".parse().unwrap();
        assert_eq!(f, QFormat::Q2_9);
        assert_eq!(QFormat::Q10_18.to_string(), "Q10.18");
        assert!("2.9".parse::<QFormat>().is_err());
        assert!("Q2".parse::<QFormat>().is_err());
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(q29(0.0).raw(), 0);
        assert_eq!(q29(1.0).raw(), 512);
        let (s, sat) = FxSample::quantize(4.0, QFormat::Q2_9, RoundMode::Truncate);
        assert!(sat);
        assert_eq!(s.raw(), 2047);
        assert_eq!(s.to_real::<f64>(), 3.998046875);
        let (s, sat) = FxSample::quantize(-10.0, QFormat::Q2_9, RoundMode::Truncate);
        assert!(sat);
        assert_eq!(s.raw(), -2048);
    }

    #[test]
    fn quantize_modes_differ_on_fractions() {
        let v = 3.0 / 1024.0; // 1.5 LSB
        assert_eq!(FxSample::quantize(v, QFormat::Q2_9, RoundMode::Truncate).0.raw(), 1);
        assert_eq!(FxSample::quantize(v, QFormat::Q2_9, RoundMode::Nearest).0.raw(), 2);
        assert_eq!(FxSample::quantize(-v, QFormat::Q2_9, RoundMode::Truncate).0.raw(), -2);
        assert_eq!(FxSample::quantize(-v, QFormat::Q2_9, RoundMode::Nearest).0.raw(), -2);
        assert!(FxSample::quantize(f64::NAN, QFormat::Q2_9, RoundMode::Nearest).1);
    }

    #[test]
    fn quantize_f32() {
        let (s, _) = FxSample::quantize(0.5f32, QFormat::Q2_9, RoundMode::Truncate);
        assert_eq!(s.raw(), 256);
        assert_eq!(s.to_real::<f32>(), 0.5);
    }

    #[test]
    fn mul_examples() {
        let one_q79 = FxSample::new(512, QFormat::Q7_9).unwrap();
        let p = mul_qq(one_q79, q29(1.0));
        assert_eq!(p.fmt(), QFormat::Q10_18);
        assert_eq!(p.raw(), 1 << 18);

        let m2 = FxSample::new(-1024, QFormat::Q7_9).unwrap();
        let p = mul_qq(m2, q29(0.5));
        assert_eq!(p.to_rational(), Ratio::from_integer(-1));

        let z = FxSample::zero(QFormat::Q7_9);
        assert_eq!(mul_qq(z, q29(3.0)).raw(), 0);
    }

    #[test]
    fn saturate_truncate_examples() {
        let v = FxSample::new((1.25 * (1 << 18) as f64) as i64, QFormat::Q10_18).unwrap();
        let (n, sat) = saturate_truncate(v, QFormat::Q2_9);
        assert!(!sat);
        assert_eq!(n.to_real::<f64>(), 1.25);

        let big = FxSample::new(100 << 18, QFormat::Q10_18).unwrap();
        let (n, sat) = saturate_truncate(big, QFormat::Q2_9);
        assert!(sat);
        assert_eq!(n.to_real::<f64>(), 3.998046875);

        let tiny = FxSample::new(-1, QFormat::Q10_18).unwrap();
        let (n, sat) = saturate_truncate(tiny, QFormat::Q2_9);
        assert!(!sat);
        assert_eq!(n.raw(), -1);
    }

    #[test]
    fn scale_bias_examples() {
        // alpha = 1, beta = 0 passes a representable sum through.
        let (out, flags) = channel_output(700, q29(1.0), q29(0.0));
        assert_eq!(out.raw(), 700);
        assert_eq!(flags, SatFlags::default());

        // 2.0 * 0.5 + 1.0 = 2.0
        let (out, _) = channel_output(1024, q29(0.5), q29(1.0));
        assert_eq!(out.to_real::<f64>(), 2.0);

        // Q7.9 max times Q2.9 max saturates Q2.9.
        let (out, flags) = channel_output(QFormat::Q7_9.max_raw(), q29(3.998046875), q29(0.0));
        assert_eq!(out.raw(), QFormat::Q2_9.max_raw());
        assert!(flags.q2_9);
        assert!(!flags.q7_9);

        // Beyond Q7.9 the channel summer saturates first.
        let (_, flags) = channel_output(1 << 20, q29(1.0), q29(0.0));
        assert!(flags.q7_9);
    }

    #[test]
    fn rational_and_float_agree() {
        let s = FxSample::new(-1234, QFormat::Q2_9).unwrap();
        let r = s.to_rational();
        assert_eq!(*r.numer() as f64 / *r.denom() as f64, s.to_real::<f64>());
    }
}

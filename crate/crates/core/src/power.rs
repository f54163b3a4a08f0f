//! Operating points, core/device power and energy.
//!
//! Points come from a calibration table (see `fixtures/calibration.toml`,
//! embedded as [`Calibration::builtin`]). Voltages between two calibrated
//! points interpolate log-linearly in frequency and power, with a warning.

use std::path::Path;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::accel::{AccelConfig, ModeEntry};
use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../fixtures/calibration.toml");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatingPoint<T> {
    pub variant: String,
    pub label: String,
    /// V
    pub v_core: T,
    /// Hz
    pub f: T,
    /// W at full utilization
    pub p_core_active: T,
    /// W when every SoP slot is idle
    pub p_leak: T,
    pub n_ch: usize,
    /// Only kernel size supported, for fixed-kernel variants.
    pub kernel: Option<usize>,
    /// MGE
    pub area_mge: Option<T>,
    pub source: String,
    pub interpolated: bool,
}

impl<T: Float> OperatingPoint<T> {
    /// Accelerator configuration matching this variant.
    pub fn accel_config(&self) -> AccelConfig {
        let mut cfg = AccelConfig::with_channels(self.n_ch);
        if let Some(k) = self.kernel {
            cfg.modes = vec![ModeEntry {
                k,
                native: k,
                filters_per_sop: 1,
            }];
        }
        cfg
    }

    /// Peak throughput with 7x7 kernels, Op/s.
    pub fn peak_throughput(&self) -> T {
        T::from(2 * 49 * self.n_ch).unwrap() * self.f
    }

    /// Core energy efficiency at peak, Op/s/W.
    pub fn core_efficiency(&self) -> T {
        self.peak_throughput() / self.p_core_active
    }

    /// Area efficiency at peak, Op/s/MGE.
    pub fn area_efficiency(&self) -> Option<T> {
        self.area_mge.map(|a| self.peak_throughput() / a)
    }
}

/// I/O power, linear in the core clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoModel<T> {
    /// W at `f_ref`
    pub p_io_ref: T,
    /// Hz
    pub f_ref: T,
    /// Pad supply, informational.
    pub v_pad: T,
}

impl<T: Float> Default for IoModel<T> {
    fn default() -> Self {
        IoModel {
            p_io_ref: T::from(0.328).unwrap(),
            f_ref: T::from(400e6).unwrap(),
            v_pad: T::from(1.8).unwrap(),
        }
    }
}

impl<T: Float> IoModel<T> {
    pub fn p_io(&self, f: T) -> T {
        self.p_io_ref * f / self.f_ref
    }
}

/// `p_leak + u * (p_active - p_leak)`
pub fn core_power<T: Float>(pt: &OperatingPoint<T>, utilization: T) -> T {
    pt.p_leak + utilization * (pt.p_core_active - pt.p_leak)
}

pub fn device_power<T: Float>(pt: &OperatingPoint<T>, io: &IoModel<T>, utilization: T) -> T {
    core_power(pt, utilization) + io.p_io(pt.f)
}

/// `(ops / theta) * p`, J.
pub fn energy_per_frame<T: Float>(ops: T, theta: T, p: T) -> T {
    if ops == T::zero() {
        return T::zero();
    }
    ops / theta * p
}

/// Core power under partial SoP activity, used by the network evaluator.
///
/// A fraction `static_share` of the full-activity power is drawn regardless
/// of how many SoP slots are busy (filter bank, image memory, control); the
/// rest scales with the busy fraction. `mode_scale` rescales the full power
/// for a native multiplier layout relative to 7x7.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel<T> {
    pub static_share: T,
    /// `(native, scale)`; natives not listed scale by 1.
    pub mode_scale: Vec<(usize, T)>,
}

impl<T: Float> Default for ActivityModel<T> {
    fn default() -> Self {
        // non-SoP share of the 8x8 binary core: 1 - 22.6412 mW / 39.3 mW
        let static_share = T::one() - cast::<T>(22.6412) / cast(39.3);
        // 3x3 dual mode: 18 of 49 multipliers at 59.20 vs 61.23 TOp/s/W
        let three = cast::<T>(18.0 / 49.0) * cast(61.23) / cast(59.20);
        ActivityModel {
            static_share,
            mode_scale: vec![(3, three)],
        }
    }
}

impl<T: Float> ActivityModel<T> {
    pub fn scale(&self, native: usize) -> T {
        self.mode_scale
            .iter()
            .find(|(n, _)| *n == native)
            .map_or(T::one(), |&(_, s)| s)
    }

    /// Power with a fraction `busy` of the multiplier slots working.
    pub fn power(&self, pt: &OperatingPoint<T>, native: usize, busy: T) -> T {
        let s = self.static_share;
        pt.p_core_active * self.scale(native) * (s + (T::one() - s) * busy)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    variant: String,
    #[serde(default)]
    label: String,
    v_core: f64,
    f_mhz: f64,
    p_core_mw: f64,
    #[serde(default)]
    p_leak_mw: f64,
    n_ch: usize,
    kernel: Option<usize>,
    area_mge: Option<f64>,
    #[serde(default)]
    source: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    point: Vec<RawPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration<T> {
    points: Vec<OperatingPoint<T>>,
}

fn cast<T: Float>(v: f64) -> T {
    T::from(v).expect("finite calibration value")
}

impl<T: Float> Calibration<T> {
    pub fn builtin() -> Self {
        Calibration::from_toml(BUILTIN).expect("shipped calibration parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Calibration::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::Calibration(e.to_string()))?;
        let mut points: Vec<OperatingPoint<T>> = Vec::with_capacity(raw.point.len());
        for p in raw.point {
            if !(p.f_mhz > 0.0 && p.p_core_mw >= 0.0 && p.p_leak_mw >= 0.0 && p.v_core > 0.0) {
                return Err(Error::Calibration(format!(
                    "{} @ {} V: frequency must be positive and powers non-negative",
                    p.variant, p.v_core
                )));
            }
            if p.p_leak_mw > p.p_core_mw {
                return Err(Error::Calibration(format!(
                    "{} @ {} V: leakage above active power",
                    p.variant, p.v_core
                )));
            }
            if p.n_ch == 0 {
                return Err(Error::Calibration(format!("{}: n_ch must be positive", p.variant)));
            }
            points.push(OperatingPoint {
                variant: p.variant,
                label: p.label,
                v_core: cast(p.v_core),
                f: cast(p.f_mhz * 1e6),
                p_core_active: cast(p.p_core_mw * 1e-3),
                p_leak: cast(p.p_leak_mw * 1e-3),
                n_ch: p.n_ch,
                kernel: p.kernel,
                area_mge: p.area_mge.map(cast),
                source: p.source,
                interpolated: false,
            });
        }
        points.sort_by(|a, b| {
            a.variant
                .cmp(&b.variant)
                .then(a.v_core.partial_cmp(&b.v_core).unwrap())
        });
        for w in points.windows(2) {
            if w[0].variant == w[1].variant && w[0].v_core == w[1].v_core {
                return Err(Error::Calibration(format!("duplicate point {} @ {:?} V", w[0].variant, w[0].v_core.to_f64())));
            }
        }
        Ok(Calibration { points })
    }

    pub fn variants(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.points.iter().map(|p| p.variant.as_str()).collect();
        v.dedup();
        v
    }

    /// Calibrated points of a variant, ascending voltage.
    pub fn points(&self, variant: &str) -> Vec<&OperatingPoint<T>> {
        self.points.iter().filter(|p| p.variant == variant).collect()
    }

    pub fn all(&self) -> &[OperatingPoint<T>] {
        &self.points
    }

    /// Exact point, or a log-linear interpolation between the two nearest
    /// calibrated voltages. Voltages outside the calibrated range fail.
    pub fn lookup(&self, variant: &str, v_core: T) -> Result<OperatingPoint<T>> {
        let pts = self.points(variant);
        if pts.is_empty() {
            return Err(Error::OperatingPoint(format!("unknown variant {variant:?}")));
        }
        let tol = cast::<T>(1e-9);
        if let Some(p) = pts.iter().find(|p| (p.v_core - v_core).abs() <= tol) {
            return Ok((*p).clone());
        }
        let hi = pts.iter().position(|p| p.v_core > v_core);
        let (a, b) = match hi {
            Some(i) if i > 0 => (pts[i - 1], pts[i]),
            _ => {
                return Err(Error::OperatingPoint(format!(
                    "{variant} has no calibration around {:?} V (range {:?}..{:?} V)",
                    v_core.to_f64().unwrap_or(f64::NAN),
                    pts[0].v_core.to_f64().unwrap_or(f64::NAN),
                    pts[pts.len() - 1].v_core.to_f64().unwrap_or(f64::NAN),
                )))
            }
        };
        log::warn!(
            "{variant}: {:?} V not calibrated, interpolating between {:?} V and {:?} V",
            v_core.to_f64().unwrap_or(f64::NAN),
            a.v_core.to_f64().unwrap_or(f64::NAN),
            b.v_core.to_f64().unwrap_or(f64::NAN)
        );
        let t = (v_core - a.v_core) / (b.v_core - a.v_core);
        let loglerp = |x: T, y: T| {
            if x > T::zero() && y > T::zero() {
                (x.ln() + t * (y.ln() - x.ln())).exp()
            } else {
                x + t * (y - x)
            }
        };
        Ok(OperatingPoint {
            variant: variant.to_string(),
            label: "interpolated".into(),
            v_core,
            f: loglerp(a.f, b.f),
            p_core_active: loglerp(a.p_core_active, b.p_core_active),
            p_leak: loglerp(a.p_leak, b.p_leak),
            n_ch: a.n_ch,
            kernel: a.kernel,
            area_mge: a.area_mge,
            source: format!("interpolated from {} and {}", a.label, b.label),
            interpolated: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn builtin_points() {
        let c = Calibration::<f64>::builtin();
        assert!(c.variants().contains(&"multi32"));
        let p = c.lookup("multi32", 1.2).unwrap();
        assert!(close(p.peak_throughput(), 1505.28e9, 1e-12));
        assert!(close(p.area_efficiency().unwrap() / 1e9, 1131.8, 1e-3));
        let p = c.lookup("multi32", 0.6).unwrap();
        assert!(close(p.core_efficiency() / 1e12, 61.2, 1e-3));
        let p = c.lookup("multi32_stated_f", 0.6).unwrap();
        assert_eq!(p.f, 27.5e6);
        assert!(close(p.core_efficiency() / 1e12, 61.2, 1e-3));
        assert_eq!(p.accel_config().n_ch, 32);
        let fixed = c.lookup("fixed32", 1.2).unwrap().accel_config();
        assert!(fixed.mode(3).is_err());
        assert!(fixed.mode(7).is_ok());
    }

    #[test]
    fn derived_channel_points() {
        let c = Calibration::<f64>::builtin();
        let p8 = c.lookup("multi8", 1.2).unwrap().p_core_active;
        let p16 = c.lookup("multi16", 1.2).unwrap().p_core_active;
        let p32 = c.lookup("multi32", 1.2).unwrap().p_core_active;
        assert!(close(p32 / p8, 3.32, 1e-4));
        assert!(close(p16, (p8 * p32).sqrt(), 1e-4));
    }

    #[test]
    fn table_points_f32() {
        let c = Calibration::<f32>::builtin();
        let p = c.lookup("bin8_fixed7", 0.8).unwrap();
        assert!((p.peak_throughput() / 149e9 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn power_models() {
        let c = Calibration::<f64>::builtin();
        let p = c.lookup("bin8_fixed7", 1.2).unwrap();
        let io = IoModel::default();
        assert!(close(core_power(&p, 1.0), 39.3e-3, 1e-12));
        assert_eq!(core_power(&p, 0.0), p.p_leak);
        assert!(close(device_power(&p, &io, 1.0), 0.4329, 1e-3));
        assert!(close(core_power(&p, 3.0 / 32.0), 39.3e-3 * 3.0 / 32.0, 1e-12));
        let slow = OperatingPoint { f: 0.0, ..p.clone() };
        assert_eq!(device_power(&slow, &io, 1.0), core_power(&slow, 1.0));
    }

    #[test]
    fn energy() {
        assert_eq!(energy_per_frame(0.0, 1.0, 1.0), 0.0);
        // 38.2 GOp at 55.9 TOp/s/W
        let e = energy_per_frame(38.2e9, 18.9e9, 18.9e9 / 55.9e12);
        assert!(close(e, 683e-6, 2e-3));
    }

    #[test]
    fn interpolation_and_range() {
        let c = Calibration::<f64>::builtin();
        let p = c.lookup("bin8_fixed7", 1.0).unwrap();
        assert!(p.interpolated);
        assert!(p.f > 190.05e6 && p.f < 480e6);
        let expect = (190.05e6f64.ln() * 0.5 + 480e6f64.ln() * 0.5).exp();
        assert!(close(p.f, expect, 1e-12));
        assert!(matches!(c.lookup("bin8_fixed7", 1.3), Err(Error::OperatingPoint(_))));
        assert!(matches!(c.lookup("bin8_fixed7", 0.5), Err(Error::OperatingPoint(_))));
        assert!(c.lookup("nope", 1.2).is_err());
    }

    #[test]
    fn efficiency_falls_with_voltage() {
        let c = Calibration::<f64>::builtin();
        for v in c.variants() {
            let pts = c.points(v);
            for w in pts.windows(2) {
                assert!(w[0].core_efficiency() >= w[1].core_efficiency(), "{v}");
            }
        }
    }

    #[test]
    fn activity() {
        let c = Calibration::<f64>::builtin();
        let p = c.lookup("multi32", 1.2).unwrap();
        let a = ActivityModel::default();
        assert!(close(a.static_share, 0.4239, 1e-3));
        assert_eq!(a.power(&p, 7, 1.0), p.p_core_active);
        assert!(close(a.power(&p, 7, 0.0), 0.4239 * 0.153, 1e-3));
        assert!(a.power(&p, 3, 1.0) < a.power(&p, 5, 1.0));
    }

    #[test]
    fn bad_files() {
        let ok = "[[point]]\nvariant='a'\nv_core=1.0\nf_mhz=1.0\np_core_mw=1.0\nn_ch=1\n";
        assert!(Calibration::<f64>::from_toml(ok).is_ok());
        assert!(Calibration::<f64>::from_toml(&ok.replace("f_mhz=1.0", "f_mhz=0.0")).is_err());
        assert!(Calibration::<f64>::from_toml(&format!("{ok}{ok}")).is_err());
        assert!(Calibration::<f64>::from_toml("x = 1").is_err());
    }
}

//! Analytic network evaluation at an operating point.
//!
//! Each layer is cut into sub-kernels (when larger than 7x7), input blocks
//! of at most `n_ch` channels and output blocks of the mode's capacity. A
//! block costs `rows * w * max(n_in_block, ceil(n_out_block / rate))`
//! cycles, where `rows` counts the tile overlap. Power follows
//! [`ActivityModel`] with the busy fraction
//! `n_in_block / cycles_per_pixel * n_out_block / capacity`.

use std::fmt::Write as _;

use num_traits::Float;
use serde::Serialize;

use crate::accel::AccelConfig;
use crate::error::Result;
use crate::golden::Padding;
use crate::metrics::{count_ops, eta_border, OpCount};
use crate::power::{ActivityModel, OperatingPoint};

use super::split::split_sizes;
use super::{NetLayer, NetworkSpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerPerf<T> {
    pub name: String,
    pub kernel: usize,
    pub ops: u64,
    pub cycles: u64,
    /// s
    pub time: T,
    /// Op/s
    pub theta: T,
    /// J
    pub energy: T,
    /// Average core power over full-activity power.
    pub utilization: T,
    /// Additions done off-chip, not counted in `ops`.
    pub offchip_adds: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerfReport<T> {
    pub network: String,
    pub variant: String,
    pub v_core: T,
    /// Hz
    pub f: T,
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerPerf<T>>,
    pub ops: u64,
    pub cycles: u64,
    /// s per frame
    pub time: T,
    /// Op/s
    pub theta: T,
    pub fps: T,
    /// Op/s/W
    pub en_eff: T,
    /// J per frame
    pub energy: T,
    pub utilization: T,
}

fn to<T: Float>(v: impl num_traits::ToPrimitive) -> T {
    T::from(v).unwrap()
}

pub fn evaluate_layer<T: Float>(
    layer: &NetLayer,
    cfg: &AccelConfig,
    pt: &OperatingPoint<T>,
    activity: &ActivityModel<T>,
) -> Result<LayerPerf<T>> {
    let spec = &layer.spec;
    spec.validate()?;
    let (ho, wo) = spec.output_size()?;
    let subs = if cfg.mode(spec.h_k).is_ok() {
        vec![spec.h_k]
    } else {
        split_sizes(spec.h_k)?
    };
    let border: T = if subs.len() == 1 && spec.padding == Padding::Valid {
        eta_border(spec)
    } else {
        T::one()
    };
    let mut cycles = 0u64;
    let mut energy_cycles = T::zero();
    let mut input_blocks = 0u64;
    for &kk in &subs {
        let mode = cfg.mode(kk)?;
        let cap = cfg.out_capacity(&mode);
        let rate = cfg.output_rate(&mode);
        for ib in (0..spec.n_in).step_by(cfg.n_ch) {
            let nb = cfg.n_ch.min(spec.n_in - ib);
            input_blocks += 1;
            let h_max = cfg.h_max(nb);
            let tiles = ho.div_ceil(h_max);
            let rows = ho + (tiles - 1) * (kk - 1);
            for ob in (0..spec.n_out).step_by(cap) {
                let no = cap.min(spec.n_out - ob);
                let per_px = nb.max(no.div_ceil(rate));
                let c = (to::<T>(rows * wo * per_px) / border).ceil();
                let busy = to::<T>(nb) / to(per_px) * to(no) / to(cap);
                cycles += c.to_u64().unwrap();
                energy_cycles = energy_cycles + c * activity.power(pt, mode.native, busy);
            }
        }
    }
    let ops = count_ops(spec, OpCount::OutputSize);
    let time = to::<T>(cycles) / pt.f;
    let energy = energy_cycles / pt.f;
    let offchip = (input_blocks - 1) * (spec.n_out * ho * wo) as u64;
    Ok(LayerPerf {
        name: layer.name.clone(),
        kernel: spec.h_k,
        ops,
        cycles,
        time,
        theta: if cycles == 0 { T::zero() } else { to::<T>(ops) / time },
        energy,
        utilization: if cycles == 0 { T::zero() } else { energy / time / pt.p_core_active },
        offchip_adds: offchip,
    })
}

/// Whole-network figures: `theta = ops / time`, `fps = 1 / time`,
/// `en_eff = ops / energy`.
pub fn evaluate_network<T: Float>(
    net: &NetworkSpec,
    cfg: &AccelConfig,
    pt: &OperatingPoint<T>,
    activity: &ActivityModel<T>,
) -> Result<PerfReport<T>> {
    let layers = net
        .layers
        .iter()
        .map(|l| evaluate_layer(l, cfg, pt, activity))
        .collect::<Result<Vec<_>>>()?;
    let ops: u64 = layers.iter().map(|l| l.ops).sum();
    let cycles: u64 = layers.iter().map(|l| l.cycles).sum();
    let time = layers.iter().fold(T::zero(), |a, l| a + l.time);
    let energy = layers.iter().fold(T::zero(), |a, l| a + l.energy);
    let div = |a: T, b: T| if b > T::zero() { a / b } else { T::zero() };
    Ok(PerfReport {
        network: net.name.clone(),
        variant: pt.variant.clone(),
        v_core: pt.v_core,
        f: pt.f,
        input: net.input,
        ops,
        cycles,
        time,
        theta: div(to(ops), time),
        fps: div(T::one(), time),
        en_eff: div(to(ops), energy),
        energy,
        utilization: div(div(energy, time), pt.p_core_active),
        layers,
    })
}

const HEADER: [&str; 7] = ["network", "img size", "EnEff TOp/s/W", "Theta GOp/s", "FPS", "Energy uJ", "V"];

fn row<T: Float>(r: &PerfReport<T>) -> [String; 7] {
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    [
        r.network.clone(),
        format!("{}x{}", r.input.1, r.input.2),
        format!("{:.1}", f(r.en_eff) / 1e12),
        format!("{:.1}", f(r.theta) / 1e9),
        format!("{:.1}", f(r.fps)),
        format!("{:.0}", f(r.energy) * 1e6),
        format!("{}", f(r.v_core)),
    ]
}

/// One line per report with the network-table columns.
pub fn format_csv<T: Float>(reports: &[PerfReport<T>]) -> String {
    let mut s = HEADER.join(",");
    s.push('\n');
    for r in reports {
        s.push_str(&row(r).join(","));
        s.push('\n');
    }
    s
}

pub fn format_table<T: Float>(reports: &[PerfReport<T>]) -> String {
    let rows: Vec<[String; 7]> = reports.iter().map(row).collect();
    let mut width = HEADER.map(str::len);
    for r in &rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, cells: &[String]| {
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                write!(s, "{:<w$}", c, w = width[0]).unwrap();
            } else {
                write!(s, "  {:>w$}", c, w = width[i]).unwrap();
            }
        }
        s.push('\n');
    };
    line(&mut s, &HEADER.map(String::from));
    s.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    s.push('\n');
    for r in &rows {
        line(&mut s, r);
    }
    s
}

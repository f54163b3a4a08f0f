//! Operation counts, peak and real throughput, and efficiency factors.
//!
//! Functions are generic over the float type. Throughputs are in Op/s,
//! frequencies in Hz, power in W and area in MGE.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::accel::{AccelConfig, SopMode};
use crate::error::{Error, Result};
use crate::golden::Padding;

/// One convolution layer, stride 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub h_im: usize,
    pub w_im: usize,
    pub h_k: usize,
    #[serde(default)]
    pub padding: Padding,
}

impl LayerSpec {
    pub fn new(n_in: usize, n_out: usize, h_im: usize, w_im: usize, h_k: usize, padding: Padding) -> Self {
        LayerSpec {
            n_in,
            n_out,
            h_im,
            w_im,
            h_k,
            padding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.n_out == 0 || self.h_im == 0 || self.w_im == 0 || self.h_k == 0 {
            return Err(Error::config(format!("layer {self:?} has a zero dimension")));
        }
        self.output_size().map(|_| ())
    }

    pub fn output_size(&self) -> Result<(usize, usize)> {
        self.padding.output_size(self.h_im, self.w_im, self.h_k)
    }
}

/// Spatial size used in the operation count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpCount {
    /// `(h - k + 1)(w - k + 1)` regardless of padding.
    #[default]
    ValidSize,
    /// The layer's actual output size (`h * w` when zero-padded).
    OutputSize,
}

/// `2 * n_out * n_in * k^2 * positions`.
pub fn count_ops(layer: &LayerSpec, conv: OpCount) -> u64 {
    let k = layer.h_k;
    let positions = match (conv, layer.padding) {
        (OpCount::OutputSize, Padding::ZeroPad) => layer.h_im * layer.w_im,
        _ => layer.h_im.saturating_sub(k - 1) * layer.w_im.saturating_sub(k - 1),
    };
    2 * (layer.n_out * layer.n_in * k * k * positions) as u64
}

/// `2 * filters_per_sop * k^2 * n_ch * f`.
pub fn peak_throughput<T: Float>(cfg: &AccelConfig, mode: &SopMode, f: T) -> T {
    T::from(2 * mode.active_multipliers() * cfg.n_ch).unwrap() * f
}

/// `h / (h + (ceil(h / h_max) - 1)(k - 1))`
pub fn eta_tile<T: Float>(h_im: usize, h_max: usize, h_k: usize) -> Result<T> {
    if h_max < h_k {
        return Err(Error::config(format!("h_max {h_max} is below kernel size {h_k}")));
    }
    let tiles = h_im.div_ceil(h_max);
    let h = T::from(h_im).unwrap();
    Ok(h / (h + T::from((tiles - 1) * (h_k - 1)).unwrap()))
}

/// `min(1, n_in / n_out)`
pub fn eta_ch_idle<T: Float>(n_in_block: usize, n_out_block: usize) -> T {
    (T::from(n_in_block).unwrap() / T::from(n_out_block).unwrap()).min(T::one())
}

/// 1 for zero-padded layers; `1 - ((k-1)/w)((k-1)/h)` in valid mode.
pub fn eta_border<T: Float>(layer: &LayerSpec) -> T {
    match layer.padding {
        Padding::ZeroPad => T::one(),
        Padding::Valid => {
            let k1 = T::from(layer.h_k - 1).unwrap();
            T::one() - (k1 / T::from(layer.w_im).unwrap()) * (k1 / T::from(layer.h_im).unwrap())
        }
    }
}

pub fn real_throughput<T: Float>(peak: T, etas: &[T]) -> T {
    etas.iter().fold(peak, |acc, &e| acc * e)
}

/// `(H_E, H_A) = (theta / p, theta / area)`.
pub fn efficiencies<T: Float>(theta: T, p: T, area: T) -> (T, T) {
    (theta / p, theta / area)
}

/// Analytic figures of one layer executed as a single channel block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport<T> {
    pub ops: u64,
    pub theta_peak: T,
    pub theta_real: T,
    pub eta_tile: T,
    pub eta_ch_idle: T,
    pub eta_border: T,
    /// Op/s/W, when a power figure was given.
    pub h_e: Option<T>,
    /// Op/s/MGE, when an area was given.
    pub h_a: Option<T>,
}

/// Block-level analytic report. The input-channel block is `min(n_in, n_ch)`
/// and the output-channel block `min(n_out, capacity)`; channel idling
/// compares the input block with the output cycles per pixel.
pub fn efficiency_report<T: Float>(
    cfg: &AccelConfig,
    layer: &LayerSpec,
    f: T,
    power: Option<T>,
    area: Option<T>,
) -> Result<EfficiencyReport<T>> {
    layer.validate()?;
    let mode = cfg.mode(layer.h_k)?;
    let n_in_b = layer.n_in.min(cfg.n_ch);
    let n_out_b = layer.n_out.min(cfg.out_capacity(&mode));
    let out_cycles = n_out_b.div_ceil(cfg.output_rate(&mode));
    let theta_peak = peak_throughput(cfg, &mode, f);
    let et = eta_tile::<T>(layer.h_im, cfg.h_max(n_in_b), layer.h_k)?;
    let ec = eta_ch_idle::<T>(n_in_b, out_cycles);
    let eb = eta_border::<T>(layer);
    let theta_real = real_throughput(theta_peak, &[et, ec, eb]);
    Ok(EfficiencyReport {
        ops: count_ops(layer, OpCount::ValidSize),
        theta_peak,
        theta_real,
        eta_tile: et,
        eta_ch_idle: ec,
        eta_border: eb,
        h_e: power.map(|p| theta_real / p),
        h_a: area.map(|a| theta_real / a),
    })
}

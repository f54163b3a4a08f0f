//! Bit-true execution of whole layers on the accelerator model.

use crate::accel::{simulate_layer_block, AccelConfig, CycleReport, SimOptions};
use crate::error::{Error, Result};
use crate::golden::{ChannelAffine, ChannelSums, FeatureMap, FilterSet, Padding, SatCounters};
use crate::metrics::LayerSpec;

use super::plan::{plan_blocks, BlockPlan};
use super::split::{split_kernel, KernelSplit};

#[derive(Clone, Debug)]
pub struct LayerRun {
    /// Final pre-affine sums after off-chip accumulation.
    pub sums: ChannelSums,
    pub output: FeatureMap,
    pub saturations: SatCounters,
    /// All passes merged.
    pub report: CycleReport,
    /// One plan per sub-kernel position.
    pub plans: Vec<BlockPlan>,
    pub offchip_adds: u64,
}

/// Exact sum of partial results of input-channel blocks or sub-kernels.
pub fn offchip_accumulate(partials: &[ChannelSums]) -> Result<ChannelSums> {
    let (first, rest) = partials
        .split_first()
        .ok_or_else(|| Error::dim("no partial sums to accumulate"))?;
    let mut acc = first.clone();
    for p in rest {
        acc.accumulate(p)?;
    }
    Ok(acc)
}

/// Runs every channel block of a layer whose kernel the accelerator
/// supports, accumulating input blocks into `sums` at the block's output
/// offset.
fn run_blocks(
    cfg: &AccelConfig,
    input: &FeatureMap,
    filters: &FilterSet,
    padding: Padding,
    opts: &SimOptions,
    sums: &mut ChannelSums,
    report: &mut CycleReport,
) -> Result<BlockPlan> {
    let layer = LayerSpec::new(
        input.channels(),
        filters.n_out(),
        input.height(),
        input.width(),
        filters.kernel_size(),
        padding,
    );
    let plan = plan_blocks(&layer, cfg)?;
    for ib in &plan.input_blocks {
        let part_in = input.channel_range(ib.clone());
        for ob in &plan.output_blocks {
            let identity = vec![ChannelAffine::identity(); ob.len()];
            let block = simulate_layer_block(
                cfg,
                &part_in,
                &filters.block(ob.clone(), ib.clone()),
                &identity,
                padding,
                opts,
            )?;
            report.merge(&block.report);
            let b = &block.sums;
            for (j, o) in ob.clone().enumerate() {
                for y in 0..b.height {
                    for x in 0..b.width {
                        let i = sums.index(o, y, x);
                        sums.data[i] += b.at(j, y, x);
                    }
                }
            }
        }
    }
    Ok(plan)
}

/// Bit-true layer on the accelerator: channel blocking, row tiling, kernel
/// splitting above 7x7 and off-chip accumulation, with the affine stage
/// applied once to the accumulated sums.
///
/// Strict accumulation saturates per on-chip block, so multi-block layers
/// may differ from a whole-layer strict reference.
pub fn simulate_layer(
    cfg: &AccelConfig,
    input: &FeatureMap,
    filters: &FilterSet,
    affine: &[ChannelAffine],
    padding: Padding,
    opts: &SimOptions,
) -> Result<LayerRun> {
    if filters.n_in() != input.channels() {
        return Err(Error::dim(format!(
            "filters expect {} input channels, image has {}",
            filters.n_in(),
            input.channels()
        )));
    }
    let k = filters.kernel_size();
    let (ho, wo) = padding.output_size(input.height(), input.width(), k)?;
    let mut sums = ChannelSums::zeros(filters.n_out(), ho, wo);
    let mut report = CycleReport::default();
    let mut plans = Vec::new();

    if cfg.mode(k).is_ok() {
        plans.push(run_blocks(cfg, input, filters, padding, opts, &mut sums, &mut report)?);
    } else {
        let splits: Vec<KernelSplit> = filters.filters().iter().map(split_kernel).collect::<Result<_>>()?;
        let padded = input.zero_padded(padding.halo(k));
        for s in 0..splits[0].subs.len() {
            let (r0, c0, ks) = (splits[0].subs[s].row, splits[0].subs[s].col, splits[0].subs[s].size());
            let window = padded.crop(r0..r0 + ho + ks - 1, c0..c0 + wo + ks - 1);
            let subs = FilterSet::new(
                filters.n_out(),
                filters.n_in(),
                splits.iter().map(|sp| sp.subs[s].filter.clone()).collect(),
            )?;
            plans.push(run_blocks(cfg, &window, &subs, Padding::Valid, opts, &mut sums, &mut report)?);
        }
        if let Some((a, b)) = splits[0].identity {
            for y in 0..ho {
                for x in 0..wo {
                    let id: i64 = (0..padded.channels()).map(|n| padded.at(n, y + a, x + b)).sum();
                    for o in 0..filters.n_out() {
                        let i = sums.index(o, y, x);
                        sums.data[i] -= id;
                    }
                }
            }
        }
    }

    let partials: u64 = plans.iter().map(|p| p.input_blocks.len() as u64).sum();
    let offchip_adds = (partials - 1) * (filters.n_out() * ho * wo) as u64;
    let (output, saturations) = sums.finish(affine)?;
    Ok(LayerRun {
        sums,
        output,
        saturations,
        report,
        plans,
        offchip_adds,
    })
}

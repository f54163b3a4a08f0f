use std::ops::Range;

use serde::Serialize;

use crate::accel::{tile_rows, AccelConfig, SopMode};
use crate::error::Result;
use crate::metrics::LayerSpec;

/// One accelerator pass: an input-channel block, an output-channel block and
/// a tile of output rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockEntry {
    pub inputs: Range<usize>,
    pub outputs: Range<usize>,
    pub rows: Range<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockPlan {
    pub layer: LayerSpec,
    pub input_blocks: Vec<Range<usize>>,
    pub output_blocks: Vec<Range<usize>>,
    pub entries: Vec<BlockEntry>,
    /// Rows loaded twice at every tile boundary.
    pub overlap_rows: usize,
}

impl BlockPlan {
    /// Off-chip additions per output pixel.
    pub fn offchip_adds_per_pixel(&self) -> usize {
        self.input_blocks.len() - 1
    }

    /// Entries of one (input block, output block) pair.
    pub fn tiles(&self, inputs: &Range<usize>, outputs: &Range<usize>) -> impl Iterator<Item = &BlockEntry> {
        let (i, o) = (inputs.clone(), outputs.clone());
        self.entries
            .iter()
            .filter(move |e| e.inputs == i && e.outputs == o)
    }
}

fn chunks(n: usize, size: usize) -> Vec<Range<usize>> {
    (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect()
}

/// Cuts a layer into blocks of at most `n_ch` input channels and the mode's
/// output capacity, each tiled into at most `h_max(block)` output rows.
pub fn plan_blocks(layer: &LayerSpec, cfg: &AccelConfig) -> Result<BlockPlan> {
    layer.validate()?;
    let mode: SopMode = cfg.mode(layer.h_k)?;
    let (ho, _) = layer.output_size()?;
    let input_blocks = chunks(layer.n_in, cfg.n_ch);
    let output_blocks = chunks(layer.n_out, cfg.out_capacity(&mode));
    let mut entries = Vec::new();
    for ib in &input_blocks {
        let h_max = cfg.h_max(ib.len());
        for ob in &output_blocks {
            for rows in tile_rows(ho, h_max) {
                entries.push(BlockEntry {
                    inputs: ib.clone(),
                    outputs: ob.clone(),
                    rows,
                });
            }
        }
    }
    Ok(BlockPlan {
        layer: *layer,
        input_blocks,
        output_blocks,
        entries,
        overlap_rows: layer.h_k - 1,
    })
}

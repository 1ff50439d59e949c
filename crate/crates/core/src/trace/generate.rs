//! Seeded synthetic trace generator.
//!
//! Stands in for instrumentation of a real decoder. Frame 0 and every
//! `gop_length`-th frame after it are all-intra IDR frames. In P frames each
//! macroblock is intra with probability `p_intra_in_p_frame`, otherwise it is
//! motion compensated from the previous frame with i.i.d. uniform vectors.
//!
//! The stream is a pure function of the parameters: randomness comes from
//! `ChaCha8Rng::seed_from_u64(seed)` and draws happen in a fixed order.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::h264::{
    FrameGrid, InterPartition, IntraNeighbor, IntraRefs, MbPos, PartitionShape, Prediction,
};

use super::{FrameHeader, MbRecord, TraceRecord};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid generator parameters: {0}")]
pub struct GenError(pub String);

/// Relative weights of macroblock partitionings.
///
/// `mb_types` weights 16x16, 16x8, 8x16 and 8x8; when 8x8 is chosen, each of
/// the four 8x8 blocks is split according to `sub_types` (8x8, 8x4, 4x8, 4x4).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMix {
    pub mb_types: [f64; 4],
    pub sub_types: [f64; 4],
}

impl Default for PartitionMix {
    fn default() -> Self {
        PartitionMix {
            mb_types: [0.4, 0.15, 0.15, 0.3],
            sub_types: [0.4, 0.2, 0.2, 0.2],
        }
    }
}

const MB_TYPES: [PartitionShape; 4] = [
    PartitionShape::S16x16,
    PartitionShape::S16x8,
    PartitionShape::S8x16,
    PartitionShape::S8x8,
];

const SUB_TYPES: [PartitionShape; 4] = [
    PartitionShape::S8x8,
    PartitionShape::S8x4,
    PartitionShape::S4x8,
    PartitionShape::S4x4,
];

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub frames: u32,
    pub width_mb: u32,
    pub height_mb: u32,
    /// Distance between IDR frames.
    pub gop_length: u32,
    pub p_intra_in_p_frame: f64,
    /// Largest absolute motion vector component, quarter-pel.
    pub mv_range_qpel: u32,
    pub partition_mix: PartitionMix,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            frames: 150,
            width_mb: 40,
            height_mb: 30,
            gop_length: 30,
            p_intra_in_p_frame: 0.1,
            mv_range_qpel: 64,
            partition_mix: PartitionMix::default(),
            seed: 42,
        }
    }
}

fn weights_ok(w: &[f64]) -> bool {
    w.iter().all(|x| x.is_finite() && *x >= 0.0) && w.iter().sum::<f64>() > 0.0
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.frames == 0 {
            return Err(GenError("frames must be at least 1".into()));
        }
        FrameGrid::new(self.width_mb, self.height_mb).map_err(|e| GenError(e.to_string()))?;
        if self.gop_length == 0 {
            return Err(GenError("gop_length must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_intra_in_p_frame) {
            return Err(GenError(format!(
                "p_intra_in_p_frame must be in [0, 1], got {}",
                self.p_intra_in_p_frame
            )));
        }
        if self.mv_range_qpel > i32::MAX as u32 / 2 {
            return Err(GenError("mv_range_qpel is too large".into()));
        }
        if !weights_ok(&self.partition_mix.mb_types) || !weights_ok(&self.partition_mix.sub_types)
        {
            return Err(GenError(
                "partition mix weights must be non-negative with a positive sum".into(),
            ));
        }
        Ok(())
    }

    /// Number of epochs the trace will contain.
    pub fn expected_epochs(&self) -> u32 {
        self.frames.div_ceil(self.gop_length)
    }

    pub fn expected_nodes(&self) -> u64 {
        u64::from(self.frames) * u64::from(self.width_mb) * u64::from(self.height_mb)
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    grid: FrameGrid,
    mb_type: WeightedIndex<f64>,
    sub_type: WeightedIndex<f64>,
    p_intra: f64,
    mv_range: i32,
}

impl Sampler {
    /// Each neighbor that exists in the grid is referenced with probability 1/2.
    fn intra(&mut self, pos: MbPos) -> Prediction {
        let mut refs = IntraRefs::NONE;
        for n in IntraNeighbor::ALL {
            if n.resolve(self.grid, pos).is_some() && self.rng.gen_bool(0.5) {
                refs.insert(n);
            }
        }
        Prediction::Intra(refs)
    }

    fn partition(&mut self, x_off: u32, y_off: u32, shape: PartitionShape) -> InterPartition {
        let r = self.mv_range;
        let mv_qx = self.rng.gen_range(-r..=r);
        let mv_qy = self.rng.gen_range(-r..=r);
        InterPartition::new(x_off, y_off, shape, 1, mv_qx, mv_qy)
    }

    fn inter(&mut self) -> Prediction {
        let shape = MB_TYPES[self.mb_type.sample(&mut self.rng)];
        let mut parts = Vec::new();
        if shape == PartitionShape::S8x8 {
            for (sx, sy) in PartitionShape::S8x8.placements() {
                let sub = SUB_TYPES[self.sub_type.sample(&mut self.rng)];
                for (x, y) in sub.placements().filter(|&(x, y)| x < 8 && y < 8) {
                    parts.push(self.partition(sx + x, sy + y, sub));
                }
            }
        } else {
            for (x, y) in shape.placements() {
                parts.push(self.partition(x, y, shape));
            }
        }
        Prediction::Inter(parts)
    }
}

/// Generates a trace for `params`. Deterministic for a fixed seed.
pub fn generate_trace(params: &GenParams) -> Result<Vec<TraceRecord>, GenError> {
    params.validate()?;
    let grid = FrameGrid::new(params.width_mb, params.height_mb)
        .map_err(|e| GenError(e.to_string()))?;
    let weights = |w: &[f64; 4]| WeightedIndex::new(w).map_err(|e| GenError(e.to_string()));
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        grid,
        mb_type: weights(&params.partition_mix.mb_types)?,
        sub_type: weights(&params.partition_mix.sub_types)?,
        p_intra: params.p_intra_in_p_frame,
        mv_range: params.mv_range_qpel as i32,
    };

    let mut out = Vec::with_capacity(params.frames as usize * (grid.mb_count() + 1));
    for f in 0..params.frames {
        let idr = f % params.gop_length == 0;
        out.push(TraceRecord::FrameStart(FrameHeader {
            frame_idx: u64::from(f),
            idr,
            width_mb: params.width_mb,
            height_mb: params.height_mb,
        }));
        for pos in grid.positions() {
            let prediction = if idr || s.rng.gen_bool(s.p_intra) {
                s.intra(pos)
            } else {
                s.inter()
            };
            out.push(TraceRecord::Mb(MbRecord {
                mb_x: pos.x,
                mb_y: pos.y,
                prediction,
            }));
        }
    }
    Ok(out)
}

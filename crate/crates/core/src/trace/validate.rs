use crate::h264::{validate_partitions, FrameGrid, MbPos, Prediction};

use super::TraceRecord;

pub(crate) enum Violation {
    Schema(String),
    Order(String),
}

/// Structural checks shared by the reader and the writer: IDR first,
/// increasing frame indices, complete frames, scanline order and legal
/// partition tilings.
#[derive(Default)]
pub(crate) struct Validator {
    grid: Option<FrameGrid>,
    frame_idx: u64,
    next_scan: usize,
    started: bool,
}

impl Validator {
    pub(crate) fn check(&mut self, record: &TraceRecord) -> Result<(), Violation> {
        match record {
            TraceRecord::FrameStart(h) => {
                if !self.started && !h.idr {
                    return Err(Violation::Order(
                        "the first frame must be an IDR frame".into(),
                    ));
                }
                if self.started && h.frame_idx <= self.frame_idx {
                    return Err(Violation::Order(format!(
                        "frame index {} does not follow frame {}",
                        h.frame_idx, self.frame_idx
                    )));
                }
                let grid = FrameGrid::new(h.width_mb, h.height_mb)
                    .map_err(|e| Violation::Schema(e.to_string()))?;
                self.finish()?;
                self.grid = Some(grid);
                self.frame_idx = h.frame_idx;
                self.next_scan = 0;
                self.started = true;
                Ok(())
            }
            TraceRecord::Mb(mb) => {
                let grid = self.grid.ok_or_else(|| {
                    Violation::Order("macroblock record before any frame header".into())
                })?;
                let pos = MbPos::new(mb.mb_x, mb.mb_y);
                if self.next_scan == grid.mb_count() {
                    return Err(Violation::Order(format!(
                        "frame {} already has all {} macroblocks, got {pos}",
                        self.frame_idx,
                        grid.mb_count()
                    )));
                }
                let expected = grid.pos_at(self.next_scan);
                if pos != expected {
                    return Err(Violation::Order(format!(
                        "expected macroblock {expected} in scanline order, got {pos}"
                    )));
                }
                if let Prediction::Inter(parts) = &mb.prediction {
                    validate_partitions(parts).map_err(|e| Violation::Schema(e.to_string()))?;
                }
                self.next_scan += 1;
                Ok(())
            }
        }
    }

    /// Checks that the current frame, if any, is complete.
    pub(crate) fn finish(&self) -> Result<(), Violation> {
        match self.grid {
            Some(grid) if self.next_scan != grid.mb_count() => Err(Violation::Order(format!(
                "frame {} has {} of {} macroblocks",
                self.frame_idx,
                self.next_scan,
                grid.mb_count()
            ))),
            _ => Ok(()),
        }
    }
}

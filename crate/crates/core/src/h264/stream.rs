//! Streaming fold from dependency traces to sealed EPGs.
//!
//! Every macroblock becomes a node with unit local impact. An IDR frame
//! closes the current epoch: no later frame can reference anything before
//! it, so the epoch's graph is complete and its impacts can be computed.

use std::borrow::Borrow;

use thiserror::Error;

use super::{validate_partitions, DependencyModel, FrameGrid, MbPos, ModelError, Prediction};
use crate::epg::{EpgBuilder, EpgError, NodeId, SealedEpg};
use crate::impact::{ImpactBackend, ImpactVector};
use crate::report::ImpactRow;
use crate::trace::{FrameHeader, MbRecord, TraceRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("trace must start with an IDR frame")]
    MissingIdr,
    #[error("frame index {got} does not follow frame {prev}")]
    FrameOrder { prev: u64, got: u64 },
    #[error("frame {frame_idx}: expected macroblock {expected}, got {got}")]
    NonScanlineOrder {
        frame_idx: u64,
        expected: MbPos,
        got: MbPos,
    },
    #[error("frame {frame_idx}: macroblock {got} after the frame was complete")]
    FrameOverflow { frame_idx: u64, got: MbPos },
    #[error("frame {frame_idx} ended after {got} of {expected} macroblocks")]
    IncompleteFrame {
        frame_idx: u64,
        got: usize,
        expected: usize,
    },
    #[error("frame {frame_idx}: grid {got} differs from epoch grid {epoch} without an IDR")]
    GridMismatch {
        frame_idx: u64,
        epoch: FrameGrid,
        got: FrameGrid,
    },
    #[error("frame {frame_idx}, macroblock {pos}: reference offset {ref_offset} reaches past the last IDR")]
    RefCrossesIdr {
        frame_idx: u64,
        pos: MbPos,
        ref_offset: u32,
    },
    #[error("frame {frame_idx}, macroblock {pos}: {source}")]
    Model {
        frame_idx: u64,
        pos: MbPos,
        #[source]
        source: ModelError,
    },
    #[error("frame {frame_idx}: {source}")]
    Grid {
        frame_idx: u64,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Graph(#[from] EpgError),
}

/// Provenance of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MbLabel {
    pub frame_idx: u64,
    pub mb_x: u32,
    pub mb_y: u32,
}

/// Impacts of one sealed epoch with per-node macroblock labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub epoch_idx: usize,
    pub labels: Vec<MbLabel>,
    pub impacts: ImpactVector,
}

impl ImpactReport {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, v: NodeId) -> Option<MbLabel> {
        self.labels.get(v.index()).copied()
    }

    pub fn rows(&self) -> impl Iterator<Item = ImpactRow> + '_ {
        self.labels
            .iter()
            .zip(self.impacts.iter())
            .map(move |(l, m_global)| ImpactRow {
                epoch: self.epoch_idx,
                frame: l.frame_idx,
                mb_x: l.mb_x,
                mb_y: l.mb_y,
                m_global,
            })
    }
}

struct OpenEpoch {
    grid: FrameGrid,
    graph: EpgBuilder,
    labels: Vec<MbLabel>,
    /// First node of each frame decoded in this epoch.
    frame_bases: Vec<usize>,
    frame_idx: u64,
    next_scan: usize,
}

impl OpenEpoch {
    fn check_complete(&self) -> Result<(), StreamError> {
        if self.next_scan != self.grid.mb_count() {
            return Err(StreamError::IncompleteFrame {
                frame_idx: self.frame_idx,
                got: self.next_scan,
                expected: self.grid.mb_count(),
            });
        }
        Ok(())
    }
}

/// Incremental trace consumer.
///
/// Feed records with [`push`](Self::push); a finished epoch is returned when
/// the next IDR frame starts, and the last one by [`finish`](Self::finish).
pub struct EpgStream {
    model: DependencyModel,
    backend: ImpactBackend,
    epoch: Option<OpenEpoch>,
    epochs_done: usize,
    last_frame_idx: Option<u64>,
    sources: Vec<usize>,
}

impl EpgStream {
    pub fn new(backend: ImpactBackend) -> Self {
        Self::with_model(DependencyModel::default(), backend)
    }

    pub fn with_model(model: DependencyModel, backend: ImpactBackend) -> Self {
        EpgStream {
            model,
            backend,
            epoch: None,
            epochs_done: 0,
            last_frame_idx: None,
            sources: Vec::new(),
        }
    }

    pub fn push(
        &mut self,
        record: &TraceRecord,
    ) -> Result<Option<(SealedEpg, ImpactReport)>, StreamError> {
        match record {
            TraceRecord::FrameStart(h) => self.start_frame(h),
            TraceRecord::Mb(mb) => self.add_macroblock(mb).map(|()| None),
        }
    }

    /// Seals the final epoch, if any.
    pub fn finish(mut self) -> Result<Option<(SealedEpg, ImpactReport)>, StreamError> {
        match self.epoch.take() {
            Some(e) => {
                e.check_complete()?;
                self.seal(e).map(Some)
            }
            None => Ok(None),
        }
    }

    fn start_frame(
        &mut self,
        h: &FrameHeader,
    ) -> Result<Option<(SealedEpg, ImpactReport)>, StreamError> {
        if let Some(prev) = self.last_frame_idx {
            if h.frame_idx <= prev {
                return Err(StreamError::FrameOrder {
                    prev,
                    got: h.frame_idx,
                });
            }
        }
        let grid = FrameGrid::new(h.width_mb, h.height_mb).map_err(|source| StreamError::Grid {
            frame_idx: h.frame_idx,
            source,
        })?;
        if let Some(e) = &self.epoch {
            e.check_complete()?;
        }
        self.last_frame_idx = Some(h.frame_idx);

        if h.idr {
            let finished = match self.epoch.take() {
                Some(e) => Some(self.seal(e)?),
                None => None,
            };
            self.epoch = Some(OpenEpoch {
                grid,
                graph: EpgBuilder::with_capacity(grid.mb_count()),
                labels: Vec::new(),
                frame_bases: vec![0],
                frame_idx: h.frame_idx,
                next_scan: 0,
            });
            return Ok(finished);
        }

        let e = self.epoch.as_mut().ok_or(StreamError::MissingIdr)?;
        if e.grid != grid {
            return Err(StreamError::GridMismatch {
                frame_idx: h.frame_idx,
                epoch: e.grid,
                got: grid,
            });
        }
        e.frame_bases.push(e.graph.node_count());
        e.frame_idx = h.frame_idx;
        e.next_scan = 0;
        Ok(None)
    }

    fn add_macroblock(&mut self, mb: &MbRecord) -> Result<(), StreamError> {
        let e = self.epoch.as_mut().ok_or(StreamError::MissingIdr)?;
        let pos = MbPos::new(mb.mb_x, mb.mb_y);
        let frame_idx = e.frame_idx;
        if e.next_scan == e.grid.mb_count() {
            return Err(StreamError::FrameOverflow {
                frame_idx,
                got: pos,
            });
        }
        let expected = e.grid.pos_at(e.next_scan);
        if pos != expected {
            return Err(StreamError::NonScanlineOrder {
                frame_idx,
                expected,
                got: pos,
            });
        }

        let model_err = |source| StreamError::Model {
            frame_idx,
            pos,
            source,
        };
        let ordinal = e.frame_bases.len() - 1;
        let current_base = e.frame_bases[ordinal];
        self.sources.clear();
        match &mb.prediction {
            Prediction::Intra(refs) => {
                for n in self.model.intra_edges(e.grid, pos, *refs).map_err(model_err)? {
                    self.sources.push(current_base + e.grid.scan_index(n));
                }
            }
            Prediction::Inter(parts) => {
                validate_partitions(parts).map_err(model_err)?;
                for p in parts {
                    let back = p.ref_offset as usize;
                    if back > ordinal {
                        return Err(StreamError::RefCrossesIdr {
                            frame_idx,
                            pos,
                            ref_offset: p.ref_offset,
                        });
                    }
                    let ref_base = e.frame_bases[ordinal - back];
                    for n in self.model.inter_coverage(e.grid, pos, p).map_err(model_err)? {
                        self.sources.push(ref_base + e.grid.scan_index(n));
                    }
                }
            }
        }

        let node = e.graph.add_node(1.0)?;
        for &src in &self.sources {
            e.graph.add_edge(NodeId::new(src), node)?;
        }
        e.labels.push(MbLabel {
            frame_idx,
            mb_x: pos.x,
            mb_y: pos.y,
        });
        e.next_scan += 1;
        Ok(())
    }

    fn seal(&mut self, mut e: OpenEpoch) -> Result<(SealedEpg, ImpactReport), StreamError> {
        let graph = e.graph.seal()?;
        let impacts = self.backend.compute(&graph);
        let report = ImpactReport {
            epoch_idx: self.epochs_done,
            labels: e.labels,
            impacts,
        };
        self.epochs_done += 1;
        Ok((graph, report))
    }
}

/// Builds and seals one EPG per epoch of `trace`.
pub fn build_epgs<I>(
    trace: I,
    backend: ImpactBackend,
) -> Result<Vec<(SealedEpg, ImpactReport)>, StreamError>
where
    I: IntoIterator,
    I::Item: Borrow<TraceRecord>,
{
    let mut stream = EpgStream::new(backend);
    let mut out = Vec::new();
    for record in trace {
        if let Some(done) = stream.push(record.borrow())? {
            out.push(done);
        }
    }
    out.extend(stream.finish()?);
    Ok(out)
}

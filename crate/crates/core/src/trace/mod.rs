//! Macroblock dependency traces.
//!
//! A trace is a stream of frame headers, each followed by the frame's
//! macroblocks in scanline order. The text encoding is one record per line:
//!
//! ```text
//! epgtrace v1
//! F idx=0 idr=1 w=2 h=1
//! I x=0 y=0 refs=
//! I x=1 y=0 refs=L
//! F idx=1 idr=0 w=2 h=1
//! P x=0 y=0 parts=2
//!   p xo=0 yo=0 w=16 h=8 ref=1 mvx=-3 mvy=0
//!   p xo=0 yo=8 w=16 h=8 ref=1 mvx=4 mvy=8
//! I x=1 y=0 refs=TL,L
//! ```
//!
//! Motion vectors are in quarter-pel units. Unknown keys are rejected.

mod format;
mod generate;
mod validate;

use thiserror::Error;

use crate::h264::Prediction;

pub use format::{parse_trace, parse_trace_str, write_trace, write_trace_string, TraceReader};
pub use generate::{generate_trace, GenError, GenParams, PartitionMix};

/// Version line that opens every non-empty trace.
pub const TRACE_HEADER: &str = "epgtrace v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameHeader {
    pub frame_idx: u64,
    pub idr: bool,
    pub width_mb: u32,
    pub height_mb: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MbRecord {
    pub mb_x: u32,
    pub mb_y: u32,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TraceRecord {
    FrameStart(FrameHeader),
    Mb(MbRecord),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: order violation: {message}")]
    Order { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl TraceError {
    /// 1-based line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            TraceError::Syntax { line, .. }
            | TraceError::Schema { line, .. }
            | TraceError::Order { line, .. } => Some(*line),
            TraceError::Io(_) => None,
        }
    }
}

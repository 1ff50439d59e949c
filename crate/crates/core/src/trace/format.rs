use std::fmt::Write as _;
use std::io::{BufRead, Lines, Write};
use std::str::FromStr;

use crate::h264::{
    InterPartition, IntraNeighbor, IntraRefs, PartitionShape, Prediction, MAX_PARTITIONS,
};

use super::validate::{Validator, Violation};
use super::{FrameHeader, MbRecord, TraceError, TraceRecord, TRACE_HEADER};

const FRAME_KEYS: &[&str] = &["idx", "idr", "w", "h"];
const INTRA_KEYS: &[&str] = &["x", "y", "refs"];
const INTER_KEYS: &[&str] = &["x", "y", "parts"];
const PART_KEYS: &[&str] = &["xo", "yo", "w", "h", "ref", "mvx", "mvy"];

fn syntax(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Syntax {
        line,
        message: message.into(),
    }
}

fn schema(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Schema {
        line,
        message: message.into(),
    }
}

fn located(line: usize, v: Violation) -> TraceError {
    match v {
        Violation::Schema(message) => TraceError::Schema { line, message },
        Violation::Order(message) => TraceError::Order { line, message },
    }
}

/// Splits `key=value` tokens and returns the values in the order of `keys`.
fn fields<'a>(
    line: usize,
    tokens: impl Iterator<Item = &'a str>,
    keys: &[&str],
) -> Result<Vec<&'a str>, TraceError> {
    let mut values: Vec<Option<&str>> = vec![None; keys.len()];
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected key=value, got `{tok}`")))?;
        let slot = keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| schema(line, format!("unknown key `{key}`")))?;
        if values[slot].replace(value).is_some() {
            return Err(schema(line, format!("duplicate key `{key}`")));
        }
    }
    keys.iter()
        .zip(values)
        .map(|(k, v)| v.ok_or_else(|| schema(line, format!("missing key `{k}`"))))
        .collect()
}

fn int<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, TraceError> {
    value
        .parse()
        .map_err(|_| syntax(line, format!("`{key}` is not a valid integer: `{value}`")))
}

fn parse_refs(line: usize, value: &str) -> Result<IntraRefs, TraceError> {
    let mut refs = IntraRefs::NONE;
    if value.is_empty() {
        return Ok(refs);
    }
    for label in value.split(',') {
        let n = IntraNeighbor::from_label(label)
            .ok_or_else(|| schema(line, format!("unknown intra neighbor `{label}`")))?;
        if refs.contains(n) {
            return Err(schema(line, format!("duplicate intra neighbor `{label}`")));
        }
        refs.insert(n);
    }
    Ok(refs)
}

/// Streaming trace parser. Yields validated records; stops after the first
/// error.
pub struct TraceReader<R> {
    lines: Lines<R>,
    line: usize,
    record_line: usize,
    header_seen: bool,
    validator: Validator,
    done: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        TraceReader {
            lines: reader.lines(),
            line: 0,
            record_line: 0,
            header_seen: false,
            validator: Validator::default(),
            done: false,
        }
    }

    /// Number of the last line consumed.
    pub fn line(&self) -> usize {
        self.line
    }

    /// Line on which the last record returned by the iterator starts.
    pub fn record_line(&self) -> usize {
        self.record_line
    }

    /// Next non-blank line with its number.
    fn next_line(&mut self) -> Result<Option<(usize, String)>, TraceError> {
        for l in self.lines.by_ref() {
            self.line += 1;
            let l = l?;
            if !l.trim().is_empty() {
                return Ok(Some((self.line, l)));
            }
        }
        Ok(None)
    }

    fn read_record(&mut self) -> Result<Option<TraceRecord>, TraceError> {
        let Some((line, text)) = self.next_line()? else {
            self.validator.finish().map_err(|v| located(self.line, v))?;
            return Ok(None);
        };
        if !self.header_seen {
            let header = text.trim();
            if header == TRACE_HEADER {
                self.header_seen = true;
                return self.read_record();
            }
            if header.starts_with("epgtrace ") {
                return Err(schema(line, format!("unsupported trace version `{header}`")));
            }
            return Err(syntax(line, format!("expected `{TRACE_HEADER}` header")));
        }

        let mut tokens = text.split_whitespace();
        let record = match tokens.next() {
            Some("F") => {
                let v = fields(line, tokens, FRAME_KEYS)?;
                let idr = match v[1] {
                    "0" => false,
                    "1" => true,
                    other => return Err(schema(line, format!("`idr` must be 0 or 1, got `{other}`"))),
                };
                TraceRecord::FrameStart(FrameHeader {
                    frame_idx: int(line, "idx", v[0])?,
                    idr,
                    width_mb: int(line, "w", v[2])?,
                    height_mb: int(line, "h", v[3])?,
                })
            }
            Some("I") => {
                let v = fields(line, tokens, INTRA_KEYS)?;
                TraceRecord::Mb(MbRecord {
                    mb_x: int(line, "x", v[0])?,
                    mb_y: int(line, "y", v[1])?,
                    prediction: Prediction::Intra(parse_refs(line, v[2])?),
                })
            }
            Some("P") => {
                let v = fields(line, tokens, INTER_KEYS)?;
                let mb_x = int(line, "x", v[0])?;
                let mb_y = int(line, "y", v[1])?;
                let count: usize = int(line, "parts", v[2])?;
                if count == 0 || count > MAX_PARTITIONS {
                    return Err(schema(
                        line,
                        format!("`parts` must be in 1..={MAX_PARTITIONS}, got {count}"),
                    ));
                }
                let mut parts = Vec::with_capacity(count);
                for _ in 0..count {
                    parts.push(self.read_partition(line)?);
                }
                TraceRecord::Mb(MbRecord {
                    mb_x,
                    mb_y,
                    prediction: Prediction::Inter(parts),
                })
            }
            Some("p") => return Err(syntax(line, "partition line outside of a P record")),
            Some(tag) => return Err(syntax(line, format!("unknown record tag `{tag}`"))),
            None => unreachable!("blank lines are skipped"),
        };
        self.validator
            .check(&record)
            .map_err(|v| located(line, v))?;
        self.record_line = line;
        Ok(Some(record))
    }

    fn read_partition(&mut self, record_line: usize) -> Result<InterPartition, TraceError> {
        let Some((line, text)) = self.next_line()? else {
            return Err(syntax(
                record_line,
                "P record ends before all partition lines",
            ));
        };
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some("p") {
            return Err(syntax(line, "expected a partition line `p ...`"));
        }
        let v = fields(line, tokens, PART_KEYS)?;
        let w: u32 = int(line, "w", v[2])?;
        let h: u32 = int(line, "h", v[3])?;
        let shape = PartitionShape::from_dims(w, h)
            .ok_or_else(|| schema(line, format!("illegal partition size {w}x{h}")))?;
        Ok(InterPartition {
            x_off: int(line, "xo", v[0])?,
            y_off: int(line, "yo", v[1])?,
            shape,
            ref_offset: int(line, "ref", v[4])?,
            mv_qx: int(line, "mvx", v[5])?,
            mv_qy: int(line, "mvy", v[6])?,
        })
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Parses and validates a whole trace.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRecord>, TraceError> {
    TraceReader::new(reader).collect()
}

pub fn parse_trace_str(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    parse_trace(text.as_bytes())
}

fn render(record: &TraceRecord, buf: &mut String) -> usize {
    // Writing into a String cannot fail.
    match record {
        TraceRecord::FrameStart(h) => {
            let _ = writeln!(
                buf,
                "F idx={} idr={} w={} h={}",
                h.frame_idx,
                u8::from(h.idr),
                h.width_mb,
                h.height_mb
            );
            1
        }
        TraceRecord::Mb(mb) => match &mb.prediction {
            Prediction::Intra(refs) => {
                let _ = write!(buf, "I x={} y={} refs=", mb.mb_x, mb.mb_y);
                for (i, n) in refs.iter().enumerate() {
                    if i > 0 {
                        buf.push(',');
                    }
                    buf.push_str(n.label());
                }
                buf.push('\n');
                1
            }
            Prediction::Inter(parts) => {
                let _ = writeln!(buf, "P x={} y={} parts={}", mb.mb_x, mb.mb_y, parts.len());
                for p in parts {
                    let _ = writeln!(
                        buf,
                        "  p xo={} yo={} w={} h={} ref={} mvx={} mvy={}",
                        p.x_off,
                        p.y_off,
                        p.shape.width(),
                        p.shape.height(),
                        p.ref_offset,
                        p.mv_qx,
                        p.mv_qy
                    );
                }
                1 + parts.len()
            }
        },
    }
}

/// Writes `records` in the text format after validating them.
///
/// An empty record list produces an empty stream. Error line numbers refer
/// to the output that would have been written.
pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> Result<(), TraceError> {
    if records.is_empty() {
        return Ok(());
    }
    let mut validator = Validator::default();
    let mut buf = String::with_capacity(256);
    writeln!(out, "{TRACE_HEADER}")?;
    let mut line = 1;
    for record in records {
        line += 1;
        validator
            .check(record)
            .map_err(|v| located(line, v))?;
        buf.clear();
        line += render(record, &mut buf) - 1;
        out.write_all(buf.as_bytes())?;
    }
    validator.finish().map_err(|v| located(line, v))?;
    Ok(())
}

pub fn write_trace_string(records: &[TraceRecord]) -> Result<String, TraceError> {
    let mut out = Vec::new();
    write_trace(records, &mut out)?;
    Ok(String::from_utf8(out).expect("trace writer emits ASCII"))
}

//! Impact report tables: `epoch,frame,mb_x,mb_y,m_global`, one row per node.

use std::io::{Read, Write};

use serde::Deserialize;
use thiserror::Error;

pub const REPORT_HEADER: [&str; 5] = ["epoch", "frame", "mb_x", "mb_y", "m_global"];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactRow {
    pub epoch: usize,
    pub frame: u64,
    pub mb_x: u32,
    pub mb_y: u32,
    pub m_global: f64,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unexpected report header `{0}`, expected `epoch,frame,mb_x,mb_y,m_global`")]
    Header(String),
    #[error("report row {row}: m_global must be finite and non-negative, got {value}")]
    Value { row: usize, value: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes rows with a header. Values use the shortest representation that
/// parses back to the same `f64`, so integral impacts print without a
/// fractional part.
pub fn write_report<W: Write, I>(rows: I, out: W) -> Result<(), ReportError>
where
    I: IntoIterator<Item = ImpactRow>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.frame.to_string(),
            r.mb_x.to_string(),
            r.mb_y.to_string(),
            r.m_global.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a report written by [`write_report`]. An empty input is an empty report.
pub fn read_report<R: Read>(input: R) -> Result<Vec<ImpactRow>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header.iter().ne(REPORT_HEADER) {
        return Err(ReportError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for (i, row) in r.deserialize::<ImpactRow>().enumerate() {
        let row = row?;
        if !row.m_global.is_finite() || row.m_global < 0.0 {
            return Err(ReportError::Value {
                row: i + 1,
                value: row.m_global,
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(epoch: usize, frame: u64, m_global: f64) -> ImpactRow {
        ImpactRow {
            epoch,
            frame,
            mb_x: 3,
            mb_y: 1,
            m_global,
        }
    }

    #[test]
    fn writes_integral_values_plainly() {
        let mut out = Vec::new();
        write_report([row(0, 0, 2.0), row(0, 1, 0.1 + 0.2)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "epoch,frame,mb_x,mb_y,m_global\n0,0,3,1,2\n0,1,3,1,0.30000000000000004\n"
        );
        let back = read_report(text.as_bytes()).unwrap();
        assert_eq!(back, vec![row(0, 0, 2.0), row(0, 1, 0.1 + 0.2)]);
    }

    #[test]
    fn empty_inputs() {
        assert!(read_report(&b""[..]).unwrap().is_empty());
        assert!(read_report(&b"epoch,frame,mb_x,mb_y,m_global\n"[..])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn malformed_reports() {
        assert!(matches!(
            read_report(&b"a,b\n1,2\n"[..]),
            Err(ReportError::Header(_))
        ));
        assert!(read_report(&b"epoch,frame,mb_x,mb_y,m_global\n0,0,0,0,abc\n"[..]).is_err());
        assert!(read_report(&b"epoch,frame,mb_x,mb_y,m_global\n0,0,0\n"[..]).is_err());
        assert!(matches!(
            read_report(&b"epoch,frame,mb_x,mb_y,m_global\n0,0,0,0,-1\n"[..]),
            Err(ReportError::Value { row: 1, .. })
        ));
    }
}

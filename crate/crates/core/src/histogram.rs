//! Binning of impact values.
//!
//! Bins partition `[min, max]` of the data: every bin is half-open except the
//! last, which is closed and ends exactly at `max`.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Binning {
    /// Fixed bin width in impact units.
    Width(f64),
    /// Fixed number of equal-width bins.
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YScale {
    #[default]
    Linear,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub binning: Binning,
    pub y_scale: YScale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub low: f64,
    pub high: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HistogramResult {
    pub bins: Vec<Bin>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HistogramError {
    #[error("bin width must be finite and positive, got {0}")]
    BinWidth(f64),
    #[error("bin count must be positive")]
    BinCount,
    #[error("value {0} is not finite")]
    NonFinite(f64),
}

pub fn histogram(values: &[f64], binning: Binning) -> Result<HistogramResult, HistogramError> {
    match binning {
        Binning::Width(w) if !(w.is_finite() && w > 0.0) => {
            return Err(HistogramError::BinWidth(w))
        }
        Binning::Count(0) => return Err(HistogramError::BinCount),
        _ => {}
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(HistogramError::NonFinite(bad));
    }
    if values.is_empty() {
        return Ok(HistogramResult::default());
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (width, n) = match binning {
        Binning::Width(w) => (w, ((max - min) / w).floor() as usize + 1),
        Binning::Count(c) if max > min => ((max - min) / c as f64, c),
        // all values equal: a single closed bin
        Binning::Count(_) => (1.0, 1),
    };
    let low = |i: usize| min + i as f64 * width;

    let mut bins: Vec<Bin> = (0..n)
        .map(|i| Bin {
            low: low(i),
            high: if i + 1 == n { max } else { low(i + 1) },
            count: 0,
        })
        .collect();
    for &x in values {
        let mut i = (((x - min) / width).floor() as usize).min(n - 1);
        // settle rounding at bin edges against the reported bounds
        while i > 0 && x < bins[i].low {
            i -= 1;
        }
        while i + 1 < n && x >= bins[i + 1].low {
            i += 1;
        }
        bins[i].count += 1;
    }
    Ok(HistogramResult { bins })
}

impl HistogramResult {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// `bin_low,bin_high,count` with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_low,bin_high,count")?;
        for b in &self.bins {
            writeln!(out, "{},{},{}", b.low, b.high, b.count)?;
        }
        out.flush()
    }

    /// Bar length in characters for `count`, relative to the largest bin.
    pub fn bar_len(&self, count: u64, scale: YScale, bar_width: usize) -> usize {
        let peak = self.bins.iter().map(|b| b.count).max().unwrap_or(0);
        if count == 0 || peak == 0 {
            return 0;
        }
        let f = |c: u64| match scale {
            YScale::Linear => c as f64,
            YScale::Sqrt => (c as f64).sqrt(),
        };
        ((f(count) / f(peak) * bar_width as f64).round() as usize).max(1)
    }

    /// Text rendering, one bin per line.
    pub fn render_text(&self, scale: YScale, bar_width: usize) -> String {
        let mut s = String::new();
        let scale_name = match scale {
            YScale::Linear => "linear",
            YScale::Sqrt => "sqrt",
        };
        let _ = writeln!(
            s,
            "impact histogram: {} values, {} bins, {scale_name} y-scale",
            self.total(),
            self.bins.len()
        );
        let labels: Vec<String> = self
            .bins
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let close = if i + 1 == self.bins.len() { ']' } else { ')' };
                format!("[{}, {}{close}", b.low, b.high)
            })
            .collect();
        let label_w = labels.iter().map(String::len).max().unwrap_or(0);
        let count_w = self
            .bins
            .iter()
            .map(|b| b.count.to_string().len())
            .max()
            .unwrap_or(0);
        for (label, b) in labels.iter().zip(&self.bins) {
            let _ = writeln!(
                s,
                "{label:<label_w$} {:>count_w$} |{}",
                b.count,
                "#".repeat(self.bar_len(b.count, scale, bar_width))
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_width_bins() {
        let h = histogram(&[1.0, 1.0, 2.0], Binning::Width(1.0)).unwrap();
        assert_eq!(
            h.bins,
            vec![
                Bin {
                    low: 1.0,
                    high: 2.0,
                    count: 2
                },
                Bin {
                    low: 2.0,
                    high: 2.0,
                    count: 1
                },
            ]
        );
        let mut out = Vec::new();
        h.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "bin_low,bin_high,count\n1,2,2\n2,2,1\n"
        );
    }

    #[test]
    fn last_bin_is_truncated_at_max() {
        let h = histogram(&[1.0, 2.5], Binning::Width(1.0)).unwrap();
        assert_eq!(h.bins.len(), 2);
        assert_eq!((h.bins[1].low, h.bins[1].high, h.bins[1].count), (2.0, 2.5, 1));
    }

    #[test]
    fn count_binning() {
        let values: Vec<f64> = (0..100).map(f64::from).collect();
        let h = histogram(&values, Binning::Count(7)).unwrap();
        assert_eq!(h.bins.len(), 7);
        assert_eq!(h.total(), 100);
        assert_eq!(h.bins[6].high, 99.0);
        for b in &h.bins {
            let inside = values
                .iter()
                .filter(|&&x| x >= b.low && (x < b.high || (b.high == 99.0 && x <= b.high)))
                .count() as u64;
            assert_eq!(inside, b.count);
        }
        let flat = histogram(&[3.0, 3.0], Binning::Count(5)).unwrap();
        assert_eq!(flat.bins.len(), 1);
        assert_eq!(flat.bins[0].count, 2);
    }

    #[test]
    fn empty_and_invalid() {
        assert!(histogram(&[], Binning::Width(1.0)).unwrap().bins.is_empty());
        assert_eq!(
            histogram(&[1.0], Binning::Width(0.0)),
            Err(HistogramError::BinWidth(0.0))
        );
        assert_eq!(histogram(&[1.0], Binning::Count(0)), Err(HistogramError::BinCount));
        assert!(histogram(&[f64::NAN], Binning::Width(1.0)).is_err());
    }

    #[test]
    fn sqrt_bars() {
        let mut values = vec![1.0; 100];
        values.push(2.0);
        let h = histogram(&values, Binning::Width(1.0)).unwrap();
        assert_eq!(h.bar_len(100, YScale::Sqrt, 50), 50);
        assert_eq!(h.bar_len(1, YScale::Sqrt, 50), 5);
        assert_eq!(h.bar_len(1, YScale::Linear, 50), 1);
        let text = h.render_text(YScale::Sqrt, 50);
        let bars: Vec<usize> = text
            .lines()
            .skip(1)
            .map(|l| l.split('|').nth(1).unwrap().len())
            .collect();
        assert_eq!(bars, vec![50, 5]);
    }
}

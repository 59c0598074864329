//! File formats for timestamp streams and histograms.
//!
//! Binary stream layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//!      0     8  magic "PHSTAMP1"
//!      8     8  resolution_ps  (picoseconds per tick)
//!     16     8  count
//!     24     8  duration_ps
//!     32  8*n  timestamps in ticks
//! ```
//!
//! The text sibling holds one decimal picosecond timestamp per line.
//! [`read_stream`] accepts either.
//!
//! Histograms are written as CSV with the header `bin_center_ns,counts,g2`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::correlator::{CorrelationHistogram, Estimator};
use crate::error::{Error, Result};
use crate::stream::{Origin, TimestampStream};

pub const STREAM_MAGIC: &[u8; 8] = b"PHSTAMP1";
pub const STREAM_HEADER_LEN: usize = 32;
pub const CSV_HEADER: &str = "bin_center_ns,counts,g2";

/// Header of a binary stream file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimestampFileHeader {
    pub resolution_ps: u64,
    pub count: u64,
    pub duration_ps: u64,
}

impl TimestampFileHeader {
    pub fn to_bytes(&self) -> [u8; STREAM_HEADER_LEN] {
        let mut b = [0u8; STREAM_HEADER_LEN];
        b[..8].copy_from_slice(STREAM_MAGIC);
        b[8..16].copy_from_slice(&self.resolution_ps.to_le_bytes());
        b[16..24].copy_from_slice(&self.count.to_le_bytes());
        b[24..32].copy_from_slice(&self.duration_ps.to_le_bytes());
        b
    }
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8-byte slice"))
}

/// Writes the binary format at 1 ps resolution.
pub fn write_stream(path: impl AsRef<Path>, stream: &TimestampStream) -> Result<()> {
    let header = TimestampFileHeader {
        resolution_ps: 1,
        count: stream.len() as u64,
        duration_ps: stream.duration_ps(),
    };
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&header.to_bytes())?;
    for &t in stream.times() {
        w.write_all(&t.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one decimal timestamp per line.
pub fn write_stream_text(path: impl AsRef<Path>, stream: &TimestampStream) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for &t in stream.times() {
        writeln!(w, "{t}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a detection stream (strictly increasing) in either format.
pub fn read_stream(path: impl AsRef<Path>) -> Result<TimestampStream> {
    read_stream_as(path, Origin::Detection)
}

/// Reads a stream in either format, validating order for `origin`.
pub fn read_stream_as(path: impl AsRef<Path>, origin: Origin) -> Result<TimestampStream> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(STREAM_MAGIC) {
        return parse_binary(&bytes, origin);
    }
    let looks_textual = bytes.iter().all(|b| b.is_ascii_digit() || b.is_ascii_whitespace());
    if looks_textual {
        // Only ASCII, so this cannot fail.
        return parse_text(std::str::from_utf8(&bytes).unwrap(), origin);
    }
    Err(Error::BadMagic {
        path: path.to_path_buf(),
    })
}

fn parse_binary(bytes: &[u8], origin: Origin) -> Result<TimestampStream> {
    if bytes.len() < STREAM_HEADER_LEN {
        return Err(Error::TruncatedHeader {
            expected: STREAM_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let header = TimestampFileHeader {
        resolution_ps: le_u64(&bytes[8..16]),
        count: le_u64(&bytes[16..24]),
        duration_ps: le_u64(&bytes[24..32]),
    };
    if header.resolution_ps == 0 {
        return Err(Error::Config("stream header declares a zero resolution".into()));
    }
    let payload = &bytes[STREAM_HEADER_LEN..];
    let found = (payload.len() / 8) as u64;
    if found < header.count {
        return Err(Error::Truncated {
            expected: header.count,
            found,
        });
    }
    let extra = payload.len() as u64 - header.count * 8;
    if extra > 0 {
        return Err(Error::TrailingBytes {
            count: header.count,
            extra,
        });
    }
    let times = payload
        .chunks_exact(8)
        .enumerate()
        .map(|(i, c)| {
            le_u64(c)
                .checked_mul(header.resolution_ps)
                .ok_or_else(|| Error::Config(format!("timestamp {i} overflows at the declared resolution")))
        })
        .collect::<Result<Vec<u64>>>()?;
    TimestampStream::new(times, origin, header.duration_ps)
}

fn parse_text(text: &str, origin: Origin) -> Result<TimestampStream> {
    let mut times = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let t = line.parse::<u64>().map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("`{line}` is not a picosecond timestamp: {e}"),
        })?;
        times.push(t);
    }
    let duration = times.last().copied().unwrap_or(0);
    TimestampStream::new(times, origin, duration)
}

/// Writes `bin_center_ns,counts,g2`. Centers carry four decimals (0.1 ps),
/// g2 six; the g2 column is empty for an unnormalized histogram.
pub fn write_histogram_csv(hist: &CorrelationHistogram, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, histogram_csv(hist))?;
    Ok(())
}

pub fn histogram_csv(hist: &CorrelationHistogram) -> String {
    let mut out = String::with_capacity(32 * (hist.n_bins() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let values = hist.values();
    for i in 0..hist.n_bins() {
        let center_ns = hist.bin_center_ps(i) / 1000.0;
        let _ = write!(out, "{center_ns:.4},{}", hist.counts()[i]);
        match values {
            Some(v) => {
                let _ = writeln!(out, ",{:.6}", v[i]);
            }
            None => out.push_str(",\n"),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramRow {
    pub bin_center_ns: f64,
    pub counts: u64,
    pub g2: Option<f64>,
}

/// The rows of a histogram CSV.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HistogramTable {
    pub rows: Vec<HistogramRow>,
}

impl HistogramTable {
    /// Bin width and lower edge in ps, from the row centers. Needs two rows
    /// on a uniform grid.
    pub fn axis(&self) -> Result<(u64, i64)> {
        if self.rows.len() < 2 {
            return Err(Error::Config(
                "histogram CSV needs at least two rows to fix the bin width".into(),
            ));
        }
        // Centers are multiples of 0.1 ps.
        let tenths: Vec<i64> = self
            .rows
            .iter()
            .map(|r| (r.bin_center_ns * 1e4).round() as i64)
            .collect();
        let step = tenths[1] - tenths[0];
        if step <= 0 || step % 10 != 0 {
            return Err(Error::Parse {
                line: 3,
                message: "bin centers are not increasing in whole picoseconds".into(),
            });
        }
        for (i, w) in tenths.windows(2).enumerate() {
            if w[1] - w[0] != step {
                return Err(Error::Parse {
                    line: i + 3,
                    message: "bin centers are not uniformly spaced".into(),
                });
            }
        }
        // lower edge = center - width / 2, in tenths of ps
        let edge = tenths[0] - step / 2;
        if edge % 10 != 0 {
            return Err(Error::Parse {
                line: 2,
                message: "first bin does not start on a whole picosecond".into(),
            });
        }
        Ok(((step / 10) as u64, edge / 10))
    }

    /// Rebuilds the raw-count histogram. The g2 column is not carried over.
    pub fn to_histogram(&self, estimator: Estimator) -> Result<CorrelationHistogram> {
        let (bw, t_min) = self.axis()?;
        let t_max = t_min + (bw * self.rows.len() as u64) as i64;
        CorrelationHistogram::from_counts(
            estimator,
            bw,
            t_min,
            t_max,
            self.rows.iter().map(|r| r.counts).collect(),
        )
    }
}

pub fn read_histogram_csv(path: impl AsRef<Path>) -> Result<HistogramTable> {
    parse_histogram_csv(&fs::read_to_string(path)?)
}

pub fn parse_histogram_csv(text: &str) -> Result<HistogramTable> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: i + 1, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let bin_center_ns = fields[0]
            .parse::<f64>()
            .map_err(|e| err(format!("bin_center_ns: {e}")))?;
        let counts = fields[1].parse::<u64>().map_err(|e| err(format!("counts: {e}")))?;
        let g2 = match fields[2] {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|e| err(format!("g2: {e}")))?),
        };
        rows.push(HistogramRow {
            bin_center_ns,
            counts,
            g2,
        });
    }
    Ok(HistogramTable { rows })
}

//! Weight-trajectory traces and their per-iteration histograms.
//!
//! Trace CSV: header `iter,lagrangian,w_0,...,w_{n-1}`, one row per recorded
//! iterate. Histogram CSV: header `iter` followed by the left edge of every
//! bin; bins split `[-2, 2]` evenly, the last one closed, and values outside
//! the range are counted in the nearest end bin.

use std::io::{Read, Write};
use std::path::Path;

use maximin::optimizers::TraceEntry;

use crate::error::{BenchError, Result};

pub const DEFAULT_BINS: usize = 41;
pub const RANGE: (f64, f64) = (-2.0, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub lagrangian: f64,
    pub w: Vec<f64>,
}

impl From<&TraceEntry> for TraceRow {
    fn from(e: &TraceEntry) -> Self {
        TraceRow {
            iter: e.iter,
            lagrangian: e.lagrangian,
            w: e.w.iter().copied().collect(),
        }
    }
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.w.len());
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string(), "lagrangian".to_string()];
    header.extend((0..n).map(|i| format!("w_{i}")));
    wtr.write_record(&header)?;
    for r in rows {
        if r.w.len() != n {
            return Err(BenchError::Trace(format!("row at iteration {} has {} weights, expected {n}", r.iter, r.w.len())));
        }
        let mut rec = vec![r.iter.to_string(), r.lagrangian.to_string()];
        rec.extend(r.w.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trace_file(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace(std::io::BufWriter::new(file), rows)
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || &header[0] != "iter" || &header[1] != "lagrangian" {
        return Err(BenchError::Trace("header must start with iter,lagrangian".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| -> Result<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| BenchError::Trace(format!("row {}: bad number `{}` in column {j}", line + 1, &rec[j])))
        };
        let iter = rec[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| BenchError::Trace(format!("row {}: bad iteration `{}`", line + 1, &rec[0])))?;
        let lagrangian = field(1)?;
        let w = (2..rec.len()).map(field).collect::<Result<Vec<_>>>()?;
        rows.push(TraceRow { iter, lagrangian, w });
    }
    Ok(rows)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| BenchError::Trace(format!("cannot open {}: {e}", path.display())))?;
    read_trace(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` edges from -2 to 2.
    pub edges: Vec<f64>,
    /// `(iteration, counts)` per trace row.
    pub rows: Vec<(usize, Vec<usize>)>,
}

pub fn bin_index(v: f64, bins: usize) -> usize {
    let (lo, hi) = RANGE;
    let t = (v - lo) / (hi - lo) * bins as f64;
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

pub fn trace_histogram(trace: &[TraceRow], bins: usize) -> Result<Histogram> {
    if trace.is_empty() {
        return Err(BenchError::Trace("empty trace".into()));
    }
    if bins == 0 {
        return Err(BenchError::Trace("bin count must be positive".into()));
    }
    let (lo, hi) = RANGE;
    let edges = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
    let mut rows = Vec::with_capacity(trace.len());
    for r in trace {
        let mut counts = vec![0usize; bins];
        for &v in &r.w {
            if v.is_nan() {
                return Err(BenchError::Trace(format!("NaN weight at iteration {}", r.iter)));
            }
            counts[bin_index(v, bins)] += 1;
        }
        rows.push((r.iter, counts));
    }
    Ok(Histogram { edges, rows })
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string()];
        header.extend(self.edges[..self.edges.len() - 1].iter().map(|e| format!("{e:.4}")));
        wtr.write_record(&header)?;
        for (iter, counts) in &self.rows {
            let mut rec = vec![iter.to_string()];
            rec.extend(counts.iter().map(|c| c.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, w: &[f64]) -> TraceRow {
        TraceRow {
            iter,
            lagrangian: 0.5,
            w: w.to_vec(),
        }
    }

    #[test]
    fn bins_cover_range() {
        assert_eq!(bin_index(-2.0, 41), 0);
        assert_eq!(bin_index(-7.0, 41), 0);
        assert_eq!(bin_index(2.0, 41), 40);
        assert_eq!(bin_index(9.0, 41), 40);
        assert_eq!(bin_index(0.0, 41), 20);
        assert_eq!(bin_index(1.0, 4), 3);
        assert_eq!(bin_index(0.999, 4), 2);
    }

    #[test]
    fn histogram_of_signs() {
        let h = trace_histogram(&[row(0, &[1.0, -1.0, 1.0])], 41).unwrap();
        assert_eq!(h.edges.len(), 42);
        let counts = &h.rows[0].1;
        assert_eq!(counts[30], 2);
        assert_eq!(counts[10], 1);
        assert_eq!(counts.iter().sum::<usize>(), 3);
    }

    #[test]
    fn empty_trace_is_error() {
        assert!(trace_histogram(&[], 41).is_err());
        assert!(trace_histogram(&[row(0, &[0.0])], 0).is_err());
        assert!(trace_histogram(&[row(0, &[f64::NAN])], 4).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let rows = vec![row(0, &[0.1, -0.3]), row(5, &[1.0 / 3.0, -1e-300])];
        let mut buf = Vec::new();
        write_trace(&mut buf, &rows).unwrap();
        assert_eq!(read_trace(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn ragged_trace_rejected() {
        let rows = vec![row(0, &[0.1, -0.3]), row(1, &[0.0])];
        assert!(write_trace(Vec::new(), &rows).is_err());
        assert!(read_trace("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_trace("iter,lagrangian,w_0\n1,2,x\n".as_bytes()).is_err());
    }

    #[test]
    fn histogram_csv_layout() {
        let h = trace_histogram(&[row(3, &[-2.0, 2.0])], 2).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,-2.0000,0.0000\n3,1,1\n");
    }
}

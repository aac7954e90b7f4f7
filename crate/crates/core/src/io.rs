//! CSV writers and readers for traces, models, reports and residual logs.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back yields bitwise-identical values.

use std::io::{BufRead, Write};

use crate::engines::TracePoint;
use crate::error::{Result, TopicError};
use crate::evaluation::{CvReport, FoldMetrics, FoldRow};
use crate::scheduler::ResidualSummary;

pub const TRACE_HEADER: &str = "iter,elapsed_s,perplexity";
pub const CV_HEADER: &str = "fold,pred_perplexity,converged_at,train_seconds";
pub const BENCH_HEADER: &str = "engine,K,converged_at,train_seconds,final_perplexity";
pub const RESIDUAL_HEADER: &str = "iter,sum_residual,max_residual,argmax_unit";

fn bad(line: usize, msg: impl Into<String>) -> TopicError {
    TopicError::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| bad(line, format!("cannot parse field {s:?}")))
}

fn opt_field<T: std::str::FromStr>(line: usize, s: &str) -> Result<Option<T>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        field(line, s).map(Some)
    }
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Data lines after a required header, as `(line number, fields)`.
fn csv_rows<R: BufRead>(input: R, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut lines = input.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != header {
        return Err(bad(1, format!("expected header {header:?}, got {first:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push((i + 2, line.split(',').map(str::to_string).collect()));
    }
    Ok(rows)
}

fn expect_fields(line: usize, fields: &[String], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(bad(line, format!("expected {n} fields, got {}", fields.len())));
    }
    Ok(())
}

/// Trace CSV. With `timing` off the elapsed column is written as 0 so that
/// repeated runs produce identical bytes.
pub fn write_trace<W: Write>(mut out: W, trace: &[TracePoint], timing: bool) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for p in trace {
        let elapsed = if timing { p.elapsed_seconds } else { 0.0 };
        writeln!(out, "{},{:.6},{}", p.iteration, elapsed, p.perplexity)?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TracePoint>> {
    csv_rows(input, TRACE_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            expect_fields(line, &f, 3)?;
            Ok(TracePoint {
                iteration: field(line, &f[0])?,
                elapsed_seconds: field(line, &f[1])?,
                perplexity: field(line, &f[2])?,
            })
        })
        .collect()
}

/// Dense row-major matrix with `num_topics` columns, header `id,k1..kK`,
/// 1-based row ids.
pub fn write_matrix<W: Write>(mut out: W, values: &[f64], num_topics: usize) -> std::io::Result<()> {
    let header: Vec<String> = (1..=num_topics).map(|k| format!("k{k}")).collect();
    writeln!(out, "id,{}", header.join(","))?;
    for (i, row) in values.chunks_exact(num_topics).enumerate() {
        write!(out, "{}", i + 1)?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Returns `(num_topics, row-major values)`.
pub fn read_matrix<R: BufRead>(input: R) -> Result<(usize, Vec<f64>)> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 2 || cols[0] != "id" {
        return Err(bad(1, format!("expected header id,k1..kK, got {header:?}")));
    }
    let k = cols.len() - 1;
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != k + 1 {
            return Err(bad(lineno, format!("expected {} fields, got {}", k + 1, f.len())));
        }
        let id: usize = field(lineno, f[0])?;
        if id != values.len() / k + 1 {
            return Err(bad(lineno, format!("row id {id} out of sequence")));
        }
        for v in &f[1..] {
            values.push(field(lineno, v)?);
        }
    }
    Ok((k, values))
}

pub fn write_cv_report<W: Write>(mut out: W, report: &CvReport, timing: bool) -> std::io::Result<()> {
    writeln!(out, "{CV_HEADER}")?;
    let secs = |s: f64| if timing { s } else { 0.0 };
    for row in &report.rows {
        match &row.outcome {
            Ok(m) => writeln!(
                out,
                "{},{},{},{:.6}",
                row.fold_id,
                m.predictive_perplexity,
                fmt_opt(m.converged_at),
                secs(m.train_seconds)
            )?,
            Err(_) => writeln!(out, "{},failed,,", row.fold_id)?,
        }
    }
    let (p, c, t) = (report.predictive_perplexity(), report.converged_at(), report.train_seconds());
    writeln!(out, "mean,{},{},{:.6}", p.mean, c.mean, secs(t.mean))?;
    writeln!(out, "std,{},{},{:.6}", p.std, c.std, secs(t.std))?;
    Ok(())
}

/// Reads the per-fold rows of a CV report; the summary rows are skipped.
pub fn read_cv_rows<R: BufRead>(input: R) -> Result<Vec<FoldRow>> {
    let mut rows = Vec::new();
    for (line, f) in csv_rows(input, CV_HEADER)? {
        expect_fields(line, &f, 4)?;
        if f[0] == "mean" || f[0] == "std" {
            continue;
        }
        let fold_id = field(line, &f[0])?;
        let outcome = if f[1] == "failed" {
            Err("failed".to_string())
        } else {
            Ok(FoldMetrics {
                predictive_perplexity: field(line, &f[1])?,
                converged_at: opt_field(line, &f[2])?,
                train_seconds: field(line, &f[3])?,
                skipped_docs: 0,
            })
        };
        rows.push(FoldRow { fold_id, outcome });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub engine: String,
    pub num_topics: usize,
    pub converged_at: Option<usize>,
    pub train_seconds: f64,
    pub final_perplexity: f64,
}

pub fn write_bench_summary<W: Write>(mut out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{}",
            r.engine,
            r.num_topics,
            fmt_opt(r.converged_at),
            r.train_seconds,
            r.final_perplexity
        )?;
    }
    Ok(())
}

pub fn read_bench_summary<R: BufRead>(input: R) -> Result<Vec<BenchRow>> {
    csv_rows(input, BENCH_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            expect_fields(line, &f, 5)?;
            Ok(BenchRow {
                engine: f[0].clone(),
                num_topics: field(line, &f[1])?,
                converged_at: opt_field(line, &f[2])?,
                train_seconds: field(line, &f[3])?,
                final_perplexity: field(line, &f[4])?,
            })
        })
        .collect()
}

/// Residual log; `argmax_unit` is written 1-based.
pub fn write_residuals<W: Write>(mut out: W, rows: &[(usize, ResidualSummary)]) -> std::io::Result<()> {
    writeln!(out, "{RESIDUAL_HEADER}")?;
    for (iter, s) in rows {
        writeln!(out, "{},{},{},{}", iter, s.sum, s.max, s.argmax + 1)?;
    }
    Ok(())
}

pub fn read_residuals<R: BufRead>(input: R) -> Result<Vec<(usize, ResidualSummary)>> {
    csv_rows(input, RESIDUAL_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            expect_fields(line, &f, 4)?;
            let unit: usize = field(line, &f[3])?;
            if unit == 0 {
                return Err(bad(line, "unit ids are 1-based"));
            }
            Ok((
                field(line, &f[0])?,
                ResidualSummary {
                    sum: field(line, &f[1])?,
                    max: field(line, &f[2])?,
                    argmax: unit - 1,
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::EngineKind;
    use std::io::Cursor;

    #[test]
    fn trace_round_trip() {
        let trace = vec![
            TracePoint { iteration: 1, elapsed_seconds: 0.5, perplexity: 1234.5678901234567 },
            TracePoint { iteration: 2, elapsed_seconds: 1.25, perplexity: 1000.1 },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace, true).unwrap();
        assert!(buf.starts_with(b"iter,elapsed_s,perplexity\n1,0.500000,1234.5678901234567\n"));
        assert_eq!(read_trace(Cursor::new(buf)).unwrap(), trace);
    }

    #[test]
    fn trace_without_timing() {
        let trace = vec![TracePoint { iteration: 3, elapsed_seconds: 9.9, perplexity: 2.0 }];
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace, false).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,elapsed_s,perplexity\n3,0.000000,2\n");
    }

    #[test]
    fn matrix_round_trip() {
        let values = vec![0.25, 0.75, 0.1, 0.9, 1.0 / 3.0, 2.0 / 3.0];
        let mut buf = Vec::new();
        write_matrix(&mut buf, &values, 2).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("id,k1,k2\n1,0.25,0.75\n"));
        assert_eq!(read_matrix(Cursor::new(buf)).unwrap(), (2, values));
    }

    #[test]
    fn matrix_rejects_bad_rows() {
        assert!(read_matrix(Cursor::new("id,k1\n1,0.5\n3,0.5\n")).is_err());
        assert!(read_matrix(Cursor::new("x,k1\n")).is_err());
        assert!(read_matrix(Cursor::new("id,k1,k2\n1,0.5\n")).is_err());
    }

    #[test]
    fn cv_round_trip() {
        let report = CvReport {
            engine: EngineKind::Rbp,
            rows: vec![
                FoldRow {
                    fold_id: 1,
                    outcome: Ok(FoldMetrics {
                        predictive_perplexity: 812.5,
                        converged_at: Some(40),
                        train_seconds: 0.125,
                        skipped_docs: 0,
                    }),
                },
                FoldRow { fold_id: 2, outcome: Err("boom".into()) },
                FoldRow {
                    fold_id: 3,
                    outcome: Ok(FoldMetrics {
                        predictive_perplexity: 790.0,
                        converged_at: None,
                        train_seconds: 0.5,
                        skipped_docs: 0,
                    }),
                },
            ],
        };
        let mut buf = Vec::new();
        write_cv_report(&mut buf, &report, true).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("2,failed,,\n"));
        assert!(text.contains("\nmean,801.25,40,"));
        let rows = read_cv_rows(Cursor::new(buf)).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0], report.rows[0]);
        assert!(rows[1].outcome.is_err());
        assert_eq!(rows[2], report.rows[2]);
    }

    #[test]
    fn bench_round_trip() {
        let rows = vec![
            BenchRow {
                engine: "rbp".into(),
                num_topics: 10,
                converged_at: Some(57),
                train_seconds: 1.5,
                final_perplexity: 345.678,
            },
            BenchRow {
                engine: "gs".into(),
                num_topics: 20,
                converged_at: None,
                train_seconds: 0.0,
                final_perplexity: 400.0,
            },
        ];
        let mut buf = Vec::new();
        write_bench_summary(&mut buf, &rows).unwrap();
        assert_eq!(read_bench_summary(Cursor::new(buf)).unwrap(), rows);
    }

    #[test]
    fn residual_round_trip() {
        let rows = vec![(1, ResidualSummary { sum: 12.5, max: 3.25, argmax: 4 })];
        let mut buf = Vec::new();
        write_residuals(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).ends_with("1,12.5,3.25,5\n"));
        assert_eq!(read_residuals(Cursor::new(buf)).unwrap(), rows);
    }

    #[test]
    fn wrong_header() {
        assert!(read_trace(Cursor::new("iteration,perplexity\n")).is_err());
    }
}

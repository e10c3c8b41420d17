//! Trace CSV: header `k,t,theta,dnorm,gap,F_1..F_m,x_1..x_n`, one row per
//! record. Floats carry 17 significant digits so values round-trip exactly;
//! `t` is empty on the terminal row.

use std::io::{Read, Write};

use crate::analysis::Verdict;
use crate::driver::SolveTrace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_header(m: usize, n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["k", "t", "theta", "dnorm", "gap"]
        .map(String::from)
        .to_vec();
    h.extend((1..=m).map(|i| format!("F_{i}")));
    h.extend((1..=n).map(|j| format!("x_{j}")));
    h
}

pub fn write_trace_csv<T: Scalar, W: Write>(trace: &SolveTrace<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (m, n) = trace
        .records
        .first()
        .map_or((0, 0), |r| (r.f.len(), r.x.len()));
    w.write_record(trace_header(m, n)).map_err(io_err)?;
    for r in &trace.records {
        let mut row = vec![
            r.k.to_string(),
            r.t.map_or_else(String::new, |t| fmt(t.as_f64())),
            fmt(r.theta.as_f64()),
            fmt(r.dnorm.as_f64()),
            fmt(r.gap.as_f64()),
        ];
        row.extend(r.f.iter().map(|v| fmt(v.as_f64())));
        row.extend(r.x.iter().map(|v| fmt(v.as_f64())));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub t: Option<f64>,
    pub theta: f64,
    pub dnorm: f64,
    pub gap: f64,
    pub f: Vec<f64>,
    pub x: Vec<f64>,
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(io_err)?.clone();
    let m = header.iter().filter(|h| h.starts_with("F_")).count();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    if header.len() != 5 + m + n
        || header
            .iter()
            .take(5)
            .ne(["k", "t", "theta", "dnorm", "gap"])
    {
        return Err(Error::Io("unexpected trace header".into()));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Io(format!("bad number {s:?}: {e}")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(io_err)?;
        let fields: Vec<&str> = rec.iter().collect();
        rows.push(TraceRow {
            k: fields[0].parse().map_err(io_err)?,
            t: if fields[1].is_empty() {
                None
            } else {
                Some(num(fields[1])?)
            },
            theta: num(fields[2])?,
            dnorm: num(fields[3])?,
            gap: num(fields[4])?,
            f: fields[5..5 + m]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_>>()?,
            x: fields[5 + m..]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_>>()?,
        });
    }
    Ok(rows)
}

/// Offline re-check of `F_i(x^{k+1}) − F_i(x^k) ≤ t_k σ θ^k` from CSV rows.
pub fn check_sufficient_decrease_rows(rows: &[TraceRow], sigma: f64) -> Verdict {
    let mut margin = f64::INFINITY;
    let mut steps = 0;
    for w in rows.windows(2) {
        let Some(t) = w[0].t else { continue };
        steps += 1;
        let bound = t * sigma * w[0].theta;
        for (a, b) in w[1].f.iter().zip(&w[0].f) {
            margin = margin.min(bound - (a - b));
        }
    }
    Verdict::new(
        "sufficient_decrease_csv",
        margin >= 0.0,
        margin,
        format!("{steps} steps re-read from CSV"),
    )
}

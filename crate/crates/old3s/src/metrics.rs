//! Per-round metrics CSV: `t,phase,correct,loss,oca,p,alpha_1,...,alpha_L`.
//!
//! `p` is empty outside the ensemble phases. Floats are written in their
//! shortest round-trip form, so the bytes depend only on the values.

use std::io::{Read, Write};
use std::path::Path;

use old3s_core::eval::{MetricsLog, MetricsRow};
use old3s_core::stream::Phase;

use crate::error::{CliError, CliResult};

pub fn header(depth: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "phase", "correct", "loss", "oca", "p"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=depth).map(|l| format!("alpha_{l}")));
    h
}

pub fn write_metrics<W: Write>(writer: W, log: &MetricsLog) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(log.depth))?;
    for r in &log.rows {
        let mut rec = vec![
            r.t.to_string(),
            r.phase.tag().to_string(),
            u8::from(r.correct).to_string(),
            r.loss.to_string(),
            r.oca.to_string(),
            r.p.map(|p| p.to_string()).unwrap_or_default(),
        ];
        rec.extend(r.alphas.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_metrics(path: &Path, log: &MetricsLog) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_metrics(std::io::BufWriter::new(file), log).map_err(|e| CliError::io(path, e))
}

/// Parses a metrics CSV back into a log; the run identity is not stored in the
/// file and has to be supplied.
pub fn read_metrics<R: Read>(reader: R, variant: &str, seed: u64, window: usize, origin: &Path) -> CliResult<MetricsLog> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::io(origin, e))?.clone();
    let depth = headers.len().saturating_sub(6);
    if depth == 0 || headers.iter().collect::<Vec<_>>() != header(depth) {
        return Err(CliError::io(origin, "not a metrics CSV header"));
    }
    let bad = |line: usize, what: &str| CliError::io(origin, format!("line {line}: bad {what}"));
    let num = |s: &str, line: usize, what: &str| s.parse::<f64>().map_err(|_| bad(line, what));
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::io(origin, e))?;
        let correct = match &rec[2] {
            "0" => false,
            "1" => true,
            _ => return Err(bad(line, "correct flag")),
        };
        rows.push(MetricsRow {
            t: rec[0].parse().map_err(|_| bad(line, "round"))?,
            phase: Phase::from_tag(&rec[1]).ok_or_else(|| bad(line, "phase"))?,
            correct,
            loss: num(&rec[3], line, "loss")?,
            oca: num(&rec[4], line, "oca")?,
            p: if rec[5].is_empty() { None } else { Some(num(&rec[5], line, "p")?) },
            alphas: (6..rec.len()).map(|j| num(&rec[j], line, "alpha")).collect::<CliResult<_>>()?,
        });
    }
    Ok(MetricsLog {
        variant: variant.to_string(),
        seed,
        window,
        depth,
        rows,
    })
}

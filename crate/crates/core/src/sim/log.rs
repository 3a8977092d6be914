//! CSV serialization of simulation logs.
//!
//! Header: `t,x1..xn,xd1..xdn,e1..en,s1..sn,tau1..taum,V,That`; every value
//! is written with 15 significant digits; records end in `\n`.

use std::io::{Read, Write};
use std::path::Path;

use crate::sim::run::LogRow;
use crate::{Error, Result};

pub fn header(n: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for prefix in ["x", "xd", "e", "s"] {
        cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    cols.extend((1..=m).map(|i| format!("tau{i}")));
    cols.push("V".into());
    cols.push("That".into());
    cols
}

fn fmt(v: f64) -> String {
    format!("{v:.14e}")
}

pub fn write_csv<W: Write>(rows: &[LogRow], n: usize, m: usize, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header(n, m)).map_err(io)?;
    for r in rows {
        let mut rec = Vec::with_capacity(4 * n + m + 3);
        rec.push(fmt(r.t));
        for block in [&r.x, &r.xd, &r.e, &r.s] {
            rec.extend(block.iter().map(|v| fmt(*v)));
        }
        rec.extend(r.tau.iter().map(|v| fmt(*v)));
        rec.push(fmt(r.v));
        rec.push(fmt(r.t_hat));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[LogRow], n: usize, m: usize, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(rows, n, m, std::io::BufWriter::new(file))
}

/// A log read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvLog {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<LogRow>,
}

/// Infers `n` and `m` from the header and rejects anything else.
fn parse_header(cols: &[String]) -> Result<(usize, usize)> {
    let n = cols.iter().filter(|c| c.starts_with("xd")).count();
    let m = cols.iter().filter(|c| c.starts_with("tau")).count();
    if n == 0 || m == 0 || header(n, m) != cols {
        return Err(Error::Schema(format!("unexpected header: {}", cols.join(","))));
    }
    Ok((n, m))
}

pub fn read_csv<R: Read>(input: R) -> Result<CsvLog> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let cols: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if cols.is_empty() || (cols.len() == 1 && cols[0].is_empty()) {
        return Err(Error::Schema("empty log".into()));
    }
    let (n, m) = parse_header(&cols)?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Schema(format!("row {}: {e}", line + 2)))?;
        if vals.len() != cols.len() {
            return Err(Error::Schema(format!("row {} has {} fields", line + 2, vals.len())));
        }
        let block = |k: usize| vals[1 + k * n..1 + (k + 1) * n].to_vec();
        rows.push(LogRow {
            t: vals[0],
            x: block(0),
            xd: block(1),
            e: block(2),
            s: block(3),
            tau: vals[1 + 4 * n..1 + 4 * n + m].to_vec(),
            v: vals[1 + 4 * n + m],
            t_hat: vals[2 + 4 * n + m],
        });
    }
    if rows.is_empty() {
        return Err(Error::Schema("log has a header but no rows".into()));
    }
    Ok(CsvLog { n, m, rows })
}

pub fn read_csv_file(path: &Path) -> Result<CsvLog> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(file))
}

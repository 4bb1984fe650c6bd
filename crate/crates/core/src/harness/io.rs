//! CSV and line-stream plumbing.
//!
//! P-value files use the header `index,pvalue[,label]`; labels are `1`/`0`
//! (or `true`/`false`) with 1 marking an alternative. Floats are written in
//! shortest round-trip form.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{FdpError, Result};
use crate::topk::PValueBatch;

fn parse_err(line: u64, message: impl Into<String>) -> FdpError {
    FdpError::Parse { line: line as usize, message: message.into() }
}

fn csv_err(e: csv::Error) -> FdpError {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, e.to_string())
}

fn parse_pvalue(text: &str, line: u64) -> Result<f64> {
    let p: f64 = text.trim().parse().map_err(|_| parse_err(line, format!("invalid p-value {text:?}")))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(parse_err(line, format!("p-value {p} outside [0,1]")));
    }
    Ok(p)
}

fn parse_label(text: &str, line: u64) -> Result<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(parse_err(line, format!("invalid label {other:?}"))),
    }
}

/// Reads an `index,pvalue[,label]` CSV from any reader.
pub fn read_pvalues_csv<R: Read>(reader: R) -> Result<PValueBatch> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let labelled = match names.as_slice() {
        ["index", "pvalue"] => false,
        ["index", "pvalue", "label"] => true,
        _ => return Err(parse_err(1, format!("expected header index,pvalue[,label], got {}", names.join(",")))),
    };
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        rec[0].parse::<usize>().map_err(|_| parse_err(line, format!("invalid index {:?}", &rec[0])))?;
        values.push(parse_pvalue(&rec[1], line)?);
        if labelled {
            labels.push(parse_label(&rec[2], line)?);
        }
    }
    PValueBatch::new(values, labelled.then_some(labels))
}

/// Loads a p-value CSV file.
pub fn load_pvalues_csv(path: impl AsRef<Path>) -> Result<PValueBatch> {
    read_pvalues_csv(File::open(path)?)
}

/// Writes a batch in the format read by [`read_pvalues_csv`].
pub fn write_batch_csv<W: Write>(batch: &PValueBatch, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let labels = batch.labels();
    let header: &[&str] = if labels.is_some() { &["index", "pvalue", "label"] } else { &["index", "pvalue"] };
    w.write_record(header).map_err(csv_err)?;
    for (i, p) in batch.values().iter().enumerate() {
        let (idx, pv) = (i.to_string(), p.to_string());
        match labels {
            Some(l) => w.write_record([idx.as_str(), pv.as_str(), if l[i] { "1" } else { "0" }]),
            None => w.write_record([idx.as_str(), pv.as_str()]),
        }
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes rows as CSV with a header taken from the field names.
pub fn emit_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one p-value per line; blank lines are skipped.
pub fn read_pvalue_stream<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_pvalue(&line, i as u64 + 1)?);
    }
    Ok(out)
}

/// [`read_pvalue_stream`] on a file.
pub fn load_pvalue_stream(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_pvalue_stream(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_labels() {
        let batch = PValueBatch::new(vec![0.1, 1e-300, 0.30000000000000004, 1.0], Some(vec![true, false, true, false]))
            .unwrap();
        let mut buf = Vec::new();
        write_batch_csv(&batch, &mut buf).unwrap();
        let back = read_pvalues_csv(buf.as_slice()).unwrap();
        assert_eq!(back, batch);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "index,pvalue\n0,0.5\n1,1.5\n";
        match read_pvalues_csv(bad.as_bytes()) {
            Err(FdpError::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_pvalues_csv("idx,p\n".as_bytes()), Err(FdpError::Parse { line: 1, .. })));
        assert!(matches!(read_pvalues_csv("index,pvalue,label\n0,0.2,maybe\n".as_bytes()), Err(FdpError::Parse { line: 2, .. })));
    }

    #[test]
    fn stream_lines() {
        let v = read_pvalue_stream("0.1\n\n0.2\n".as_bytes()).unwrap();
        assert_eq!(v, vec![0.1, 0.2]);
        assert!(matches!(read_pvalue_stream("0.1\nx\n".as_bytes()), Err(FdpError::Parse { line: 2, .. })));
    }
}

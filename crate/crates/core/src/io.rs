//! Serialization of lattices, series, observables and reports.
//!
//! Every float written by this module is rounded to 12 significant digits and
//! then printed in its shortest round-trip form, so output is stable across
//! platforms and a document read back and rewritten is byte-identical.

use std::io::{BufRead, BufReader, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evolution::ProbabilitySeries;
use crate::lattice::{Lattice, LatticeKind, Site};
use crate::observables::ObservableTable;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits. Non-finite values pass through.
pub fn round_significant(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .unwrap_or(v)
}

/// Text form of a float under the 12-digit convention (`1.0`, `0.25`, `1e-20`).
pub fn format_float(v: f64) -> String {
    match serde_json::Number::from_f64(round_significant(v)) {
        Some(n) => n.to_string(),
        None => v.to_string(),
    }
}

fn round_value(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .and_then(|f| serde_json::Number::from_f64(round_significant(f)))
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Writes `value` as JSON with every float rounded, followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W, pretty: bool) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    if pretty {
        serde_json::to_writer_pretty(&mut out, &v)?;
    } else {
        serde_json::to_writer(&mut out, &v)?;
    }
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn to_json_string<T: Serialize>(value: &T, pretty: bool) -> Result<String> {
    let mut buf = Vec::new();
    write_json(value, &mut buf, pretty)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn read_json<T: DeserializeOwned, R: Read>(input: R) -> Result<T> {
    serde_json::from_reader(BufReader::new(input)).map_err(|e| Error::Malformed(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct LatticeDocument {
    kind: LatticeKind,
    generation: u32,
    spacing: f64,
    sites: Vec<Site>,
    edges: Vec<[usize; 2]>,
}

pub fn write_lattice<W: Write>(lattice: &Lattice, out: W) -> Result<()> {
    let doc = LatticeDocument {
        kind: lattice.kind(),
        generation: lattice.generation(),
        spacing: lattice.spacing(),
        sites: lattice.sites().to_vec(),
        edges: lattice.edges().iter().map(|&(a, b)| [a, b]).collect(),
    };
    write_json(&doc, out, false)
}

/// Reads a lattice document, checking ids, spacing and the edge rule.
pub fn read_lattice<R: Read>(input: R) -> Result<Lattice> {
    let doc: LatticeDocument = read_json(input)?;
    Lattice::from_parts(
        doc.kind,
        doc.generation,
        doc.spacing,
        doc.sites,
        doc.edges.into_iter().map(|[a, b]| (a, b)).collect(),
    )
}

pub fn write_series<W: Write>(series: &ProbabilitySeries, out: W) -> Result<()> {
    write_json(series, out, false)
}

/// Reads a series document and checks that it is rectangular.
pub fn read_series<R: Read>(input: R) -> Result<ProbabilitySeries> {
    let series: ProbabilitySeries = read_json(input)?;
    if series.probabilities.len() != series.times.len() {
        return Err(Error::Shape(format!(
            "{} probability rows for {} times",
            series.probabilities.len(),
            series.times.len()
        )));
    }
    let n = series.n_sites();
    if let Some(i) = series.probabilities.iter().position(|row| row.len() != n) {
        return Err(Error::Shape(format!("row {i} is ragged")));
    }
    if series.input_site >= n {
        return Err(Error::bounds(
            "input site",
            series.input_site,
            format!("0..{n}"),
        ));
    }
    Ok(series)
}

/// Compact dump: row and column counts as little-endian `u64`, then the
/// probabilities as little-endian `f64` in row-major order.
pub fn write_series_binary<W: Write>(series: &ProbabilitySeries, mut out: W) -> Result<()> {
    out.write_all(&(series.n_times() as u64).to_le_bytes())?;
    out.write_all(&(series.n_sites() as u64).to_le_bytes())?;
    for row in &series.probabilities {
        for p in row {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_series_binary<R: Read>(mut input: R) -> Result<Vec<Vec<f64>>> {
    let mut word = [0u8; 8];
    let mut dims = [0usize; 2];
    for d in &mut dims {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::Malformed("truncated binary header".into()))?;
        *d = usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| Error::Malformed("binary dimension overflows".into()))?;
    }
    let [rows, cols] = dims;
    let mut data = Vec::with_capacity(rows.min(1 << 20));
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols.min(1 << 20));
        for _ in 0..cols {
            input
                .read_exact(&mut word)
                .map_err(|_| Error::Malformed("truncated binary payload".into()))?;
            row.push(f64::from_le_bytes(word));
        }
        data.push(row);
    }
    if input.read(&mut word)? != 0 {
        return Err(Error::Malformed(
            "trailing bytes after binary payload".into(),
        ));
    }
    Ok(data)
}

pub const CSV_HEADER: &str = "tau,variance,return_prob,polya";

pub fn write_observables_csv<W: Write>(table: &ObservableTable, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for i in 0..table.len() {
        writeln!(
            out,
            "{},{},{},{}",
            format_float(table.times[i]),
            format_float(table.variance[i]),
            format_float(table.return_prob[i]),
            format_float(table.polya[i])
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_observables_csv<R: Read>(input: R) -> Result<ObservableTable> {
    let mut lines = BufReader::new(input).lines();
    match lines.next().transpose()? {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Malformed(format!("unexpected CSV header {other:?}"))),
    }
    let mut table = ObservableTable {
        times: vec![],
        variance: vec![],
        return_prob: vec![],
        polya: vec![],
    };
    for (n, line) in lines.enumerate() {
        let line = line?;
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Malformed(format!("CSV row {}: {e}", n + 1)))?;
        let [t, v, r, p] = fields[..] else {
            return Err(Error::Shape(format!(
                "CSV row {} has {} fields",
                n + 1,
                fields.len()
            )));
        };
        table.times.push(t);
        table.variance.push(v);
        table.return_prob.push(r);
        table.polya.push(p);
    }
    Ok(table)
}

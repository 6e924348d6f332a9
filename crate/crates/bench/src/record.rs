//! One CSV row per experiment cell.
//!
//! Columns, in order: `dataset, method, operator, m, seed, lambda, metric,
//! value, approx_error, reduce_time_ms, opt_time_ms, status`. Missing values
//! (operator and m of a Full row, approx_error of non-NOR rows, the value of
//! a failed row) are empty fields. `status` is `ok` or `failed: <reason>`.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub method: String,
    pub operator: Option<String>,
    pub m: Option<usize>,
    pub seed: u64,
    pub lambda: f64,
    pub metric: String,
    pub value: Option<f64>,
    pub approx_error: Option<f64>,
    pub reduce_time_ms: f64,
    pub opt_time_ms: f64,
    pub status: String,
}

pub const STATUS_OK: &str = "ok";

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

pub fn write_csv<W: Write>(out: W, records: &[ResultRecord], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends to `path`, writing the header only when the file is new or empty.
pub fn append_csv(path: impl AsRef<Path>, records: &[ResultRecord]) -> Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let header = file.metadata()?.len() == 0;
    write_csv(&mut file, records, header)?;
    file.flush()?;
    Ok(())
}

/// Reads records in file order.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    read_csv(std::fs::File::open(path)?)
}

pub fn to_csv_string(records: &[ResultRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records, true)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

//! Result tables and their CSV / JSON-lines encodings.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::BenchError;

/// First-line marker of the header written before the CSV body.
pub const HEADER_PREFIX: &str = "# multiphase-bench";

/// One computed quantity at one sweep point, with the closed interval it
/// must fall in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub config_hash: String,
    /// `key=value` pairs joined by `;`, empty when there is no sweep.
    pub sweep: String,
    pub quantity: String,
    pub value: f64,
    pub tol_lo: f64,
    pub tol_hi: f64,
    /// How the value was obtained: `closed-form`, `numeric` or `simulation`.
    pub provenance: String,
}

impl Row {
    pub fn within_band(&self) -> bool {
        self.tol_lo <= self.value && self.value <= self.tol_hi
    }

    pub fn key(&self) -> (String, String) {
        (self.sweep.clone(), self.quantity.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub scenario: String,
    pub config_hash: String,
    pub rows: Vec<Row>,
}

/// Builds `key=value;key=value` sweep labels.
pub fn sweep_label(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

impl ResultTable {
    pub fn new(scenario: &str, config_hash: &str) -> Self {
        Self { scenario: scenario.to_string(), config_hash: config_hash.to_string(), rows: Vec::new() }
    }

    /// Appends a row whose band is `[lo, hi]`.
    pub fn push(&mut self, sweep: &str, quantity: &str, value: f64, lo: f64, hi: f64, provenance: &str) {
        self.rows.push(Row {
            scenario: self.scenario.clone(),
            config_hash: self.config_hash.clone(),
            sweep: sweep.to_string(),
            quantity: quantity.to_string(),
            value,
            tol_lo: lo,
            tol_hi: hi,
            provenance: provenance.to_string(),
        });
    }

    /// Appends a row whose band is `target ± tol`.
    pub fn push_near(&mut self, sweep: &str, quantity: &str, value: f64, target: f64, tol: f64, provenance: &str) {
        self.push(sweep, quantity, value, target - tol, target + tol, provenance);
    }

    /// Rows whose value lies outside their own band.
    pub fn violations(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| !r.within_band()).collect()
    }

    fn header_line(&self) -> String {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        format!("{HEADER_PREFIX} generated_unix={stamp} scenario={} config_hash={}", self.scenario, self.config_hash)
    }

    /// Timestamped header line followed by the data.
    pub fn write<W: Write>(&self, out: W, format: Format) -> Result<(), BenchError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Jsonl => self.write_jsonl(out),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), BenchError> {
        writeln!(out, "{}", self.header_line())?;
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), BenchError> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let header = serde_json::json!({
            "generated_unix": stamp,
            "scenario": self.scenario,
            "config_hash": self.config_hash,
        });
        writeln!(out, "{header}")?;
        for row in &self.rows {
            writeln!(out, "{}", serde_json::to_string(row)?)?;
        }
        Ok(())
    }

    /// Reads a table written by [`ResultTable::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self, BenchError> {
        let body = match text.strip_prefix(HEADER_PREFIX) {
            Some(rest) => rest.split_once('\n').map(|x| x.1).unwrap_or(""),
            None => text,
        };
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let rows: Vec<Row> = r.deserialize().collect::<Result<_, _>>()?;
        let (scenario, config_hash) =
            rows.first().map(|r| (r.scenario.clone(), r.config_hash.clone())).unwrap_or_default();
        Ok(Self { scenario, config_hash, rows })
    }
}

/// Drops the header line so two outputs can be compared byte for byte.
pub fn data_lines(text: &str) -> &str {
    match text.split_once('\n') {
        Some((first, rest)) if first.starts_with(HEADER_PREFIX) || first.contains("generated_unix") => rest,
        _ => text,
    }
}

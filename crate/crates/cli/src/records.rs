//! Flat result records and their CSV / JSON writers.

use std::io::Write;

use islands_core::sampler::fmt_f64;
use islands_core::LengthLaw;
use serde::Serialize;

use crate::config::Format;
use crate::CliError;

/// CSV header; JSON objects use the same keys.
pub const COLUMNS: [&str; 10] = [
    "quantity", "kappa", "alpha", "lengths", "x", "y", "G", "n", "value", "stderr",
];

/// One computed value with the parameters it depends on. Fields that do not
/// apply are left empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Record {
    pub quantity: String,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub lengths: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
    #[serde(rename = "G")]
    pub window: Option<f64>,
    pub n: Option<f64>,
    pub value: f64,
    pub stderr: Option<f64>,
}

impl Record {
    pub fn new(quantity: impl Into<String>, value: f64) -> Self {
        Record {
            quantity: quantity.into(),
            value,
            ..Default::default()
        }
    }

    pub fn x(mut self, x: f64) -> Self {
        self.x = Some(x);
        self
    }

    pub fn y(mut self, y: f64) -> Self {
        self.y = Some(y);
        self
    }

    pub fn window(mut self, g: f64) -> Self {
        self.window = Some(g);
        self
    }

    pub fn n(mut self, n: f64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    /// Fills the model columns that are still empty.
    pub fn model(mut self, m: &ModelColumns) -> Self {
        self.kappa = self.kappa.or(m.kappa);
        self.alpha = self.alpha.or(m.alpha);
        if self.lengths.is_empty() {
            self.lengths = m.lengths.clone();
        }
        self
    }
}

/// Model description shared by a batch of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelColumns {
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub lengths: String,
}

/// Compact text form of a length law, e.g. `exponential(mean=2)`.
pub fn describe_law(law: &LengthLaw) -> String {
    match law {
        LengthLaw::Deterministic { value } => format!("deterministic(value={value})"),
        LengthLaw::Exponential { mean } => format!("exponential(mean={mean})"),
        LengthLaw::Uniform { low, high } => format!("uniform(low={low};high={high})"),
        LengthLaw::Atoms {
            values,
            probabilities,
        } => {
            let parts: Vec<String> = values
                .iter()
                .zip(probabilities)
                .map(|(v, p)| format!("{v}:{p}"))
                .collect();
            format!("atoms({})", parts.join(";"))
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[Record], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS).map_err(CliError::io)?;
    for r in records {
        w.write_record([
            r.quantity.clone(),
            opt(r.kappa),
            opt(r.alpha),
            r.lengths.clone(),
            opt(r.x),
            opt(r.y),
            opt(r.window),
            opt(r.n),
            fmt_f64(r.value),
            opt(r.stderr),
        ])
        .map_err(CliError::io)?;
    }
    w.flush().map_err(CliError::io)?;
    Ok(())
}

/// JSON array of objects. Floats use the shortest representation that
/// round-trips, so no precision is lost.
pub fn write_json<W: Write>(records: &[Record], mut out: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, records).map_err(CliError::io)?;
    writeln!(out).map_err(CliError::io)?;
    Ok(())
}

pub fn write(records: &[Record], format: Format, out: impl Write) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(records, out),
        Format::Json => write_json(records, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_fixed_columns_and_full_precision() {
        let rec = Record::new("rho", 0.1)
            .x(2.0)
            .stderr(1e-3)
            .model(&ModelColumns {
                kappa: Some(1.0),
                alpha: None,
                lengths: describe_law(&LengthLaw::Uniform {
                    low: 0.5,
                    high: 1.5,
                }),
            });
        let mut buf = Vec::new();
        write_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), COLUMNS.len());
        assert_eq!(row[0], "rho");
        assert_eq!(row[2], "");
        assert_eq!(row[3], "uniform(low=0.5;high=1.5)");
        assert_eq!(row[8].parse::<f64>().unwrap(), 0.1);
        // 17 significant digits.
        assert_eq!(row[8].split('e').next().unwrap().replace('.', "").len(), 17);
    }

    #[test]
    fn json_keeps_column_names() {
        let mut buf = Vec::new();
        write_json(&[Record::new("tau_bound", 6.0).window(0.0)], &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let obj = v[0].as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        for c in COLUMNS {
            assert!(keys.contains(&c), "{c}");
        }
        assert_eq!(obj["G"], 0.0);
        assert!(obj["n"].is_null());
    }
}

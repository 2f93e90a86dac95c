//! Score CSV files: `metric_name, reference_id, degraded_id, value`.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::{MetricError, MetricId, MetricScore, Result};

const COLUMNS: [&str; 4] = ["metric_name", "reference_id", "degraded_id", "value"];

/// Reads externally computed scores. Every metric becomes
/// [`MetricId::External`]; values are taken verbatim.
pub fn read_scores<R: Read>(reader: R) -> Result<Vec<MetricScore>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 4];
    for (slot, col) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| MetricError::MissingColumn(col.to_string()))?;
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let (metric, reference_id, degraded_id, raw) = (field(0), field(1), field(2), field(3));
        for (name, v) in [("metric_name", metric), ("reference_id", reference_id), ("degraded_id", degraded_id)] {
            if v.is_empty() {
                return Err(MetricError::EmptyField { row, field: name });
            }
        }
        let value: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| MetricError::NonNumeric {
                row,
                value: raw.to_string(),
            })?;
        if !seen.insert((metric.to_string(), degraded_id.to_string())) {
            return Err(MetricError::Duplicate {
                metric: metric.to_string(),
                degraded: degraded_id.to_string(),
            });
        }
        out.push(MetricScore {
            metric: MetricId::External(metric.to_string()),
            reference_id: reference_id.to_string(),
            degraded_id: degraded_id.to_string(),
            value,
        });
    }
    Ok(out)
}

pub fn ingest_external_scores(path: impl AsRef<Path>) -> Result<Vec<MetricScore>> {
    read_scores(std::fs::File::open(path)?)
}

pub fn write_scores<W: Write>(scores: &[MetricScore], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for s in scores {
        w.write_record([
            s.metric.name(),
            &s.reference_id,
            &s.degraded_id,
            &format!("{}", s.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

//! Metrics stream writers: CSV with a fixed header, mirrored as JSON lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::trainer::{MetricsRecord, RunObserver, RunSummary};

pub const METRICS_HEADER: [&str; 11] = [
    "samples_seen",
    "epoch",
    "train_loss",
    "test_loss",
    "train_acc",
    "test_acc",
    "m_total",
    "m_min",
    "ineff",
    "updates",
    "remembered_frac",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// CSV fields of one record; absent values are empty cells.
pub fn metrics_row(r: &MetricsRecord) -> [String; 11] {
    [
        r.samples_seen.to_string(),
        r.epoch.to_string(),
        opt(r.train_loss),
        format!("{:?}", r.test_loss),
        opt(r.train_accuracy),
        format!("{:?}", r.test_accuracy),
        format!("{:?}", r.m_total),
        format!("{:?}", r.m_min),
        opt(r.inefficiency),
        r.update_count.to_string(),
        opt(r.remembered_fraction),
    ]
}

/// Writes every record as it arrives to `metrics.csv` and `metrics.jsonl`.
pub struct MetricsWriter {
    csv: csv::Writer<File>,
    jsonl: BufWriter<File>,
    jsonl_path: PathBuf,
    rows: usize,
    progress: bool,
}

impl MetricsWriter {
    pub fn create(csv_path: &Path, jsonl_path: &Path) -> Result<Self> {
        let mut csv = csv::Writer::from_path(csv_path)?;
        csv.write_record(METRICS_HEADER)?;
        csv.flush().map_err(|e| Error::io(csv_path, e))?;
        let jsonl = BufWriter::new(File::create(jsonl_path).map_err(|e| Error::io(jsonl_path, e))?);
        Ok(Self {
            csv,
            jsonl,
            jsonl_path: jsonl_path.to_path_buf(),
            rows: 0,
            progress: false,
        })
    }

    /// Echo one progress line per record on stderr.
    pub fn with_progress(mut self, on: bool) -> Self {
        self.progress = on;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn write(&mut self, r: &MetricsRecord) -> Result<()> {
        self.csv.write_record(metrics_row(r))?;
        self.csv.flush()?;
        serde_json::to_writer(&mut self.jsonl, r)?;
        self.jsonl
            .write_all(b"\n")
            .and_then(|_| self.jsonl.flush())
            .map_err(|e| Error::io(&self.jsonl_path, e))?;
        self.rows += 1;
        if self.progress {
            eprintln!(
                "samples {:>9}  epoch {:>3}  test acc {:.4}  updates {:>9}  M {:.3}",
                r.samples_seen, r.epoch, r.test_accuracy, r.update_count, r.m_total
            );
        }
        Ok(())
    }
}

impl<S: Scalar, M: Model<S>> RunObserver<S, M> for MetricsWriter {
    fn on_record(&mut self, record: &MetricsRecord) -> Result<()> {
        self.write(record)
    }
}

/// Reads back a metrics CSV written by [`MetricsWriter`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(Error::Format(format!("{}: unexpected metrics header {header:?}", path.display())));
    }
    let parse_f = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("bad number '{s}'"))) };
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_f(s).map(Some)
        }
    };
    let parse_u = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::Format(format!("bad integer '{s}'"))) };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        out.push(MetricsRecord {
            samples_seen: parse_u(&row[0])?,
            epoch: parse_u(&row[1])? as usize,
            train_loss: parse_opt(&row[2])?,
            test_loss: parse_f(&row[3])?,
            train_accuracy: parse_opt(&row[4])?,
            test_accuracy: parse_f(&row[5])?,
            m_total: parse_f(&row[6])?,
            m_min: parse_f(&row[7])?,
            inefficiency: parse_opt(&row[8])?,
            update_count: parse_u(&row[9])?,
            remembered_fraction: parse_opt(&row[10])?,
        });
    }
    Ok(out)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

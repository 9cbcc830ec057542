//! Metrics CSV: one row per evaluation point, fixed header, floats printed
//! with six significant digits.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

pub const METRICS_HEADER: &str = "iteration,epoch,train_loss,orig_top1,pruned_top1,ratio_below_1e3,ratio_below_1e4,reactivation_ratio,current_alpha";

/// One logging record per evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub epoch: u64,
    /// Mean training loss over the interval since the previous row.
    pub train_loss: f64,
    pub orig_top1: f64,
    /// Top-1 after a temporary global magnitude prune at the configured Q.
    pub pruned_top1: f64,
    /// Fraction of kernel entries with magnitude below 1e-3.
    pub ratio_below_1e3: f64,
    /// Fraction of kernel entries with magnitude below 1e-4.
    pub ratio_below_1e4: f64,
    /// Mean passive-to-active switch fraction over the interval.
    pub reactivation_ratio: f64,
    pub current_alpha: f64,
}

fn fmt(v: f64) -> String {
    format!("{v:.5e}")
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.epoch,
            fmt(self.train_loss),
            fmt(self.orig_top1),
            fmt(self.pruned_top1),
            fmt(self.ratio_below_1e3),
            fmt(self.ratio_below_1e4),
            fmt(self.reactivation_ratio),
            fmt(self.current_alpha),
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!(
                "metrics row wants 9 fields, got {}: {line:?}",
                fields.len()
            )));
        }
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|_| Error::Format(format!("bad integer field {i}: {line:?}")))
        };
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|_| Error::Format(format!("bad float field {i}: {line:?}")))
        };
        Ok(MetricsRow {
            iteration: int(0)?,
            epoch: int(1)?,
            train_loss: num(2)?,
            orig_top1: num(3)?,
            pruned_top1: num(4)?,
            ratio_below_1e3: num(5)?,
            ratio_below_1e4: num(6)?,
            reactivation_ratio: num(7)?,
            current_alpha: num(8)?,
        })
    }
}

/// Append one row, writing the header first only when the file is new or
/// empty. Existing content is never rewritten.
pub fn append_metrics(path: impl AsRef<Path>, row: &MetricsRow) -> Result<()> {
    let path = path.as_ref();
    let need_header = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    if need_header {
        text.push_str(METRICS_HEADER);
        text.push('\n');
    }
    text.push_str(&row.to_csv_line());
    text.push('\n');
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Parse a metrics file back into rows, verifying the header.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "bad metrics header: {other:?}"
            )))
        }
    }
    lines.map(MetricsRow::from_csv_line).collect()
}

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::RocPoint;
use crate::error::{Error, Result};

/// A block of metric rows under an optional heading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSection {
    pub heading: Option<String>,
    /// Metric name and one value per column; `None` prints as `-`.
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

/// Metrics side by side for several methods, printed as plain text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub title: String,
    pub columns: Vec<String>,
    pub sections: Vec<TableSection>,
    /// Digits after the decimal point.
    pub precision: usize,
}

impl ComparisonTable {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            sections: Vec::new(),
            precision: 3,
        }
    }

    pub fn section(mut self, heading: Option<&str>) -> Self {
        self.sections.push(TableSection { heading: heading.map(str::to_string), rows: Vec::new() });
        self
    }

    /// Appends a row to the last section, opening an untitled one if needed.
    pub fn row(mut self, metric: &str, values: &[Option<f64>]) -> Self {
        if self.sections.is_empty() {
            self = self.section(None);
        }
        let last = self.sections.last_mut().expect("section exists");
        last.rows.push((metric.to_string(), values.to_vec()));
        self
    }

    pub fn value(&self, metric: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.sections
            .iter()
            .flat_map(|s| &s.rows)
            .find(|(m, _)| m == metric)
            .and_then(|(_, v)| v.get(c).copied().flatten())
    }

    pub fn render(&self) -> String {
        let cell = |v: &Option<f64>| match v {
            Some(x) => format!("{:.*}", self.precision, x),
            None => "-".to_string(),
        };
        let label_w = self
            .sections
            .iter()
            .flat_map(|s| s.rows.iter().map(|r| r.0.len()))
            .chain(self.sections.iter().filter_map(|s| s.heading.as_ref().map(|h| h.len())))
            .chain(["Metric".len()])
            .max()
            .unwrap_or(6);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                self.sections
                    .iter()
                    .flat_map(|s| &s.rows)
                    .map(|r| r.1.get(i).map_or(1, |v| cell(v).len()))
                    .chain([c.len()])
                    .max()
                    .unwrap_or(1)
            })
            .collect();
        let total = label_w + widths.iter().map(|w| w + 2).sum::<usize>();
        let rule = "-".repeat(total);

        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = write!(out, "{:<label_w$}", "Metric");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
        let _ = writeln!(out, "{rule}");
        for s in &self.sections {
            if let Some(h) = &s.heading {
                let _ = writeln!(out, "{h}");
            }
            for (metric, values) in &s.rows {
                let _ = write!(out, "{metric:<label_w$}");
                for (i, w) in widths.iter().enumerate() {
                    let _ = write!(out, "  {:>w$}", values.get(i).map_or("-".to_string(), cell));
                }
                out.push('\n');
            }
            let _ = writeln!(out, "{rule}");
        }
        out
    }
}

/// ROC points as CSV with header `fpr,tpr,threshold`. The opening point's
/// infinite threshold is written as `inf`.
pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    out
}

/// Reads the layout written by [`roc_csv`].
pub fn parse_roc_csv(text: &str) -> Result<Vec<RocPoint>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("fpr,tpr,threshold") {
        return Err(Error::invalid("ROC file must start with `fpr,tpr,threshold`"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<f64> = l.split(',').map(|c| c.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("ROC line {}: {e}", i + 2)))?;
            match f[..] {
                [fpr, tpr, threshold] => Ok(RocPoint { fpr, tpr, threshold }),
                _ => Err(Error::invalid(format!("ROC line {}: expected three fields", i + 2))),
            }
        })
        .collect()
}

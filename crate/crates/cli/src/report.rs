//! Comparison tables from scan outputs, optionally merged with an external
//! reference CSV (e.g. CCSD(T) energies computed elsewhere).

use std::fmt::Write as _;
use std::path::Path;

use crate::config::GeometryLabel;
use crate::error::{CliError, Result};
use crate::scan::SCAN_CSV;

/// Label column plus named numeric columns; empty cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(GeometryLabel, Vec<Option<f64>>)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let bad = |msg: String| CliError::Csv {
            path: path.to_path_buf(),
            msg,
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.is_empty() {
            return Err(bad("no columns".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let label = GeometryLabel(rec.get(0).unwrap_or_default().to_string());
            let values = rec
                .iter()
                .skip(1)
                .map(|c| match c.trim() {
                    "" => Ok(None),
                    v => v
                        .parse()
                        .map(Some)
                        .map_err(|_| bad(format!("row {}: bad number {v:?}", k + 2))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((label, values));
        }
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.1[k]).collect())
    }

    /// Appends the columns of `other`, matched by geometry label. Every row
    /// of `other` must match a row here.
    pub fn merge(&mut self, other: &Table) -> Result<()> {
        for (label, _) in &other.rows {
            if !self.rows.iter().any(|(l, _)| l.matches(label)) {
                return Err(CliError::LabelMismatch(label.0.clone()));
            }
        }
        for name in &other.columns {
            let mut name = name.clone();
            while self.columns.contains(&name) {
                name.push_str("_ext");
            }
            self.columns.push(name);
        }
        for (label, values) in &mut self.rows {
            match other.rows.iter().find(|(l, _)| l.matches(label)) {
                Some((_, v)) => values.extend(v.iter().copied()),
                None => values.extend(std::iter::repeat_n(None, other.columns.len())),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub column: String,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub summary: Vec<ErrorSummary>,
}

pub fn build_report(scan_dir: &Path, reference: Option<&Path>) -> Result<Report> {
    let mut table = Table::read(&scan_dir.join(SCAN_CSV))?;
    let summary = table
        .columns
        .iter()
        .filter(|c| c.ends_with("_error"))
        .filter_map(|c| {
            let xs: Vec<f64> = table
                .column(c)?
                .into_iter()
                .flatten()
                .map(f64::abs)
                .collect();
            (!xs.is_empty()).then(|| ErrorSummary {
                column: c.clone(),
                max_abs: xs.iter().copied().fold(0.0, f64::max),
                mean_abs: xs.iter().sum::<f64>() / xs.len() as f64,
                points: xs.len(),
            })
        })
        .collect();
    if let Some(path) = reference {
        table.merge(&Table::read(path)?)?;
    }
    Ok(Report { table, summary })
}

impl Report {
    pub fn render(&self) -> String {
        let mut cells = vec![std::iter::once("label".to_string())
            .chain(self.table.columns.iter().cloned())
            .collect::<Vec<_>>()];
        for (label, values) in &self.table.rows {
            let mut row = vec![label.0.clone()];
            row.extend(
                values
                    .iter()
                    .map(|v| v.map(|x| format!("{x:.10}")).unwrap_or_else(|| "-".into())),
            );
            cells.push(row);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|k| cells.iter().map(|r| r[k].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        if !self.summary.is_empty() {
            let _ = writeln!(out, "\nerror vs FCI (Hartree)");
            let w = self
                .summary
                .iter()
                .map(|s| s.column.len())
                .max()
                .unwrap_or(0);
            for s in &self.summary {
                let _ = writeln!(
                    out,
                    "{:<w$}  max |err| {:.10}  mean |err| {:.10}  ({} points)",
                    s.column, s.max_abs, s.mean_abs, s.points
                );
            }
        }
        out
    }
}

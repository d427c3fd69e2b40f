//! Numeric CSV tables with a header row. Reals are written with 17
//! significant digits so a write-read cycle reproduces every value exactly.

use std::path::Path;

use crate::diffcore::DenseArray;
use crate::error::{Error, Result};
use crate::trainer::TrainTrace;
use crate::uq::UQCReport;

/// Header plus a row-major block of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub values: DenseArray,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("missing column {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.values.column(self.column_index(name)?))
    }

    fn expect_header(&self, expected: &[String]) -> Result<()> {
        if self.header != expected {
            return Err(Error::Csv(format!(
                "header mismatch: expected {}, found {}",
                expected.join(","),
                self.header.join(",")
            )));
        }
        Ok(())
    }
}

pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn parse_table(bytes: &[u8]) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(Error::Csv("header row has empty column names".into()));
    }
    let width = header.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != width {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {width}",
                r + 1,
                record.len()
            )));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = match field.trim() {
                "true" => 1.0,
                "false" => 0.0,
                f => f.parse().map_err(|_| {
                    Error::Csv(format!("row {} column {:?}: {f:?} is not a number", r + 1, header[c]))
                })?,
            };
            data.push(v);
        }
        rows += 1;
    }
    Ok(Table {
        header,
        values: DenseArray::matrix(rows, width, data)?,
    })
}

pub fn read_table(path: &Path) -> Result<Table> {
    parse_table(&std::fs::read(path)?)
}

pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Csv(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    super::write_atomic(path, &bytes)
}

fn numbered(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}_{j}")).collect()
}

fn real_rows(leading: Option<&[f64]>, x: &DenseArray) -> Vec<Vec<String>> {
    (0..x.rows())
        .map(|r| {
            leading
                .map(|l| format_real(l[r]))
                .into_iter()
                .chain(x.row(r).iter().map(|&v| format_real(v)))
                .collect()
        })
        .collect()
}

/// Columns `y, x_1..x_p`.
pub fn regression_table(x: &DenseArray, y: &[f64]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["y".to_string()];
    header.extend(numbered("x", x.cols()));
    (header, real_rows(Some(y), x))
}

pub fn read_regression(bytes: &[u8]) -> Result<(DenseArray, Vec<f64>)> {
    let t = parse_table(bytes)?;
    let p = t.header.len().saturating_sub(1);
    let mut expected = vec!["y".to_string()];
    expected.extend(numbered("x", p));
    t.expect_header(&expected)?;
    if p == 0 {
        return Err(Error::Csv("regression table needs at least one x column".into()));
    }
    let y = t.values.column(0);
    let cols: Vec<usize> = (1..=p).collect();
    Ok((select_columns(&t.values, &cols), y))
}

/// Columns `label, x_1..x_d` with 0-based integer labels.
pub fn classification_table(x: &DenseArray, labels: &[usize]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["label".to_string()];
    header.extend(numbered("x", x.cols()));
    let rows = (0..x.rows())
        .map(|r| {
            std::iter::once(labels[r].to_string())
                .chain(x.row(r).iter().map(|&v| format_real(v)))
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn read_classification(bytes: &[u8]) -> Result<(DenseArray, Vec<usize>)> {
    let t = parse_table(bytes)?;
    let d = t.header.len().saturating_sub(1);
    let mut expected = vec!["label".to_string()];
    expected.extend(numbered("x", d));
    t.expect_header(&expected)?;
    if d == 0 {
        return Err(Error::Csv("classification table needs at least one x column".into()));
    }
    let labels = t
        .values
        .column(0)
        .into_iter()
        .enumerate()
        .map(|(r, v)| {
            if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::Csv(format!("row {}: label {v} is not a nonnegative integer", r + 1)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let cols: Vec<usize> = (1..=d).collect();
    Ok((select_columns(&t.values, &cols), labels))
}

/// Columns `x, y`.
pub fn points_table(points: &[[f64; 2]]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = vec!["x".to_string(), "y".to_string()];
    let rows = points.iter().map(|p| vec![format_real(p[0]), format_real(p[1])]).collect();
    (header, rows)
}

pub fn read_points(bytes: &[u8]) -> Result<Vec<[f64; 2]>> {
    let t = parse_table(bytes)?;
    t.expect_header(&["x".to_string(), "y".to_string()])?;
    Ok((0..t.rows()).map(|r| [t.values.get(r, 0), t.values.get(r, 1)]).collect())
}

fn select_columns(m: &DenseArray, cols: &[usize]) -> DenseArray {
    let data = (0..m.rows()).flat_map(|r| cols.iter().map(move |&c| m.get(r, c))).collect();
    DenseArray::matrix(m.rows(), cols.len(), data).expect("selected block")
}

/// One row per draw; a leading `point_id` column when ids are given.
pub fn draws_table(names: &[String], draws: &DenseArray, point_ids: Option<&[usize]>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = Vec::new();
    if point_ids.is_some() {
        header.push("point_id".to_string());
    }
    header.extend(names.iter().cloned());
    let rows = (0..draws.rows())
        .map(|r| {
            point_ids
                .map(|ids| ids[r].to_string())
                .into_iter()
                .chain(draws.row(r).iter().map(|&v| format_real(v)))
                .collect()
        })
        .collect();
    (header, rows)
}

/// Columns `coordinate, level, lower, upper, mean`.
pub fn intervals_table(rows: &[(String, f64, f64, f64, f64)]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["coordinate", "level", "lower", "upper", "mean"].map(String::from).to_vec();
    let rows = rows
        .iter()
        .map(|(name, level, lo, hi, mean)| {
            vec![name.clone(), format_real(*level), format_real(*lo), format_real(*hi), format_real(*mean)]
        })
        .collect();
    (header, rows)
}

/// Columns `point_id, t_1..t_H, mean_1..mean_H, uncertain, predicted_class`.
/// Predicted classes are 0-based like the labels in data files.
pub fn uqc_table(reports: &[UQCReport]) -> (Vec<String>, Vec<Vec<String>>) {
    let h = reports.first().map_or(0, |r| r.thresholds.len());
    let mut header = vec!["point_id".to_string()];
    header.extend(numbered("t", h));
    header.extend(numbered("mean", h));
    header.push("uncertain".into());
    header.push("predicted_class".into());
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![i.to_string()];
            row.extend(r.thresholds.iter().map(|&v| format_real(v)));
            row.extend(r.mean_probs.iter().map(|&v| format_real(v)));
            row.push(r.uncertain.to_string());
            row.push(r.predicted_class().to_string());
            row
        })
        .collect();
    (header, rows)
}

/// Columns `step, objective, grad_norm, seconds`.
pub fn trace_table(trace: &TrainTrace) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["step", "objective", "grad_norm", "seconds"].map(String::from).to_vec();
    let rows = trace
        .entries
        .iter()
        .map(|e| {
            vec![
                e.step.to_string(),
                format_real(e.objective),
                format_real(e.grad_norm),
                format_real(e.seconds),
            ]
        })
        .collect();
    (header, rows)
}

//! JSON and CSV serialization of reports. Field order is fixed by the
//! struct definitions and floats use the shortest round-trip form, so equal
//! inputs give byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundReport, InfSupLadder};
use crate::error::{Error, Result};
use crate::solvers::IterationTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Flat tabular view of a report: a header and zero or more rows.
pub trait CsvReport {
    fn csv_header(&self) -> Vec<String>;
    fn csv_rows(&self) -> Vec<Vec<String>>;
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

pub fn json_string<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn csv_string<T: CsvReport + ?Sized>(report: &T) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(report.csv_header())?;
    for row in report.csv_rows() {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_report<T: Serialize + CsvReport + ?Sized>(path: &Path, report: &T, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => json_string(report)?,
        ReportFormat::Csv => csv_string(report)?,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const BOUND_COLUMNS: &[&str] = &[
    "k",
    "h",
    "alpha",
    "n",
    "dmu",
    "deps",
    "cdis1",
    "cdis2",
    "mass_ratio",
    "lhs_D",
    "lhs_Dinv",
    "lhs_2",
    "lhs_2_rev",
    "rhs",
    "rhs_2",
    "cond",
    "rhs_proxy",
    "singular_a2",
    "pass",
    "failed_checks",
];

pub fn bound_row(r: &BoundReport) -> Vec<String> {
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    vec![
        fmt_opt(r.k),
        fmt_opt(r.h),
        fmt_opt(r.alpha),
        r.n.to_string(),
        fmt_f64(r.dmu),
        fmt_f64(r.deps),
        fmt_f64(r.cdis1),
        fmt_f64(r.cdis2),
        fmt_f64(r.mass_ratio),
        fmt_f64(r.lhs_d),
        fmt_f64(r.lhs_dinv),
        fmt_f64(r.lhs_2),
        fmt_f64(r.lhs_2_rev),
        fmt_f64(r.rhs_lemma),
        fmt_f64(r.rhs_lemma_2),
        fmt_f64(r.cond),
        fmt_f64(r.rhs_proxy),
        r.singular_a2.to_string(),
        r.pass.to_string(),
        failed.join(";"),
    ]
}

impl CsvReport for BoundReport {
    fn csv_header(&self) -> Vec<String> {
        strings(BOUND_COLUMNS)
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        vec![bound_row(self)]
    }
}

impl CsvReport for IterationTrace {
    fn csv_header(&self) -> Vec<String> {
        strings(&["iteration", "norm", "envelope_c", "envelope_elman"])
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.norms
            .iter()
            .enumerate()
            .map(|(i, v)| {
                vec![
                    i.to_string(),
                    fmt_f64(*v),
                    fmt_opt(self.envelope_c.get(i).copied()),
                    fmt_opt(self.envelope_elman.get(i).copied()),
                ]
            })
            .collect()
    }
}

impl CsvReport for InfSupLadder {
    fn csv_header(&self) -> Vec<String> {
        strings(&[
            "k",
            "h",
            "n_elements",
            "h_ref",
            "n_elements_ref",
            "c_dis",
            "c_dis_ref",
            "ratio",
            "singular",
            "error",
        ])
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    fmt_f64(r.k),
                    fmt_f64(r.h),
                    r.n_elements.to_string(),
                    fmt_f64(r.h_ref),
                    r.n_elements_ref.to_string(),
                    fmt_f64(r.c_dis),
                    fmt_f64(r.c_dis_ref),
                    fmt_opt(r.ratio),
                    r.singular.to_string(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect()
    }
}

//! Plot-ready CSV and JSON renderings of curves and critical-bus reports.
//!
//! All numbers are written with six decimals so files compare byte-for-byte
//! across runs and platforms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use vstab_core::contingency::{CriticalBusReport, ReportRow};
use vstab_core::cpf::PVCurveSet;
use vstab_core::netmodel::BusId;

pub const PV_HEADER: &str = "contingency_label,total_load_mw,bus,v_pu";
pub const SUMMARY_HEADER: &str = "contingency_number,line_name,critical_bus";
pub const HISTOGRAM_HEADER: &str = "bus,frequency";

/// Label used for the no-outage curve.
pub const BASE_LABEL: &str = "base";

/// Appends one curve as `(point, bus)` ordered rows, without a header.
pub fn append_pv_rows(out: &mut String, label: &str, curves: &PVCurveSet) {
    for p in &curves.points {
        for (bus, v) in curves.bus_ids.iter().zip(&p.v) {
            let _ = writeln!(out, "{label},{:.6},{},{:.6}", p.total_load, bus.0, v);
        }
    }
}

/// Curves file for a list of labelled curve sets.
pub fn pv_csv<'a>(curves: impl IntoIterator<Item = (&'a str, &'a PVCurveSet)>) -> String {
    let mut out = String::from(PV_HEADER);
    out.push('\n');
    for (label, c) in curves {
        append_pv_rows(&mut out, label, c);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvRow {
    pub label: String,
    pub total_load_mw: f64,
    pub bus: BusId,
    pub v_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("curves file line {line}: {message}")]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

pub fn parse_pv_csv(text: &str) -> Result<Vec<PvRow>, CsvError> {
    let err = |line, message: &str| CsvError {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == PV_HEADER => {}
        _ => return Err(err(1, "missing header")),
    }
    lines
        .map(|(i, l)| {
            let no = i + 1;
            let mut f = l.rsplitn(4, ',');
            let v = f.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(no, "bad v_pu"))?;
            let bus = f.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(no, "bad bus"))?;
            let load = f
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err(no, "bad total_load_mw"))?;
            let label = f.next().ok_or_else(|| err(no, "missing label"))?;
            Ok(PvRow {
                label: label.to_string(),
                total_load_mw: load,
                bus: BusId(bus),
                v_pu: v,
            })
        })
        .collect()
}

fn critical_cell(row: &ReportRow) -> String {
    match (row.critical_bus, row.infeasibility) {
        (Some(b), _) => b.0.to_string(),
        (None, Some(reason)) => reason.to_string(),
        (None, None) => String::new(),
    }
}

pub fn histogram_csv(report: &CriticalBusReport) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for (bus, n) in &report.histogram {
        let _ = writeln!(out, "{},{}", bus.0, n);
    }
    out
}

/// Table rows, a blank line, then the `bus,frequency` section. Infeasible
/// contingencies carry their reason in the critical-bus column.
pub fn summary_csv(report: &CriticalBusReport) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in &report.rows {
        let _ = writeln!(out, "{},{},{}", row.number, row.label, critical_cell(row));
    }
    out.push('\n');
    out.push_str(&histogram_csv(report));
    out
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub contingency_number: usize,
    pub line_name: String,
    pub critical_bus: Option<u32>,
    pub infeasibility: Option<String>,
    pub margin_mw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub bus: u32,
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSummary {
    pub critical_bus: Option<u32>,
    pub base_total_load_mw: f64,
    pub nose_total_load_mw: f64,
    pub margin_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryJson {
    pub config: serde_json::Value,
    pub settings: serde_json::Value,
    pub inputs: serde_json::Value,
    pub base: BaseSummary,
    pub rows: Vec<SummaryRow>,
    pub histogram: Vec<HistogramEntry>,
    pub modal_bus: Option<u32>,
    pub modal_tie_break: String,
    pub feasible_contingencies: usize,
}

pub fn summary_rows(report: &CriticalBusReport) -> Vec<SummaryRow> {
    report
        .rows
        .iter()
        .map(|r| SummaryRow {
            contingency_number: r.number,
            line_name: r.label.clone(),
            critical_bus: r.critical_bus.map(|b| b.0),
            infeasibility: r.infeasibility.map(|i| i.to_string()),
            margin_mw: r.margin.map(round6),
        })
        .collect()
}

pub fn histogram_entries(report: &CriticalBusReport) -> Vec<HistogramEntry> {
    report
        .histogram
        .iter()
        .map(|(b, n)| HistogramEntry {
            bus: b.0,
            frequency: *n,
        })
        .collect()
}

pub fn base_summary(curves: &PVCurveSet, critical: Option<BusId>) -> BaseSummary {
    BaseSummary {
        critical_bus: critical.map(|b| b.0),
        base_total_load_mw: round6(curves.base_total_load),
        nose_total_load_mw: round6(curves.nose_total_load),
        margin_mw: round6(curves.nose_total_load - curves.base_total_load),
    }
}

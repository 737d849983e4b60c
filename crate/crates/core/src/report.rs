//! Serialisation of [`MetricReport`]s.
//!
//! The Markdown table follows the benchmark layout: five whole-image columns,
//! transition SAD, SAD per image type with their average, and SAD per
//! category with their average. Markdown has no column spans, so the group
//! names form the header row and the metric names the first body row.

use std::fmt::Write as _;

use crate::metrics::{MetricRecord, MetricReport};
use crate::{Error, Result};

pub const GROUP_HEADER: [&str; 19] = [
    "",
    "Whole Image",
    "",
    "",
    "",
    "",
    "Tran.",
    "SAD-Type",
    "",
    "",
    "",
    "SAD-Category",
    "",
    "",
    "",
    "",
    "",
    "",
    "",
];

pub const COLUMN_HEADER: [&str; 19] = [
    "Method", "SAD", "MSE", "MAD", "Conn.", "Grad.", "SAD", "SO", "STM", "NS", "Avg.", "Animal",
    "Human", "Transp.", "Plant", "Furni.", "Toy", "Fruit", "Avg.",
];

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

fn row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

/// Data cells of one report row, in column order after the label.
pub fn report_values(report: &MetricReport) -> Vec<Option<f64>> {
    let mut v = vec![
        Some(report.whole.sad),
        Some(report.whole.mse),
        Some(report.whole.mad),
        Some(report.whole.conn),
        Some(report.whole.grad),
        Some(report.transition_sad),
    ];
    v.extend(report.by_type.iter().map(|g| g.sad));
    v.push(Some(report.type_avg));
    v.extend(report.by_category.iter().map(|g| g.sad));
    v.push(report.category_avg);
    v
}

/// Benchmark-style table with one data row labelled `label`. Values are
/// printed with four decimals; absent groups show `-`.
pub fn to_markdown(report: &MetricReport, label: &str) -> String {
    let mut out = String::new();
    out.push_str(&row(&GROUP_HEADER.map(String::from)));
    out.push_str(&row(&vec!["---".to_string(); GROUP_HEADER.len()]));
    out.push_str(&row(&COLUMN_HEADER.map(String::from)));
    let mut cells = vec![label.to_string()];
    cells.extend(report_values(report).into_iter().map(cell));
    out.push_str(&row(&cells));
    out
}

pub const CSV_HEADER: &str = "id,type,category,height,width,sad,mse,mad,conn,grad,sad_transition";

/// One line per image, sorted as in the report.
pub fn to_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        // Ids come from manifests and may contain separators.
        let id = if r.id.contains([',', '"', '\n']) {
            format!("\"{}\"", r.id.replace('"', "\"\""))
        } else {
            r.id.clone()
        };
        let _ = writeln!(
            out,
            "{id},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.image_type, r.category, r.height, r.width, r.sad, r.mse, r.mad, r.conn, r.grad, r.sad_transition
        );
    }
    out
}

pub fn to_json(report: &MetricReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        path: "<report>".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

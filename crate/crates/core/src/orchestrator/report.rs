//! Report tables over run records: QE ablation, RR ablation, and the
//! depth curve. Each shape renders to CSV and Markdown.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use super::RunRecord;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing axis: {0}")]
    MissingAxis(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportShape {
    QeTable,
    RrTable,
    DepthCurve,
}

impl ReportShape {
    pub fn file_stem(&self) -> &'static str {
        match self {
            ReportShape::QeTable => "report_qe_table",
            ReportShape::RrTable => "report_rr_table",
            ReportShape::DepthCurve => "report_depth_curve",
        }
    }
}

impl FromStr for ReportShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qe_table" => Ok(Self::QeTable),
            "rr_table" => Ok(Self::RrTable),
            "depth_curve" => Ok(Self::DepthCurve),
            other => Err(format!(
                "unknown report shape {other:?} (expected qe_table, rr_table, or depth_curve)"
            )),
        }
    }
}

impl std::fmt::Display for ReportShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ReportShape::QeTable => "qe_table",
            ReportShape::RrTable => "rr_table",
            ReportShape::DepthCurve => "depth_curve",
        };
        write!(f, "{name}")
    }
}

/// A rendered report plus the paths it was written to, when any.
#[derive(Debug, Clone)]
pub struct Report {
    pub shape: ReportShape,
    pub csv: String,
    pub markdown: String,
    pub csv_path: Option<PathBuf>,
    pub md_path: Option<PathBuf>,
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.2}")
}

/// Dollars to at most four decimals with trailing zeros trimmed; exact
/// zero renders as `0.000`, nonzero amounts below rendering precision
/// keep all four decimals rather than masquerading as zero.
fn fmt_cost(dollars: f64) -> String {
    if dollars == 0.0 {
        return "0.000".to_string();
    }
    let s = format!("{dollars:.4}");
    if s == "0.0000" {
        return s;
    }
    let trimmed = s.trim_end_matches('0');
    if trimmed.ends_with('.') {
        s[..trimmed.len() + 1].to_string()
    } else {
        trimmed.to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

fn md_row(fields: &[String]) -> String {
    format!("| {} |", fields.join(" | "))
}

fn qe_label(record: &RunRecord) -> String {
    if record.config.qe_enabled() {
        record.config.qe_variant.clone()
    } else {
        "No Enhancement (BM25 only)".to_string()
    }
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> (String, String) {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let mut csv = String::new();
    csv.push_str(&csv_line(&header));
    csv.push('\n');
    let mut md = String::new();
    md.push_str(&md_row(&header));
    md.push('\n');
    md.push_str(&md_row(
        &header.iter().map(|_| "---".to_string()).collect::<Vec<_>>(),
    ));
    md.push('\n');
    for row in rows {
        csv.push_str(&csv_line(row));
        csv.push('\n');
        md.push_str(&md_row(row));
        md.push('\n');
    }
    (csv, md)
}

/// Render the requested table over the given run records.
///
/// Rows follow record order for the two ablation tables; the depth curve
/// sorts by (variant, k). Files land in `out_dir` when given.
pub fn emit_report(
    records: &[RunRecord],
    shape: ReportShape,
    out_dir: Option<&Path>,
) -> Result<Report, ReportError> {
    if records.is_empty() {
        return Err(ReportError::MissingAxis(format!(
            "no run records to build a {shape} report from"
        )));
    }

    let (csv, markdown) = match shape {
        ReportShape::QeTable => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        qe_label(r),
                        fmt_metric(r.aggregate.mean_ndcg_at_10_x100),
                        fmt_metric(r.aggregate.mean_recall_at_10_x100),
                        fmt_cost(r.aggregate.mean_cost_dollars),
                    ]
                })
                .collect();
            render_table(
                &["Model Variant", "NDCG@10", "Recall@10", "Cost ($/query)"],
                &rows,
            )
        }
        ReportShape::RrTable => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        format!(
                            "QE ({}) + RR ({})",
                            r.config.qe_variant, r.config.rr_variant
                        ),
                        fmt_metric(r.aggregate.mean_ndcg_at_10_x100),
                        fmt_metric(r.aggregate.mean_recall_at_10_x100),
                        fmt_cost(r.aggregate.mean_cost_dollars),
                        fmt_metric(r.aggregate.mean_latency_secs),
                    ]
                })
                .collect();
            render_table(
                &[
                    "Configuration",
                    "NDCG@10",
                    "Recall@10",
                    "Cost ($/query)",
                    "Latency (s/query)",
                ],
                &rows,
            )
        }
        ReportShape::DepthCurve => {
            let mut ordered: Vec<&RunRecord> = records.iter().collect();
            ordered.sort_by(|a, b| {
                qe_label(a)
                    .cmp(&qe_label(b))
                    .then(a.config.k.cmp(&b.config.k))
            });
            let rows: Vec<Vec<String>> = ordered
                .iter()
                .map(|r| {
                    vec![
                        qe_label(r),
                        r.config.k.to_string(),
                        fmt_metric(r.aggregate.mean_ndcg_at_10_x100),
                    ]
                })
                .collect();
            render_table(&["qe_variant", "k", "ndcg_at_10"], &rows)
        }
    };

    let (csv_path, md_path) = if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", shape.file_stem()));
        let md_path = dir.join(format!("{}.md", shape.file_stem()));
        std::fs::write(&csv_path, &csv)?;
        std::fs::write(&md_path, &markdown)?;
        (Some(csv_path), Some(md_path))
    } else {
        (None, None)
    };

    Ok(Report {
        shape,
        csv,
        markdown,
        csv_path,
        md_path,
    })
}

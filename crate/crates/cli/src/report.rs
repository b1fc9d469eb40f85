//! Correction reports as JSON lines: one object per iteration, then a
//! closing `{"summary": {...}}` line.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dmlp_core::purifier::{IterationRecord, ReportSummary};
use dmlp_core::CorrectionReport;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SummaryBody {
    schema_version: u32,
    #[serde(flatten)]
    summary: ReportSummary,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: SummaryBody,
}

pub fn to_jsonl(report: &CorrectionReport) -> String {
    let mut out = String::new();
    for r in &report.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    let tail = SummaryLine {
        summary: SummaryBody {
            schema_version: SCHEMA_VERSION,
            summary: report.summary.clone(),
        },
    };
    out.push_str(&serde_json::to_string(&tail).expect("summary serializes"));
    out.push('\n');
    out
}

pub fn from_jsonl(text: &str) -> Result<CorrectionReport> {
    let mut report = CorrectionReport::default();
    let mut summary = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if summary.is_some() {
            bail!("line {}: content after summary", i + 1);
        }
        let value: serde_json::Value = serde_json::from_str(line).with_context(|| format!("line {}", i + 1))?;
        if value.get("summary").is_some() {
            let tail: SummaryLine = serde_json::from_value(value).with_context(|| format!("line {}", i + 1))?;
            if tail.summary.schema_version != SCHEMA_VERSION {
                bail!(
                    "line {}: unsupported schema version {}",
                    i + 1,
                    tail.summary.schema_version
                );
            }
            summary = Some(tail.summary.summary);
        } else {
            let record: IterationRecord = serde_json::from_value(value).with_context(|| format!("line {}", i + 1))?;
            report.records.push(record);
        }
    }
    report.summary = summary.context("report has no summary line")?;
    Ok(report)
}

pub fn save(path: &Path, report: &CorrectionReport) -> Result<()> {
    std::fs::write(path, to_jsonl(report)).with_context(|| format!("writing {}", path.display()))
}

pub fn load(path: &Path) -> Result<CorrectionReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_jsonl(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Flattens the per-iteration records; `acc` is empty when absent.
pub fn to_csv(report: &CorrectionReport) -> String {
    let mut out = String::from("p,epoch,val_loss,grad_norm,eac_update,acc\n");
    for r in &report.records {
        let acc = r.acc.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.p, r.epoch, r.val_loss, r.grad_norm, r.eac_update, acc
        );
    }
    out
}

//! Report payloads and writers.
//!
//! Reports are fully deterministic given inputs and seeds: maps are ordered,
//! rows are sorted, floats print in shortest round-trip form. The one
//! exception is the `meta` block, which carries the generation timestamp and
//! is the designated field to exclude when comparing report payloads.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use kneeseg::detection::{DetectionSummary, DetectionSweep};
use kneeseg::metrics::{MetricResult, MetricStatus};
use kneeseg::stats::GroupComparison;

use crate::manifest::LabelScheme;

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub generated_at_unix: u64,
}

impl Meta {
    pub fn now() -> Meta {
        Meta {
            tool: "kneeseg",
            version: env!("CARGO_PKG_VERSION"),
            generated_at_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Sample mean/standard deviation over `n` values.
#[derive(Debug, Clone, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// `None` when no values are available; sample std (n-1), 0 for n = 1.
pub fn stat(values: &[f64]) -> Option<Stat> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Stat { mean, std, n })
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseOutput {
    pub case_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grade: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub classes: Vec<MetricResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassAggregate {
    pub class_id: u8,
    pub class_name: String,
    /// Cases that produced any metric for this class.
    pub n_cases: usize,
    pub not_applicable: usize,
    pub surface_undefined: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dsc: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asd_mm: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hd_mm: Option<Stat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hd_pre_mm: Option<Stat>,
    /// HD over cases with radiographic grade <= 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hd0_mm: Option<Stat>,
    /// HD over cases with radiographic grade >= 3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hd1_mm: Option<Stat>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub cases: Vec<CaseOutput>,
    pub aggregates: Vec<ClassAggregate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TukeyEntry {
    pub class_id: u8,
    pub class_name: String,
    pub metric: String,
    pub comparison: GroupComparison,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub meta: Meta,
    pub label_scheme: LabelScheme,
    pub classes: Vec<u8>,
    pub postprocess: bool,
    pub models: BTreeMap<String, ModelReport>,
    pub tukey: Vec<TukeyEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectReport {
    pub meta: Meta,
    pub model: String,
    pub connectivity: kneeseg::morphology::Connectivity,
    pub baseline: DetectionSummary,
    pub sweep: DetectionSweep,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub meta: Meta,
    pub metric: String,
    pub class_id: u8,
    pub comparison: GroupComparison,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).context("serializing report")?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn status_str(s: MetricStatus) -> &'static str {
    match s {
        MetricStatus::Evaluated => "evaluated",
        MetricStatus::SurfaceUndefined => "surface_undefined",
        MetricStatus::NotApplicable => "not_applicable",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-case CSV: one row per (model, case, class), sorted.
pub fn write_per_case_csv(report: &EvalReport, scheme: &LabelScheme, path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "model",
        "case_id",
        "grade",
        "class_id",
        "class_name",
        "status",
        "dsc",
        "asd_mm",
        "hd_mm",
        "hd_pre_mm",
        "error",
    ])?;
    for (model, mr) in &report.models {
        for case in &mr.cases {
            if let Some(err) = &case.error {
                w.write_record([
                    model.as_str(),
                    case.case_id.as_str(),
                    &case.grade.map(|g| g.to_string()).unwrap_or_default(),
                    "",
                    "",
                    "error",
                    "",
                    "",
                    "",
                    "",
                    err.as_str(),
                ])?;
                continue;
            }
            for r in &case.classes {
                w.write_record([
                    model.as_str(),
                    case.case_id.as_str(),
                    &case.grade.map(|g| g.to_string()).unwrap_or_default(),
                    &r.class_id.to_string(),
                    &scheme.class_name(r.class_id),
                    status_str(r.status),
                    &fmt_opt(r.dsc),
                    &fmt_opt(r.asd_mm),
                    &fmt_opt(r.hd_mm),
                    &fmt_opt(r.hd_pre_mm),
                    "",
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Summary CSV mirroring the per-class metric table: one row per
/// (class, metric, model) with mean, std, n, and the models this one differs
/// from significantly (Tukey, p < 0.05).
pub fn write_summary_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "class_id",
        "class_name",
        "metric",
        "model",
        "n",
        "mean",
        "std",
        "significant_vs",
    ])?;

    // (class, metric, model) -> models that differ significantly
    let mut sig: BTreeMap<(u8, String, String), Vec<String>> = BTreeMap::new();
    for entry in &report.tukey {
        for pair in &entry.comparison.pairs {
            if pair.significant {
                let a = entry.comparison.groups[pair.group_a].name.clone();
                let b = entry.comparison.groups[pair.group_b].name.clone();
                sig.entry((entry.class_id, entry.metric.clone(), a.clone()))
                    .or_default()
                    .push(b.clone());
                sig.entry((entry.class_id, entry.metric.clone(), b))
                    .or_default()
                    .push(a);
            }
        }
    }

    for (model, mr) in &report.models {
        for agg in &mr.aggregates {
            let metrics: [(&str, &Option<Stat>); 6] = [
                ("dsc", &agg.dsc),
                ("asd_mm", &agg.asd_mm),
                ("hd_mm", &agg.hd_mm),
                ("hd_pre_mm", &agg.hd_pre_mm),
                ("hd0_mm", &agg.hd0_mm),
                ("hd1_mm", &agg.hd1_mm),
            ];
            for (metric, value) in metrics {
                let Some(s) = value else { continue };
                let mut versus = sig
                    .get(&(agg.class_id, metric.to_string(), model.clone()))
                    .cloned()
                    .unwrap_or_default();
                versus.sort();
                versus.dedup();
                w.write_record([
                    &agg.class_id.to_string(),
                    &agg.class_name,
                    metric,
                    model,
                    &s.n.to_string(),
                    &s.mean.to_string(),
                    &s.std.to_string(),
                    &versus.join("|"),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

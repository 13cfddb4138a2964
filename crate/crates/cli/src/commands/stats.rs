//! `kneeseg stats`: Tukey HSD across models from per-case metric CSVs (the
//! `per_case.csv` written by `eval`).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use kneeseg::stats::tukey_hsd;

use crate::commands::eval::metric_column;
use crate::report::{write_json, Meta, StatsReport};

pub struct StatsArgs {
    pub inputs: Vec<PathBuf>,
    /// Group label per input file; defaults to the file stem.
    pub labels: Option<Vec<String>>,
    pub metric: String,
    pub class_id: u8,
    pub out_dir: PathBuf,
}

const METRICS: [&str; 4] = ["dsc", "asd_mm", "hd_mm", "hd_pre_mm"];

pub fn run(args: &StatsArgs) -> Result<()> {
    if args.inputs.is_empty() {
        return Err(crate::UsageError("stats needs at least one input CSV".into()).into());
    }
    if !METRICS.contains(&args.metric.as_str()) {
        return Err(crate::UsageError(format!(
            "unknown metric `{}`; expected one of {}",
            args.metric,
            METRICS.join(", ")
        ))
        .into());
    }
    if let Some(labels) = &args.labels {
        if labels.len() != args.inputs.len() {
            return Err(crate::UsageError(format!(
                "{} labels for {} inputs",
                labels.len(),
                args.inputs.len()
            ))
            .into());
        }
    }

    // Group key: the file label, extended by the model column when a file
    // carries more than one model.
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, path) in args.inputs.iter().enumerate() {
        let label = match &args.labels {
            Some(l) => l[i].clone(),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("input_{i}")),
        };
        let samples = metric_column(path, &args.metric, args.class_id)?;
        if samples.is_empty() {
            bail!(
                "{}: no `{}` values for class {}",
                path.display(),
                args.metric,
                args.class_id
            );
        }
        let models: std::collections::BTreeSet<&str> =
            samples.iter().map(|(m, _)| m.as_str()).collect();
        for model in models {
            let values: Vec<f64> = samples
                .iter()
                .filter(|(m, _)| m == model)
                .map(|(_, v)| *v)
                .collect();
            let name = if samples.iter().any(|(m, _)| m != model) {
                format!("{label}:{model}")
            } else {
                label.clone()
            };
            groups.push((name, values));
        }
    }

    let comparison = tukey_hsd(&groups)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let report = StatsReport {
        meta: Meta::now(),
        metric: args.metric.clone(),
        class_id: args.class_id,
        comparison,
    };
    write_json(&report, &args.out_dir.join("stats_report.json"))?;

    let significant = report
        .comparison
        .pairs
        .iter()
        .filter(|p| p.significant)
        .count();
    println!(
        "stats: {} group(s), {} significant pair(s) -> {}",
        report.comparison.groups.len(),
        significant,
        args.out_dir.display()
    );
    Ok(())
}

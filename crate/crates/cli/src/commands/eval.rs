//! `kneeseg eval`: per-case, per-class DSC/ASD/HD with component-based
//! post-processing, HD-before-post-processing, grade-stratified HD, and a
//! Tukey table across models.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use kneeseg::io;
use kneeseg::metrics::{evaluate_case, MetricResult, MetricStatus};
use kneeseg::morphology::filter_label_classes;
use kneeseg::stats::tukey_hsd;
use kneeseg::CaseRecord;

use crate::config::RunConfig;
use crate::manifest::{LabelScheme, Manifest};
use crate::report::{
    stat, write_json, write_per_case_csv, write_summary_csv, CaseOutput, ClassAggregate,
    EvalReport, Meta, ModelReport, TukeyEntry,
};

pub struct EvalArgs {
    pub manifest: PathBuf,
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

/// Grade threshold: HD0 covers grades <= 2, HD1 grades >= 3.
const MILD_GRADE_MAX: u8 = 2;

fn evaluate_one(
    case: &CaseRecord,
    model: &str,
    classes: &[u8],
    filter_classes: &[u8],
    cfg: &RunConfig,
) -> Result<Vec<MetricResult>> {
    let gt = io::read_labels(&case.ground_truth)
        .with_context(|| format!("ground truth {}", case.ground_truth.display()))?;
    let pred_path = case
        .predictions
        .get(model)
        .with_context(|| format!("case `{}` has no `{model}` prediction", case.case_id))?;
    let raw = io::read_labels(pred_path)
        .with_context(|| format!("prediction {}", pred_path.display()))?;

    if cfg.postprocess {
        let filtered = filter_label_classes(
            &raw,
            filter_classes,
            cfg.allowance_voxels,
            cfg.connectivity,
            cfg.component_distance,
        )?;
        Ok(evaluate_case(&filtered, &gt, classes, Some(&raw))?)
    } else {
        Ok(evaluate_case(&raw, &gt, classes, None)?)
    }
}

fn aggregate(cases: &[CaseOutput], classes: &[u8], scheme: &LabelScheme) -> Vec<ClassAggregate> {
    classes
        .iter()
        .map(|&class| {
            let mut dsc = Vec::new();
            let mut asd = Vec::new();
            let mut hd = Vec::new();
            let mut hd_pre = Vec::new();
            let mut hd0 = Vec::new();
            let mut hd1 = Vec::new();
            let mut na = 0usize;
            let mut undefined = 0usize;
            let mut n_cases = 0usize;
            for case in cases {
                let Some(r) = case.classes.iter().find(|r| r.class_id == class) else {
                    continue;
                };
                n_cases += 1;
                match r.status {
                    MetricStatus::NotApplicable => na += 1,
                    MetricStatus::SurfaceUndefined => undefined += 1,
                    MetricStatus::Evaluated => {}
                }
                if let Some(v) = r.dsc {
                    dsc.push(v);
                }
                if let Some(v) = r.asd_mm {
                    asd.push(v);
                }
                if let Some(v) = r.hd_mm {
                    hd.push(v);
                    // missing grades are excluded from both strata
                    match case.grade {
                        Some(g) if g <= MILD_GRADE_MAX => hd0.push(v),
                        Some(_) => hd1.push(v),
                        None => {}
                    }
                }
                if let Some(v) = r.hd_pre_mm {
                    hd_pre.push(v);
                }
            }
            ClassAggregate {
                class_id: class,
                class_name: scheme.class_name(class),
                n_cases,
                not_applicable: na,
                surface_undefined: undefined,
                dsc: stat(&dsc),
                asd_mm: stat(&asd),
                hd_mm: stat(&hd),
                hd_pre_mm: stat(&hd_pre),
                hd0_mm: stat(&hd0),
                hd1_mm: stat(&hd1),
            }
        })
        .collect()
}

type MetricExtractor = fn(&MetricResult) -> Option<f64>;

/// Tukey table across models, per class and metric, over cases where each
/// model produced the value. Skipped wherever fewer than two groups have at
/// least two samples.
fn tukey_table(
    models: &BTreeMap<String, ModelReport>,
    classes: &[u8],
    scheme: &LabelScheme,
) -> Vec<TukeyEntry> {
    if models.len() < 2 {
        return Vec::new();
    }
    let metrics: [(&str, MetricExtractor); 4] = [
        ("dsc", |r| r.dsc),
        ("asd_mm", |r| r.asd_mm),
        ("hd_mm", |r| r.hd_mm),
        ("hd_pre_mm", |r| r.hd_pre_mm),
    ];
    let mut out = Vec::new();
    for &class in classes {
        for (metric, extract) in metrics {
            let groups: Vec<(String, Vec<f64>)> = models
                .iter()
                .map(|(name, mr)| {
                    let values: Vec<f64> = mr
                        .cases
                        .iter()
                        .flat_map(|c| c.classes.iter())
                        .filter(|r| r.class_id == class)
                        .filter_map(extract)
                        .collect();
                    (name.clone(), values)
                })
                .filter(|(_, v)| v.len() >= 2)
                .collect();
            if groups.len() < 2 {
                continue;
            }
            if let Ok(comparison) = tukey_hsd(&groups) {
                out.push(TukeyEntry {
                    class_id: class,
                    class_name: scheme.class_name(class),
                    metric: metric.to_string(),
                    comparison,
                });
            }
        }
    }
    out
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let cfg = &args.config;
    let scheme = &manifest.label_scheme;

    let classes: Vec<u8> = match &cfg.classes {
        Some(c) => c.clone(),
        None => scheme.evaluable_classes(),
    };
    // Component filtering applies to bone/cartilage structures, not lesions.
    let lesions = scheme.lesion_classes();
    let filter_classes: Vec<u8> = classes
        .iter()
        .copied()
        .filter(|c| !lesions.contains(c))
        .collect();

    let model_names = manifest.model_names();
    anyhow::ensure!(
        !model_names.is_empty(),
        "manifest declares no predictions; nothing to evaluate"
    );

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut models = BTreeMap::new();
    for model in &model_names {
        let eval_case = |case: &CaseRecord| -> CaseOutput {
            if !case.predictions.contains_key(model) {
                return CaseOutput {
                    case_id: case.case_id.clone(),
                    grade: case.grade,
                    error: Some(format!("no `{model}` prediction")),
                    classes: Vec::new(),
                };
            }
            match evaluate_one(case, model, &classes, &filter_classes, cfg) {
                Ok(results) => CaseOutput {
                    case_id: case.case_id.clone(),
                    grade: case.grade,
                    error: None,
                    classes: results,
                },
                // per-case failures become report rows, never batch aborts
                Err(e) => CaseOutput {
                    case_id: case.case_id.clone(),
                    grade: case.grade,
                    error: Some(format!("{e:#}")),
                    classes: Vec::new(),
                },
            }
        };

        #[cfg(feature = "parallel")]
        let mut cases: Vec<CaseOutput> = {
            use rayon::prelude::*;
            manifest.cases.par_iter().map(eval_case).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let mut cases: Vec<CaseOutput> = manifest.cases.iter().map(eval_case).collect();

        cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        let aggregates = aggregate(&cases, &classes, scheme);
        models.insert(model.clone(), ModelReport { cases, aggregates });
    }

    let tukey = tukey_table(&models, &classes, scheme);
    let report = EvalReport {
        meta: Meta::now(),
        label_scheme: scheme.clone(),
        classes,
        postprocess: cfg.postprocess,
        models,
        tukey,
    };

    write_json(&report, &args.out_dir.join("eval_report.json"))?;
    write_per_case_csv(&report, scheme, &args.out_dir.join("per_case.csv"))?;
    write_summary_csv(&report, &args.out_dir.join("summary.csv"))?;

    let failures: usize = report
        .models
        .values()
        .flat_map(|m| m.cases.iter())
        .filter(|c| c.error.is_some())
        .count();
    if failures > 0 {
        eprintln!("warning: {failures} case evaluation(s) failed; see per_case.csv");
    }
    println!(
        "eval: {} model(s), {} case(s) -> {}",
        report.models.len(),
        manifest.cases.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Exposed for the `stats` subcommand: reads the per-case CSV back into
/// (model, case, class, metric) samples.
pub fn metric_column(path: &Path, metric: &str, class_id: u8) -> Result<Vec<(String, f64)>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == metric)
        .with_context(|| format!("{} has no `{metric}` column", path.display()))?;
    let model_col = headers
        .iter()
        .position(|h| h == "model")
        .context("missing `model` column")?;
    let class_col = headers
        .iter()
        .position(|h| h == "class_id")
        .context("missing `class_id` column")?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.get(class_col) != Some(class_id.to_string().as_str()) {
            continue;
        }
        let Some(raw) = record.get(col) else { continue };
        if raw.is_empty() {
            continue;
        }
        let value: f64 = raw
            .parse()
            .with_context(|| format!("bad `{metric}` value `{raw}`"))?;
        out.push((
            record.get(model_col).unwrap_or("default").to_string(),
            value,
        ));
    }
    Ok(out)
}

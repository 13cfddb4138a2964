//! `kneeseg detect`: bone-wise lesion detection with size and probability
//! threshold sweeps, ROC/AUC, and a baseline (no post-processing) summary.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use kneeseg::detection::{
    classify_bone, detection_report, sweep_detection, BoneCase, DetectionOutcome,
};
use kneeseg::io;

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::report::{write_json, DetectReport, Meta};

pub struct DetectArgs {
    pub manifest: PathBuf,
    pub config: RunConfig,
    pub out_dir: PathBuf,
    /// Model whose predictions feed the sweep; may be omitted when the
    /// manifest has exactly one.
    pub model: Option<String>,
}

pub fn run(args: &DetectArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let cfg = &args.config;
    let scheme = &manifest.label_scheme;

    let model_names = manifest.model_names();
    let model = match &args.model {
        Some(m) => {
            anyhow::ensure!(
                model_names.contains(m),
                "model `{m}` not present in manifest (have: {})",
                model_names.join(", ")
            );
            m.clone()
        }
        None if model_names.len() == 1 => model_names[0].clone(),
        None => bail!(
            "manifest has {} models ({}); pick one with --model",
            model_names.len(),
            model_names.join(", ")
        ),
    };

    let mut cases: Vec<BoneCase> = Vec::new();
    for record in &manifest.cases {
        let gt = io::read_labels(&record.ground_truth)
            .with_context(|| format!("ground truth {}", record.ground_truth.display()))?;
        let pred_path = record
            .predictions
            .get(&model)
            .with_context(|| format!("case `{}` has no `{model}` prediction", record.case_id))?;
        let pred = io::read_labels(pred_path)
            .with_context(|| format!("prediction {}", pred_path.display()))?;
        for bc in &scheme.bones {
            let prob = match record.lesion_probabilities.get(bc.bone.name()) {
                Some(p) => Some(
                    io::read_scalar(p)
                        .with_context(|| format!("probability map {}", p.display()))?,
                ),
                None => None,
            };
            cases.push(BoneCase {
                case_id: record.case_id.clone(),
                bone: bc.bone,
                gt: gt.class_mask(bc.lesion_class),
                pred: pred.class_mask(bc.lesion_class),
                prob,
            });
        }
    }

    let sweep = sweep_detection(
        &cases,
        &cfg.size_thresholds_mm3,
        &cfg.prob_thresholds,
        cfg.connectivity,
    )?;

    // Baseline summary: unfiltered masks (size threshold 0).
    let outcomes: Vec<DetectionOutcome> = cases
        .iter()
        .map(|c| {
            let (status, dsc) = classify_bone(&c.pred, &c.gt)?;
            Ok(DetectionOutcome {
                case_id: c.case_id.clone(),
                bone: c.bone,
                status,
                dsc,
            })
        })
        .collect::<Result<_>>()?;
    let baseline = detection_report(&outcomes)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let report = DetectReport {
        meta: Meta::now(),
        model,
        connectivity: cfg.connectivity,
        baseline,
        sweep,
    };
    write_json(&report, &args.out_dir.join("detect_report.json"))?;
    println!(
        "detect: {} bone cases ({} positive / {} negative), AUC {:.4} -> {}",
        cases.len(),
        report.sweep.baseline_positives,
        report.sweep.baseline_negatives,
        report.sweep.roc.auc,
        args.out_dir.display()
    );
    Ok(())
}

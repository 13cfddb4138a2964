//! Bone-wise lesion detection: TP/FP/TN/FN classification per bone, size and
//! probability threshold sweeps, and the resulting ROC curve.
//!
//! A positive bone (ground truth has a lesion) counts as a true positive when
//! the lesion-mask DSC is at least 5%; a negative bone is a true negative
//! when the prediction is also empty. Sweeps re-filter the ground-truth masks
//! with the same size threshold as the predictions, so a bone whose lesions
//! all fall below the threshold becomes a negative case.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::metrics;
use crate::morphology::{remove_small_components, Connectivity};
use crate::par;
use crate::scheme::Bone;
use crate::volume::Volume;

/// Inclusive DSC threshold separating true positives from false negatives.
pub const TP_DSC_THRESHOLD: f64 = 0.05;

/// Size-threshold schedule in mm^3: `0.0` (no post-processing) through `6.0`
/// in steps of `0.5`.
pub fn default_size_thresholds() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.5).collect()
}

/// Probability-threshold schedule `0.5, 0.6, ..., 1.0` applied after the
/// size sweep with the size threshold fixed at its last value.
pub fn default_prob_thresholds() -> Vec<f64> {
    (5..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionStatus {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

/// Classification of one bone of one case. `dsc` is present exactly when the
/// ground truth has a lesion in that bone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub case_id: String,
    pub bone: Bone,
    pub status: DetectionStatus,
    pub dsc: Option<f64>,
}

/// Classifies one bone from its predicted and ground-truth lesion masks.
pub fn classify_bone(
    pred_lesion: &BinaryMask,
    gt_lesion: &BinaryMask,
) -> Result<(DetectionStatus, Option<f64>)> {
    pred_lesion
        .geometry()
        .ensure_same_grid(gt_lesion.geometry(), "classify_bone")?;
    if gt_lesion.is_empty() {
        let status = if pred_lesion.is_empty() {
            DetectionStatus::TrueNegative
        } else {
            DetectionStatus::FalsePositive
        };
        Ok((status, None))
    } else {
        let d = metrics::dsc(pred_lesion, gt_lesion)?;
        let status = if d >= TP_DSC_THRESHOLD {
            DetectionStatus::TruePositive
        } else {
            DetectionStatus::FalseNegative
        };
        Ok((status, Some(d)))
    }
}

/// One bone of one case, ready for threshold sweeps. `prob` optionally holds
/// the bone's lesion-class softmax probability volume.
#[derive(Debug, Clone)]
pub struct BoneCase {
    pub case_id: String,
    pub bone: Bone,
    pub gt: BinaryMask,
    pub pred: BinaryMask,
    pub prob: Option<Volume>,
}

/// Confusion counts and rates at one sweep setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub size_threshold_mm3: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_threshold: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// Bones whose filtered prediction is non-empty.
    pub predicted_positive: usize,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_dsc_positive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub size_threshold_mm3: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prob_threshold: Option<f64>,
}

/// ROC points (sorted by FPR, anchored at `(0,0)` and `(1,1)`) with the
/// trapezoidal area under the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Full sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSweep {
    /// Positive/negative census of the unfiltered ground truth.
    pub baseline_positives: usize,
    pub baseline_negatives: usize,
    pub size_points: Vec<SweepPoint>,
    pub prob_points: Vec<SweepPoint>,
    pub roc: RocCurve,
}

fn sweep_once(
    cases: &[BoneCase],
    size_threshold: f64,
    prob_threshold: Option<f64>,
    connectivity: Connectivity,
) -> Result<SweepPoint> {
    let classify_case = |case: &BoneCase| -> Result<(DetectionStatus, Option<f64>, bool)> {
        let pred_base = match prob_threshold {
            Some(t) => {
                let prob = case.prob.as_ref().expect("presence checked by caller");
                let keep = BinaryMask::from_fn_slice(*prob.geometry(), prob.as_slice(), move |p| {
                    p as f64 >= t
                });
                case.pred.intersect(&keep)?
            }
            None => case.pred.clone(),
        };
        let pred = remove_small_components(&pred_base, size_threshold, connectivity);
        let gt = remove_small_components(&case.gt, size_threshold, connectivity);
        let (status, dsc) = classify_bone(&pred, &gt)?;
        Ok((status, dsc, !pred.is_empty()))
    };

    #[cfg(feature = "parallel")]
    let classified: Vec<(DetectionStatus, Option<f64>, bool)> = {
        use rayon::prelude::*;
        cases
            .par_iter()
            .map(classify_case)
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let classified: Vec<(DetectionStatus, Option<f64>, bool)> = cases
        .iter()
        .map(classify_case)
        .collect::<Result<Vec<_>>>()?;

    let mut point = SweepPoint {
        size_threshold_mm3: size_threshold,
        prob_threshold,
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
        predicted_positive: 0,
        accuracy: 0.0,
        tpr: None,
        fpr: None,
        mean_dsc_positive: None,
    };
    let mut dsc_sum = 0.0;
    let mut dsc_n = 0usize;
    for (status, dsc, predicted) in &classified {
        match status {
            DetectionStatus::TruePositive => point.true_positives += 1,
            DetectionStatus::FalsePositive => point.false_positives += 1,
            DetectionStatus::TrueNegative => point.true_negatives += 1,
            DetectionStatus::FalseNegative => point.false_negatives += 1,
        }
        if *predicted {
            point.predicted_positive += 1;
        }
        if let Some(d) = dsc {
            dsc_sum += d;
            dsc_n += 1;
        }
    }
    let total = cases.len();
    let positives = point.true_positives + point.false_negatives;
    let negatives = point.false_positives + point.true_negatives;
    point.accuracy = (point.true_positives + point.true_negatives) as f64 / total as f64;
    if positives > 0 {
        point.tpr = Some(point.true_positives as f64 / positives as f64);
    }
    if negatives > 0 {
        point.fpr = Some(point.false_positives as f64 / negatives as f64);
    }
    if dsc_n > 0 {
        point.mean_dsc_positive = Some(dsc_sum / dsc_n as f64);
    }
    Ok(point)
}

/// Trapezoidal AUC over `(fpr, tpr)` points, anchored at `(0,0)` and `(1,1)`
/// and sorted by FPR (ties by TPR). Duplicate points contribute zero-width
/// trapezoids and leave the area unchanged.
pub fn trapezoid_auc(points: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend_from_slice(points);
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut auc = 0.0;
    for w in pts.windows(2) {
        let (x1, y1) = w[0];
        let (x2, y2) = w[1];
        auc += (x2 - x1) * (y1 + y2) / 2.0;
    }
    auc
}

/// Runs the size-threshold sweep, then (when probability maps are available)
/// the probability sweep with the size threshold fixed at the last schedule
/// value, and assembles the ROC curve.
///
/// Errors when the unfiltered ground truth lacks positive or negative bones:
/// the ROC would be degenerate.
pub fn sweep_detection(
    cases: &[BoneCase],
    size_thresholds: &[f64],
    prob_thresholds: &[f64],
    connectivity: Connectivity,
) -> Result<DetectionSweep> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no bone cases supplied".into()));
    }
    if size_thresholds.is_empty() {
        return Err(Error::InvalidArgument(
            "size threshold schedule is empty".into(),
        ));
    }
    let baseline_positives = par::count_where(cases.len(), |i| !cases[i].gt.is_empty());
    let baseline_negatives = cases.len() - baseline_positives;
    if baseline_positives == 0 || baseline_negatives == 0 {
        return Err(Error::DegenerateRoc {
            positives: baseline_positives,
            negatives: baseline_negatives,
        });
    }

    let mut size_points = Vec::with_capacity(size_thresholds.len());
    for &tau in size_thresholds {
        size_points.push(sweep_once(cases, tau, None, connectivity)?);
    }

    let with_prob = cases.iter().filter(|c| c.prob.is_some()).count();
    let prob_points = if prob_thresholds.is_empty() || with_prob == 0 {
        Vec::new()
    } else if with_prob < cases.len() {
        return Err(Error::InvalidArgument(format!(
            "{with_prob} of {} bone cases have probability maps; need all or none",
            cases.len()
        )));
    } else {
        let tau = *size_thresholds.last().expect("non-empty schedule");
        let mut pts = Vec::with_capacity(prob_thresholds.len());
        for &t in prob_thresholds {
            pts.push(sweep_once(cases, tau, Some(t), connectivity)?);
        }
        pts
    };

    let mut roc_points: Vec<RocPoint> = Vec::new();
    for p in size_points.iter().chain(prob_points.iter()) {
        if let (Some(tpr), Some(fpr)) = (p.tpr, p.fpr) {
            roc_points.push(RocPoint {
                fpr,
                tpr,
                size_threshold_mm3: p.size_threshold_mm3,
                prob_threshold: p.prob_threshold,
            });
        }
    }
    roc_points.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
    let auc = trapezoid_auc(
        &roc_points
            .iter()
            .map(|p| (p.fpr, p.tpr))
            .collect::<Vec<_>>(),
    );

    Ok(DetectionSweep {
        baseline_positives,
        baseline_negatives,
        size_points,
        prob_points,
        roc: RocCurve {
            points: roc_points,
            auc,
        },
    })
}

/// Per-bone confusion counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoneBreakdown {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Aggregate accuracy/sensitivity/specificity over a set of outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub total: usize,
    pub positives: usize,
    pub negatives: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_dsc_positive: Option<f64>,
    pub per_bone: BTreeMap<String, BoneBreakdown>,
}

/// Tallies outcomes into a summary; errors on an empty input.
pub fn detection_report(outcomes: &[DetectionOutcome]) -> Result<DetectionSummary> {
    if outcomes.is_empty() {
        return Err(Error::InvalidArgument("no detection outcomes".into()));
    }
    let mut summary = DetectionSummary {
        total: outcomes.len(),
        positives: 0,
        negatives: 0,
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
        accuracy: 0.0,
        tpr: None,
        tnr: None,
        mean_dsc_positive: None,
        per_bone: Bone::ALL
            .iter()
            .map(|b| (b.name().to_string(), BoneBreakdown::default()))
            .collect(),
    };
    let mut dsc_sum = 0.0;
    let mut dsc_n = 0usize;
    for o in outcomes {
        let bone = summary
            .per_bone
            .get_mut(o.bone.name())
            .expect("all bones pre-seeded");
        match o.status {
            DetectionStatus::TruePositive => {
                summary.true_positives += 1;
                bone.true_positives += 1;
            }
            DetectionStatus::FalsePositive => {
                summary.false_positives += 1;
                bone.false_positives += 1;
            }
            DetectionStatus::TrueNegative => {
                summary.true_negatives += 1;
                bone.true_negatives += 1;
            }
            DetectionStatus::FalseNegative => {
                summary.false_negatives += 1;
                bone.false_negatives += 1;
            }
        }
        if let Some(d) = o.dsc {
            dsc_sum += d;
            dsc_n += 1;
        }
    }
    summary.positives = summary.true_positives + summary.false_negatives;
    summary.negatives = summary.false_positives + summary.true_negatives;
    summary.accuracy =
        (summary.true_positives + summary.true_negatives) as f64 / summary.total as f64;
    if summary.positives > 0 {
        summary.tpr = Some(summary.true_positives as f64 / summary.positives as f64);
    }
    if summary.negatives > 0 {
        summary.tnr = Some(summary.true_negatives as f64 / summary.negatives as f64);
    }
    if dsc_n > 0 {
        summary.mean_dsc_positive = Some(dsc_sum / dsc_n as f64);
    }
    Ok(summary)
}

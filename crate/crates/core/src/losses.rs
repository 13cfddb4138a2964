//! Forward evaluation of the pipeline's loss functions and anomaly maps:
//! reconstruction error maps, focal weight maps, masked-input preparation,
//! MSE reconstruction losses, multi-class Dice, focal cross-entropy, and the
//! combined segmentation/transfer objectives.
//!
//! These are inference-time reference computations (no gradients). All
//! reductions are deterministic block sums, so values are bit-stable across
//! thread counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::morphology;
use crate::par;
use crate::volume::{LabelMap, ProbabilityMap, Volume};

/// Probability floor applied before logarithms in the cross-entropy terms.
pub const PROB_FLOOR: f64 = 1e-7;

fn default_alpha() -> f64 {
    10.0
}
fn default_beta() -> f64 {
    99.0
}
fn default_class_weights() -> Vec<f64> {
    let mut w = vec![1.0; 5];
    w.extend(vec![10.0; 5]);
    w
}
fn default_dilation_radius() -> usize {
    50
}
fn default_fill() -> f32 {
    0.0
}

/// Loss constants. Defaults mirror the pipeline's published configuration:
/// `alpha = 10`, `beta = 99`, unit weights for the original five classes and
/// weight 10 for the five transfer-learning classes, 50-voxel mask dilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_class_weights")]
    pub class_weights: Vec<f64>,
    #[serde(default = "default_dilation_radius")]
    pub dilation_radius_voxels: usize,
    #[serde(default = "default_fill")]
    pub fill_value: f32,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            beta: default_beta(),
            class_weights: default_class_weights(),
            dilation_radius_voxels: default_dilation_radius(),
            fill_value: default_fill(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.alpha) || !ok(self.beta) || !self.class_weights.iter().all(|&w| ok(w)) {
            return Err(Error::InvalidArgument(
                "alpha, beta, and class weights must be finite and non-negative".into(),
            ));
        }
        if !self.fill_value.is_finite() {
            return Err(Error::InvalidArgument("fill value must be finite".into()));
        }
        Ok(())
    }
}

/// Per-voxel squared reconstruction difference; non-negative everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    vol: Volume,
}

impl ErrorMap {
    pub fn volume(&self) -> &Volume {
        &self.vol
    }

    pub fn into_volume(self) -> Volume {
        self.vol
    }
}

/// `E = (x - recon)^2`, voxelwise.
pub fn error_map(x: &Volume, recon: &Volume) -> Result<ErrorMap> {
    x.geometry()
        .ensure_same_grid(recon.geometry(), "error_map")?;
    let a = x.as_slice();
    let b = recon.as_slice();
    let mut out = vec![0.0f32; a.len()];
    par::fill_blocks(&mut out, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            let d = a[start + k] as f64 - b[start + k] as f64;
            *v = (d * d) as f32;
        }
    });
    Ok(ErrorMap {
        vol: Volume::from_vec(*x.geometry(), out)?,
    })
}

/// Focal weight map `F = 1 + beta * E`. For error maps built from images in
/// `[0, 1]` and `beta = 99`, values span `[1, 100]`.
pub fn focal_weights(e: &ErrorMap, beta: f64) -> Volume {
    let src = e.vol.as_slice();
    let mut out = vec![0.0f32; src.len()];
    par::fill_blocks(&mut out, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = (1.0 + beta * src[start + k] as f64) as f32;
        }
    });
    Volume::from_vec(*e.vol.geometry(), out).expect("finite by construction")
}

/// Erases the dilated union of the bone-class masks from the image: the
/// input-preparation step for the inpainting reconstruction.
pub fn prepare_masked_input(
    x: &Volume,
    bones: &LabelMap,
    bone_classes: &[u8],
    cfg: &LossConfig,
) -> Result<Volume> {
    if bone_classes.is_empty() {
        return Err(Error::EmptyBoneClasses);
    }
    x.geometry()
        .ensure_same_grid(bones.geometry(), "prepare_masked_input")?;
    let union: BinaryMask = bones.classes_mask(bone_classes);
    let dilated = morphology::dilate(&union, cfg.dilation_radius_voxels);
    morphology::erase_region(x, &dilated, cfg.fill_value)
}

/// Mean squared error between an image and its reconstruction.
pub fn loss_g(x: &Volume, gx: &Volume) -> Result<f64> {
    x.geometry().ensure_same_grid(gx.geometry(), "loss_g")?;
    let a = x.as_slice();
    let b = gx.as_slice();
    let n = a.len();
    let sum = par::stable_sum(n, |i| {
        let d = a[i] as f64 - b[i] as f64;
        d * d
    });
    Ok(sum / n as f64)
}

/// Distillation loss for the mask-free reconstructor: MSE between the two
/// reconstructions plus MSE between their error maps against the original.
pub fn loss_a(x: &Volume, gx: &Volume, ax: &Volume) -> Result<f64> {
    x.geometry().ensure_same_grid(gx.geometry(), "loss_a")?;
    x.geometry().ensure_same_grid(ax.geometry(), "loss_a")?;
    let xs = x.as_slice();
    let gs = gx.as_slice();
    let as_ = ax.as_slice();
    let n = xs.len();
    let [recon_sum, err_sum] = par::stable_sum_arrays::<2, _>(n, |i| {
        let xv = xs[i] as f64;
        let gv = gs[i] as f64;
        let av = as_[i] as f64;
        let d_recon = gv - av;
        let eg = (xv - gv) * (xv - gv);
        let ea = (xv - av) * (xv - av);
        let d_err = eg - ea;
        [d_recon * d_recon, d_err * d_err]
    });
    Ok(recon_sum / n as f64 + err_sum / n as f64)
}

fn check_channels(u: &ProbabilityMap, v: &ProbabilityMap, context: &str) -> Result<usize> {
    u.geometry().ensure_same_grid(v.geometry(), context)?;
    if u.num_channels() != v.num_channels() {
        return Err(Error::ChannelMismatch {
            left: u.num_channels(),
            right: v.num_channels(),
        });
    }
    Ok(u.num_channels())
}

/// Per-class Dice terms `Σuv / (Σu + Σv)`; a channel empty in both maps
/// contributes 0 (no smoothing epsilon alters the formula).
fn dice_terms(u: &ProbabilityMap, v: &ProbabilityMap, k: usize) -> Vec<f64> {
    let n = u.geometry().voxel_count();
    (0..k)
        .map(|c| {
            let uc = u.channel_slice(c);
            let vc = v.channel_slice(c);
            let [suv, su, sv] = par::stable_sum_arrays::<3, _>(n, |i| {
                let uv = uc[i] as f64;
                let vv = vc[i] as f64;
                [uv * vv, uv, vv]
            });
            if su + sv == 0.0 {
                0.0
            } else {
                suv / (su + sv)
            }
        })
        .collect()
}

/// Multi-class Dice loss `1 - (2/|K|) Σ_k Σuv/(Σu+Σv)`. The background
/// channel is part of `K`; `v` is expected to be one-hot.
pub fn dice_loss(u: &ProbabilityMap, v: &ProbabilityMap) -> Result<f64> {
    let k = check_channels(u, v, "dice_loss")?;
    let terms = dice_terms(u, v, k);
    let total: f64 = terms.iter().sum();
    Ok(1.0 - 2.0 / k as f64 * total)
}

/// Focal cross-entropy `-Σ_i Σ_k F_i v_{i,k} log u_{i,k}`, evaluated as a raw
/// sum over voxels per the training objective (no mean). Probabilities are
/// clamped to `[1e-7, 1]` before the logarithm; with `F = 1` this reduces to
/// plain categorical cross-entropy.
pub fn focal_ce_loss(u: &ProbabilityMap, v: &ProbabilityMap, f: &Volume) -> Result<f64> {
    let k = check_channels(u, v, "focal_ce_loss")?;
    u.geometry()
        .ensure_same_grid(f.geometry(), "focal_ce_loss weights")?;
    let n = u.geometry().voxel_count();
    let u_chans: Vec<&[f32]> = (0..k).map(|c| u.channel_slice(c)).collect();
    let v_chans: Vec<&[f32]> = (0..k).map(|c| v.channel_slice(c)).collect();
    let fw = f.as_slice();
    let total = par::stable_sum(n, |i| {
        let mut inner = 0.0f64;
        for c in 0..k {
            let vv = v_chans[c][i] as f64;
            if vv != 0.0 {
                let uu = (u_chans[c][i] as f64).clamp(PROB_FLOOR, 1.0);
                inner += vv * uu.ln();
            }
        }
        fw[i] as f64 * inner
    });
    Ok(-total)
}

/// Combined segmentation loss: Dice plus `alpha` times the focal
/// cross-entropy with weights `F = 1 + beta * E`.
pub fn total_seg_loss(
    u: &ProbabilityMap,
    v: &ProbabilityMap,
    e: &ErrorMap,
    cfg: &LossConfig,
) -> Result<f64> {
    cfg.validate()?;
    let f = focal_weights(e, cfg.beta);
    Ok(dice_loss(u, v)? + cfg.alpha * focal_ce_loss(u, v, &f)?)
}

/// Class-weighted Dice loss `(1/|K|) Σ_k w_k (1 - 2Σuv/(Σu+Σv))`; `w_k` is
/// forced to 0 for channels empty in both maps, so correctly predicting an
/// absent class costs nothing.
pub fn weighted_dice_loss(u: &ProbabilityMap, v: &ProbabilityMap, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let k = check_channels(u, v, "weighted_dice_loss")?;
    if cfg.class_weights.len() != k {
        return Err(Error::WeightLength {
            got: cfg.class_weights.len(),
            expected: k,
        });
    }
    let n = u.geometry().voxel_count();
    let mut total = 0.0f64;
    for c in 0..k {
        let uc = u.channel_slice(c);
        let vc = v.channel_slice(c);
        let [suv, su, sv] = par::stable_sum_arrays::<3, _>(n, |i| {
            let uv = uc[i] as f64;
            let vv = vc[i] as f64;
            [uv * vv, uv, vv]
        });
        if su + sv == 0.0 {
            continue; // weight forced to 0 for a class absent from both
        }
        total += cfg.class_weights[c] * (1.0 - 2.0 * suv / (su + sv));
    }
    Ok(total / k as f64)
}

/// Transfer-learning objective: weighted Dice plus `alpha` times the focal
/// cross-entropy.
pub fn total_transfer_loss(
    u: &ProbabilityMap,
    v: &ProbabilityMap,
    e: &ErrorMap,
    cfg: &LossConfig,
) -> Result<f64> {
    cfg.validate()?;
    let f = focal_weights(e, cfg.beta);
    Ok(weighted_dice_loss(u, v, cfg)? + cfg.alpha * focal_ce_loss(u, v, &f)?)
}

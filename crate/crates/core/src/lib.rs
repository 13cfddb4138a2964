//! Evaluation core for anomaly-aware 3D knee MRI segmentation pipelines.
//!
//! The crate covers the non-training computational path end to end:
//!
//! - `volume` / `io` / `mask`: voxel field types, MetaImage-style files,
//!   intensity normalization, one-hot and argmax conversions
//! - `morphology`: dilation, region erasure, connected components, and the
//!   component-based post-processing filters
//! - `metrics`: DSC and exact anisotropic surface distances (ASD, Hausdorff)
//! - `losses`: reconstruction-error anomaly maps, focal weight maps, and
//!   forward evaluation of the Dice/focal-cross-entropy objectives
//! - `detection`: bone-wise lesion detection, threshold sweeps, ROC/AUC
//! - `stats`: Tukey HSD over a numeric studentized range distribution
//! - `phantom` / `augment`: seeded synthetic data for desk-scale testing
//!
//! Data-parallel inner loops run on rayon when the default `parallel` feature
//! is enabled and fall back to sequential loops without it; reductions use a
//! fixed block/tree shape either way, so results are bit-identical across
//! thread counts and feature choices.

pub mod augment;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod rng;
pub mod scheme;
pub mod stats;
pub mod volume;

mod edt;
mod par;

pub use error::{Error, Result};
pub use geometry::Geometry;
pub use mask::BinaryMask;
pub use volume::{CaseRecord, LabelMap, ProbabilityMap, Volume};

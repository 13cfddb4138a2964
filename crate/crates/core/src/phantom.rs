//! Synthetic knee-like phantom: three ellipsoidal "bones" with articular
//! cartilage shells, optional spherical lesions, and a deterministic
//! lesion-free "reconstruction" standing in for the inpainting networks.
//!
//! Every voxel value is a pure function of the configuration (seeded
//! counter RNG), so generation is bit-reproducible and parallelizes freely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::par;
use crate::rng::{CounterRng, StreamRng};
use crate::scheme::{self, Bone};
use crate::volume::{LabelMap, Volume};

pub const BACKGROUND_INTENSITY: f32 = 0.15;
pub const BONE_INTENSITY: f32 = 0.45;
pub const CARTILAGE_INTENSITY: f32 = 0.75;

/// Cartilage shell thickness in multiples of the largest spacing component.
const SHELL_THICKNESS_SPACINGS: f64 = 2.0;

const NOISE_STREAM: u64 = 0x6e6f_6973; // "nois"
const LESION_STREAM_BASE: u64 = 0x6c65_7300; // "les" + bone index

fn default_dims() -> [usize; 3] {
    [64, 96, 96]
}
fn default_spacing() -> [f64; 3] {
    [1.0; 3]
}
fn default_lesion_count() -> [usize; 3] {
    [1, 1, 0]
}
fn default_radius_range() -> [f64; 2] {
    [1.5, 4.0]
}
fn default_delta() -> f64 {
    0.3
}
fn default_sigma() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    #[serde(default = "default_dims")]
    pub dims: [usize; 3],
    #[serde(default = "default_spacing")]
    pub spacing: [f64; 3],
    #[serde(default)]
    pub seed: u64,
    /// Lesions per bone: femur, tibia, patella.
    #[serde(default = "default_lesion_count")]
    pub lesion_count: [usize; 3],
    #[serde(default = "default_radius_range")]
    pub lesion_radius_range_mm: [f64; 2],
    /// Intensity added to bone tissue inside a lesion.
    #[serde(default = "default_delta")]
    pub lesion_intensity_delta: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            spacing: default_spacing(),
            seed: 0,
            lesion_count: default_lesion_count(),
            lesion_radius_range_mm: default_radius_range(),
            lesion_intensity_delta: default_delta(),
            noise_sigma: default_sigma(),
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 32) {
            return Err(Error::GeometryTooSmall(format!(
                "dims must be at least 32 per axis, got {:?}",
                self.dims
            )));
        }
        let [lo, hi] = self.lesion_radius_range_mm;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "lesion radius range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if !(self.lesion_intensity_delta.is_finite() && self.lesion_intensity_delta > 0.0) {
            return Err(Error::InvalidArgument(
                "lesion intensity delta must be positive".into(),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise sigma must be non-negative".into(),
            ));
        }
        Geometry::new(self.dims, self.spacing, [0.0; 3])?;
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::new(self.dims, self.spacing, [0.0; 3]).expect("validated")
    }
}

/// Axis-aligned ellipsoid in physical mm, centered at voxel coordinates.
#[derive(Debug, Clone, Copy)]
struct Ellipsoid {
    center_vox: [f64; 3],
    semi_mm: [f64; 3],
}

impl Ellipsoid {
    /// Squared normalized radius; `<= 1` is inside.
    #[inline]
    fn norm2(&self, v: [f64; 3], spacing: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            let t = (v[d] - self.center_vox[d]) * spacing[d] / self.semi_mm[d];
            s += t * t;
        }
        s
    }

    fn min_semi(&self) -> f64 {
        self.semi_mm.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct Layout {
    bones: [Ellipsoid; 3],
    shells: [Ellipsoid; 3],
}

/// Joint layout as fractions of the physical extent: femur superior, tibia
/// inferior, patella anterior; cartilage on the articular side of each bone.
fn layout(geom: &Geometry) -> Layout {
    let ext = [
        geom.dims[0] as f64 * geom.spacing[0],
        geom.dims[1] as f64 * geom.spacing[1],
        geom.dims[2] as f64 * geom.spacing[2],
    ];
    let center = |fz: f64, fy: f64, fx: f64| -> [f64; 3] {
        [
            fz * geom.dims[0] as f64,
            fy * geom.dims[1] as f64,
            fx * geom.dims[2] as f64,
        ]
    };
    let semi = |fz: f64, fy: f64, fx: f64| -> [f64; 3] { [fz * ext[0], fy * ext[1], fx * ext[2]] };

    let femur = Ellipsoid {
        center_vox: center(0.50, 0.30, 0.50),
        semi_mm: semi(0.30, 0.18, 0.26),
    };
    let tibia = Ellipsoid {
        center_vox: center(0.50, 0.72, 0.50),
        semi_mm: semi(0.30, 0.18, 0.26),
    };
    let patella = Ellipsoid {
        center_vox: center(0.50, 0.40, 0.14),
        semi_mm: semi(0.10, 0.10, 0.06),
    };

    let t = SHELL_THICKNESS_SPACINGS * geom.spacing.iter().copied().fold(0.0f64, f64::max);
    let inflate = |e: &Ellipsoid| Ellipsoid {
        center_vox: e.center_vox,
        semi_mm: [e.semi_mm[0] + t, e.semi_mm[1] + t, e.semi_mm[2] + t],
    };

    Layout {
        bones: [femur, tibia, patella],
        shells: [inflate(&femur), inflate(&tibia), inflate(&patella)],
    }
}

#[derive(Debug, Clone, Copy)]
struct Lesion {
    bone_index: usize,
    center_vox: [f64; 3],
    radius_mm: f64,
}

fn place_lesions(cfg: &PhantomConfig, lay: &Layout) -> Result<Vec<Lesion>> {
    let mut lesions = Vec::new();
    for (bi, &count) in cfg.lesion_count.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let bone = &lay.bones[bi];
        let mut rng = StreamRng::new(cfg.seed, LESION_STREAM_BASE + bi as u64);
        let max_spacing = cfg.spacing.iter().copied().fold(0.0f64, f64::max);
        for li in 0..count {
            let mut placed = false;
            for _attempt in 0..1000 {
                let radius =
                    rng.next_range(cfg.lesion_radius_range_mm[0], cfg.lesion_radius_range_mm[1]);
                // Conservative fit: center inside the shrunken ellipsoid so
                // the whole sphere stays strictly inside the bone.
                let margin = 1.0 - (radius + max_spacing) / bone.min_semi();
                if margin <= 0.0 {
                    continue;
                }
                let center = [
                    bone.center_vox[0]
                        + (2.0 * rng.next_uniform() - 1.0) * bone.semi_mm[0] / cfg.spacing[0],
                    bone.center_vox[1]
                        + (2.0 * rng.next_uniform() - 1.0) * bone.semi_mm[1] / cfg.spacing[1],
                    bone.center_vox[2]
                        + (2.0 * rng.next_uniform() - 1.0) * bone.semi_mm[2] / cfg.spacing[2],
                ];
                if bone.norm2(center, cfg.spacing) <= margin * margin {
                    lesions.push(Lesion {
                        bone_index: bi,
                        center_vox: center,
                        radius_mm: radius,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::GeometryTooSmall(format!(
                    "could not place lesion {li} inside {} (radius range {:?} mm)",
                    Bone::ALL[bi],
                    cfg.lesion_radius_range_mm
                )));
            }
        }
    }
    Ok(lesions)
}

#[inline]
fn in_sphere(v: [f64; 3], lesion: &Lesion, spacing: [f64; 3]) -> bool {
    let mut s = 0.0;
    for d in 0..3 {
        let t = (v[d] - lesion.center_vox[d]) * spacing[d];
        s += t * t;
    }
    s <= lesion.radius_mm * lesion.radius_mm
}

/// Generates the phantom image and its ground-truth label map. Identical
/// configurations produce bit-identical output.
pub fn generate_phantom(cfg: &PhantomConfig) -> Result<(Volume, LabelMap)> {
    cfg.validate()?;
    let geom = cfg.geometry();
    let lay = layout(&geom);

    // The bones must be pairwise disjoint; separation along any single axis
    // of their bounding boxes is sufficient.
    for i in 0..3 {
        for j in (i + 1)..3 {
            let a = &lay.bones[i];
            let b = &lay.bones[j];
            let mut gap = f64::NEG_INFINITY;
            for d in 0..3 {
                let dist = ((a.center_vox[d] - b.center_vox[d]) * cfg.spacing[d]).abs();
                let reach = a.semi_mm[d] + b.semi_mm[d];
                gap = gap.max(dist - reach);
            }
            if gap <= 0.0 {
                return Err(Error::GeometryTooSmall(format!(
                    "bones {i} and {j} would touch at dims {:?}",
                    cfg.dims
                )));
            }
        }
    }

    let lesions = place_lesions(cfg, &lay)?;
    let spacing = cfg.spacing;

    let label_at = move |v: [f64; 3], lay: &Layout, lesions: &[Lesion]| -> u8 {
        for (bi, bone) in lay.bones.iter().enumerate() {
            if bone.norm2(v, spacing) <= 1.0 {
                for lesion in lesions {
                    if lesion.bone_index == bi && in_sphere(v, lesion, spacing) {
                        return Bone::ALL[bi].lesion_class();
                    }
                }
                return Bone::ALL[bi].bone_class();
            }
        }
        // Cartilage: inside the inflated ellipsoid, outside the bone, on the
        // articular side (femur faces down, tibia up, patella toward the joint).
        let articular = [
            v[1] > lay.bones[0].center_vox[1],
            v[1] < lay.bones[1].center_vox[1],
            v[2] > lay.bones[2].center_vox[2],
        ];
        for (bi, shell) in lay.shells.iter().enumerate() {
            if articular[bi] && shell.norm2(v, spacing) <= 1.0 {
                return Bone::ALL[bi].cartilage_class();
            }
        }
        scheme::BACKGROUND
    };

    let n = geom.voxel_count();
    let mut labels = vec![0u8; n];
    par::fill_blocks(&mut labels, |start, chunk| {
        for (k, out) in chunk.iter_mut().enumerate() {
            let c = geom.coords_of(start + k);
            *out = label_at([c[0] as f64, c[1] as f64, c[2] as f64], &lay, &lesions);
        }
    });

    let rng = CounterRng::new(cfg.seed);
    let sigma = cfg.noise_sigma;
    let delta = cfg.lesion_intensity_delta;
    let labels_ref = &labels;
    let mut values = vec![0.0f32; n];
    par::fill_blocks(&mut values, |start, chunk| {
        for (k, out) in chunk.iter_mut().enumerate() {
            let i = start + k;
            let base = match labels_ref[i] {
                scheme::BACKGROUND => BACKGROUND_INTENSITY as f64,
                scheme::FEMORAL_BONE | scheme::TIBIAL_BONE | scheme::PATELLAR_BONE => {
                    BONE_INTENSITY as f64
                }
                scheme::FEMORAL_CARTILAGE
                | scheme::TIBIAL_CARTILAGE
                | scheme::PATELLAR_CARTILAGE => CARTILAGE_INTENSITY as f64,
                _ => BONE_INTENSITY as f64 + delta,
            };
            let noisy = base + sigma * rng.normal(NOISE_STREAM, i as u64);
            *out = noisy.clamp(0.0, 1.0) as f32;
        }
    });

    let image = Volume::from_vec(geom, values)?;
    let label_map = LabelMap::from_vec(geom, labels, scheme::NUM_CLASSES)?;
    Ok((image, label_map))
}

/// Deterministic stand-in for the inpainting reconstruction: lesion voxels
/// take the mean intensity of their host bone's non-lesion voxels, everything
/// else passes through unchanged.
pub fn simulate_reconstruction(x: &Volume, labels: &LabelMap) -> Result<Volume> {
    x.geometry()
        .ensure_same_grid(labels.geometry(), "simulate_reconstruction")?;
    let values = x.as_slice();
    let lab = labels.as_slice();
    let n = values.len();

    let mut replacement = [f64::NAN; 3];
    for (bi, bone) in Bone::ALL.iter().enumerate() {
        let bone_class = bone.bone_class();
        let count = par::count_where(n, |i| lab[i] == bone_class);
        if count > 0 {
            let sum = par::stable_sum(n, |i| {
                if lab[i] == bone_class {
                    values[i] as f64
                } else {
                    0.0
                }
            });
            replacement[bi] = sum / count as f64;
        }
    }

    let mut out = vec![0.0f32; n];
    par::fill_blocks(&mut out, |start, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            let i = start + k;
            let mut value = values[i];
            for (bi, bone) in Bone::ALL.iter().enumerate() {
                if lab[i] == bone.lesion_class() && replacement[bi].is_finite() {
                    value = replacement[bi] as f32;
                    break;
                }
            }
            *v = value;
        }
    });
    Volume::from_vec(*x.geometry(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::error_map;
    use crate::mask::BinaryMask;

    #[test]
    fn deterministic_generation() {
        let cfg = PhantomConfig {
            seed: 7,
            ..PhantomConfig::default()
        };
        let (img1, lab1) = generate_phantom(&cfg).unwrap();
        let (img2, lab2) = generate_phantom(&cfg).unwrap();
        assert_eq!(img1, img2);
        assert_eq!(lab1, lab2);

        let other = generate_phantom(&PhantomConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(img1.as_slice(), other.0.as_slice());
    }

    #[test]
    fn zero_lesions_means_no_lesion_labels() {
        let cfg = PhantomConfig {
            lesion_count: [0, 0, 0],
            ..PhantomConfig::default()
        };
        let (_, labels) = generate_phantom(&cfg).unwrap();
        for c in scheme::lesion_classes() {
            assert_eq!(labels.class_count(c), 0);
        }
        for c in scheme::bone_classes() {
            assert!(labels.class_count(c) > 0, "bone {c} missing");
        }
        for c in scheme::cartilage_classes() {
            assert!(labels.class_count(c) > 0, "cartilage {c} missing");
        }
    }

    #[test]
    fn lesions_sit_strictly_inside_their_bone() {
        let cfg = PhantomConfig {
            seed: 3,
            lesion_count: [2, 1, 0],
            ..PhantomConfig::default()
        };
        let (_, labels) = generate_phantom(&cfg).unwrap();
        assert!(labels.class_count(scheme::FEMORAL_LESION) > 0);
        assert!(labels.class_count(scheme::TIBIAL_LESION) > 0);
        // every lesion voxel is 26-surrounded by lesion or its host bone
        let geom = *labels.geometry();
        let [nz, ny, nx] = geom.dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let l = labels.get(z, y, x);
                    let host = match l {
                        scheme::FEMORAL_LESION => scheme::FEMORAL_BONE,
                        scheme::TIBIAL_LESION => scheme::TIBIAL_BONE,
                        _ => continue,
                    };
                    for dz in -1isize..=1 {
                        for dy in -1isize..=1 {
                            for dx in -1isize..=1 {
                                let zz = (z as isize + dz).clamp(0, nz as isize - 1) as usize;
                                let yy = (y as isize + dy).clamp(0, ny as isize - 1) as usize;
                                let xx = (x as isize + dx).clamp(0, nx as isize - 1) as usize;
                                let nb = labels.get(zz, yy, xx);
                                assert!(
                                    nb == l || nb == host,
                                    "lesion touches class {nb} at ({zz},{yy},{xx})"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lesion_contrast_matches_delta() {
        let cfg = PhantomConfig {
            seed: 11,
            lesion_count: [2, 2, 0],
            ..PhantomConfig::default()
        };
        let (img, labels) = generate_phantom(&cfg).unwrap();
        let mean_of = |classes: &[u8]| -> f64 {
            let m = labels.classes_mask(classes);
            let sel = m.as_slice();
            let vals = img.as_slice();
            let count = m.count();
            let sum: f64 = sel
                .iter()
                .zip(vals)
                .filter(|(s, _)| **s)
                .map(|(_, v)| *v as f64)
                .sum();
            sum / count as f64
        };
        let lesion_mean = mean_of(&[scheme::FEMORAL_LESION, scheme::TIBIAL_LESION]);
        let bone_mean = mean_of(&[scheme::FEMORAL_BONE, scheme::TIBIAL_BONE]);
        let contrast = lesion_mean - bone_mean;
        assert!(
            (contrast - cfg.lesion_intensity_delta).abs() <= 2.0 * cfg.noise_sigma,
            "contrast {contrast} vs delta {}",
            cfg.lesion_intensity_delta
        );
    }

    #[test]
    fn cartilage_shells_touch_their_bone() {
        let (_, labels) = generate_phantom(&PhantomConfig::default()).unwrap();
        let geom = *labels.geometry();
        for bone in Bone::ALL {
            let shell = labels.class_mask(bone.cartilage_class());
            assert!(!shell.is_empty());
            let bone_mask = labels.class_mask(bone.bone_class());
            let [nz, ny, nx] = geom.dims;
            let mut touches = false;
            'outer: for z in 0..nz {
                for y in 0..ny {
                    for x in 0..nx {
                        if !shell.get(z, y, x) {
                            continue;
                        }
                        let neighbors = [
                            (z.wrapping_sub(1), y, x),
                            (z + 1, y, x),
                            (z, y.wrapping_sub(1), x),
                            (z, y + 1, x),
                            (z, y, x.wrapping_sub(1)),
                            (z, y, x + 1),
                        ];
                        for (zz, yy, xx) in neighbors {
                            if zz < nz && yy < ny && xx < nx && bone_mask.get(zz, yy, xx) {
                                touches = true;
                                break 'outer;
                            }
                        }
                    }
                }
            }
            assert!(touches, "{bone} cartilage does not touch its bone");
        }
    }

    #[test]
    fn reconstruction_identity_without_lesions() {
        let cfg = PhantomConfig {
            lesion_count: [0, 0, 0],
            ..PhantomConfig::default()
        };
        let (img, labels) = generate_phantom(&cfg).unwrap();
        let recon = simulate_reconstruction(&img, &labels).unwrap();
        assert_eq!(recon, img);
    }

    #[test]
    fn reconstruction_changes_only_lesion_voxels() {
        let cfg = PhantomConfig {
            seed: 5,
            ..PhantomConfig::default()
        };
        let (img, labels) = generate_phantom(&cfg).unwrap();
        let recon = simulate_reconstruction(&img, &labels).unwrap();
        let lesion_mask: BinaryMask = labels.classes_mask(&scheme::lesion_classes());
        let e = error_map(&img, &recon).unwrap();
        for (i, &err) in e.volume().as_slice().iter().enumerate() {
            if !lesion_mask.as_slice()[i] {
                assert_eq!(err, 0.0, "error outside lesion at {i}");
            }
        }
        // errors concentrate inside lesions
        let inside: f64 = e
            .volume()
            .as_slice()
            .iter()
            .zip(lesion_mask.as_slice())
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v as f64)
            .sum::<f64>()
            / lesion_mask.count() as f64;
        assert!(inside > 0.0);
    }
}

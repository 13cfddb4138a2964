//! Batch manifest: the label scheme plus one record per case, with all paths
//! resolved relative to the manifest file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use kneeseg::scheme::{self, Bone};
use kneeseg::CaseRecord;

/// Classes assigned to one bone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoneClasses {
    pub bone: Bone,
    pub bone_class: u8,
    pub cartilage_class: u8,
    pub lesion_class: u8,
}

/// Declares `K`, class names, and the bone -> class mapping. Defaults to the
/// 10-class knee scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelScheme {
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub bones: Vec<BoneClasses>,
}

impl Default for LabelScheme {
    fn default() -> Self {
        Self {
            num_classes: scheme::NUM_CLASSES,
            class_names: scheme::CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            bones: Bone::ALL
                .iter()
                .map(|&bone| BoneClasses {
                    bone,
                    bone_class: bone.bone_class(),
                    cartilage_class: bone.cartilage_class(),
                    lesion_class: bone.lesion_class(),
                })
                .collect(),
        }
    }
}

impl LabelScheme {
    pub fn class_name(&self, class: u8) -> String {
        self.class_names
            .get(class as usize)
            .cloned()
            .unwrap_or_else(|| format!("class_{class}"))
    }

    pub fn lesion_classes(&self) -> Vec<u8> {
        self.bones.iter().map(|b| b.lesion_class).collect()
    }

    pub fn bone_classes(&self) -> Vec<u8> {
        self.bones.iter().map(|b| b.bone_class).collect()
    }

    /// All non-background classes, the default evaluation set.
    pub fn evaluable_classes(&self) -> Vec<u8> {
        (1..self.num_classes as u8).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_classes > 256 {
            bail!("label scheme must declare 2..=256 classes");
        }
        if self.class_names.len() != self.num_classes {
            bail!(
                "label scheme declares {} classes but names {}",
                self.num_classes,
                self.class_names.len()
            );
        }
        for b in &self.bones {
            for c in [b.bone_class, b.cartilage_class, b.lesion_class] {
                if c as usize >= self.num_classes {
                    bail!("bone `{}` references class {c} >= K", b.bone);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub label_scheme: LabelScheme,
    pub cases: Vec<CaseRecord>,
}

impl Manifest {
    /// Parses a manifest, resolves relative paths against its directory, and
    /// validates ids, the scheme, and the existence of every referenced file.
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        manifest.label_scheme.validate()?;

        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for case in &mut manifest.cases {
            if let Some(img) = case.image.as_mut() {
                resolve(img);
            }
            resolve(&mut case.ground_truth);
            for p in case.predictions.values_mut() {
                resolve(p);
            }
            if let Some(r) = case.reconstruction.as_mut() {
                resolve(r);
            }
            for p in case.lesion_probabilities.values_mut() {
                resolve(p);
            }
        }

        if manifest.cases.is_empty() {
            bail!("manifest has no cases");
        }
        let mut seen = BTreeSet::new();
        for case in &manifest.cases {
            if case.case_id.is_empty() {
                bail!("empty case_id in manifest");
            }
            if !seen.insert(case.case_id.clone()) {
                bail!("duplicate case_id `{}`", case.case_id);
            }
            if let Some(g) = case.grade {
                if g > 4 {
                    bail!("case `{}` has grade {g}; expected 0-4", case.case_id);
                }
            }
            let mut referenced: Vec<&PathBuf> = vec![&case.ground_truth];
            referenced.extend(case.image.iter());
            referenced.extend(case.predictions.values());
            referenced.extend(case.reconstruction.iter());
            referenced.extend(case.lesion_probabilities.values());
            for p in referenced {
                if !p.exists() {
                    bail!("case `{}`: missing file {}", case.case_id, p.display());
                }
            }
        }
        Ok(manifest)
    }

    /// Union of model names across all cases, sorted.
    pub fn model_names(&self) -> Vec<String> {
        let mut names: BTreeSet<String> = BTreeSet::new();
        for case in &self.cases {
            names.extend(case.predictions.keys().cloned());
        }
        names.into_iter().collect()
    }
}

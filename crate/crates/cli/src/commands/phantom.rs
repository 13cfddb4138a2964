//! `kneeseg phantom`: writes seeded phantom cases plus a ready-to-edit
//! manifest. The generated prediction entry points at the ground truth;
//! replace it with real model output for meaningful evaluation numbers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};

use kneeseg::io;
use kneeseg::phantom::{generate_phantom, PhantomConfig};
use kneeseg::CaseRecord;

use crate::manifest::{LabelScheme, Manifest};

pub struct PhantomArgs {
    pub out_dir: PathBuf,
    pub base: PhantomConfig,
    pub cases: usize,
}

pub fn run(args: &PhantomArgs) -> Result<()> {
    anyhow::ensure!(args.cases >= 1, "need at least one case");
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut records = Vec::with_capacity(args.cases);
    for i in 0..args.cases {
        let cfg = PhantomConfig {
            seed: args.base.seed.wrapping_add(i as u64),
            ..args.base.clone()
        };
        let (image, labels) = generate_phantom(&cfg)?;
        let case_id = format!("case_{i:03}");
        let dir = args.out_dir.join(&case_id);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        io::write_scalar(&image, dir.join("image.mhd"))?;
        io::write_labels(&labels, dir.join("labels.mhd"))?;

        let rel = |name: &str| PathBuf::from(format!("{case_id}/{name}"));
        records.push(CaseRecord {
            case_id: case_id.clone(),
            image: Some(rel("image.mhd")),
            ground_truth: rel("labels.mhd"),
            predictions: BTreeMap::from([("reference".to_string(), rel("labels.mhd"))]),
            reconstruction: None,
            lesion_probabilities: BTreeMap::new(),
            // deterministic spread over the grade range for stratified reports
            grade: Some((i % 5) as u8),
        });
    }

    let manifest = Manifest {
        label_scheme: LabelScheme::default(),
        cases: records,
    };
    let path = args.out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;

    println!(
        "phantom: wrote {} case(s) and {}",
        args.cases,
        path.display()
    );
    Ok(())
}

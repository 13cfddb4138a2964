//! `kneeseg augment`: one seeded affine transform applied jointly to an
//! image/label pair.

use std::path::PathBuf;

use anyhow::{Context, Result};

use kneeseg::augment::{random_affine, AugmentConfig};
use kneeseg::io;

pub struct AugmentArgs {
    pub image: PathBuf,
    pub labels: PathBuf,
    pub out_dir: PathBuf,
    pub config: AugmentConfig,
}

pub fn run(args: &AugmentArgs) -> Result<()> {
    let image =
        io::read_scalar(&args.image).with_context(|| format!("image {}", args.image.display()))?;
    let labels = io::read_labels(&args.labels)
        .with_context(|| format!("labels {}", args.labels.display()))?;
    let (aug_image, aug_labels) = random_affine(&image, &labels, &args.config)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    io::write_scalar(&aug_image, args.out_dir.join("image.mhd"))?;
    io::write_labels(&aug_labels, args.out_dir.join("labels.mhd"))?;
    println!("augment: wrote pair to {}", args.out_dir.display());
    Ok(())
}

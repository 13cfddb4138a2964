//! `kneeseg anomaly`: reconstruction-error map, focal weight map, and (when
//! labels are given) the dilated-mask erased input.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use kneeseg::io;
use kneeseg::losses::{error_map, focal_weights, prepare_masked_input};
use kneeseg::phantom::simulate_reconstruction;

use crate::config::RunConfig;

pub struct AnomalyArgs {
    pub image: PathBuf,
    pub recon: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

pub fn run(args: &AnomalyArgs) -> Result<()> {
    if args.recon.is_none() && args.labels.is_none() {
        bail!("anomaly needs --recon or --labels to derive a reconstruction");
    }
    let image =
        io::read_scalar(&args.image).with_context(|| format!("image {}", args.image.display()))?;
    let labels = match &args.labels {
        Some(p) => Some(io::read_labels(p).with_context(|| format!("labels {}", p.display()))?),
        None => None,
    };
    let recon = match &args.recon {
        Some(p) => io::read_scalar(p).with_context(|| format!("reconstruction {}", p.display()))?,
        None => simulate_reconstruction(&image, labels.as_ref().expect("checked above"))?,
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    let e = error_map(&image, &recon)?;
    let f = focal_weights(&e, args.config.loss.beta);
    io::write_scalar(e.volume(), args.out_dir.join("error_map.mhd"))?;
    io::write_scalar(&f, args.out_dir.join("focal_weights.mhd"))?;
    if args.recon.is_none() {
        io::write_scalar(&recon, args.out_dir.join("reconstruction.mhd"))?;
    }

    if let Some(labels) = &labels {
        let scheme = crate::manifest::LabelScheme::default();
        let bone_classes: Vec<u8> = scheme
            .bone_classes()
            .into_iter()
            .filter(|&c| (c as usize) < labels.num_classes())
            .collect();
        if !bone_classes.is_empty() {
            let masked = prepare_masked_input(&image, labels, &bone_classes, &args.config.loss)?;
            io::write_scalar(&masked, args.out_dir.join("masked_input.mhd"))?;
        }
    }

    println!("anomaly: wrote maps to {}", args.out_dir.display());
    Ok(())
}

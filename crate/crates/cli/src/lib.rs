//! Command-line front end for the kneeseg evaluation core.
//!
//! Subcommands: `eval`, `detect`, `anomaly`, `phantom`, `augment`, `stats`.
//! Exit codes: 0 on success, 1 on batch-level failure, 2 on invalid
//! arguments. Re-running any command with the same inputs, seeds, and flags
//! produces byte-identical report payloads regardless of `--jobs`; only the
//! reports' `meta` block (timestamp) varies.

use std::fmt;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use kneeseg::augment::AugmentConfig;
use kneeseg::morphology::Connectivity;
use kneeseg::phantom::PhantomConfig;

pub mod commands;
pub mod config;
pub mod manifest;
pub mod report;

use config::RunConfig;

/// An error in how the tool was invoked; mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(
    name = "kneeseg",
    version,
    about = "Anomaly-aware knee segmentation evaluation toolkit"
)]
pub struct Cli {
    /// Worker threads for batch commands (0 = all cores). Results do not
    /// depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct CommonEvalArgs {
    /// Manifest JSON listing cases and the label scheme.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Optional run-config JSON; defaults mirror the published constants.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Component connectivity: 6, 18, or 26.
    #[arg(long)]
    pub connectivity: Option<u8>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate predictions against ground truth (DSC/ASD/HD + HD*).
    Eval {
        #[command(flatten)]
        common: CommonEvalArgs,
        /// Skip the largest-component post-processing filter.
        #[arg(long)]
        no_postprocess: bool,
        /// Classes to evaluate, comma separated (default: every
        /// non-background class of the scheme).
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<u8>>,
    },
    /// Bone-wise lesion detection sweeps and ROC/AUC.
    Detect {
        #[command(flatten)]
        common: CommonEvalArgs,
        /// Model to sweep (needed when the manifest has several).
        #[arg(long)]
        model: Option<String>,
        /// Lesion size thresholds in mm^3, comma separated.
        #[arg(long, value_delimiter = ',')]
        size_thresholds: Option<Vec<f64>>,
        /// Softmax probability thresholds, comma separated.
        #[arg(long, value_delimiter = ',')]
        prob_thresholds: Option<Vec<f64>>,
    },
    /// Error map, focal weight map, and masked input for one image.
    Anomaly {
        #[arg(long)]
        image: PathBuf,
        /// Reconstruction volume (real model output).
        #[arg(long)]
        recon: Option<PathBuf>,
        /// Label map; derives a simulated lesion-free reconstruction and the
        /// masked input.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate seeded phantom cases plus a manifest.
    Phantom {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of cases (seeds `seed..seed+cases`).
        #[arg(long, default_value_t = 1)]
        cases: usize,
        /// Voxel counts as `nz,ny,nx`.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Spacing in mm as `sz,sy,sx`.
        #[arg(long, value_delimiter = ',')]
        spacing: Option<Vec<f64>>,
        /// Lesions per bone as `femur,tibia,patella`.
        #[arg(long, value_delimiter = ',')]
        lesions: Option<Vec<usize>>,
        /// Lesion radius range in mm as `lo,hi`.
        #[arg(long, value_delimiter = ',')]
        lesion_radius: Option<Vec<f64>>,
        #[arg(long)]
        lesion_delta: Option<f64>,
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Apply one seeded affine augmentation to an image/label pair.
    Augment {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Uniform scale range as `lo,hi`.
        #[arg(long, value_delimiter = ',')]
        scale_range: Option<Vec<f64>>,
        /// Maximum rotation in degrees.
        #[arg(long)]
        rotation_max: Option<f64>,
        /// Maximum translation per axis in voxels.
        #[arg(long)]
        translation_max: Option<f64>,
    },
    /// Tukey HSD across per-case metric CSVs.
    Stats {
        /// per_case.csv files, one or more.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        /// Group label per input (default: file stem).
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        /// Metric column: dsc, asd_mm, hd_mm, or hd_pre_mm.
        #[arg(long)]
        metric: String,
        /// Class id the samples are drawn from.
        #[arg(long)]
        class_id: u8,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn triple<T: Copy>(v: Vec<T>, what: &str) -> Result<[T; 3]> {
    if v.len() != 3 {
        return Err(usage(format!("{what} expects 3 comma-separated values")));
    }
    Ok([v[0], v[1], v[2]])
}

fn pair<T: Copy>(v: Vec<T>, what: &str) -> Result<[T; 2]> {
    if v.len() != 2 {
        return Err(usage(format!("{what} expects 2 comma-separated values")));
    }
    Ok([v[0], v[1]])
}

fn load_config(path: Option<&PathBuf>, connectivity: Option<u8>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path.map(|p| p.as_path()))?;
    if let Some(c) = connectivity {
        cfg.connectivity = Connectivity::from_u8(c).map_err(|e| usage(e.to_string()))?;
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Eval {
            common,
            no_postprocess,
            classes,
        } => {
            let mut cfg = load_config(common.config.as_ref(), common.connectivity)?;
            if no_postprocess {
                cfg.postprocess = false;
            }
            if let Some(c) = classes {
                if c.is_empty() || c.contains(&0) {
                    return Err(usage(
                        "--classes must be non-empty and exclude background 0",
                    ));
                }
                cfg.classes = Some(c);
            }
            commands::eval::run(&commands::eval::EvalArgs {
                manifest: common.manifest,
                config: cfg,
                out_dir: common.out_dir,
            })
        }
        Command::Detect {
            common,
            model,
            size_thresholds,
            prob_thresholds,
        } => {
            let mut cfg = load_config(common.config.as_ref(), common.connectivity)?;
            if let Some(s) = size_thresholds {
                if s.is_empty() {
                    return Err(usage("--size-thresholds must not be empty"));
                }
                cfg.size_thresholds_mm3 = s;
            }
            if let Some(p) = prob_thresholds {
                cfg.prob_thresholds = p;
            }
            commands::detect::run(&commands::detect::DetectArgs {
                manifest: common.manifest,
                config: cfg,
                out_dir: common.out_dir,
                model,
            })
        }
        Command::Anomaly {
            image,
            recon,
            labels,
            config,
            out_dir,
        } => {
            if recon.is_none() && labels.is_none() {
                return Err(usage("anomaly needs --recon or --labels"));
            }
            let cfg = load_config(config.as_ref(), None)?;
            commands::anomaly::run(&commands::anomaly::AnomalyArgs {
                image,
                recon,
                labels,
                config: cfg,
                out_dir,
            })
        }
        Command::Phantom {
            out_dir,
            seed,
            cases,
            dims,
            spacing,
            lesions,
            lesion_radius,
            lesion_delta,
            noise_sigma,
        } => {
            let mut base = PhantomConfig {
                seed,
                ..PhantomConfig::default()
            };
            if let Some(d) = dims {
                base.dims = triple(d, "--dims")?;
            }
            if let Some(s) = spacing {
                base.spacing = triple(s, "--spacing")?;
            }
            if let Some(l) = lesions {
                base.lesion_count = triple(l, "--lesions")?;
            }
            if let Some(r) = lesion_radius {
                base.lesion_radius_range_mm = pair(r, "--lesion-radius")?;
            }
            if let Some(d) = lesion_delta {
                base.lesion_intensity_delta = d;
            }
            if let Some(s) = noise_sigma {
                base.noise_sigma = s;
            }
            base.validate().map_err(|e| usage(e.to_string()))?;
            commands::phantom::run(&commands::phantom::PhantomArgs {
                out_dir,
                base,
                cases,
            })
        }
        Command::Augment {
            image,
            labels,
            out_dir,
            seed,
            scale_range,
            rotation_max,
            translation_max,
        } => {
            let mut cfg = AugmentConfig {
                seed,
                ..AugmentConfig::default()
            };
            if let Some(s) = scale_range {
                cfg.scale_range = pair(s, "--scale-range")?;
            }
            if let Some(r) = rotation_max {
                cfg.rotation_deg_max = r;
            }
            if let Some(t) = translation_max {
                cfg.translation_vox_max = t;
            }
            commands::augment::run(&commands::augment::AugmentArgs {
                image,
                labels,
                out_dir,
                config: cfg,
            })
        }
        Command::Stats {
            inputs,
            labels,
            metric,
            class_id,
            out_dir,
        } => {
            if class_id == 0 {
                return Err(usage("--class-id 0 is the background class"));
            }
            commands::stats::run(&commands::stats::StatsArgs {
                inputs,
                labels,
                metric,
                class_id,
                out_dir,
            })
        }
    }
}

/// Runs a parsed command inside a rayon pool sized by `--jobs`.
pub fn run(cli: Cli) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        if cli.jobs == 0 {
            dispatch(cli.command)
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs)
                .build()
                .map_err(|e| usage(format!("cannot build a {}-thread pool: {e}", cli.jobs)))?;
            pool.install(|| dispatch(cli.command))
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        if cli.jobs > 1 {
            eprintln!("note: built without the `parallel` feature; --jobs is ignored");
        }
        dispatch(cli.command)
    }
}

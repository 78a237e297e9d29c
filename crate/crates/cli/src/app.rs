//! Command-line definitions and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use segfuse_core::metrics::{EvalOptions, HausdorffVariant, VolumeUnits};
use segfuse_core::Connectivity;

use crate::commands::{self, EvaluateArgs, ParamOverrides};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, PipelineConfig, SubjectStatus};

#[derive(Debug, Parser)]
#[command(
    name = "segfuse",
    version,
    about = "Fuse, post-process and evaluate lesion segmentation probability maps"
)]
pub struct Cli {
    /// Worker threads for per-subject work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average probability maps voxel-wise.
    Ensemble {
        #[arg(required = true, value_name = "MAP")]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated non-negative weights, one per input.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Threshold a probability map and clean up components.
    Postprocess {
        input: PathBuf,
        /// Output mask (uint8 NIfTI).
        #[arg(short, long)]
        output: PathBuf,
        /// Output JSON report.
        #[arg(long)]
        report: PathBuf,
        /// JSON file with post-processing parameters; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Score predicted masks against ground truth.
    Evaluate {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        /// CSV with columns subject_id,pred,gt (paths relative to the two directories).
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        summary: PathBuf,
        #[arg(long, default_value_t = Connectivity::default())]
        connectivity: Connectivity,
        #[arg(long, default_value_t = HausdorffVariant::default())]
        hd95_variant: HausdorffVariant,
        /// Report volume difference in mm³ instead of voxels.
        #[arg(long)]
        vd_mm3: bool,
    },
    /// Assign subjects to size-balanced cross-validation folds.
    Split {
        /// CSV with columns subject_id,lesion_volume.
        #[arg(long)]
        input: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        folds: PathBuf,
        #[arg(long)]
        summary: PathBuf,
    },
    /// Run ensemble, post-processing and evaluation for every subject in a config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Recompute subjects whose outputs already exist.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        params: ParamFlags,
    },
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct ParamFlags {
    #[arg(long)]
    pub base_threshold: Option<f32>,
    #[arg(long)]
    pub high_threshold: Option<f32>,
    #[arg(long = "min-peak-prob")]
    pub min_peak_probability: Option<f32>,
    #[arg(long)]
    pub small_case_cutoff: Option<usize>,
    #[arg(long)]
    pub connectivity: Option<Connectivity>,
}

impl From<ParamFlags> for ParamOverrides {
    fn from(f: ParamFlags) -> Self {
        ParamOverrides {
            base_threshold: f.base_threshold,
            high_threshold: f.high_threshold,
            min_peak_probability: f.min_peak_probability,
            small_case_cutoff: f.small_case_cutoff,
            connectivity: f.connectivity,
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ensemble {
            inputs,
            output,
            weights,
        } => commands::cmd_ensemble(&inputs, weights, &output),
        Command::Postprocess {
            input,
            output,
            report,
            config,
            params,
        } => {
            let params = commands::load_params(config.as_deref(), &params.into())?;
            commands::cmd_postprocess(&input, &params, &output, &report).map(|_| ())
        }
        Command::Evaluate {
            pred_dir,
            gt_dir,
            manifest,
            csv,
            summary,
            connectivity,
            hd95_variant,
            vd_mm3,
        } => {
            let options = EvalOptions {
                connectivity,
                hd95_variant,
                vd_units: if vd_mm3 {
                    VolumeUnits::Mm3
                } else {
                    VolumeUnits::Voxels
                },
            };
            commands::cmd_evaluate(&EvaluateArgs {
                pred_dir: &pred_dir,
                gt_dir: &gt_dir,
                manifest: &manifest,
                csv_out: &csv,
                summary_out: &summary,
                options,
                jobs: cli.jobs,
            })
            .map(|_| ())
        }
        Command::Split {
            input,
            k,
            seed,
            folds,
            summary,
        } => commands::cmd_split(&input, k, seed, &folds, &summary),
        Command::Pipeline {
            config,
            force,
            params,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            cfg.apply_overrides(&params.into())?;
            let outcome = pipeline::run(&cfg, force, cli.jobs)?;
            for (id, status) in &outcome.subjects {
                match status {
                    SubjectStatus::Processed => eprintln!("{id}: done"),
                    SubjectStatus::Skipped => eprintln!("{id}: skipped, outputs present"),
                    SubjectStatus::Failed(msg) => eprintln!("{id}: failed: {msg}"),
                }
            }
            let failed = outcome.failures();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Partial(format!(
                    "{} of {} subjects failed: {}",
                    failed.len(),
                    outcome.subjects.len(),
                    failed.join(", ")
                )))
            }
        }
    }
}

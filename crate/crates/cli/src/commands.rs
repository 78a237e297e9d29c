//! Subcommand implementations. The pipeline reuses the same steps, so its
//! outputs match the ones produced by chaining the subcommands by hand.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use segfuse_core::metrics::{aggregate, evaluate_case, EvalOptions, MetricReport};
use segfuse_core::splits::{fold_summary, size_balanced_split};
use segfuse_core::{
    average_maps, postprocess, BinaryMask, Connectivity, EnsembleInput, PostprocessParams,
    PostprocessReport, ProbabilityMap,
};

use crate::error::{CliError, CliResult};
use crate::formats::{self, EvaluationSummary, SplitSummary, CSV_FORMAT_VERSION, FORMAT_VERSION};

/// Runs `f` on a pool with `jobs` threads (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if jobs == Some(0) {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Post-processing overrides given on the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub base_threshold: Option<f32>,
    pub high_threshold: Option<f32>,
    pub min_peak_probability: Option<f32>,
    pub small_case_cutoff: Option<usize>,
    pub connectivity: Option<Connectivity>,
}

impl ParamOverrides {
    pub fn apply(&self, mut p: PostprocessParams) -> CliResult<PostprocessParams> {
        if let Some(v) = self.base_threshold {
            p.base_threshold = v;
        }
        if let Some(v) = self.high_threshold {
            p.high_threshold = v;
        }
        if let Some(v) = self.min_peak_probability {
            p.min_peak_probability = v;
        }
        if let Some(v) = self.small_case_cutoff {
            p.small_case_cutoff = v;
        }
        if let Some(v) = self.connectivity {
            p.connectivity = v;
        }
        p.validate()?;
        Ok(p)
    }
}

pub fn fuse(inputs: &[PathBuf], weights: Option<Vec<f64>>) -> CliResult<ProbabilityMap> {
    if inputs.is_empty() {
        return Err(CliError::Validation(
            "at least one input map is required".into(),
        ));
    }
    let maps = inputs
        .iter()
        .map(|p| formats::read_probability_map(p))
        .collect::<CliResult<Vec<_>>>()?;
    let input = EnsembleInput::new(maps, weights)?;
    Ok(average_maps(&input)?)
}

pub fn cmd_ensemble(inputs: &[PathBuf], weights: Option<Vec<f64>>, output: &Path) -> CliResult<()> {
    let fused = fuse(inputs, weights)?;
    formats::write_probability_map(&fused, output)
}

pub fn postprocess_to_files(
    map: &ProbabilityMap,
    params: &PostprocessParams,
    mask_out: &Path,
    report_out: &Path,
) -> CliResult<(BinaryMask, PostprocessReport)> {
    let (mask, report) = postprocess(map, params)?;
    formats::write_mask(&mask, mask_out)?;
    formats::write_json(report_out, &report)?;
    Ok((mask, report))
}

pub fn load_params(
    config: Option<&Path>,
    overrides: &ParamOverrides,
) -> CliResult<PostprocessParams> {
    let base = match config {
        Some(path) => formats::read_json(path)?,
        None => PostprocessParams::default(),
    };
    overrides.apply(base)
}

pub fn cmd_postprocess(
    input: &Path,
    params: &PostprocessParams,
    mask_out: &Path,
    report_out: &Path,
) -> CliResult<PostprocessReport> {
    params.validate()?;
    let map = formats::read_probability_map(input)?;
    postprocess_to_files(&map, params, mask_out, report_out).map(|(_, r)| r)
}

/// Writes the per-case CSV and the aggregate JSON for `rows`.
pub fn write_evaluation(
    rows: &[(String, MetricReport)],
    options: &EvalOptions,
    csv_out: &Path,
    summary_out: &Path,
) -> CliResult<()> {
    let reports: Vec<MetricReport> = {
        let mut sorted: Vec<&(String, MetricReport)> = rows.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        sorted.into_iter().map(|(_, r)| r.clone()).collect()
    };
    let summary = EvaluationSummary::new(*options, aggregate(&reports)?);
    formats::write_atomic(csv_out, &formats::metrics_csv(rows)?)?;
    formats::write_json(summary_out, &summary)
}

pub struct EvaluateArgs<'a> {
    pub pred_dir: &'a Path,
    pub gt_dir: &'a Path,
    pub manifest: &'a Path,
    pub csv_out: &'a Path,
    pub summary_out: &'a Path,
    pub options: EvalOptions,
    pub jobs: Option<usize>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<Vec<(String, MetricReport)>> {
    let rows = formats::read_manifest(args.manifest)?;
    if rows.is_empty() {
        return Err(CliError::Validation("manifest lists no subjects".into()));
    }
    let cases: Vec<(String, PathBuf, PathBuf)> = rows
        .into_iter()
        .map(|r| {
            (
                r.subject_id,
                args.pred_dir.join(r.pred),
                args.gt_dir.join(r.gt),
            )
        })
        .collect();
    let missing: Vec<&str> = cases
        .iter()
        .filter(|(_, p, g)| !p.is_file() || !g.is_file())
        .map(|(id, _, _)| id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Io(format!(
            "missing prediction or ground truth for: {}",
            missing.join(", ")
        )));
    }

    let options = args.options;
    let results: Vec<CliResult<(String, MetricReport)>> = with_jobs(args.jobs, || {
        cases
            .par_iter()
            .map(|(id, pred, gt)| {
                let pred = formats::read_mask(pred)?;
                let gt = formats::read_mask(gt)?;
                let report = evaluate_case(&pred, &gt, &options)
                    .map_err(|e| CliError::from(e).context(id))?;
                Ok((id.clone(), report))
            })
            .collect()
    })?;
    let rows = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    write_evaluation(&rows, &options, args.csv_out, args.summary_out)?;
    Ok(rows)
}

pub fn cmd_split(
    cohort: &Path,
    k: usize,
    seed: u64,
    folds_out: &Path,
    summary_out: &Path,
) -> CliResult<()> {
    let records = formats::read_cohort(cohort)?;
    let fa = size_balanced_split(&records, k, seed)?;
    let summary = SplitSummary {
        format_version: FORMAT_VERSION,
        csv_format_version: CSV_FORMAT_VERSION,
        k,
        seed,
        subjects: records.len(),
        folds: fold_summary(&fa, &records)?,
    };
    formats::write_atomic(folds_out, &formats::folds_csv(&fa)?)?;
    formats::write_json(summary_out, &summary)
}

/// Evaluation settings as they appear in config files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub connectivity: Connectivity,
    pub hd95_variant: segfuse_core::metrics::HausdorffVariant,
    pub vd_units: segfuse_core::metrics::VolumeUnits,
}

impl From<EvaluationConfig> for EvalOptions {
    fn from(c: EvaluationConfig) -> Self {
        EvalOptions {
            connectivity: c.connectivity,
            hd95_variant: c.hd95_variant,
            vd_units: c.vd_units,
        }
    }
}

//! Per-subject fuse → post-process → evaluate runs driven by a JSON config.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! <subject_id>/probability.nii.gz
//! <subject_id>/mask.nii.gz
//! <subject_id>/postprocess.json
//! metrics.csv              (subjects with ground truth)
//! metrics_summary.json
//! ```
//!
//! Relative paths in the config are resolved against the config file's
//! directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use segfuse_core::metrics::{evaluate_case, EvalOptions, MetricReport};
use segfuse_core::PostprocessParams;

use crate::commands::{self, EvaluationConfig, ParamOverrides};
use crate::error::{CliError, CliResult};
use crate::formats::{self, FORMAT_VERSION};

pub const PROBABILITY_FILE: &str = "probability.nii.gz";
pub const MASK_FILE: &str = "mask.nii.gz";
pub const REPORT_FILE: &str = "postprocess.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_SUMMARY: &str = "metrics_summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectConfig {
    pub subject_id: String,
    pub maps: Vec<PathBuf>,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub format_version: u32,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub postprocess: PostprocessParams,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub subjects: Vec<SubjectConfig>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg: PipelineConfig = formats::read_json(path)?;
        if cfg.format_version != FORMAT_VERSION {
            return Err(CliError::Validation(format!(
                "{}: unsupported format_version {} (expected {FORMAT_VERSION})",
                path.display(),
                cfg.format_version
            )));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output_dir = base.join(&cfg.output_dir);
        for s in &mut cfg.subjects {
            for m in &mut s.maps {
                *m = base.join(&*m);
            }
            if let Some(gt) = &mut s.ground_truth {
                *gt = base.join(&*gt);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.postprocess.validate()?;
        if self.subjects.is_empty() {
            return Err(CliError::Validation(
                "pipeline config lists no subjects".into(),
            ));
        }
        formats::check_unique_ids(self.subjects.iter().map(|s| s.subject_id.as_str()))?;
        for s in &self.subjects {
            let id = &s.subject_id;
            if id.contains(['/', '\\']) || id == "." || id == ".." {
                return Err(CliError::Validation(format!(
                    "subject id {id:?} is not usable as a directory name"
                )));
            }
            if s.maps.is_empty() {
                return Err(CliError::Validation(format!(
                    "subject {id:?} lists no probability maps"
                )));
            }
        }
        Ok(())
    }

    /// Applies command-line overrides. `--connectivity` sets both the
    /// post-processing and the evaluation connectivity.
    pub fn apply_overrides(&mut self, o: &ParamOverrides) -> CliResult<()> {
        self.postprocess = o.apply(self.postprocess)?;
        if let Some(c) = o.connectivity {
            self.evaluation.connectivity = c;
        }
        Ok(())
    }

    pub fn subject_dir(&self, id: &str) -> PathBuf {
        self.output_dir.join(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubjectStatus {
    Processed,
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    /// In config order.
    pub subjects: Vec<(String, SubjectStatus)>,
    pub metrics_written: bool,
}

impl PipelineOutcome {
    pub fn failures(&self) -> Vec<&str> {
        self.subjects
            .iter()
            .filter(|(_, s)| matches!(s, SubjectStatus::Failed(_)))
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

fn outputs_present(dir: &Path) -> bool {
    [PROBABILITY_FILE, MASK_FILE, REPORT_FILE]
        .iter()
        .all(|f| dir.join(f).is_file())
}

fn run_subject(cfg: &PipelineConfig, s: &SubjectConfig, force: bool) -> SubjectStatus {
    let dir = cfg.subject_dir(&s.subject_id);
    if !force && outputs_present(&dir) {
        return SubjectStatus::Skipped;
    }
    let result = (|| -> CliResult<()> {
        let probability = dir.join(PROBABILITY_FILE);
        let fused = commands::fuse(&s.maps, s.weights.clone())?;
        formats::write_probability_map(&fused, &probability)?;
        commands::postprocess_to_files(
            &fused,
            &cfg.postprocess,
            &dir.join(MASK_FILE),
            &dir.join(REPORT_FILE),
        )?;
        Ok(())
    })();
    match result {
        Ok(()) => SubjectStatus::Processed,
        Err(e) => SubjectStatus::Failed(e.to_string()),
    }
}

fn evaluate_subject(
    cfg: &PipelineConfig,
    s: &SubjectConfig,
    gt: &Path,
    options: &EvalOptions,
) -> CliResult<MetricReport> {
    let pred = formats::read_mask(&cfg.subject_dir(&s.subject_id).join(MASK_FILE))?;
    let gt = formats::read_mask(gt)?;
    Ok(evaluate_case(&pred, &gt, options)?)
}

/// Runs every subject, continuing past failures. Metrics cover the
/// subjects that have ground truth and a mask on disk; they are rewritten
/// only when some subject was processed in this run or a metrics file is
/// missing.
pub fn run(cfg: &PipelineConfig, force: bool, jobs: Option<usize>) -> CliResult<PipelineOutcome> {
    let options: EvalOptions = cfg.evaluation.into();
    commands::with_jobs(jobs, || {
        let statuses: Vec<SubjectStatus> = cfg
            .subjects
            .par_iter()
            .map(|s| run_subject(cfg, s, force))
            .collect();

        let mut subjects: Vec<(String, SubjectStatus)> = cfg
            .subjects
            .iter()
            .map(|s| s.subject_id.clone())
            .zip(statuses)
            .collect();

        let evaluable: Vec<(usize, &SubjectConfig, &PathBuf)> = cfg
            .subjects
            .iter()
            .enumerate()
            .filter(|(i, _)| !matches!(subjects[*i].1, SubjectStatus::Failed(_)))
            .filter_map(|(i, s)| s.ground_truth.as_ref().map(|gt| (i, s, gt)))
            .collect();

        let any_processed = subjects.iter().any(|(_, s)| *s == SubjectStatus::Processed);
        let csv_path = cfg.output_dir.join(METRICS_CSV);
        let summary_path = cfg.output_dir.join(METRICS_SUMMARY);
        let metrics_missing = !csv_path.is_file() || !summary_path.is_file();
        if evaluable.is_empty() || !(any_processed || metrics_missing || force) {
            return Ok(PipelineOutcome {
                subjects,
                metrics_written: false,
            });
        }

        let evaluated: Vec<(usize, CliResult<MetricReport>)> = evaluable
            .par_iter()
            .map(|(i, s, gt)| (*i, evaluate_subject(cfg, s, gt, &options)))
            .collect();
        let mut rows = Vec::new();
        for (i, r) in evaluated {
            match r {
                Ok(report) => rows.push((subjects[i].0.clone(), report)),
                Err(e) => subjects[i].1 = SubjectStatus::Failed(format!("evaluation: {e}")),
            }
        }
        if rows.is_empty() {
            return Ok(PipelineOutcome {
                subjects,
                metrics_written: false,
            });
        }
        commands::write_evaluation(&rows, &options, &csv_path, &summary_path)?;
        Ok(PipelineOutcome {
            subjects,
            metrics_written: true,
        })
    })?
}

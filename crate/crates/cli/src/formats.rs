//! On-disk tables and reports.
//!
//! * per-case metrics CSV: `subject_id,dice,lesion_f1,slc,vd,hd95,pred_components,gt_components`,
//!   undefined hd95 as an empty field
//! * fold CSV: `subject_id,fold`
//! * cohort CSV (input): `subject_id,lesion_volume`
//! * evaluation manifest CSV (input): `subject_id,pred,gt`
//!
//! JSON reports carry a `format_version` field. CSV layouts are fixed by
//! their header row; their version is recorded as `csv_format_version` in
//! the companion JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use segfuse_core::metrics::{AggregateReport, EvalOptions, MetricReport};
use segfuse_core::nifti::{self, Datatype};
use segfuse_core::splits::{FoldAssignment, FoldStats, SubjectRecord};
use segfuse_core::{BinaryMask, ProbabilityMap};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;
pub const CSV_FORMAT_VERSION: u32 = 1;

/// Writes through a sibling temporary file and a rename, so a file that
/// exists is always complete.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn nifti_bytes(
    v: &segfuse_core::Volume<f32>,
    datatype: Datatype,
    path: &Path,
) -> CliResult<Vec<u8>> {
    let raw = nifti::encode_volume(v, datatype)?;
    Ok(if nifti::is_gz_path(path) {
        nifti::gzip(&raw)?
    } else {
        raw
    })
}

/// Float32 NIfTI, gzip-compressed when the path ends in `.gz`.
pub fn write_probability_map(p: &ProbabilityMap, path: &Path) -> CliResult<()> {
    write_atomic(path, &nifti_bytes(p, Datatype::Float32, path)?)
}

/// Uint8 NIfTI, gzip-compressed when the path ends in `.gz`.
pub fn write_mask(m: &BinaryMask, path: &Path) -> CliResult<()> {
    write_atomic(path, &nifti_bytes(&m.to_f32(), Datatype::Uint8, path)?)
}

pub fn read_probability_map(path: &Path) -> CliResult<ProbabilityMap> {
    let v = nifti::read_volume(path).map_err(|e| CliError::from(e).context(path.display()))?;
    ProbabilityMap::new(v).map_err(|e| CliError::from(e).context(path.display()))
}

/// Reads a mask; any nonzero voxel is foreground.
pub fn read_mask(path: &Path) -> CliResult<BinaryMask> {
    let v = nifti::read_volume(path).map_err(|e| CliError::from(e).context(path.display()))?;
    Ok(BinaryMask::from_nonzero(&v))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetricRow {
    subject_id: String,
    dice: f64,
    lesion_f1: f64,
    slc: usize,
    vd: f64,
    hd95: Option<f64>,
    pred_components: usize,
    gt_components: usize,
}

/// Rows are written in ascending subject id order.
pub fn metrics_csv(rows: &[(String, MetricReport)]) -> CliResult<Vec<u8>> {
    let mut sorted: Vec<&(String, MetricReport)> = rows.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut w = csv::Writer::from_writer(Vec::new());
    for (id, r) in sorted {
        w.serialize(MetricRow {
            subject_id: id.clone(),
            dice: r.dice,
            lesion_f1: r.lesion_f1,
            slc: r.slc,
            vd: r.vd,
            hd95: r.hd95,
            pred_components: r.pred_components,
            gt_components: r.gt_components,
        })?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn read_metrics_csv(path: &Path) -> CliResult<Vec<(String, MetricReport)>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<MetricRow>()
        .map(|row| {
            let row = row?;
            Ok((
                row.subject_id,
                MetricReport {
                    dice: row.dice,
                    lesion_f1: row.lesion_f1,
                    slc: row.slc,
                    vd: row.vd,
                    hd95: row.hd95,
                    pred_components: row.pred_components,
                    gt_components: row.gt_components,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub format_version: u32,
    pub csv_format_version: u32,
    pub options: EvalOptions,
    pub aggregate: AggregateReport,
}

impl EvaluationSummary {
    pub fn new(options: EvalOptions, aggregate: AggregateReport) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            csv_format_version: CSV_FORMAT_VERSION,
            options,
            aggregate,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ManifestRow {
    pub subject_id: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

pub fn read_manifest(path: &Path) -> CliResult<Vec<ManifestRow>> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let rows: Vec<ManifestRow> = r
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::from(e).context(path.display()))?;
    check_unique_ids(rows.iter().map(|r| r.subject_id.as_str()))?;
    Ok(rows)
}

pub fn read_cohort(path: &Path) -> CliResult<Vec<SubjectRecord>> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| CliError::from(e).context(path.display()))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::from(e).context(path.display()))
}

pub fn folds_csv(fa: &FoldAssignment) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject_id", "fold"])?;
    for (id, fold) in &fa.folds {
        w.write_record([id.as_str(), &fold.to_string()])?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub format_version: u32,
    pub csv_format_version: u32,
    pub k: usize,
    pub seed: u64,
    pub subjects: usize,
    pub folds: Vec<FoldStats>,
}

pub fn check_unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> CliResult<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(CliError::Validation("empty subject id".into()));
        }
        if !seen.insert(id) {
            return Err(CliError::Validation(format!("duplicate subject id {id:?}")));
        }
    }
    Ok(())
}

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segfuse_core::nifti::{self, Datatype};
use segfuse_core::{BinaryMask, Grid, Volume};

pub fn segfuse<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_segfuse"))
        .args(args)
        .output()
        .expect("run segfuse")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        stderr(o)
    );
}

pub fn write_map(path: &Path, v: &Volume<f32>) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    nifti::write_volume(v, path, Datatype::Float32, nifti::is_gz_path(path)).unwrap();
}

pub fn write_mask(path: &Path, m: &BinaryMask) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    nifti::write_mask(m, path, nifti::is_gz_path(path)).unwrap();
}

/// Every file under `dir`, keyed by its path relative to `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub struct Subject {
    pub id: String,
    /// Relative to the corpus root.
    pub maps: Vec<String>,
    pub gt: String,
}

pub struct Corpus {
    pub root: PathBuf,
    pub subjects: Vec<Subject>,
}

struct Blob {
    center: [f64; 3],
    radius: f64,
    peak: f64,
}

fn blob_value(blobs: &[Blob], p: [usize; 3]) -> f64 {
    blobs
        .iter()
        .map(|b| {
            let d2: f64 = (0..3).map(|k| (p[k] as f64 - b.center[k]).powi(2)).sum();
            let r = d2.sqrt() / b.radius;
            if r >= 1.0 {
                0.0
            } else {
                b.peak * (1.0 - r * r).sqrt()
            }
        })
        .fold(0.0, f64::max)
}

/// Synthetic subjects: a few spherical lesions per subject, one noisy
/// probability map per scheme, and a ground-truth mask. Subject 0 carries a
/// lesion large enough to take the large-case branch.
pub fn synthetic_corpus(root: &Path, subjects: usize, schemes: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [28, 28, 20];
    let grid = Grid::new(dims, [1.0, 1.0, 1.5]).unwrap();
    let mut out = Vec::new();
    for s in 0..subjects {
        let id = format!("sub-{:02}", s + 1);
        let mut blobs = Vec::new();
        if s == 0 {
            blobs.push(Blob {
                center: [13.5, 13.5, 9.5],
                radius: 14.0,
                peak: 1.0,
            });
        }
        for _ in 0..rng.gen_range(2..5) {
            blobs.push(Blob {
                center: [
                    rng.gen_range(3.0..24.0),
                    rng.gen_range(3.0..24.0),
                    rng.gen_range(3.0..16.0),
                ],
                radius: rng.gen_range(1.5..4.0),
                peak: rng.gen_range(0.55..1.0),
            });
        }
        let gt = BinaryMask::from_fn(grid.clone(), |p| blob_value(&blobs, p) >= 0.45);
        let gt_name = format!("gt/{id}.nii.gz");
        write_mask(&root.join(&gt_name), &gt);

        let mut maps = Vec::new();
        for k in 0..schemes {
            let noise: Vec<f64> = (0..grid.len())
                .map(|_| rng.gen_range(-0.15..0.15))
                .collect();
            let v = Volume::from_fn(grid.clone(), |p| {
                let base = blob_value(&blobs, p);
                let i = grid.index(p[0], p[1], p[2]);
                let jitter = if base > 0.0 {
                    noise[i]
                } else {
                    noise[i].max(0.0) * 0.2
                };
                (base + jitter).clamp(0.0, 1.0) as f32
            });
            let name = format!("maps/{id}_scheme{k}.nii.gz");
            write_map(&root.join(&name), &v);
            maps.push(name);
        }
        out.push(Subject {
            id,
            maps,
            gt: gt_name,
        });
    }
    Corpus {
        root: root.to_path_buf(),
        subjects: out,
    }
}

impl Corpus {
    /// Writes a pipeline config next to the corpus and returns its path.
    pub fn pipeline_config(&self, output_dir: &str) -> PathBuf {
        let subjects: Vec<serde_json::Value> = self
            .subjects
            .iter()
            .map(
                |s| serde_json::json!({ "subject_id": s.id, "maps": s.maps, "ground_truth": s.gt }),
            )
            .collect();
        let cfg = serde_json::json!({
            "format_version": 1,
            "output_dir": output_dir,
            "subjects": subjects,
        });
        let path = self.root.join(format!("{output_dir}.json"));
        fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        path
    }

    /// Runs ensemble, postprocess and evaluate by hand into `out`, laid out
    /// like the pipeline output.
    pub fn manual_chain(&self, out: &Path, jobs: usize) {
        let jobs = jobs.to_string();
        let mut manifest = String::from("subject_id,pred,gt\n");
        for s in &self.subjects {
            let dir = out.join(&s.id);
            let prob = dir.join("probability.nii.gz");
            let mut args: Vec<PathBuf> =
                vec!["--jobs".into(), jobs.clone().into(), "ensemble".into()];
            args.extend(s.maps.iter().map(|m| self.root.join(m)));
            args.extend(["-o".into(), prob.clone()]);
            assert_ok(&segfuse(&args));
            assert_ok(&segfuse([
                "--jobs".as_ref(),
                jobs.as_ref(),
                "postprocess".as_ref(),
                prob.as_os_str(),
                "-o".as_ref(),
                dir.join("mask.nii.gz").as_os_str(),
                "--report".as_ref(),
                dir.join("postprocess.json").as_os_str(),
            ]));
            manifest.push_str(&format!("{},{}/mask.nii.gz,{}\n", s.id, s.id, s.gt));
        }
        let manifest_path = self.root.join(format!(
            "manifest-{}.csv",
            out.file_name().unwrap().to_string_lossy()
        ));
        fs::write(&manifest_path, manifest).unwrap();
        assert_ok(&segfuse([
            "--jobs".as_ref(),
            jobs.as_ref(),
            "evaluate".as_ref(),
            "--pred-dir".as_ref(),
            out.as_os_str(),
            "--gt-dir".as_ref(),
            self.root.as_os_str(),
            "--manifest".as_ref(),
            manifest_path.as_os_str(),
            "--csv".as_ref(),
            out.join("metrics.csv").as_os_str(),
            "--summary".as_ref(),
            out.join("metrics_summary.json").as_os_str(),
        ]));
    }
}

//! Dataset building and full-reference scoring.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::Config;
use super::manifest::{sample_id, Manifest, ManifestHeader, ReferenceEntry, SampleRecord, MANIFEST_FORMAT};
use super::{thread_pool, PipelineError, Result};
use crate::distort::{self, job_seed, DistortionSpec, Distorter};
use crate::frmetrics::{native_scores, write_scores, MetricId, MetricScore, PSNR_CAP_DB};
use crate::pcio::{load_ply, save_ply, PlyMode, PointCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct BuildSummary {
    pub manifest: PathBuf,
    pub rows: usize,
    /// `(sample_id, error)` for rows whose cloud could not be produced.
    pub failures: Vec<(String, String)>,
}

/// `*.ply` files of a directory, sorted by name; the file stem is the id.
pub fn list_references(dir: &Path) -> Result<Vec<ReferenceEntry>> {
    let rd = std::fs::read_dir(dir).map_err(|e| PipelineError::MissingFile(dir.to_path_buf(), e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) && p.is_file() {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.push(ReferenceEntry { id, path: std::fs::canonicalize(&p)? });
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    if out.is_empty() {
        return Err(PipelineError::Validation(format!("no reference PLY files in {}", dir.display())));
    }
    Ok(out)
}

/// Writes `out_dir/manifest.jsonl` and `out_dir/clouds/*.ply`: one row per
/// reference, distortion and level. Failed rows are recorded, not fatal.
pub fn cmd_build(refs_dir: &Path, out_dir: &Path, config: &Config, jobs: usize) -> Result<BuildSummary> {
    config.validate()?;
    let adapters = config.adapter_config()?;
    let references = list_references(refs_dir)?;
    let clouds: Vec<PointCloud> = references.iter().map(|r| load_ply(&r.path)).collect::<std::result::Result<_, _>>()?;
    std::fs::create_dir_all(out_dir.join("clouds"))?;

    let mut tasks = Vec::new();
    for (ri, r) in references.iter().enumerate() {
        for id in config.distortion_ids() {
            for &level in &config.levels {
                tasks.push((ri, r.id.as_str(), id, level));
            }
        }
    }
    let distorter = Distorter::new(adapters);
    let seed = config.dataset_seed;
    let pool = thread_pool(jobs)?;
    let records: Vec<SampleRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ri, ref_id, id, level)| {
                let sid = sample_id(ref_id, id, level);
                let rel = PathBuf::from("clouds").join(format!("{sid}.ply"));
                let s = job_seed(seed, ref_id, id);
                let mut rec = SampleRecord {
                    sample_id: sid,
                    reference_id: ref_id.to_string(),
                    distortion_id: id,
                    level,
                    seed: s,
                    path: rel.clone(),
                    pseudo_mos: None,
                    mos: None,
                    source_metric: None,
                    provenance: None,
                    error: None,
                };
                let run = || -> Result<_> {
                    let spec = DistortionSpec::new(id, level, s)?;
                    let (cloud, prov) = distorter.apply(&clouds[ri], &spec)?;
                    save_ply(&cloud, out_dir.join(&rel), PlyMode::BinaryLe)?;
                    Ok(prov)
                };
                match run() {
                    Ok(p) => rec.provenance = Some(p),
                    Err(e) => {
                        log::warn!("{}: {e}", rec.sample_id);
                        rec.error = Some(e.to_string());
                    }
                }
                rec
            })
            .collect()
    });
    let failures: Vec<(String, String)> = records
        .iter()
        .filter_map(|r| r.error.clone().map(|e| (r.sample_id.clone(), e)))
        .collect();
    let manifest = Manifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT,
            dataset_seed: seed,
            psnr_cap_db: PSNR_CAP_DB,
            label_scale: config.label_scale,
            references,
        },
        records,
        base: out_dir.to_path_buf(),
    };
    let path = out_dir.join("manifest.jsonl");
    manifest.save(&path)?;
    Ok(BuildSummary {
        manifest: path,
        rows: manifest.records.len(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub rows: usize,
    /// `(sample_id, metric)` pairs skipped as inapplicable.
    pub skipped: Vec<(String, String)>,
}

/// Scores every successfully built row with the requested native metrics and
/// writes a score CSV. Geometry metrics are skipped for rows whose
/// distortion leaves positions untouched.
pub fn cmd_score(manifest_path: &Path, out_csv: &Path, metrics: &[MetricId], jobs: usize) -> Result<ScoreSummary> {
    let manifest = Manifest::load(manifest_path)?;
    manifest.check_files()?;
    for m in metrics.iter().filter(|m| matches!(m, MetricId::External(_))) {
        log::warn!("metric {m} is not computed natively; ingest its scores from a CSV");
    }
    let native: Vec<&MetricId> = metrics.iter().filter(|m| !matches!(m, MetricId::External(_))).collect();
    let refs: BTreeMap<String, PointCloud> = manifest
        .header
        .references
        .iter()
        .map(|r| Ok((r.id.clone(), load_ply(manifest.resolve(&r.path))?)))
        .collect::<Result<_>>()?;
    let pool = thread_pool(jobs)?;
    let per_row: Vec<(Vec<MetricScore>, Vec<(String, String)>)> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .filter(|r| r.is_ok())
            .map(|r| -> Result<_> {
                let alters = distort::descriptor(r.distortion_id).is_none_or(|d| d.alters_geometry);
                let mut skipped = Vec::new();
                let wanted: Vec<&MetricId> = native
                    .iter()
                    .copied()
                    .filter(|m| {
                        let ok = m.applies(alters);
                        if !ok {
                            skipped.push((r.sample_id.clone(), m.to_string()));
                        }
                        ok
                    })
                    .collect();
                if wanted.is_empty() {
                    return Ok((Vec::new(), skipped));
                }
                let degraded = load_ply(manifest.resolve(&r.path))?;
                let all = native_scores(&refs[&r.reference_id], &degraded)?;
                let scores = wanted
                    .iter()
                    .map(|m| MetricScore {
                        metric: (*m).clone(),
                        reference_id: r.reference_id.clone(),
                        degraded_id: r.sample_id.clone(),
                        value: all.iter().find(|(id, _)| id == *m).map(|x| x.1).expect("native metric"),
                    })
                    .collect();
                Ok((scores, skipped))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    for (s, k) in per_row {
        scores.extend(s);
        skipped.extend(k);
    }
    for (sid, m) in &skipped {
        log::info!("skipping {m} for {sid}: distortion does not move points");
    }
    if let Some(dir) = out_csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_scores(&scores, BufWriter::new(File::create(out_csv)?))?;
    Ok(ScoreSummary {
        rows: scores.len(),
        skipped,
    })
}

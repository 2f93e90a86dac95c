//! Pseudo-MOS annotation of a scored manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::config::Config;
use super::manifest::Manifest;
use super::report::{correlations, format_cell, TextTable};
use super::{PipelineError, Result};
use crate::annotate::{
    calibrate, compute_mos, error_stats, generate_pseudo_mos, screen_subjects, RatingMatrix, ScoredSample,
    TypeCalibration,
};
use crate::distort;
use crate::frmetrics::{ingest_external_scores, MetricId};

#[derive(Debug, Clone)]
pub struct AnnotateSummary {
    pub manifest: PathBuf,
    pub calibration: BTreeMap<u8, TypeCalibration>,
    pub rejected_subjects: usize,
    pub holdout_count: usize,
    pub holdout_plcc: Option<f64>,
    pub holdout_srocc: Option<f64>,
    /// True when there was no holdout and the report covers the fit set.
    pub degenerate_holdout: bool,
}

/// Screens subjects, averages MOS, selects a metric and fits a mapping per
/// distortion type on the labeled samples, then writes a manifest with
/// `pseudo_mos` on every row plus `selection.csv` and `holdout.{csv,txt}`.
pub fn cmd_annotate(
    manifest_path: &Path,
    score_paths: &[PathBuf],
    subjective: &Path,
    out_manifest: &Path,
    config: &Config,
) -> Result<AnnotateSummary> {
    if !subjective.is_file() {
        return Err(PipelineError::MissingFile(subjective.to_path_buf(), std::io::ErrorKind::NotFound.into()));
    }
    for p in score_paths {
        if !p.is_file() {
            return Err(PipelineError::MissingFile(p.clone(), std::io::ErrorKind::NotFound.into()));
        }
    }
    let mut manifest = Manifest::load(manifest_path)?;
    let ratings = RatingMatrix::load(subjective)?;
    let screening = screen_subjects(&ratings)?;
    for (s, why) in &screening.rejected {
        log::info!("subject {s} rejected: {why:?}");
    }
    let mos = compute_mos(&ratings, &screening.kept, config.min_subject_scores)?;

    let mut scores: BTreeMap<String, BTreeMap<MetricId, f64>> = BTreeMap::new();
    for p in score_paths {
        for s in ingest_external_scores(p)? {
            // CSV rows come back as external; native names map back here.
            let id: MetricId = s.metric.name().parse()?;
            scores.entry(s.degraded_id).or_default().insert(id, s.value);
        }
    }

    let samples: Vec<ScoredSample> = manifest
        .records
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| ScoredSample {
            degraded_id: r.sample_id.clone(),
            distortion_id: r.distortion_id,
            level: r.level,
            scores: scores.get(&r.sample_id).cloned().unwrap_or_default(),
            mos: mos.get(&r.sample_id).map(|m| m.mos),
        })
        .collect();
    let present: BTreeSet<u8> = samples.iter().map(|s| s.distortion_id).collect();
    let labeled_types: BTreeSet<u8> = samples.iter().filter(|s| s.mos.is_some()).map(|s| s.distortion_id).collect();
    if let Some(&t) = present.difference(&labeled_types).next() {
        return Err(PipelineError::UncoveredType(t));
    }

    let stride = config.holdout_stride;
    let mut fit = Vec::new();
    let mut holdout = Vec::new();
    let mut by_type: BTreeMap<u8, Vec<&ScoredSample>> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.mos.is_some()) {
        by_type.entry(s.distortion_id).or_default().push(s);
    }
    for group in by_type.values_mut() {
        group.sort_by(|a, b| a.degraded_id.cmp(&b.degraded_id));
        for (i, s) in group.iter().enumerate() {
            if stride > 1 && i % stride == stride - 1 {
                holdout.push((*s).clone());
            } else {
                fit.push((*s).clone());
            }
        }
    }
    let degenerate = holdout.is_empty();
    if degenerate {
        log::warn!("no holdout samples; the holdout report describes the fit set");
    }
    let calibration = calibrate(&fit, config.regression)?;
    let annotated = generate_pseudo_mos(&calibration, &samples)?;

    let (lo, hi) = manifest.header.label_scale;
    let by_id: BTreeMap<&str, _> = annotated.iter().map(|a| (a.degraded_id.as_str(), a)).collect();
    for r in &mut manifest.records {
        if let Some(a) = by_id.get(r.sample_id.as_str()) {
            r.pseudo_mos = Some(a.pseudo_mos.clamp(lo, hi));
            r.source_metric = Some(a.source_metric.to_string());
            r.mos = a.mos;
        }
    }

    let out_dir = out_manifest.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir)?;
    let same_dir = std::fs::canonicalize(out_dir)? == std::fs::canonicalize(&manifest.base)?;
    if !same_dir {
        for r in &mut manifest.records {
            r.path = std::fs::canonicalize(manifest.base.join(&r.path)).unwrap_or_else(|_| manifest.base.join(&r.path));
        }
    }
    manifest.save(out_manifest)?;

    let mut sel = csv::Writer::from_path(out_dir.join("selection.csv"))?;
    sel.write_record(["distortion_id", "distortion", "metric", "srocc", "samples", "regression", "params", "fit_rmse"])?;
    for (id, c) in &calibration {
        let name = distort::descriptor(*id).map_or("?", |d| d.name);
        let params: Vec<String> = c.model.params.iter().map(|p| format!("{p}")).collect();
        sel.write_record([
            id.to_string(),
            name.to_string(),
            c.metric.to_string(),
            format!("{}", c.srocc),
            c.samples.to_string(),
            format!("{:?}", c.model.kind),
            params.join(";"),
            format!("{}", c.model.diagnostics.rmse),
        ])?;
    }
    sel.flush()?;

    let eval_set: Vec<&crate::annotate::AnnotationRecord> = {
        let ids: BTreeSet<&str> = if degenerate { &fit } else { &holdout }
            .iter()
            .map(|s| s.degraded_id.as_str())
            .collect();
        annotated.iter().filter(|a| ids.contains(a.degraded_id.as_str())).collect()
    };
    let mut table = TextTable::new(["scope", "count", "PLCC", "SROCC"]);
    let mut csvw = csv::Writer::from_path(out_dir.join("holdout.csv"))?;
    csvw.write_record(["scope", "count", "plcc", "srocc"])?;
    let mut scopes: BTreeMap<String, Vec<&crate::annotate::AnnotationRecord>> = BTreeMap::new();
    scopes.insert("overall".into(), eval_set.clone());
    for a in &eval_set {
        scopes.entry(format!("type {:02}", a.distortion_id)).or_default().push(a);
    }
    let mut overall = (None, None);
    for (scope, recs) in &scopes {
        let p: Vec<f64> = recs.iter().map(|a| a.pseudo_mos).collect();
        let m: Vec<f64> = recs.iter().map(|a| a.mos.unwrap_or(f64::NAN)).collect();
        let (pl, sr) = correlations(&p, &m);
        if scope == "overall" {
            overall = (pl, sr);
        }
        let row = [scope.clone(), recs.len().to_string(), format_cell(pl), format_cell(sr)];
        csvw.write_record(&row)?;
        table.push(row);
    }
    csvw.flush()?;
    let errors: Vec<f64> = eval_set.iter().filter_map(|a| a.annotation_error).collect();
    let mut text = String::new();
    if degenerate {
        text.push_str("warning: no holdout samples, figures describe the fit set\n");
    }
    text.push_str(&table.render());
    if let Ok(st) = error_stats(&errors) {
        text.push_str(&format!(
            "annotation error: mean {:.4}, std {:.4}, q95 |e| {:.4}\n",
            st.mean, st.std_dev, st.q95_abs
        ));
    }
    std::fs::write(out_dir.join("holdout.txt"), text)?;

    Ok(AnnotateSummary {
        manifest: out_manifest.to_path_buf(),
        calibration,
        rejected_subjects: screening.rejected.len(),
        holdout_count: eval_set.len(),
        holdout_plcc: overall.0,
        holdout_srocc: overall.1,
        degenerate_holdout: degenerate,
    })
}

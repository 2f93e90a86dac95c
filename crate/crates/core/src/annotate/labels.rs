//! From metric scores to pseudo-MOS labels, and how far those labels land
//! from subjective MOS.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::correlation::{plcc, srocc};
use super::regression::{fit_regression, quantile_sorted, RegressionKind, RegressionModel};
use super::{AnnotateError, Result};
use crate::frmetrics::MetricId;

/// Minimum samples per distortion type for a metric to be ranked.
pub const MIN_SELECTION_SAMPLES: usize = 3;
pub const HISTOGRAM_RANGE: (f64, f64) = (-2.5, 2.5);
pub const HISTOGRAM_BIN: f64 = 0.25;

/// Ranking fidelity of one candidate metric on one distortion type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub metric: MetricId,
    pub srocc: f64,
    pub plcc: f64,
}

/// Highest |SROCC|, then highest |PLCC|, then lowest metric id.
pub fn pick_best(candidates: &[Candidate]) -> Option<&Candidate> {
    candidates.iter().min_by(|a, b| {
        b.srocc
            .abs()
            .total_cmp(&a.srocc.abs())
            .then(b.plcc.abs().total_cmp(&a.plcc.abs()))
            .then(a.metric.cmp(&b.metric))
    })
}

/// Correlations of every metric with the MOS of one distortion type; metrics
/// with too few samples or an undefined correlation are left out.
pub fn rank_candidates(scores: &BTreeMap<MetricId, Vec<f64>>, mos: &[f64]) -> Vec<Candidate> {
    scores
        .iter()
        .filter(|(_, v)| v.len() == mos.len() && v.len() >= MIN_SELECTION_SAMPLES)
        .filter_map(|(m, v)| {
            Some(Candidate {
                metric: m.clone(),
                srocc: srocc(v, mos).ok()?,
                plcc: plcc(v, mos).ok()?,
            })
        })
        .collect()
}

/// Best metric per distortion type. `scores[type][metric]` holds the metric
/// values aligned with `mos[type]`; callers leave out inapplicable metrics.
pub fn select_best_metric(
    scores: &BTreeMap<u8, BTreeMap<MetricId, Vec<f64>>>,
    mos: &BTreeMap<u8, Vec<f64>>,
) -> Result<BTreeMap<u8, MetricId>> {
    scores
        .iter()
        .map(|(&id, per_metric)| {
            let target = mos.get(&id).ok_or(AnnotateError::NoApplicableMetric(id))?;
            let ranked = rank_candidates(per_metric, target);
            let best = pick_best(&ranked).ok_or(AnnotateError::NoApplicableMetric(id))?;
            Ok((id, best.metric.clone()))
        })
        .collect()
}

/// Selected metric and fitted mapping for one distortion type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCalibration {
    pub metric: MetricId,
    pub model: RegressionModel,
    pub srocc: f64,
    pub samples: usize,
}

/// One scored, possibly labeled degraded sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub degraded_id: String,
    pub distortion_id: u8,
    pub level: u8,
    pub scores: BTreeMap<MetricId, f64>,
    pub mos: Option<f64>,
}

/// Selects the best metric per type on the labeled samples and fits a
/// mapping of `kind` from its scores to MOS.
pub fn calibrate(
    labeled: &[ScoredSample],
    kind: RegressionKind,
) -> Result<BTreeMap<u8, TypeCalibration>> {
    let mut by_type: BTreeMap<u8, Vec<&ScoredSample>> = BTreeMap::new();
    for s in labeled.iter().filter(|s| s.mos.is_some()) {
        by_type.entry(s.distortion_id).or_default().push(s);
    }
    by_type
        .into_iter()
        .map(|(id, samples)| {
            let mos: Vec<f64> = samples.iter().map(|s| s.mos.unwrap()).collect();
            let mut per_metric: BTreeMap<MetricId, Vec<f64>> = BTreeMap::new();
            let metrics: Vec<&MetricId> = samples[0].scores.keys().collect();
            for m in metrics {
                let v: Option<Vec<f64>> = samples.iter().map(|s| s.scores.get(m).copied()).collect();
                if let Some(v) = v {
                    per_metric.insert(m.clone(), v);
                }
            }
            let ranked = rank_candidates(&per_metric, &mos);
            let best = pick_best(&ranked).ok_or(AnnotateError::NoApplicableMetric(id))?;
            let model = fit_regression(kind, &per_metric[&best.metric], &mos)?;
            Ok((
                id,
                TypeCalibration {
                    metric: best.metric.clone(),
                    model,
                    srocc: best.srocc,
                    samples: mos.len(),
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub degraded_id: String,
    pub distortion_id: u8,
    pub level: u8,
    pub pseudo_mos: f64,
    pub source_metric: MetricId,
    pub mos: Option<f64>,
    pub annotation_error: Option<f64>,
}

/// Maps each sample's selected-metric score through its type's model and
/// clamps to `[1,5]`.
pub fn generate_pseudo_mos(
    calibration: &BTreeMap<u8, TypeCalibration>,
    samples: &[ScoredSample],
) -> Result<Vec<AnnotationRecord>> {
    samples
        .iter()
        .map(|s| {
            let cal = calibration
                .get(&s.distortion_id)
                .ok_or(AnnotateError::NoModel(s.distortion_id))?;
            let raw = *s.scores.get(&cal.metric).ok_or_else(|| AnnotateError::MissingScore {
                degraded: s.degraded_id.clone(),
                metric: cal.metric.to_string(),
            })?;
            let pseudo = cal.model.eval(raw).clamp(1.0, 5.0);
            let pseudo = if pseudo.is_nan() { 3.0 } else { pseudo };
            Ok(AnnotationRecord {
                degraded_id: s.degraded_id.clone(),
                distortion_id: s.distortion_id,
                level: s.level,
                pseudo_mos: pseudo,
                source_metric: cal.metric.clone(),
                mos: s.mos,
                annotation_error: s.mos.map(|m| m - pseudo),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    /// 95% quantile of the absolute error.
    pub q95_abs: f64,
    /// Counts per 0.25-wide bin over `[-2.5, 2.5)`; errors outside the range
    /// land in the edge bins.
    pub histogram: Vec<usize>,
}

impl ErrorStats {
    pub fn bin_edges() -> Vec<f64> {
        let n = ((HISTOGRAM_RANGE.1 - HISTOGRAM_RANGE.0) / HISTOGRAM_BIN).round() as usize;
        (0..=n).map(|i| HISTOGRAM_RANGE.0 + i as f64 * HISTOGRAM_BIN).collect()
    }
}

/// Statistics of `mos - pseudo_mos` over records carrying both labels.
pub fn annotation_error_stats(records: &[AnnotationRecord]) -> Result<ErrorStats> {
    let errors: Vec<f64> = records.iter().filter_map(|r| r.annotation_error).collect();
    error_stats(&errors)
}

pub fn error_stats(errors: &[f64]) -> Result<ErrorStats> {
    if errors.len() < 2 {
        return Err(AnnotateError::TooFewSamples { need: 2, have: errors.len() });
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std_dev = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let bins = ErrorStats::bin_edges().len() - 1;
    let mut histogram = vec![0; bins];
    for &e in errors {
        let i = ((e - HISTOGRAM_RANGE.0) / HISTOGRAM_BIN).floor();
        histogram[(i.max(0.0) as usize).min(bins - 1)] += 1;
    }
    Ok(ErrorStats {
        count: errors.len(),
        mean,
        std_dev,
        q95_abs: quantile_sorted(&abs, 0.95),
        histogram,
    })
}

/// Error statistics per distortion level, for levels with two or more errors.
pub fn error_stats_by_level(records: &[AnnotationRecord]) -> BTreeMap<u8, ErrorStats> {
    let mut by_level: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(e) = r.annotation_error {
            by_level.entry(r.level).or_default().push(e);
        }
    }
    by_level
        .into_iter()
        .filter_map(|(l, e)| Some((l, error_stats(&e).ok()?)))
        .collect()
}

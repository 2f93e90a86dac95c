//! Training, evaluation and the ablation sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Config, SplitSpec};
use super::manifest::Manifest;
use super::report::{correlations, format_cell, TextTable};
use super::{thread_pool, PipelineError, Result};
use crate::pcio::load_ply;
use crate::sparsenn::{
    load_checkpoint, predict, save_checkpoint, train, write_loss_csv, ModelConfig, ResScnn, ResidualVariant,
    TrainConfig, TrainSample,
};

/// Labeled clouds of the rows whose reference is in `refs`, in manifest order.
pub fn load_samples(manifest: &Manifest, refs: &BTreeSet<String>) -> Result<Vec<(TrainSample, u8)>> {
    manifest
        .records
        .iter()
        .filter(|r| r.is_ok() && refs.contains(&r.reference_id))
        .map(|r| {
            let label = r
                .label()
                .ok_or_else(|| PipelineError::Validation(format!("sample {} has no label", r.sample_id)))?;
            let cloud = load_ply(manifest.resolve(&r.path))?;
            Ok((
                TrainSample {
                    id: r.sample_id.clone(),
                    cloud,
                    label,
                },
                r.distortion_id,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub steps: usize,
    pub final_loss: f64,
}

fn prepared(manifest: &Manifest, split: &SplitSpec, train_config: &TrainConfig) -> Result<TrainConfig> {
    split.validate(&manifest.reference_ids())?;
    let mut tc = train_config.clone();
    tc.label_scale = Some(manifest.header.label_scale);
    Ok(tc)
}

/// Trains on the split's train references; writes `model.ckpt` and
/// `loss.csv` under `out_dir`.
pub fn cmd_train(manifest_path: &Path, split: &SplitSpec, config: &Config, out_dir: &Path) -> Result<TrainSummary> {
    let manifest = Manifest::load(manifest_path)?;
    let tc = prepared(&manifest, split, &config.train)?;
    let samples: Vec<TrainSample> = load_samples(&manifest, &split.train)?.into_iter().map(|s| s.0).collect();
    if samples.is_empty() {
        return Err(PipelineError::Validation("training split has no usable rows".into()));
    }
    let model = ResScnn::new(&config.model, config.model_seed)?;
    let out = train(model, &samples, &tc)?;
    std::fs::create_dir_all(out_dir)?;
    let checkpoint = out_dir.join("model.ckpt");
    let loss_csv = out_dir.join("loss.csv");
    save_checkpoint(&checkpoint, &out.model)?;
    write_loss_csv(&loss_csv, &out.losses)?;
    Ok(TrainSummary {
        checkpoint,
        loss_csv,
        steps: out.losses.len(),
        final_loss: out.tail_loss(samples.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub sample_id: String,
    pub distortion_id: u8,
    pub label: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// `overall` or a distortion id.
    pub scope: String,
    pub count: usize,
    pub plcc: Option<f64>,
    pub srocc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub predictions: Vec<Prediction>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let mut groups: BTreeMap<u8, Vec<&Prediction>> = BTreeMap::new();
        for p in &predictions {
            groups.entry(p.distortion_id).or_default().push(p);
        }
        let row = |scope: String, ps: &[&Prediction]| {
            let q: Vec<f64> = ps.iter().map(|p| p.prediction).collect();
            let l: Vec<f64> = ps.iter().map(|p| p.label).collect();
            let (plcc, srocc) = correlations(&q, &l);
            EvalRow { scope, count: ps.len(), plcc, srocc }
        };
        let all: Vec<&Prediction> = predictions.iter().collect();
        let mut rows = vec![row("overall".into(), &all)];
        for (id, ps) in &groups {
            rows.push(row(format!("{id}"), ps));
        }
        Self { predictions, rows }
    }

    pub fn overall(&self) -> &EvalRow {
        &self.rows[0]
    }

    pub fn render(&self) -> String {
        let mut t = TextTable::new(["scope", "count", "PLCC", "SROCC"]);
        for r in &self.rows {
            t.push([r.scope.clone(), r.count.to_string(), format_cell(r.plcc), format_cell(r.srocc)]);
        }
        t.render()
    }

    /// Writes `predictions.csv`, `eval.csv` and `eval.txt`.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let mut w = csv::Writer::from_path(out_dir.join("predictions.csv"))?;
        for p in &self.predictions {
            w.serialize(p)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(out_dir.join("eval.csv"))?;
        w.write_record(["scope", "count", "plcc", "srocc", "flag"])?;
        for r in &self.rows {
            let flag = if r.plcc.is_none() || r.srocc.is_none() { "undefined correlation" } else { "" };
            w.write_record([r.scope.clone(), r.count.to_string(), format_cell(r.plcc), format_cell(r.srocc), flag.into()])?;
        }
        w.flush()?;
        std::fs::write(out_dir.join("eval.txt"), self.render())?;
        Ok(())
    }
}

fn predict_all(model: &ResScnn, samples: &[(TrainSample, u8)], voxel: f64, jobs: usize) -> Result<Vec<Prediction>> {
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        samples
            .par_iter()
            .map(|(s, d)| {
                Ok(Prediction {
                    sample_id: s.id.clone(),
                    distortion_id: *d,
                    label: s.label,
                    prediction: predict(model, &s.cloud, voxel)?,
                })
            })
            .collect()
    })
}

/// Scores the split's test references with a checkpoint. When `expected`
/// is given the checkpoint's model configuration must match it.
pub fn cmd_eval(
    manifest_path: &Path,
    split: &SplitSpec,
    checkpoint: &Path,
    expected: Option<&ModelConfig>,
    voxel: f64,
    out_dir: &Path,
    jobs: usize,
) -> Result<EvalReport> {
    let manifest = Manifest::load(manifest_path)?;
    split.validate(&manifest.reference_ids())?;
    if !checkpoint.is_file() {
        return Err(PipelineError::MissingFile(checkpoint.to_path_buf(), std::io::ErrorKind::NotFound.into()));
    }
    let model = load_checkpoint(checkpoint)?;
    if let Some(cfg) = expected {
        if cfg != model.config() {
            return Err(PipelineError::Validation("checkpoint model configuration differs from the run configuration".into()));
        }
    }
    let test = load_samples(&manifest, &split.test)?;
    if test.is_empty() {
        return Err(PipelineError::Validation("test split has no usable rows".into()));
    }
    let report = EvalReport::from_predictions(predict_all(&model, &test, voxel, jobs)?);
    report.write(out_dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    /// `depth` or `residual`.
    pub study: String,
    pub label: String,
    pub depth: usize,
    pub variant: ResidualVariant,
    pub params: usize,
    pub plcc: Option<f64>,
    pub srocc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (study, title, col) in [("depth", "Network depth", "blocks"), ("residual", "Residual pattern", "variant")] {
            let mut t = TextTable::new([col, "params", "PLCC", "SROCC"]);
            for r in self.rows.iter().filter(|r| r.study == study) {
                t.push([r.label.clone(), r.params.to_string(), format_cell(r.plcc), format_cell(r.srocc)]);
            }
            out.push_str(title);
            out.push('\n');
            out.push_str(&t.render());
            out.push('\n');
        }
        out
    }
}

/// Trains and evaluates every depth and residual variant of the ablation
/// configuration; writes `ablation.csv` and `ablation.txt`.
pub fn cmd_report(manifest_path: &Path, split: &SplitSpec, config: &Config, out_dir: &Path, jobs: usize) -> Result<AblationReport> {
    let manifest = Manifest::load(manifest_path)?;
    let tc = prepared(&manifest, split, &config.ablation.train)?;
    let train_set: Vec<TrainSample> = load_samples(&manifest, &split.train)?.into_iter().map(|s| s.0).collect();
    let test = load_samples(&manifest, &split.test)?;
    if train_set.is_empty() || test.is_empty() {
        return Err(PipelineError::Validation("ablation needs rows in both splits".into()));
    }
    let ab = &config.ablation;
    let mut runs: Vec<(String, String, ModelConfig)> = Vec::new();
    for &d in &ab.depths {
        let mc = ModelConfig { depth: d, residual: ResidualVariant::D, ..config.model.clone() };
        runs.push(("depth".into(), d.to_string(), mc));
    }
    for &v in &ab.variants {
        let mc = ModelConfig { depth: ab.variant_depth, residual: v, ..config.model.clone() };
        runs.push(("residual".into(), format!("{v:?}"), mc));
    }
    let pool = thread_pool(jobs)?;
    let rows: Vec<AblationRow> = pool.install(|| {
        runs.par_iter()
            .map(|(study, label, mc)| {
                let model = ResScnn::new(mc, config.model_seed)?;
                let params = model.param_count();
                let trained = train(model, &train_set, &tc)?.model;
                let preds = test
                    .iter()
                    .map(|(s, _)| predict(&trained, &s.cloud, tc.voxel))
                    .collect::<std::result::Result<Vec<f64>, _>>()?;
                let labels: Vec<f64> = test.iter().map(|(s, _)| s.label).collect();
                let (plcc, srocc) = correlations(&preds, &labels);
                Ok(AblationRow {
                    study: study.clone(),
                    label: label.clone(),
                    depth: mc.depth,
                    variant: mc.residual,
                    params,
                    plcc,
                    srocc,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let report = AblationReport { rows };
    std::fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join("ablation.csv"))?;
    w.write_record(["study", "label", "depth", "variant", "params", "plcc", "srocc"])?;
    for r in &report.rows {
        w.write_record([
            r.study.clone(),
            r.label.clone(),
            r.depth.to_string(),
            format!("{:?}", r.variant),
            r.params.to_string(),
            format_cell(r.plcc),
            format_cell(r.srocc),
        ])?;
    }
    w.flush()?;
    std::fs::write(out_dir.join("ablation.txt"), report.render())?;
    Ok(report)
}

//! Sample-at-a-time training with gradient accumulation and an exponential
//! learning-rate schedule.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::model::{Gradients, ResScnn};
use super::tensor::{build_kernel_map, voxelize, KernelMap, SparseTensor};
use super::{smooth_l1, NnError, Result};
use crate::pcio::PointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Learning-rate multiplier applied after every epoch.
    pub decay: f64,
    /// Samples per parameter update.
    pub accumulation: usize,
    pub epochs: usize,
    /// Stops after this many samples when set.
    pub max_steps: Option<usize>,
    pub augment: bool,
    pub scale_range: (f64, f64),
    pub seed: u64,
    pub voxel: f64,
    /// Declared label scale; labels outside it are reported.
    pub label_scale: Option<(f64, f64)>,
    /// Starts the output bias at the mean training label.
    pub init_bias_to_label_mean: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            decay: 0.99,
            accumulation: 8,
            epochs: 50,
            max_steps: None,
            augment: true,
            scale_range: (0.8, 1.2),
            seed: 0,
            voxel: 1.0,
            label_scale: Some((1.0, 5.0)),
            init_bias_to_label_mean: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::BadConfig(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.accumulation == 0 {
            return bad("accumulation must be at least 1");
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("scale range must be positive and ordered");
        }
        if !(self.voxel > 0.0 && self.voxel.is_finite()) {
            return Err(NnError::BadVoxelSize(self.voxel));
        }
        if let Some((lo, hi)) = self.label_scale {
            if !(lo < hi) {
                return bad("label scale min must be below max");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainSample {
    pub id: String,
    pub cloud: PointCloud,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ResScnn,
    pub losses: Vec<LossRecord>,
    /// Learning rate after the last completed epoch.
    pub final_lr: f64,
}

impl TrainOutcome {
    /// Mean loss over the last `n` recorded steps.
    pub fn tail_loss(&self, n: usize) -> f64 {
        let k = n.min(self.losses.len()).max(1);
        self.losses[self.losses.len().saturating_sub(k)..].iter().map(|r| r.loss).sum::<f64>() / k as f64
    }
}

/// Scales by `scale` about the centroid, then rotates by `angle` radians
/// about the z axis through the centroid. Colors are untouched.
pub fn augment_with(cloud: &PointCloud, scale: f64, angle: f64) -> PointCloud {
    let c = cloud.centroid();
    let (s, co) = angle.sin_cos();
    let positions = cloud
        .positions()
        .iter()
        .map(|p| {
            let d = [(p[0] - c[0]) * scale, (p[1] - c[1]) * scale, (p[2] - c[2]) * scale];
            [c[0] + co * d[0] - s * d[1], c[1] + s * d[0] + co * d[1], c[2] + d[2]]
        })
        .collect();
    cloud
        .with_positions(positions)
        .expect("same point count")
}

/// Random scale in `config.scale_range` and angle in `[0, 2pi)`.
pub fn augment<R: Rng + ?Sized>(cloud: &PointCloud, rng: &mut R, config: &TrainConfig) -> PointCloud {
    let (lo, hi) = config.scale_range;
    let scale = if lo < hi { rng.random_range(lo..hi) } else { lo };
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    augment_with(cloud, scale, angle)
}

/// `theta -= lr * g / count` for every parameter.
pub fn sgd_step(model: &mut ResScnn, grads: &Gradients, lr: f64, count: usize) {
    let f = lr / count.max(1) as f64;
    for (p, g) in model.param_slices_mut().into_iter().zip(&grads.slices) {
        for (a, b) in p.iter_mut().zip(g) {
            *a -= f * b;
        }
    }
}

/// Inference-mode score of a cloud voxelized at `voxel`.
pub fn predict(model: &ResScnn, cloud: &PointCloud, voxel: f64) -> Result<f64> {
    model.predict_tensor(&voxelize(cloud, voxel)?)
}

pub fn train(mut model: ResScnn, samples: &[TrainSample], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if samples.is_empty() {
        return Err(NnError::EmptyTrainingSet);
    }
    for s in samples {
        if !s.label.is_finite() {
            return Err(NnError::NonFiniteLabel(s.label));
        }
        if let Some((lo, hi)) = config.label_scale {
            if s.label < lo || s.label > hi {
                log::warn!("label {} of {} lies outside the declared scale [{lo}, {hi}]", s.label, s.id);
            }
        }
    }
    if config.init_bias_to_label_mean {
        model.fc2.bias[0] = samples.iter().map(|s| s.label).sum::<f64>() / samples.len() as f64;
    }
    let cached: Vec<(SparseTensor, KernelMap)> = if config.augment {
        Vec::new()
    } else {
        samples
            .iter()
            .map(|s| {
                let t = voxelize(&s.cloud, config.voxel)?;
                let m = build_kernel_map(&t);
                Ok((t, m))
            })
            .collect::<Result<_>>()?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grads = Gradients::zeros_like(&model);
    let mut pending = 0;
    let mut lr = config.lr;
    let mut losses = Vec::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let limit = config.max_steps.unwrap_or(usize::MAX);
    'epochs: for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            if losses.len() >= limit {
                break 'epochs;
            }
            let fresh;
            let (tensor, map) = if config.augment {
                let t = voxelize(&augment(&samples[i].cloud, &mut rng, config), config.voxel)?;
                let m = build_kernel_map(&t);
                fresh = (t, m);
                (&fresh.0, &fresh.1)
            } else {
                (&cached[i].0, &cached[i].1)
            };
            let cache = model.forward(tensor, map, Mode::Train)?;
            let (loss, d) = smooth_l1(cache.output, samples[i].label);
            model.backward(&cache, map, d, &mut grads)?;
            model.update_running_stats(&cache);
            losses.push(LossRecord {
                step: losses.len() + 1,
                epoch,
                lr,
                loss,
            });
            pending += 1;
            if pending == config.accumulation {
                sgd_step(&mut model, &grads, lr, pending);
                grads.zero();
                pending = 0;
            }
        }
        if pending > 0 {
            sgd_step(&mut model, &grads, lr, pending);
            grads.zero();
            pending = 0;
        }
        lr *= config.decay;
    }
    if pending > 0 {
        sgd_step(&mut model, &grads, lr, pending);
    }
    Ok(TrainOutcome {
        model,
        losses,
        final_lr: lr,
    })
}

pub fn write_loss_csv(path: impl AsRef<Path>, losses: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in losses {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loss_csv(path: impl AsRef<Path>) -> Result<Vec<LossRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(NnError::from)).collect()
}

//! ResSCNN: residual blocks of sub-manifold convolutions, per-block global
//! pooling, concatenation and a two-layer regression head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{pool, pool_backward, BatchNorm, BnCache, ConvLayer, Dense, Mode, PoolMode};
use super::tensor::{build_kernel_map, KernelMap, SparseTensor, KERNEL_VOLUME};
use super::{NnError, Result};

/// Shortcut topology inside each three-layer block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResidualVariant {
    /// No shortcut.
    A,
    /// Block input added to the second layer.
    B,
    /// Block input added to the third layer.
    C,
    /// First-layer output added to the third layer.
    D,
}

impl ResidualVariant {
    pub const ALL: [ResidualVariant; 4] = [Self::A, Self::B, Self::C, Self::D];
}

/// Which block outputs feed the regression head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// Pooled output of every block, concatenated.
    #[default]
    Hierarchical,
    /// First block only.
    Shallow,
    /// Last block only.
    Deep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub width: usize,
    pub depth: usize,
    pub fc_hidden: usize,
    pub residual: ResidualVariant,
    pub pool: PoolMode,
    pub features: FeatureSource,
    pub batch_norm: bool,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            width: 64,
            depth: 4,
            fc_hidden: 32,
            residual: ResidualVariant::D,
            pool: PoolMode::Avg,
            features: FeatureSource::Hierarchical,
            batch_norm: true,
            bn_eps: 1e-5,
            bn_momentum: 0.9,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::BadConfig(m.to_string()));
        if self.in_channels == 0 || self.width == 0 || self.fc_hidden == 0 {
            return bad("channel counts must be positive");
        }
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        if !(self.bn_eps > 0.0) || !(0.0..1.0).contains(&self.bn_momentum) {
            return bad("batch norm eps must be positive and momentum in [0,1)");
        }
        Ok(())
    }

    pub fn pooled_blocks(&self) -> Vec<usize> {
        match self.features {
            FeatureSource::Hierarchical => (0..self.depth).collect(),
            FeatureSource::Shallow => vec![0],
            FeatureSource::Deep => vec![self.depth - 1],
        }
    }

    pub fn pooled_width(&self) -> usize {
        self.pooled_blocks().len() * self.width
    }

    /// Wiring of every conv layer. Activation 0 is the input tensor and
    /// layer `j` writes activation `j + 1`.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::with_capacity(3 * self.depth);
        for b in 0..self.depth {
            let bi = 3 * b;
            let c_in = if b == 0 { self.in_channels } else { self.width };
            // The first block changes width, so shortcuts from its input fall
            // back to the layer-1 to layer-3 pattern.
            let (r2, r3) = match (self.residual, b) {
                (ResidualVariant::A, _) => (None, None),
                (ResidualVariant::B, 0) | (ResidualVariant::C, 0) | (ResidualVariant::D, _) => (None, Some(bi + 1)),
                (ResidualVariant::B, _) => (Some(bi), None),
                (ResidualVariant::C, _) => (None, Some(bi)),
            };
            specs.push(LayerSpec { input: bi, residual: None, c_in, c_out: self.width });
            specs.push(LayerSpec { input: bi + 1, residual: r2, c_in: self.width, c_out: self.width });
            specs.push(LayerSpec { input: bi + 2, residual: r3, c_in: self.width, c_out: self.width });
        }
        specs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input: usize,
    pub residual: Option<usize>,
    pub c_in: usize,
    pub c_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResScnn {
    config: ModelConfig,
    specs: Vec<LayerSpec>,
    pub layers: Vec<ConvLayer>,
    pub fc1: Dense,
    pub fc2: Dense,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: Mode,
    pub acts: Vec<Vec<f64>>,
    bn: Vec<Option<BnCache>>,
    argmax: Vec<Vec<usize>>,
    pub pooled: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    pub output: f64,
}

impl ForwardCache {
    /// Which ReLU units are active, over every conv activation and the
    /// hidden dense layer.
    pub fn active_units(&self) -> Vec<bool> {
        self.acts[1..]
            .iter()
            .flatten()
            .chain(&self.hidden_pre)
            .map(|&v| v > 0.0)
            .collect()
    }
}

/// Gradients laid out like [`ResScnn::param_slices`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub slices: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &ResScnn) -> Self {
        Self {
            slices: model.param_slices().iter().map(|s| vec![0.0; s.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        self.slices.iter_mut().for_each(|s| s.fill(0.0));
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices.concat()
    }
}

impl ResScnn {
    /// He-initialized model; biases and batch-norm shifts start at zero.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut model.layers {
            let std = (2.0 / (KERNEL_VOLUME * layer.c_in) as f64).sqrt();
            let d = Normal::new(0.0, std).expect("positive std");
            layer.weights.iter_mut().for_each(|w| *w = d.sample(&mut rng));
        }
        for fc in [&mut model.fc1, &mut model.fc2] {
            let d = Normal::new(0.0, (2.0 / fc.inputs as f64).sqrt()).expect("positive std");
            fc.weights.iter_mut().for_each(|w| *w = d.sample(&mut rng));
        }
        Ok(model)
    }

    /// All weights and biases zero, batch norm at identity.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let specs = config.layer_specs();
        let layers = specs
            .iter()
            .map(|s| {
                let bn = config
                    .batch_norm
                    .then(|| BatchNorm::new(s.c_out, config.bn_eps, config.bn_momentum));
                ConvLayer::zeros(s.c_in, s.c_out, bn, true)
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            specs,
            layers,
            fc1: Dense::zeros(config.pooled_width(), config.fc_hidden),
            fc2: Dense::zeros(config.fc_hidden, 1),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Trainable parameters in a fixed order: per conv layer its weights then
    /// batch-norm scale and shift, followed by the two dense layers.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(&l.weights);
            if let Some(bn) = &l.bn {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out.extend([&self.fc1.weights[..], &self.fc1.bias, &self.fc2.weights, &self.fc2.bias]);
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.weights);
            if let Some(bn) = &mut l.bn {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out.extend([
            &mut self.fc1.weights[..],
            &mut self.fc1.bias,
            &mut self.fc2.weights,
            &mut self.fc2.bias,
        ]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Running means and variances of every batch-norm layer, in layer order.
    pub fn running_stats(&self) -> Vec<(&[f64], &[f64])> {
        self.layers
            .iter()
            .filter_map(|l| l.bn.as_ref())
            .map(|bn| (&bn.running_mean[..], &bn.running_var[..]))
            .collect()
    }

    pub fn running_stats_mut(&mut self) -> Vec<(&mut Vec<f64>, &mut Vec<f64>)> {
        self.layers
            .iter_mut()
            .filter_map(|l| l.bn.as_mut())
            .map(|bn| (&mut bn.running_mean, &mut bn.running_var))
            .collect()
    }

    pub fn forward(&self, tensor: &SparseTensor, map: &KernelMap, mode: Mode) -> Result<ForwardCache> {
        if tensor.channels() != self.config.in_channels {
            return Err(NnError::WidthMismatch {
                expected: self.config.in_channels,
                got: tensor.channels(),
            });
        }
        let rows = tensor.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(tensor.feats().to_vec());
        let mut bn_caches = Vec::with_capacity(self.layers.len());
        for (layer, spec) in self.layers.iter().zip(&self.specs) {
            let z = layer.conv(&acts[spec.input], map);
            let (mut y, cache) = match (&layer.bn, mode) {
                (None, _) => (z, None),
                (Some(bn), Mode::Train) => {
                    let (y, c) = bn.forward_train(&z, rows);
                    (y, Some(c))
                }
                (Some(bn), Mode::Infer) => (bn.forward_infer(&z), None),
            };
            if let Some(r) = spec.residual {
                for (a, b) in y.iter_mut().zip(&acts[r]) {
                    *a += b;
                }
            }
            if layer.relu {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
            bn_caches.push(cache);
        }
        let mut pooled = Vec::with_capacity(self.config.pooled_width());
        let mut argmax = Vec::new();
        for b in self.config.pooled_blocks() {
            let (s, arg) = pool(&acts[3 * b + 3], self.config.width, self.config.pool);
            pooled.extend(s);
            argmax.push(arg);
        }
        let hidden_pre = self.fc1.forward(&pooled);
        let hidden: Vec<f64> = hidden_pre.iter().map(|v| v.max(0.0)).collect();
        let output = self.fc2.forward(&hidden)[0];
        Ok(ForwardCache {
            mode,
            acts,
            bn: bn_caches,
            argmax,
            pooled,
            hidden_pre,
            hidden,
            output,
        })
    }

    /// Inference-mode score of one tensor.
    pub fn predict_tensor(&self, tensor: &SparseTensor) -> Result<f64> {
        let map = build_kernel_map(tensor);
        Ok(self.forward(tensor, &map, Mode::Infer)?.output)
    }

    /// Adds the gradient of a loss with derivative `d_output` at the network
    /// output into `grads`. Needs a training-mode cache when batch norm is on.
    pub fn backward(&self, cache: &ForwardCache, map: &KernelMap, d_output: f64, grads: &mut Gradients) -> Result<()> {
        if cache.acts.len() != self.layers.len() + 1 {
            return Err(NnError::MissingCache);
        }
        if self.config.batch_norm && cache.mode != Mode::Train {
            return Err(NnError::MissingCache);
        }
        let n = grads.slices.len();
        let (conv_g, fc_g) = grads.slices.split_at_mut(n - 4);
        let [fc1w, fc1b, fc2w, fc2b] = fc_g else {
            unreachable!("four dense slices")
        };
        let mut dh = self.fc2.backward(&cache.hidden, &[d_output], fc2w, fc2b);
        for (d, &p) in dh.iter_mut().zip(&cache.hidden_pre) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        let ds = self.fc1.backward(&cache.pooled, &dh, fc1w, fc1b);

        let rows = map.rows();
        let mut dacts: Vec<Vec<f64>> = cache.acts.iter().map(|a| vec![0.0; a.len()]).collect();
        let w = self.config.width;
        for (i, b) in self.config.pooled_blocks().into_iter().enumerate() {
            pool_backward(&ds[i * w..(i + 1) * w], rows, self.config.pool, &cache.argmax[i], &mut dacts[3 * b + 3]);
        }

        let per_layer = if self.config.batch_norm { 3 } else { 1 };
        for j in (0..self.layers.len()).rev() {
            let layer = &self.layers[j];
            let spec = &self.specs[j];
            let mut dy = std::mem::take(&mut dacts[j + 1]);
            if layer.relu {
                for (d, &a) in dy.iter_mut().zip(&cache.acts[j + 1]) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            if let Some(r) = spec.residual {
                for (a, b) in dacts[r].iter_mut().zip(&dy) {
                    *a += b;
                }
            }
            let g = &mut conv_g[j * per_layer..(j + 1) * per_layer];
            let dx = match &layer.bn {
                Some(bn) => {
                    let bc = cache.bn[j].as_ref().ok_or(NnError::MissingCache)?;
                    let (gw, rest) = g.split_at_mut(1);
                    let (gg, gb) = rest.split_at_mut(1);
                    let dz = bn.backward(&dy, bc, &mut gg[0], &mut gb[0]);
                    layer.conv_backward(&cache.acts[spec.input], &dz, map, &mut gw[0])
                }
                None => layer.conv_backward(&cache.acts[spec.input], &dy, map, &mut g[0]),
            };
            if spec.input > 0 {
                for (a, b) in dacts[spec.input].iter_mut().zip(&dx) {
                    *a += b;
                }
            }
        }
        Ok(())
    }

    /// Folds the batch statistics of a training-mode pass into the running
    /// statistics.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (layer, c) in self.layers.iter_mut().zip(&cache.bn) {
            if let (Some(bn), Some(c)) = (layer.bn.as_mut(), c) {
                bn.update_running(c);
            }
        }
    }

    /// Rebuilds a model from a configuration and flat parameter and
    /// running-statistic vectors.
    pub fn from_flat(config: &ModelConfig, params: &[f64], running: &[f64]) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        if params.len() != model.param_count() {
            return Err(NnError::Checkpoint(format!(
                "expected {} parameters, found {}",
                model.param_count(),
                params.len()
            )));
        }
        let mut off = 0;
        for s in model.param_slices_mut() {
            s.copy_from_slice(&params[off..off + s.len()]);
            off += s.len();
        }
        let want: usize = model.running_stats().iter().map(|(m, v)| m.len() + v.len()).sum();
        if running.len() != want {
            return Err(NnError::Checkpoint(format!(
                "expected {want} running statistics, found {}",
                running.len()
            )));
        }
        let mut off = 0;
        for (m, v) in model.running_stats_mut() {
            let c = m.len();
            m.copy_from_slice(&running[off..off + c]);
            v.copy_from_slice(&running[off + c..off + 2 * c]);
            off += 2 * c;
        }
        if model
            .running_stats()
            .iter()
            .any(|(_, v)| v.iter().any(|x| !(*x > 0.0)))
        {
            return Err(NnError::Checkpoint("running variance must be positive".into()));
        }
        Ok(model)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn flat_running_stats(&self) -> Vec<f64> {
        self.running_stats()
            .iter()
            .flat_map(|(m, v)| m.iter().chain(v.iter()).copied())
            .collect()
    }
}

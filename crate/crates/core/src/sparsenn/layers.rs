//! Layer primitives with explicit forward and backward passes. Feature
//! matrices are row-major `rows x channels` slices of `f64`.

use serde::{Deserialize, Serialize};

use super::tensor::{KernelMap, SparseTensor, CENTER_OFFSET, KERNEL_VOLUME};
use super::{NnError, Result};

/// `c = a * b + beta * c` with `a: m x k`, `b: k x n` in the given strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass slices sized for the stated shapes and strides;
    // `c` is row-major m x n and does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major `m x k` times row-major `k x n`.
pub(crate) fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    gemm(m, k, n, a, (k as isize, 1), b, (n as isize, 1), beta, c);
}

/// `a^T b` for row-major `a: m x k` and `b: m x n`, giving `k x n`.
pub(crate) fn matmul_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    gemm(k, m, n, a, (1, k as isize), b, (n as isize, 1), beta, c);
}

/// `a b^T` for row-major `a: m x n` and `b: k x n`, giving `m x k`.
pub(crate) fn matmul_nt(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], beta: f64, c: &mut [f64]) {
    gemm(m, n, k, a, (n as isize, 1), b, (1, n as isize), beta, c);
}

fn gather(src: &[f64], width: usize, rows: impl Iterator<Item = usize>, dst: &mut Vec<f64>) {
    dst.clear();
    for r in rows {
        dst.extend_from_slice(&src[r * width..(r + 1) * width]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    /// Weight of the old running statistic in each update.
    pub momentum: f64,
}

/// Values kept from a training-mode batch norm pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps,
            momentum,
        }
    }

    fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes with statistics of the given rows (biased variance).
    pub fn forward_train(&self, x: &[f64], rows: usize) -> (Vec<f64>, BnCache) {
        let c = self.channels();
        let mut mean = vec![0.0; c];
        for r in x.chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0; c];
        for r in x.chunks_exact(c) {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= rows as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for (i, (&v, (h, o))) in x.iter().zip(xhat.iter_mut().zip(y.iter_mut())).enumerate() {
            let ch = i % c;
            *h = (v - mean[ch]) * inv_std[ch];
            *o = self.gamma[ch] * *h + self.beta[ch];
        }
        (y, BnCache { xhat, inv_std, mean, var })
    }

    pub fn forward_infer(&self, x: &[f64]) -> Vec<f64> {
        let c = self.channels();
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = i % c;
                self.gamma[ch] * (v - self.running_mean[ch]) / (self.running_var[ch] + self.eps).sqrt()
                    + self.beta[ch]
            })
            .collect()
    }

    /// Returns `dx` and accumulates into `dgamma`, `dbeta`.
    pub fn backward(&self, dy: &[f64], cache: &BnCache, dgamma: &mut [f64], dbeta: &mut [f64]) -> Vec<f64> {
        let c = self.channels();
        let rows = dy.len() / c;
        let mut sum_dxhat = vec![0.0; c];
        let mut sum_dxhat_xhat = vec![0.0; c];
        for (i, (&g, &h)) in dy.iter().zip(&cache.xhat).enumerate() {
            let ch = i % c;
            dgamma[ch] += g * h;
            dbeta[ch] += g;
            let dh = g * self.gamma[ch];
            sum_dxhat[ch] += dh;
            sum_dxhat_xhat[ch] += dh * h;
        }
        let n = rows as f64;
        dy.iter()
            .zip(&cache.xhat)
            .enumerate()
            .map(|(i, (&g, &h))| {
                let ch = i % c;
                let dh = g * self.gamma[ch];
                cache.inv_std[ch] / n * (n * dh - sum_dxhat[ch] - h * sum_dxhat_xhat[ch])
            })
            .collect()
    }

    pub fn update_running(&mut self, cache: &BnCache) {
        let m = self.momentum;
        for ch in 0..self.channels() {
            self.running_mean[ch] = m * self.running_mean[ch] + (1.0 - m) * cache.mean[ch];
            self.running_var[ch] = m * self.running_var[ch] + (1.0 - m) * cache.var[ch];
        }
    }
}

/// Sub-manifold 3x3x3 convolution, optional batch norm and ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub c_in: usize,
    pub c_out: usize,
    /// `27 x c_in x c_out`, offset-major.
    pub weights: Vec<f64>,
    pub bn: Option<BatchNorm>,
    pub relu: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

impl ConvLayer {
    pub fn zeros(c_in: usize, c_out: usize, bn: Option<BatchNorm>, relu: bool) -> Self {
        Self {
            c_in,
            c_out,
            weights: vec![0.0; KERNEL_VOLUME * c_in * c_out],
            bn,
            relu,
        }
    }

    pub fn weight(&self, offset: usize) -> &[f64] {
        let s = self.c_in * self.c_out;
        &self.weights[offset * s..(offset + 1) * s]
    }

    pub fn weight_mut(&mut self, offset: usize) -> &mut [f64] {
        let s = self.c_in * self.c_out;
        &mut self.weights[offset * s..(offset + 1) * s]
    }

    /// `out(u) = sum_i W_i^T x(u + i)` over occupied neighbors.
    pub fn conv(&self, x: &[f64], map: &KernelMap) -> Vec<f64> {
        let rows = map.rows();
        let mut out = vec![0.0; rows * self.c_out];
        let mut g = Vec::new();
        let mut t = Vec::new();
        for k in 0..KERNEL_VOLUME {
            let pairs = map.pairs(k);
            if pairs.is_empty() {
                continue;
            }
            if k == CENTER_OFFSET && pairs.len() == rows {
                // every row pairs with itself
                matmul(rows, self.c_in, self.c_out, x, self.weight(k), 1.0, &mut out);
                continue;
            }
            gather(x, self.c_in, pairs.iter().map(|p| p.0 as usize), &mut g);
            t.clear();
            t.resize(pairs.len() * self.c_out, 0.0);
            matmul(pairs.len(), self.c_in, self.c_out, &g, self.weight(k), 0.0, &mut t);
            for (p, &(_, o)) in pairs.iter().enumerate() {
                let dst = &mut out[o as usize * self.c_out..(o as usize + 1) * self.c_out];
                for (d, s) in dst.iter_mut().zip(&t[p * self.c_out..(p + 1) * self.c_out]) {
                    *d += s;
                }
            }
        }
        out
    }

    /// Given `dout` for the conv output, accumulates `dweights` and returns `dx`.
    pub fn conv_backward(&self, x: &[f64], dout: &[f64], map: &KernelMap, dweights: &mut [f64]) -> Vec<f64> {
        let rows = map.rows();
        let s = self.c_in * self.c_out;
        let mut dx = vec![0.0; rows * self.c_in];
        let mut g = Vec::new();
        let mut d = Vec::new();
        let mut t = Vec::new();
        for k in 0..KERNEL_VOLUME {
            let pairs = map.pairs(k);
            if pairs.is_empty() {
                continue;
            }
            let dw = &mut dweights[k * s..(k + 1) * s];
            if k == CENTER_OFFSET && pairs.len() == rows {
                matmul_tn(rows, self.c_in, self.c_out, x, dout, 1.0, dw);
                matmul_nt(rows, self.c_out, self.c_in, dout, self.weight(k), 1.0, &mut dx);
                continue;
            }
            gather(x, self.c_in, pairs.iter().map(|p| p.0 as usize), &mut g);
            gather(dout, self.c_out, pairs.iter().map(|p| p.1 as usize), &mut d);
            matmul_tn(pairs.len(), self.c_in, self.c_out, &g, &d, 1.0, dw);
            t.clear();
            t.resize(pairs.len() * self.c_in, 0.0);
            matmul_nt(pairs.len(), self.c_out, self.c_in, &d, self.weight(k), 0.0, &mut t);
            for (p, &(i, _)) in pairs.iter().enumerate() {
                let dst = &mut dx[i as usize * self.c_in..(i as usize + 1) * self.c_in];
                for (a, b) in dst.iter_mut().zip(&t[p * self.c_in..(p + 1) * self.c_in]) {
                    *a += b;
                }
            }
        }
        dx
    }

    /// Convolution, then batch norm and ReLU as configured; no residual.
    pub fn forward(&self, input: &SparseTensor, map: &KernelMap, mode: Mode) -> Result<SparseTensor> {
        if input.channels() != self.c_in {
            return Err(NnError::WidthMismatch {
                expected: self.c_in,
                got: input.channels(),
            });
        }
        let z = self.conv(input.feats(), map);
        let mut y = match (&self.bn, mode) {
            (None, _) => z,
            (Some(bn), Mode::Train) => bn.forward_train(&z, input.len()).0,
            (Some(bn), Mode::Infer) => bn.forward_infer(&z),
        };
        if self.relu {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        input.with_feats(y, self.c_out)
    }
}

/// Pooling of rows into one vector per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    Avg,
    Max,
}

/// Returns the pooled vector and, for max pooling, the winning row per channel.
pub fn pool(x: &[f64], channels: usize, mode: PoolMode) -> (Vec<f64>, Vec<usize>) {
    let rows = x.len() / channels;
    match mode {
        PoolMode::Avg => {
            let mut s = vec![0.0; channels];
            for r in x.chunks_exact(channels) {
                for (a, v) in s.iter_mut().zip(r) {
                    *a += v;
                }
            }
            s.iter_mut().for_each(|v| *v /= rows as f64);
            (s, Vec::new())
        }
        PoolMode::Max => {
            let mut s = vec![f64::NEG_INFINITY; channels];
            let mut arg = vec![0; channels];
            for (i, r) in x.chunks_exact(channels).enumerate() {
                for c in 0..channels {
                    if r[c] > s[c] {
                        s[c] = r[c];
                        arg[c] = i;
                    }
                }
            }
            (s, arg)
        }
    }
}

/// Adds the pooling gradient into `dx`.
pub fn pool_backward(ds: &[f64], rows: usize, mode: PoolMode, argmax: &[usize], dx: &mut [f64]) {
    let c = ds.len();
    match mode {
        PoolMode::Avg => {
            for r in dx.chunks_exact_mut(c) {
                for (d, g) in r.iter_mut().zip(ds) {
                    *d += g / rows as f64;
                }
            }
        }
        PoolMode::Max => {
            for ch in 0..c {
                dx[argmax[ch] * c + ch] += ds[ch];
            }
        }
    }
}

/// Channel-wise global pooling of a tensor.
pub fn global_pool(tensor: &SparseTensor, mode: PoolMode) -> Vec<f64> {
    pool(tensor.feats(), tensor.channels(), mode).0
}

/// Fully connected layer `y = x W + b`, `W: inputs x outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            for (o, yo) in y.iter_mut().enumerate() {
                *yo += xi * self.weights[i * self.outputs + o];
            }
        }
        y
    }

    /// Accumulates parameter gradients and returns `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
        for (b, g) in db.iter_mut().zip(dy) {
            *b += g;
        }
        let mut dx = vec![0.0; self.inputs];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &g) in dy.iter().enumerate() {
                dw[i * self.outputs + o] += xi * g;
                dx[i] += self.weights[i * self.outputs + o] * g;
            }
        }
        dx
    }
}

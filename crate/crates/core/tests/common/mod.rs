//! Independent reference implementations and synthetic data shared by the
//! integration tests. Nothing here calls the code under test for the value
//! being checked.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;

use pcqa::pcio::{save_ply, PlyMode, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- statistics

pub fn brute_plcc(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}

/// Average rank by counting: `1 + #smaller + (#equal - 1) / 2`.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let eq = v.iter().filter(|&&b| b == a).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}

pub fn brute_srocc(x: &[f64], y: &[f64]) -> f64 {
    brute_plcc(&brute_ranks(x), &brute_ranks(y))
}

// ------------------------------------------------------------- point clouds

/// A wavy colored sheet on the integer grid, `side x side` points.
pub fn sheet(side: i32, seed: u64) -> PointCloud {
    let mut r = rng(seed);
    let fx = r.random_range(3.0..6.0);
    let fy = r.random_range(3.0..6.0);
    let amp = r.random_range(2.0..4.0);
    let base: [f64; 3] = [r.random_range(40.0..200.0), r.random_range(40.0..200.0), r.random_range(40.0..200.0)];
    let mut pos = Vec::new();
    let mut col = Vec::new();
    for x in 0..side {
        for y in 0..side {
            let z = (amp * (x as f64 / fx).sin() * (y as f64 / fy).cos()).round();
            pos.push([x as f64, y as f64, z]);
            let t = (x + y) as f64 / (2 * side) as f64;
            col.push([
                (base[0] + 50.0 * t + r.random_range(-8.0..8.0)).clamp(0.0, 255.0) as u8,
                (base[1] - 40.0 * t + r.random_range(-8.0..8.0)).clamp(0.0, 255.0) as u8,
                (base[2] + 30.0 * (x as f64 / 3.0).sin() + r.random_range(-8.0..8.0)).clamp(0.0, 255.0) as u8,
            ]);
        }
    }
    PointCloud::new(pos, col).unwrap()
}

/// `sheet` geometry with a smooth full-range color texture plus grain.
pub fn textured_sheet(side: i32, seed: u64) -> PointCloud {
    let g = sheet(side, seed);
    let mut r = rng(seed ^ 0x7e47);
    let (a, b, c) = (r.random_range(3.0..7.0), r.random_range(3.0..7.0), r.random_range(4.0..9.0));
    let col = g
        .positions()
        .iter()
        .map(|p| {
            let mut f = |v: f64| (128.0 + 110.0 * v + r.random_range(-15.0..15.0)).clamp(0.0, 255.0) as u8;
            [f((p[0] / a).sin()), f((p[1] / b).cos()), f(((p[0] + p[1]) / c).sin())]
        })
        .collect();
    PointCloud::new(g.positions().to_vec(), col).unwrap()
}

/// `n` distinct integer points in a `span` cube with random colors.
pub fn blob(n: usize, span: i32, seed: u64) -> PointCloud {
    let mut r = rng(seed);
    let mut set = std::collections::BTreeSet::new();
    while set.len() < n {
        set.insert([r.random_range(0..span), r.random_range(0..span), r.random_range(0..span)]);
    }
    let pos = set.into_iter().map(|p: [i32; 3]| p.map(f64::from)).collect();
    let col = (0..n).map(|_| [r.random(), r.random(), r.random()]).collect();
    PointCloud::new(pos, col).unwrap()
}

/// Continuous random cloud with random unit normals.
pub fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut r = rng(seed);
    let pos = (0..n)
        .map(|_| [r.random_range(0.0..10.0), r.random_range(0.0..10.0), r.random_range(0.0..10.0)])
        .collect();
    let col = (0..n).map(|_| [r.random(), r.random(), r.random()]).collect();
    let normals = (0..n)
        .map(|_| {
            let v: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-3);
            v.map(|c| c / l)
        })
        .collect();
    let mut c = PointCloud::new(pos, col).unwrap();
    c = c.with_normals(normals).unwrap_or_else(|_| unreachable!());
    c
}

pub fn write_refs(dir: &Path, clouds: &[(&str, PointCloud)]) {
    std::fs::create_dir_all(dir).unwrap();
    for (id, c) in clouds {
        save_ply(c, dir.join(format!("{id}.ply")), PlyMode::BinaryLe).unwrap();
    }
}

// ---------------------------------------------------------- metric oracles

fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

fn nearest(cloud: &PointCloud, p: [f64; 3]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, &q) in cloud.positions().iter().enumerate() {
        let d = d2(p, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn pooled(v: &[f64], max: bool) -> f64 {
    if max {
        v.iter().cloned().fold(0.0, f64::max)
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Point-to-point error of `b` against `a`.
pub fn oracle_p2point(a: &PointCloud, b: &PointCloud, max: bool) -> f64 {
    let e: Vec<f64> = b.positions().iter().map(|&p| d2(p, a.positions()[nearest(a, p)])).collect();
    pooled(&e, max)
}

/// Point-to-plane error of `b` against `a`, using `a`'s stored normals.
pub fn oracle_p2plane(a: &PointCloud, b: &PointCloud, max: bool) -> f64 {
    let n = a.normals().expect("oracle needs explicit normals");
    let e: Vec<f64> = b
        .positions()
        .iter()
        .map(|&p| {
            let j = nearest(a, p);
            let q = a.positions()[j];
            let proj: f64 = (0..3).map(|k| (p[k] - q[k]) * n[j][k]).sum();
            proj * proj
        })
        .collect();
    pooled(&e, max)
}

fn yuv(c: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = c.map(f64::from);
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b,
        128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b,
    ]
}

pub fn oracle_yuv_errors(a: &PointCloud, b: &PointCloud, max: bool) -> [f64; 3] {
    let mut per = [Vec::new(), Vec::new(), Vec::new()];
    for (p, c) in b.positions().iter().zip(b.colors()) {
        let j = nearest(a, *p);
        let (x, y) = (yuv(*c), yuv(a.colors()[j]));
        for k in 0..3 {
            per[k].push((x[k] - y[k]).powi(2));
        }
    }
    std::array::from_fn(|k| pooled(&per[k], max))
}

pub fn oracle_psnr(peak_sq: f64, e: f64) -> f64 {
    if e < peak_sq * 1e-10 {
        100.0
    } else {
        (10.0 * (peak_sq / e).log10()).min(100.0)
    }
}

pub fn oracle_psnr_yuv(reference: &PointCloud, degraded: &PointCloud, max: bool) -> f64 {
    let f = oracle_yuv_errors(reference, degraded, max);
    let b = oracle_yuv_errors(degraded, reference, max);
    let c: [f64; 3] = std::array::from_fn(|k| oracle_psnr(255.0 * 255.0, f[k].max(b[k])));
    (6.0 * c[0] + c[1] + c[2]) / 8.0
}

// ------------------------------------------------------- convolution oracles

/// Dense zero-padded 3x3x3 convolution over an `n^3` grid. `x[i][j][k]` is a
/// feature vector; `w(dx, dy, dz)` is the `c_in x c_out` matrix for an offset
/// and the output at `u` reads the input at `u + offset`.
pub fn dense_conv(
    x: &[Vec<f64>],
    n: i32,
    c_in: usize,
    c_out: usize,
    w: impl Fn(i32, i32, i32) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let idx = |i: i32, j: i32, k: i32| ((i * n + j) * n + k) as usize;
    let mut out = vec![vec![0.0; c_out]; (n * n * n) as usize];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            let (a, b, c) = (i + dx, j + dy, k + dz);
                            if a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n {
                                continue;
                            }
                            let m = w(dx, dy, dz);
                            let src = &x[idx(a, b, c)];
                            for o in 0..c_out {
                                for q in 0..c_in {
                                    out[idx(i, j, k)][o] += m[q * c_out + o] * src[q];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Straight-line inference pass of the default residual pattern (first
/// layer output joins the third layer of every block), written without the
/// library's kernel maps or matrix kernels.
pub fn straight_forward(model: &pcqa::sparsenn::ResScnn, coords: &[[i32; 4]], feats: &[Vec<f64>]) -> f64 {
    let index: HashMap<[i32; 4], usize> = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let offset = |k: usize| -> [i32; 3] { [(k / 9) as i32 - 1, (k / 3 % 3) as i32 - 1, (k % 3) as i32 - 1] };
    let conv = |layer: &pcqa::sparsenn::ConvLayer, x: &[Vec<f64>]| -> Vec<Vec<f64>> {
        coords
            .iter()
            .map(|u| {
                let mut o = vec![0.0; layer.c_out];
                for k in 0..27 {
                    let d = offset(k);
                    if let Some(&src) = index.get(&[u[0] + d[0], u[1] + d[1], u[2] + d[2], u[3]]) {
                        for q in 0..layer.c_in {
                            for c in 0..layer.c_out {
                                o[c] += layer.weights[(k * layer.c_in + q) * layer.c_out + c] * x[src][q];
                            }
                        }
                    }
                }
                o
            })
            .collect()
    };
    let finish = |layer: &pcqa::sparsenn::ConvLayer, z: Vec<Vec<f64>>, skip: Option<&Vec<Vec<f64>>>| -> Vec<Vec<f64>> {
        z.into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(c, v)| {
                        let mut y = match &layer.bn {
                            Some(bn) => {
                                bn.gamma[c] * (v - bn.running_mean[c]) / (bn.running_var[c] + bn.eps).sqrt() + bn.beta[c]
                            }
                            None => v,
                        };
                        if let Some(s) = skip {
                            y += s[i][c];
                        }
                        y.max(0.0)
                    })
                    .collect()
            })
            .collect()
    };
    let mut x = feats.to_vec();
    let mut pooled = Vec::new();
    for block in model.layers.chunks(3) {
        let a1 = finish(&block[0], conv(&block[0], &x), None);
        let a2 = finish(&block[1], conv(&block[1], &a1), None);
        let a3 = finish(&block[2], conv(&block[2], &a2), Some(&a1));
        let width = block[2].c_out;
        for c in 0..width {
            pooled.push(a3.iter().map(|r| r[c]).sum::<f64>() / a3.len() as f64);
        }
        x = a3;
    }
    let h: Vec<f64> = (0..model.fc1.outputs)
        .map(|o| {
            let s: f64 = (0..model.fc1.inputs).map(|i| pooled[i] * model.fc1.weights[i * model.fc1.outputs + o]).sum();
            (s + model.fc1.bias[o]).max(0.0)
        })
        .collect();
    h.iter().zip(&model.fc2.weights).map(|(a, b)| a * b).sum::<f64>() + model.fc2.bias[0]
}

// ------------------------------------------------------- subjective scores

/// Hidden quality on the 1..5 scale, decaying with level at a per-type rate.
pub fn hidden_quality(distortion_id: u8, level: u8) -> f64 {
    let rate = 0.15 + 0.05 * (distortion_id % 7) as f64;
    1.0 + 4.0 * (-rate * (level as f64 - 1.0)).exp()
}

/// Ratings CSV (`stimulus_id,subject_id,score`) with per-subject Gaussian
/// noise around the hidden quality, clamped to the scale.
pub fn planted_ratings(stimuli: &[(String, u8, u8)], subjects: usize, noise: f64, seed: u64) -> String {
    let mut r = rng(seed);
    let d = Normal::new(0.0, noise).unwrap();
    let mut out = String::from("stimulus_id,subject_id,score\n");
    for (id, dist, level) in stimuli {
        let q = hidden_quality(*dist, *level);
        for s in 0..subjects {
            let score = (q + d.sample(&mut r)).clamp(1.0, 5.0);
            out.push_str(&format!("{id},s{s:02},{score:.3}\n"));
        }
    }
    out
}

//! Photometric distortions. Positions and point count are never touched;
//! every output channel is rounded and cropped to `[0,255]`.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::registry::descriptor;
use super::{DistortError, Result};
use crate::colorspace::{crop, hsl_to_rgb, rgb_to_hsl, rgb_to_ycbcr, ycbcr_to_rgb};
use crate::pcio::{KdTree, PointCloud, Rgb};

/// Neighbors (excluding the point itself) used by the neighbor-based families.
const NEIGHBORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorNoiseFamily {
    Color,
    GaussianSnr,
    SaltPepper,
    Rayleigh,
    Gamma,
    Uniform,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuredNoiseFamily {
    HighFrequency,
    Correlated,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorTransformFamily {
    Quantization,
    MeanShift,
    Contrast,
    Saturation,
    DitherQuantization,
    Luminance,
}

pub(super) fn param(id: u8, index: usize, level: u8) -> f64 {
    assert!((1..=7).contains(&level), "level {level} outside 1..=7");
    descriptor(id).expect("catalogue id").params[index].values[level as usize - 1]
}

fn as_f64(c: Rgb) -> [f64; 3] {
    c.map(f64::from)
}

fn recolor(cloud: &PointCloud, colors: Vec<Rgb>) -> PointCloud {
    cloud
        .with_colors(colors)
        .expect("color count matches point count")
}

/// Noise standard deviation giving `snr_db` against a signal of mean power
/// `signal_power` (mean of squared channel values).
pub fn gaussian_snr_sigma(signal_power: f64, snr_db: f64) -> f64 {
    (signal_power / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// The additive field item 2 applies before cropping: one zero-mean
/// Gaussian draw per channel, in point-then-channel order.
pub fn gaussian_snr_noise<R: Rng + ?Sized>(cloud: &PointCloud, level: u8, rng: &mut R) -> Vec<[f64; 3]> {
    let sigma = gaussian_snr_sigma(signal_power(cloud.colors()), param(2, 0, level));
    if sigma == 0.0 {
        return vec![[0.0; 3]; cloud.len()];
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    (0..cloud.len())
        .map(|_| std::array::from_fn(|_| normal.sample(rng)))
        .collect()
}

pub fn signal_power(colors: &[Rgb]) -> f64 {
    let sum: f64 = colors
        .iter()
        .flat_map(|c| c.iter())
        .map(|&v| (v as f64) * (v as f64))
        .sum();
    sum / (3 * colors.len()) as f64
}

fn add_per_channel(
    cloud: &PointCloud,
    mut noise: impl FnMut() -> f64,
) -> PointCloud {
    let colors = cloud
        .colors()
        .iter()
        .map(|&c| as_f64(c).map(|v| crop(v + noise())))
        .collect();
    recolor(cloud, colors)
}

/// Items 1, 2, 12–16: independent per-point (or per-channel) noise.
pub fn pointwise_color_noise<R: Rng + ?Sized>(
    cloud: &PointCloud,
    family: ColorNoiseFamily,
    level: u8,
    rng: &mut R,
) -> PointCloud {
    let n = cloud.len();
    match family {
        ColorNoiseFamily::Color => {
            let fraction = param(1, 0, level);
            let amplitude = param(1, 1, level) as i32;
            let count = (fraction * n as f64).round() as usize;
            let mut colors = cloud.colors().to_vec();
            for i in sample(rng, n, count).into_vec() {
                // one offset shared by R, G and B
                let offset = rng.random_range(-amplitude..=amplitude) as f64;
                colors[i] = as_f64(colors[i]).map(|v| crop(v + offset));
            }
            recolor(cloud, colors)
        }
        ColorNoiseFamily::GaussianSnr => {
            let noise = gaussian_snr_noise(cloud, level, rng);
            let colors = cloud
                .colors()
                .iter()
                .zip(&noise)
                .map(|(&c, e)| {
                    let v = as_f64(c);
                    std::array::from_fn(|k| crop(v[k] + e[k]))
                })
                .collect();
            recolor(cloud, colors)
        }
        ColorNoiseFamily::SaltPepper => {
            let count = (param(12, 0, level) * n as f64).round() as usize;
            let mut colors = cloud.colors().to_vec();
            for i in sample(rng, n, count).into_vec() {
                colors[i] = if rng.random_bool(0.5) { [255; 3] } else { [0; 3] };
            }
            recolor(cloud, colors)
        }
        ColorNoiseFamily::Rayleigh => {
            let scale = param(13, 0, level);
            add_per_channel(cloud, || {
                let u: f64 = rng.random();
                scale * (-2.0 * (1.0 - u).ln()).sqrt()
            })
        }
        ColorNoiseFamily::Gamma => {
            let a = param(14, 0, level);
            add_per_channel(cloud, || {
                (0..3)
                    .map(|_| {
                        let u: f64 = rng.random();
                        -(1.0 - u).ln() / a
                    })
                    .sum()
            })
        }
        ColorNoiseFamily::Uniform => {
            let amplitude = param(15, 0, level);
            add_per_channel(cloud, || rng.random_range(-amplitude..=amplitude))
        }
        ColorNoiseFamily::Poisson => {
            let poisson = Poisson::new(param(16, 0, level)).expect("positive mean");
            add_per_channel(cloud, || poisson.sample(rng))
        }
    }
}

/// For every point, the ids of its `NEIGHBORS` nearest other points.
fn neighbor_table(cloud: &PointCloud) -> Result<Vec<Vec<usize>>> {
    let n = cloud.len();
    if n < NEIGHBORS + 1 {
        return Err(DistortError::TooFewPoints {
            need: NEIGHBORS + 1,
            have: n,
        });
    }
    let tree = KdTree::new(cloud.positions());
    cloud
        .positions()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut nb: Vec<usize> = tree
                .k_nearest(p, NEIGHBORS + 1)?
                .into_iter()
                .map(|(j, _)| j)
                .filter(|&j| j != i)
                .collect();
            nb.truncate(NEIGHBORS);
            Ok(nb)
        })
        .collect::<std::result::Result<_, crate::pcio::PcioError>>()
        .map_err(Into::into)
}

/// Items 3, 8, 9: noise with spatial structure or signal dependence.
pub fn structured_color_noise<R: Rng + ?Sized>(
    cloud: &PointCloud,
    family: StructuredNoiseFamily,
    level: u8,
    rng: &mut R,
) -> Result<PointCloud> {
    let colors = match family {
        StructuredNoiseFamily::HighFrequency => {
            let sigma = param(3, 0, level).sqrt() * 255.0;
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            let nb = neighbor_table(cloud)?;
            let src = cloud.colors();
            nb.iter()
                .enumerate()
                .map(|(i, nbrs)| {
                    let mut low = [0.0; 3];
                    for &j in nbrs {
                        for k in 0..3 {
                            low[k] += src[j][k] as f64;
                        }
                    }
                    let low = low.map(|v| v / nbrs.len() as f64);
                    let c = as_f64(src[i]);
                    let mut out = [0u8; 3];
                    for k in 0..3 {
                        let residual = c[k] - low[k] + normal.sample(rng);
                        out[k] = crop(low[k] + residual);
                    }
                    out
                })
                .collect()
        }
        StructuredNoiseFamily::Correlated => {
            let sigma = param(8, 0, level);
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            let nb = neighbor_table(cloud)?;
            let draws: Vec<[f64; 3]> = (0..cloud.len())
                .map(|_| [normal.sample(rng), normal.sample(rng), normal.sample(rng)])
                .collect();
            // mean of NEIGHBORS iid draws has variance sigma^2 / NEIGHBORS
            let restore = (NEIGHBORS as f64).sqrt();
            cloud
                .colors()
                .iter()
                .zip(&nb)
                .map(|(&c, nbrs)| {
                    let mut acc = [0.0; 3];
                    for &j in nbrs {
                        for k in 0..3 {
                            acc[k] += draws[j][k];
                        }
                    }
                    let c = as_f64(c);
                    std::array::from_fn(|k| crop(c[k] + acc[k] / nbrs.len() as f64 * restore))
                })
                .collect()
        }
        StructuredNoiseFamily::Multiplicative => {
            let variance = param(9, 0, level) * 1e-4;
            let normal = Normal::new(0.0, variance.sqrt()).expect("finite sigma");
            cloud
                .colors()
                .iter()
                .map(|&c| as_f64(c).map(|v| crop(v * (1.0 + normal.sample(rng)))))
                .collect()
        }
    };
    Ok(recolor(cloud, colors))
}

/// Items 4, 5, 6, 7, 10, 22: deterministic color transforms (item 10 also
/// draws dither offsets and k-means seeds from `rng`).
pub fn color_transform<R: Rng + ?Sized>(
    cloud: &PointCloud,
    family: ColorTransformFamily,
    level: u8,
    rng: &mut R,
) -> PointCloud {
    let map = |f: &dyn Fn([f64; 3]) -> [f64; 3]| -> Vec<Rgb> {
        cloud
            .colors()
            .iter()
            .map(|&c| f(as_f64(c)).map(crop))
            .collect()
    };
    let colors = match family {
        ColorTransformFamily::Quantization => {
            let q = param(4, 0, level);
            let half = (q / 2.0).floor();
            map(&|c| c.map(|v| (v / q).floor() * q + half))
        }
        ColorTransformFamily::MeanShift => {
            let shift = param(5, 0, level);
            map(&|c| c.map(|v| v + shift))
        }
        ColorTransformFamily::Contrast => {
            let gamma = param(6, 0, level);
            map(&|c| c.map(|v| 255.0 * (v / 255.0).powf(gamma)))
        }
        ColorTransformFamily::Saturation => {
            let delta = param(7, 0, level);
            map(&|c| {
                let [h, s, l] = rgb_to_hsl(c.map(|v| v / 255.0));
                let s = (s * (1.0 + delta)).clamp(0.0, 1.0);
                hsl_to_rgb([h, s, l]).map(|v| v * 255.0)
            })
        }
        ColorTransformFamily::Luminance => {
            let offset = param(22, 0, level);
            map(&|c| {
                let mut ycc = rgb_to_ycbcr(c);
                ycc[0] += offset;
                ycbcr_to_rgb(ycc)
            })
        }
        ColorTransformFamily::DitherQuantization => {
            let k = param(10, 0, level) as usize;
            dither_quantize(cloud.colors(), k, rng)
        }
    };
    recolor(cloud, colors)
}

fn sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

fn nearest_center(c: [f64; 3], centers: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &m) in centers.iter().enumerate() {
        let d = sq(c, m);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// k-means (k-means++ seeding, Lloyd iterations) over RGB.
pub(crate) fn kmeans_palette<R: Rng + ?Sized>(
    colors: &[Rgb],
    k: usize,
    rng: &mut R,
) -> Vec<[f64; 3]> {
    const MAX_ITERS: usize = 50;
    let pts: Vec<[f64; 3]> = colors.iter().map(|&c| as_f64(c)).collect();
    let k = k.min(pts.len()).max(1);
    let mut centers = vec![pts[rng.random_range(0..pts.len())]];
    let mut d2: Vec<f64> = pts.iter().map(|&p| sq(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = pts.len() - 1;
        for (i, &w) in d2.iter().enumerate() {
            if target < w {
                pick = i;
                break;
            }
            target -= w;
        }
        let c = pts[pick];
        centers.push(c);
        for (slot, &p) in d2.iter_mut().zip(&pts) {
            *slot = slot.min(sq(p, c));
        }
    }
    let mut assign = vec![usize::MAX; pts.len()];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (a, &p) in assign.iter_mut().zip(&pts) {
            let j = nearest_center(p, &centers);
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&a, &p) in assign.iter().zip(&pts) {
            counts[a] += 1;
            for c in 0..3 {
                sums[a][c] += p[c];
            }
        }
        for j in 0..centers.len() {
            if counts[j] > 0 {
                centers[j] = sums[j].map(|s| s / counts[j] as f64);
            }
        }
    }
    centers
}

fn dither_quantize<R: Rng + ?Sized>(colors: &[Rgb], k: usize, rng: &mut R) -> Vec<Rgb> {
    let palette: Vec<[f64; 3]> = kmeans_palette(colors, k, rng)
        .into_iter()
        .map(|c| c.map(|v| v.round()))
        .collect();
    // mean distance from each palette color to its closest other entry
    let spacing = if palette.len() < 2 {
        0.0
    } else {
        palette
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                palette
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &b)| sq(a, b).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / palette.len() as f64
    };
    let half = spacing / 2.0;
    colors
        .iter()
        .map(|&c| {
            let mut v = as_f64(c);
            if half > 0.0 {
                for x in &mut v {
                    *x += rng.random_range(-half..=half);
                }
            }
            palette[nearest_center(v, &palette)].map(crop)
        })
        .collect()
}

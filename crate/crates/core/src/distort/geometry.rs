//! Distortions that move, remove or merge points.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::color::param;
use super::{DistortError, Result};
use crate::pcio::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryNoiseFamily {
    GaussianShift,
    UniformShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalFamily {
    Missing,
    Offset,
    Rotation,
}

/// Anchor cube side relative to the largest bounding-box side.
const ANCHOR_SIDE: f64 = 0.3;
/// Translation of offset anchors relative to the largest bounding-box side.
const ANCHOR_OFFSET: f64 = 0.05;
const MAX_ANCHORS: usize = 16;

/// Item 11: keep `round((1 - r) N)` uniformly chosen points in input order.
pub fn downsample<R: Rng + ?Sized>(cloud: &PointCloud, level: u8, rng: &mut R) -> Result<PointCloud> {
    let n = cloud.len();
    let keep = ((1.0 - param(11, 0, level)) * n as f64).round() as usize;
    if keep == 0 {
        return Err(DistortError::FullyDeleted);
    }
    let mut rows = sample(rng, n, keep).into_vec();
    rows.sort_unstable();
    Ok(cloud.select(&rows)?)
}

/// Items 17, 18: per-axis displacement scaled by the bounding-box diagonal.
pub fn geometry_noise<R: Rng + ?Sized>(
    cloud: &PointCloud,
    family: GeometryNoiseFamily,
    level: u8,
    rng: &mut R,
) -> Result<PointCloud> {
    let diag = cloud.bounding_box().diagonal();
    if diag <= 0.0 {
        return Err(DistortError::ZeroExtent);
    }
    let mut pos = cloud.positions().to_vec();
    match family {
        GeometryNoiseFamily::GaussianShift => {
            let sigma = param(17, 0, level) / 100.0 * diag;
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            for p in &mut pos {
                for v in p.iter_mut() {
                    *v += normal.sample(rng);
                }
            }
        }
        GeometryNoiseFamily::UniformShift => {
            let count = (param(18, 0, level) * pos.len() as f64).round() as usize;
            let range = param(18, 1, level) / 100.0 * diag;
            for i in sample(rng, pos.len(), count).into_vec() {
                for v in pos[i].iter_mut() {
                    *v += rng.random_range(-range..=range);
                }
            }
        }
    }
    Ok(cloud.with_positions(pos)?)
}

/// Anchor centers for `level`: the first `{1,2,4,6,9,12,16}[level-1]` of a
/// fixed draw of up to 16 distinct point indices, so the sets nest when the
/// generator state is the same across levels.
pub fn local_anchors<R: Rng + ?Sized>(cloud: &PointCloud, level: u8, rng: &mut R) -> Vec<Point3> {
    let n = cloud.len();
    let drawn = sample(rng, n, MAX_ANCHORS.min(n)).into_vec();
    let count = (param(19, 0, level) as usize).min(drawn.len());
    drawn[..count].iter().map(|&i| cloud.positions()[i]).collect()
}

fn anchor_of(p: Point3, anchors: &[Point3], half: f64) -> Option<usize> {
    anchors
        .iter()
        .position(|a| (0..3).all(|k| (p[k] - a[k]).abs() <= half))
}

/// Items 19–21: cube anchors of side `0.3 * max side` around random points.
pub fn local_distortion<R: Rng + ?Sized>(
    cloud: &PointCloud,
    family: LocalFamily,
    level: u8,
    rng: &mut R,
) -> Result<PointCloud> {
    let max_side = cloud.bounding_box().max_side();
    let anchors = local_anchors(cloud, level, rng);
    let half = ANCHOR_SIDE * max_side / 2.0;
    let owner: Vec<Option<usize>> = cloud
        .positions()
        .iter()
        .map(|&p| anchor_of(p, &anchors, half))
        .collect();
    match family {
        LocalFamily::Missing => {
            let rows: Vec<usize> = (0..cloud.len()).filter(|&i| owner[i].is_none()).collect();
            if rows.is_empty() {
                return Err(DistortError::FullyDeleted);
            }
            Ok(cloud.select(&rows)?)
        }
        LocalFamily::Offset => {
            let shift = ANCHOR_OFFSET * max_side;
            let pos = cloud
                .positions()
                .iter()
                .zip(&owner)
                .map(|(&p, o)| if o.is_some() { p.map(|v| v + shift) } else { p })
                .collect();
            Ok(cloud.with_positions(pos)?)
        }
        LocalFamily::Rotation => {
            let angle = param(21, 1, level).to_radians();
            let (sin, cos) = angle.sin_cos();
            let mut sums = vec![([0.0; 3], 0usize); anchors.len()];
            for (p, o) in cloud.positions().iter().zip(&owner) {
                if let Some(a) = *o {
                    for k in 0..3 {
                        sums[a].0[k] += p[k];
                    }
                    sums[a].1 += 1;
                }
            }
            let centers: Vec<Point3> = sums
                .iter()
                .map(|(s, c)| s.map(|v| v / (*c).max(1) as f64))
                .collect();
            let pos = cloud
                .positions()
                .iter()
                .zip(&owner)
                .map(|(&p, o)| match *o {
                    None => p,
                    Some(a) => {
                        let c = centers[a];
                        let (y, z) = (p[1] - c[1], p[2] - c[2]);
                        [p[0], c[1] + cos * y - sin * z, c[2] + sin * y + cos * z]
                    }
                })
                .collect();
            Ok(cloud.with_positions(pos)?)
        }
    }
}

/// Item 24: one point per occupied voxel of side `s`, at the voxel center,
/// carrying the rounded mean color of its members.
pub fn octree_compress(cloud: &PointCloud, level: u8) -> Result<PointCloud> {
    let s = param(24, 0, level);
    let mut slot: HashMap<[i64; 3], usize> = HashMap::new();
    let mut keys: Vec<[i64; 3]> = Vec::new();
    let mut sums: Vec<([u64; 3], u64)> = Vec::new();
    for (p, c) in cloud.positions().iter().zip(cloud.colors()) {
        let key = p.map(|v| (v / s).floor() as i64);
        let i = *slot.entry(key).or_insert_with(|| {
            keys.push(key);
            sums.push(([0; 3], 0));
            keys.len() - 1
        });
        for k in 0..3 {
            sums[i].0[k] += c[k] as u64;
        }
        sums[i].1 += 1;
    }
    let pos = keys
        .iter()
        .map(|k| k.map(|v| (v as f64 + 0.5) * s))
        .collect();
    let col = sums
        .iter()
        .map(|(sum, n)| sum.map(|v| (v as f64 / *n as f64).round() as u8))
        .collect();
    Ok(PointCloud::new(pos, col)?)
}

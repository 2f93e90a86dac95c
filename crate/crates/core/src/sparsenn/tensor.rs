//! Sparse tensors over integer voxel coordinates and sub-manifold kernel maps.

use std::collections::HashMap;

use super::{NnError, Result};
use crate::pcio::PointCloud;

pub type Coord = [i32; 4];

/// Rows of `(x, y, z, b)` coordinates with one feature vector each.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    coords: Vec<Coord>,
    feats: Vec<f64>,
    channels: usize,
    index: HashMap<Coord, usize>,
}

impl SparseTensor {
    /// `feats` is row-major `coords.len() x channels`.
    pub fn new(coords: Vec<Coord>, feats: Vec<f64>, channels: usize) -> Result<Self> {
        if coords.is_empty() {
            return Err(NnError::EmptyTensor);
        }
        if feats.len() != coords.len() * channels {
            return Err(NnError::WidthMismatch {
                expected: coords.len() * channels,
                got: feats.len(),
            });
        }
        let mut index = HashMap::with_capacity(coords.len());
        for (i, &c) in coords.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(NnError::DuplicateCoordinate(c));
            }
        }
        Ok(Self {
            coords,
            feats,
            channels,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn feats(&self) -> &[f64] {
        &self.feats
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.feats[i * self.channels..(i + 1) * self.channels]
    }

    pub fn lookup(&self, c: &Coord) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Same coordinates, new features.
    pub fn with_feats(&self, feats: Vec<f64>, channels: usize) -> Result<Self> {
        if feats.len() != self.len() * channels {
            return Err(NnError::WidthMismatch {
                expected: self.len() * channels,
                got: feats.len(),
            });
        }
        Ok(Self {
            coords: self.coords.clone(),
            feats,
            channels,
            index: self.index.clone(),
        })
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let coords = order.iter().map(|&i| self.coords[i]).collect();
        let feats = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self::new(coords, feats, self.channels)
    }
}

/// Quantizes positions to `floor(p / voxel)`; points sharing a voxel are
/// merged by averaging their features `rgb / 255 - 0.5`. Rows follow the
/// first occurrence of each voxel.
pub fn voxelize(cloud: &PointCloud, voxel: f64) -> Result<SparseTensor> {
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(NnError::BadVoxelSize(voxel));
    }
    let mut slot: HashMap<Coord, usize> = HashMap::new();
    let mut coords = Vec::new();
    let mut sums: Vec<[f64; 3]> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (p, c) in cloud.positions().iter().zip(cloud.colors()) {
        let key = [
            (p[0] / voxel).floor() as i32,
            (p[1] / voxel).floor() as i32,
            (p[2] / voxel).floor() as i32,
            0,
        ];
        let i = *slot.entry(key).or_insert_with(|| {
            coords.push(key);
            sums.push([0.0; 3]);
            counts.push(0);
            coords.len() - 1
        });
        for k in 0..3 {
            sums[i][k] += c[k] as f64 / 255.0 - 0.5;
        }
        counts[i] += 1;
    }
    let feats = sums
        .iter()
        .zip(&counts)
        .flat_map(|(s, &n)| s.map(|v| v / n as f64))
        .collect();
    SparseTensor::new(coords, feats, 3)
}

/// The 27 offsets of a 3x3x3 kernel in `(dx, dy, dz)` lexicographic order.
pub const KERNEL_VOLUME: usize = 27;
pub const CENTER_OFFSET: usize = 13;

pub fn kernel_offsets() -> [[i32; 3]; KERNEL_VOLUME] {
    let mut out = [[0; 3]; KERNEL_VOLUME];
    let mut k = 0;
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                out[k] = [dx, dy, dz];
                k += 1;
            }
        }
    }
    out
}

/// For every offset `i`, the `(input row, output row)` pairs with
/// `coord(input) = coord(output) + i`, sorted by output row.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMap {
    pairs: Vec<Vec<(u32, u32)>>,
    rows: usize,
}

impl KernelMap {
    pub fn pairs(&self, offset: usize) -> &[(u32, u32)] {
        &self.pairs[offset]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn total_pairs(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }
}

pub fn build_kernel_map(tensor: &SparseTensor) -> KernelMap {
    let offsets = kernel_offsets();
    let mut pairs = vec![Vec::new(); KERNEL_VOLUME];
    for (out_row, c) in tensor.coords().iter().enumerate() {
        for (k, o) in offsets.iter().enumerate() {
            let q = [c[0] + o[0], c[1] + o[1], c[2] + o[2], c[3]];
            if let Some(in_row) = tensor.lookup(&q) {
                pairs[k].push((in_row as u32, out_row as u32));
            }
        }
    }
    KernelMap {
        pairs,
        rows: tensor.len(),
    }
}

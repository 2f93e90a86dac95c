//! Full-reference quality metrics: point-to-point and point-to-plane
//! geometry errors, YCbCr color PSNR, and ingestion of scores computed by
//! outside tools.

mod ingest;

pub use ingest::{ingest_external_scores, read_scores, write_scores};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::rgb_to_ycbcr;
use crate::pcio::{
    dist2, dot3, estimate_normals, sub3, KdTree, PcioError, Point3, PointCloud,
    DEFAULT_NORMAL_NEIGHBORS,
};

/// Upper bound on every PSNR value, reached by identical inputs.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric input cloud is empty")]
    EmptyCloud,
    #[error("reference bounding box has zero extent")]
    ZeroExtent,
    #[error("negative error statistic {0}")]
    NegativeError(f64),
    #[error("unknown metric name `{0}`")]
    UnknownMetric(String),
    #[error("score file is missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: value `{value}` is not a finite number")]
    NonNumeric { row: usize, value: String },
    #[error("row {row}: empty {field}")]
    EmptyField { row: usize, field: &'static str },
    #[error("duplicate score for metric `{metric}` on degraded `{degraded}`")]
    Duplicate { metric: String, degraded: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Cloud(#[from] PcioError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pooling {
    Mse,
    Hausdorff,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    MP2po,
    MP2pl,
    HP2po,
    HP2pl,
    PsnrYuv,
    HPsnrYuv,
    External(String),
}

impl MetricId {
    pub const NATIVE: [MetricId; 6] = [
        MetricId::MP2po,
        MetricId::MP2pl,
        MetricId::HP2po,
        MetricId::HP2pl,
        MetricId::PsnrYuv,
        MetricId::HPsnrYuv,
    ];

    pub fn name(&self) -> &str {
        match self {
            MetricId::MP2po => "M-p2po",
            MetricId::MP2pl => "M-p2pl",
            MetricId::HP2po => "H-p2po",
            MetricId::HP2pl => "H-p2pl",
            MetricId::PsnrYuv => "PSNRyuv",
            MetricId::HPsnrYuv => "H-PSNRyuv",
            MetricId::External(name) => name,
        }
    }

    /// Native geometry metrics say nothing about color-only degradations.
    pub fn is_geometry(&self) -> bool {
        matches!(
            self,
            MetricId::MP2po | MetricId::MP2pl | MetricId::HP2po | MetricId::HP2pl
        )
    }

    /// Whether the metric is defined for a distortion that does or does not
    /// move points.
    pub fn applies(&self, alters_geometry: bool) -> bool {
        alters_geometry || !self.is_geometry()
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    /// Native names map to their variants; anything else non-empty is external.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(MetricError::UnknownMetric(s.to_string()));
        }
        Ok(MetricId::NATIVE
            .iter()
            .find(|m| m.name() == s)
            .cloned()
            .unwrap_or_else(|| MetricId::External(s.to_string())))
    }
}

impl Serialize for MetricId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: MetricId,
    pub reference_id: String,
    pub degraded_id: String,
    pub value: f64,
}

fn pool(errors: impl Iterator<Item = f64>, pooling: Pooling) -> f64 {
    let mut n = 0usize;
    let mut acc = 0.0f64;
    for e in errors {
        n += 1;
        acc = match pooling {
            Pooling::Mse => acc + e,
            Pooling::Hausdorff => acc.max(e),
        };
    }
    match pooling {
        Pooling::Mse => acc / n as f64,
        Pooling::Hausdorff => acc,
    }
}

fn check(reference: &PointCloud, degraded: &PointCloud) -> Result<()> {
    if reference.is_empty() || degraded.is_empty() {
        Err(MetricError::EmptyCloud)
    } else {
        Ok(())
    }
}

/// Per-point normals: the cloud's own, else PCA estimates. Clouds too small
/// for a plane fit get `(0,0,1)`, as degenerate neighborhoods do.
pub fn normals_of(cloud: &PointCloud) -> Vec<Point3> {
    if let Some(n) = cloud.normals() {
        return n.to_vec();
    }
    let k = DEFAULT_NORMAL_NEIGHBORS.min(cloud.len());
    if k < 3 {
        return vec![[0.0, 0.0, 1.0]; cloud.len()];
    }
    let est = estimate_normals(cloud, k).expect("k within range");
    est.cloud.normals().expect("normals just set").to_vec()
}

/// Mean or max over degraded points of the squared distance to the nearest
/// reference point.
pub fn p2point(reference: &PointCloud, degraded: &PointCloud, pooling: Pooling) -> Result<f64> {
    check(reference, degraded)?;
    let tree = KdTree::new(reference.positions());
    Ok(pool(
        degraded.positions().iter().map(|&p| tree.nearest(p).1),
        pooling,
    ))
}

/// Like [`p2point`] with each error vector projected on the normal of the
/// matched reference point.
pub fn p2plane(reference: &PointCloud, degraded: &PointCloud, pooling: Pooling) -> Result<f64> {
    check(reference, degraded)?;
    let tree = KdTree::new(reference.positions());
    let normals = normals_of(reference);
    Ok(pool(
        degraded.positions().iter().map(|&p| {
            let (j, _) = tree.nearest(p);
            let d = dot3(sub3(p, reference.positions()[j]), normals[j]);
            d * d
        }),
        pooling,
    ))
}

pub fn p2point_symmetric(a: &PointCloud, b: &PointCloud, pooling: Pooling) -> Result<f64> {
    Ok(p2point(a, b, pooling)?.max(p2point(b, a, pooling)?))
}

pub fn p2plane_symmetric(a: &PointCloud, b: &PointCloud, pooling: Pooling) -> Result<f64> {
    Ok(p2plane(a, b, pooling)?.max(p2plane(b, a, pooling)?))
}

fn capped_psnr(peak_sq: f64, error: f64) -> f64 {
    if error < peak_sq * 1e-10 {
        PSNR_CAP_DB
    } else {
        (10.0 * (peak_sq / error).log10()).min(PSNR_CAP_DB)
    }
}

/// `10 log10(peak^2 / error)` with the reference bounding-box diagonal as peak.
pub fn psnr_from_geometry(error: f64, reference: &PointCloud) -> Result<f64> {
    if error < 0.0 || error.is_nan() {
        return Err(MetricError::NegativeError(error));
    }
    let peak = reference.bounding_box().diagonal();
    if peak <= 0.0 {
        return Err(MetricError::ZeroExtent);
    }
    Ok(capped_psnr(peak * peak, error))
}

/// Per-channel pooled squared YCbCr errors of `degraded` against the colors
/// of the geometrically nearest reference points.
pub fn yuv_errors(reference: &PointCloud, degraded: &PointCloud, pooling: Pooling) -> Result<[f64; 3]> {
    check(reference, degraded)?;
    let tree = KdTree::new(reference.positions());
    let ref_yuv: Vec<[f64; 3]> = reference
        .colors()
        .iter()
        .map(|c| rgb_to_ycbcr(c.map(f64::from)))
        .collect();
    let diffs: Vec<[f64; 3]> = degraded
        .positions()
        .iter()
        .zip(degraded.colors())
        .map(|(&p, c)| {
            let (j, _) = tree.nearest(p);
            let d = rgb_to_ycbcr(c.map(f64::from));
            std::array::from_fn(|k| (d[k] - ref_yuv[j][k]).powi(2))
        })
        .collect();
    Ok(std::array::from_fn(|k| pool(diffs.iter().map(|d| d[k]), pooling)))
}

/// Per-channel PSNR (Y, Cb, Cr) from symmetric pooled errors.
pub fn psnr_yuv_channels(reference: &PointCloud, degraded: &PointCloud, pooling: Pooling) -> Result<[f64; 3]> {
    let fwd = yuv_errors(reference, degraded, pooling)?;
    let bwd = yuv_errors(degraded, reference, pooling)?;
    Ok(std::array::from_fn(|k| capped_psnr(255.0 * 255.0, fwd[k].max(bwd[k]))))
}

/// Luma-weighted color PSNR `(6 Y + Cb + Cr) / 8`.
pub fn psnr_yuv(reference: &PointCloud, degraded: &PointCloud, pooling: Pooling) -> Result<f64> {
    let [y, cb, cr] = psnr_yuv_channels(reference, degraded, pooling)?;
    Ok((6.0 * y + cb + cr) / 8.0)
}

/// Nearest-neighbor errors from one cloud into another, every pooling at once.
struct Directional {
    p2po: [f64; 2],
    p2pl: [f64; 2],
    yuv: [[f64; 3]; 2],
}

struct Indexed<'a> {
    cloud: &'a PointCloud,
    tree: KdTree,
    normals: Vec<Point3>,
    yuv: Vec<[f64; 3]>,
}

impl<'a> Indexed<'a> {
    fn new(cloud: &'a PointCloud) -> Self {
        Self {
            cloud,
            tree: KdTree::new(cloud.positions()),
            normals: normals_of(cloud),
            yuv: cloud
                .colors()
                .iter()
                .map(|c| rgb_to_ycbcr(c.map(f64::from)))
                .collect(),
        }
    }

    /// Errors of `query` points measured against `self`.
    fn errors_of(&self, query: &Indexed) -> Directional {
        let n = query.cloud.len() as f64;
        let mut out = Directional {
            p2po: [0.0; 2],
            p2pl: [0.0; 2],
            yuv: [[0.0; 3]; 2],
        };
        for (i, &p) in query.cloud.positions().iter().enumerate() {
            let (j, d2) = self.tree.nearest(p);
            let proj = dot3(sub3(p, self.cloud.positions()[j]), self.normals[j]);
            let pl = proj * proj;
            out.p2po[0] += d2 / n;
            out.p2po[1] = out.p2po[1].max(d2);
            out.p2pl[0] += pl / n;
            out.p2pl[1] = out.p2pl[1].max(pl);
            for k in 0..3 {
                let e = (query.yuv[i][k] - self.yuv[j][k]).powi(2);
                out.yuv[0][k] += e / n;
                out.yuv[1][k] = out.yuv[1][k].max(e);
            }
        }
        out
    }
}

/// All six native metrics for one pair, as PSNR values in `MetricId::NATIVE`
/// order. Equivalent to calling the individual functions, sharing the
/// neighbor searches.
pub fn native_scores(reference: &PointCloud, degraded: &PointCloud) -> Result<Vec<(MetricId, f64)>> {
    check(reference, degraded)?;
    let peak = reference.bounding_box().diagonal();
    if peak <= 0.0 {
        return Err(MetricError::ZeroExtent);
    }
    let r = Indexed::new(reference);
    let d = Indexed::new(degraded);
    let fwd = r.errors_of(&d);
    let bwd = d.errors_of(&r);
    let geo = |e: f64| capped_psnr(peak * peak, e);
    let color = |pool: usize| {
        let c: [f64; 3] =
            std::array::from_fn(|k| capped_psnr(255.0 * 255.0, fwd.yuv[pool][k].max(bwd.yuv[pool][k])));
        (6.0 * c[0] + c[1] + c[2]) / 8.0
    };
    Ok(vec![
        (MetricId::MP2po, geo(fwd.p2po[0].max(bwd.p2po[0]))),
        (MetricId::MP2pl, geo(fwd.p2pl[0].max(bwd.p2pl[0]))),
        (MetricId::HP2po, geo(fwd.p2po[1].max(bwd.p2po[1]))),
        (MetricId::HP2pl, geo(fwd.p2pl[1].max(bwd.p2pl[1]))),
        (MetricId::PsnrYuv, color(0)),
        (MetricId::HPsnrYuv, color(1)),
    ])
}

/// One native metric for one pair.
pub fn score(metric: &MetricId, reference: &PointCloud, degraded: &PointCloud) -> Result<f64> {
    let geo = |e: f64| psnr_from_geometry(e, reference);
    match metric {
        MetricId::MP2po => geo(p2point_symmetric(reference, degraded, Pooling::Mse)?),
        MetricId::HP2po => geo(p2point_symmetric(reference, degraded, Pooling::Hausdorff)?),
        MetricId::MP2pl => geo(p2plane_symmetric(reference, degraded, Pooling::Mse)?),
        MetricId::HP2pl => geo(p2plane_symmetric(reference, degraded, Pooling::Hausdorff)?),
        MetricId::PsnrYuv => psnr_yuv(reference, degraded, Pooling::Mse),
        MetricId::HPsnrYuv => psnr_yuv(reference, degraded, Pooling::Hausdorff),
        MetricId::External(name) => Err(MetricError::UnknownMetric(name.clone())),
    }
}

/// Squared distance from `p` to its nearest point in `cloud`, for callers
/// that want exhaustive checks without a tree.
pub fn brute_nearest(cloud: &[Point3], p: Point3) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &q) in cloud.iter().enumerate() {
        let d = dist2(p, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

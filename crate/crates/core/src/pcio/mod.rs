//! Point-cloud data model, PLY serialization, spatial indexing and normal
//! estimation.
//!
//! Every other module consumes [`PointCloud`]. Positions are kept as `f64`
//! even when a file stores `float`, colors as 8-bit RGB.

mod kdtree;
mod normals;
mod ply;

pub use kdtree::KdTree;
pub use normals::{estimate_normals, NormalEstimate, DEFAULT_NORMAL_NEIGHBORS};
pub use ply::{load_ply, read_ply, save_ply, write_ply, PlyMode};

use thiserror::Error;

pub type Point3 = [f64; 3];
pub type Rgb = [u8; 3];

#[derive(Debug, Error)]
pub enum PcioError {
    #[error("point cloud must contain at least one point")]
    Empty,
    #[error("positions ({positions}) and colors ({colors}) differ in length")]
    LengthMismatch { positions: usize, colors: usize },
    #[error("color component {value} of point {index} lies outside [0,255]")]
    ColorOutOfRange { index: usize, value: i64 },
    #[error("normal of point {index} is not unit length (norm {norm})")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("non-finite position at point {index}")]
    NonFinitePosition { index: usize },
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("missing attribute `{0}` in PLY vertex element")]
    MissingAttribute(&'static str),
    #[error("property `{name}` has unsupported type `{ty}`")]
    PropertyType { name: String, ty: String },
    #[error("truncated PLY body: expected {expected} vertices, read {read}")]
    Truncated { expected: usize, read: usize },
    #[error("malformed PLY body at vertex {vertex}: {reason}")]
    MalformedBody { vertex: usize, reason: String },
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PcioError>;

/// N points with XYZ positions, 8-bit RGB colors and optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point3>,
    colors: Vec<Rgb>,
    normals: Option<Vec<Point3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Point3>, colors: Vec<Rgb>) -> Result<Self> {
        if positions.len() != colors.len() {
            return Err(PcioError::LengthMismatch {
                positions: positions.len(),
                colors: colors.len(),
            });
        }
        if positions.is_empty() {
            return Err(PcioError::Empty);
        }
        if let Some(index) = positions
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(PcioError::NonFinitePosition { index });
        }
        Ok(Self {
            positions,
            colors,
            normals: None,
        })
    }

    /// Builds a cloud from wide integer colors, rejecting any component outside
    /// `[0,255]` instead of wrapping.
    pub fn from_raw_colors(positions: Vec<Point3>, colors: &[[i64; 3]]) -> Result<Self> {
        let mut rgb = Vec::with_capacity(colors.len());
        for (index, c) in colors.iter().enumerate() {
            for &value in c {
                if !(0..=255).contains(&value) {
                    return Err(PcioError::ColorOutOfRange { index, value });
                }
            }
            rgb.push([c[0] as u8, c[1] as u8, c[2] as u8]);
        }
        Self::new(positions, rgb)
    }

    pub fn with_normals(mut self, normals: Vec<Point3>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(PcioError::LengthMismatch {
                positions: self.positions.len(),
                colors: normals.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let norm = norm3(*n);
            if (norm - 1.0).abs() > 1e-6 {
                return Err(PcioError::NonUnitNormal { index, norm });
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn colors(&self) -> &[Rgb] {
        &self.colors
    }

    pub fn normals(&self) -> Option<&[Point3]> {
        self.normals.as_deref()
    }

    pub fn into_parts(self) -> (Vec<Point3>, Vec<Rgb>, Option<Vec<Point3>>) {
        (self.positions, self.colors, self.normals)
    }

    /// Keeps the rows at `indices`, in the given order. Normals follow.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let positions = indices.iter().map(|&i| self.positions[i]).collect();
        let colors = indices.iter().map(|&i| self.colors[i]).collect();
        let mut out = Self::new(positions, colors)?;
        if let Some(n) = &self.normals {
            out.normals = Some(indices.iter().map(|&i| n[i]).collect());
        }
        Ok(out)
    }

    /// Same geometry, new colors. Normals are kept.
    pub fn with_colors(&self, colors: Vec<Rgb>) -> Result<Self> {
        let mut out = Self::new(self.positions.clone(), colors)?;
        out.normals = self.normals.clone();
        Ok(out)
    }

    /// Same colors, new positions. Normals are dropped since they no longer
    /// describe the moved surface.
    pub fn with_positions(&self, positions: Vec<Point3>) -> Result<Self> {
        Self::new(positions, self.colors.clone())
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for a in 0..3 {
                c[a] += p[a];
            }
        }
        c.map(|v| v / n)
    }

    pub fn bounding_box(&self) -> BoundingBox {
        bounding_box(self)
    }
}

/// Axis-aligned bounding box. All geometry distortions and the geometry PSNR
/// peak are scaled by its derived lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_corner: Point3,
    pub max_corner: Point3,
}

impl BoundingBox {
    pub fn sides(&self) -> Point3 {
        [
            self.max_corner[0] - self.min_corner[0],
            self.max_corner[1] - self.min_corner[1],
            self.max_corner[2] - self.min_corner[2],
        ]
    }

    pub fn max_side(&self) -> f64 {
        let s = self.sides();
        s[0].max(s[1]).max(s[2])
    }

    pub fn diagonal(&self) -> f64 {
        norm3(self.sides())
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min_corner[a] && p[a] <= self.max_corner[a])
    }
}

pub fn bounding_box(cloud: &PointCloud) -> BoundingBox {
    let mut min_corner = [f64::INFINITY; 3];
    let mut max_corner = [f64::NEG_INFINITY; 3];
    for p in cloud.positions() {
        for a in 0..3 {
            min_corner[a] = min_corner[a].min(p[a]);
            max_corner[a] = max_corner[a].max(p[a]);
        }
    }
    BoundingBox {
        min_corner,
        max_corner,
    }
}

#[inline]
pub fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm3(a: Point3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn dist2(a: Point3, b: Point3) -> f64 {
    let d = sub3(a, b);
    dot3(d, d)
}
